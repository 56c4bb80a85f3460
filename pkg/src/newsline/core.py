"""Domain types: dates, events, timelines, articles and topics."""

from __future__ import annotations

import datetime as _dt
import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from newsline.errors import InvalidDate, MalformedDate

_DATE_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
# A sentence ends at ., ! or ? followed by whitespace or end of text.
_SENTENCE_END = re.compile(r"[.!?](?=\s|$)")


@dataclass(frozen=True, order=True)
class EventDate:
    year: int
    month: int
    day: int

    def __post_init__(self) -> None:
        try:
            _dt.date(self.year, self.month, self.day)
        except (ValueError, TypeError) as exc:
            raise InvalidDate(f"{self.year}-{self.month}-{self.day}: {exc}") from None

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}-{self.day:02d}"

    def to_date(self) -> _dt.date:
        return _dt.date(self.year, self.month, self.day)

    @classmethod
    def from_date(cls, d: _dt.date) -> EventDate:
        return cls(d.year, d.month, d.day)

    def ordinal(self) -> int:
        return self.to_date().toordinal()

    def days_between(self, other: EventDate) -> int:
        return abs(self.ordinal() - other.ordinal())


def parse_date(text: str) -> EventDate:
    """Parse a canonical ``YYYY-MM-DD`` string.

    Raises :class:`MalformedDate` for anything not zero-padded to that exact
    shape, and :class:`InvalidDate` for impossible days such as 2023-02-30.
    """
    if not isinstance(text, str):
        raise MalformedDate(f"expected text, got {type(text).__name__}")
    m = _DATE_RE.match(text)
    if m is None:
        raise MalformedDate(f"not a YYYY-MM-DD date: {text!r}")
    return EventDate(int(m.group(1)), int(m.group(2)), int(m.group(3)))


def format_date(d: EventDate) -> str:
    return str(d)


@dataclass(frozen=True)
class DatedEvent:
    date: EventDate
    summary: str

    def __post_init__(self) -> None:
        if not isinstance(self.summary, str):
            raise TypeError("summary must be text")
        stripped = self.summary.strip()
        if not stripped:
            raise ValueError("event summary must be nonempty")
        if stripped != self.summary:
            object.__setattr__(self, "summary", stripped)

    def to_json(self) -> dict[str, str]:
        return {"start": str(self.date), "summary": self.summary}


@dataclass(frozen=True)
class Timeline:
    """Date-sorted events, exact duplicates removed.

    Construction always normalizes, so any ``Timeline`` instance satisfies the
    ordering and uniqueness invariants.
    """

    events: tuple[DatedEvent, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", _normalized(self.events))

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __bool__(self) -> bool:
        return bool(self.events)

    @property
    def dates(self) -> list[EventDate]:
        out: list[EventDate] = []
        for ev in self.events:
            if not out or out[-1] != ev.date:
                out.append(ev.date)
        return out

    @property
    def l(self) -> int:  # noqa: E743 - established symbol for date count
        return len(self.dates)

    @property
    def k(self) -> float:
        return timeline_stats(self)[1]

    def by_date(self) -> dict[EventDate, str]:
        """One summary per date; same-date events joined with a space."""
        grouped: dict[EventDate, list[str]] = {}
        for ev in self.events:
            grouped.setdefault(ev.date, []).append(ev.summary)
        return {d: " ".join(parts) for d, parts in grouped.items()}

    def to_json(self) -> list[dict[str, str]]:
        return [ev.to_json() for ev in self.events]

    def dumps(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, indent=indent)

    @classmethod
    def from_json(cls, data: Any) -> Timeline:
        if not isinstance(data, list):
            raise ValueError("timeline JSON must be an array")
        events = []
        for i, item in enumerate(data):
            if not isinstance(item, dict) or "start" not in item or "summary" not in item:
                raise ValueError(f"timeline entry {i} lacks start/summary")
            events.append(DatedEvent(parse_date(item["start"]), item["summary"]))
        return cls(tuple(events))


def _normalized(events: Iterable[DatedEvent]) -> tuple[DatedEvent, ...]:
    seen: set[tuple[EventDate, str]] = set()
    unique = []
    for ev in events:
        key = (ev.date, ev.summary)
        if key in seen:
            continue
        seen.add(key)
        unique.append(ev)
    # sorted() is stable, so same-date events keep input order
    return tuple(sorted(unique, key=lambda ev: ev.date))


def normalize_timeline(events: Sequence[DatedEvent] | Timeline) -> Timeline:
    return Timeline(tuple(events))


def count_sentences(text: str) -> int:
    text = text.strip()
    if not text:
        return 0
    pieces = [p for p in _SENTENCE_END.split(text) if p.strip()]
    return len(pieces)


def timeline_stats(t: Timeline) -> tuple[int, float]:
    """Return ``(l, k)``: distinct date count and mean sentences per date."""
    l = len({ev.date for ev in t.events})
    if l == 0:
        return 0, 0.0
    total = sum(count_sentences(ev.summary) for ev in t.events)
    return l, total / l


@dataclass(frozen=True)
class Article:
    id: str
    title: str
    body: str
    published: EventDate | None = None
    source_query: str = ""
    round: int = 0
    url: str | None = None
    score: float | None = None
    # True when the provider gave a date string we could not parse.
    date_unparsed: bool = False

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "body": self.body,
            "published": str(self.published) if self.published else None,
            "source_query": self.source_query,
            "round": self.round,
            "url": self.url,
            "score": self.score,
            "date_unparsed": self.date_unparsed,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> Article:
        pub = d.get("published")
        return cls(
            id=d["id"],
            title=d.get("title", ""),
            body=d.get("body", ""),
            published=parse_date(pub) if pub else None,
            source_query=d.get("source_query", ""),
            round=int(d.get("round", 0)),
            url=d.get("url"),
            score=d.get("score"),
            date_unparsed=bool(d.get("date_unparsed", False)),
        )


@dataclass(frozen=True)
class Topic:
    query: str
    cutoff: EventDate
    reference: Timeline | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.query or not self.query.strip():
            raise ValueError("topic query must be nonempty")
        if self.reference is not None:
            late = [d for d in self.reference.dates if d > self.cutoff]
            if late:
                raise ValueError(
                    f"reference events after cutoff {self.cutoff}: {', '.join(map(str, late[:3]))}"
                )

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"query": self.query, "cutoff": str(self.cutoff)}
        if self.reference is not None:
            out["timeline"] = self.reference.to_json()
        return out
