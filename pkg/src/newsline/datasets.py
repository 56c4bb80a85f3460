"""Loaders for timeline datasets.

``open_tls``: topic records (query, cutoff/publication date, reference
timeline) in a ``.json`` file (one object, a list, or ``{"topics": [...]}``),
a ``.jsonl`` file, or a directory of such files.

``t17_crisis``: a directory holding either a topics file whose records carry
a ``corpus`` path to a JSON Lines corpus, or per-topic subdirectories in the
common ``timelines.jsonl`` + ``articles.jsonl`` layout. Each timeline becomes
its own Topic sharing the directory's corpus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from newsline.core import DatedEvent, EventDate, Timeline, Topic, parse_date, timeline_stats
from newsline.errors import DateError, SchemaError

KINDS = ("open_tls", "t17_crisis")

_QUERY_KEYS = ("query", "keyphrase", "keyword", "topic", "title")
_CUTOFF_KEYS = ("cutoff", "publish_date", "pub_date", "published", "date")
_TIMELINE_KEYS = ("timeline", "reference", "events")


@dataclass
class Dataset:
    kind: str
    topics: list[Topic]
    # topic query -> corpus JSON Lines path (closed-domain only)
    corpora: dict[str, Path] = field(default_factory=dict)

    def stats(self) -> dict[str, float]:
        return dataset_stats(self.topics)


def dataset_stats(topics: list[Topic]) -> dict[str, float]:
    refs = [t.reference for t in topics if t.reference is not None]
    pairs = [timeline_stats(r) for r in refs]
    return {
        "timelines": len(refs),
        "mean_l": float(np.mean([p[0] for p in pairs])) if pairs else 0.0,
        "mean_k": float(np.mean([p[1] for p in pairs])) if pairs else 0.0,
    }


def _pick(rec: dict[str, Any], keys: tuple[str, ...]) -> Any:
    for k in keys:
        if k in rec and rec[k] not in (None, ""):
            return rec[k]
    return None


def _date(value: Any) -> EventDate:
    text = str(value).strip()
    # tolerate timestamps such as 2011-01-25T00:00:00
    if len(text) > 10 and text[10] in "T ":
        text = text[:10]
    return parse_date(text)


def _events(raw: Any) -> list[DatedEvent]:
    if not isinstance(raw, list):
        raise ValueError("timeline must be a list")
    events = []
    for item in raw:
        if isinstance(item, dict):
            start = item.get("start", item.get("date"))
            summary = item.get("summary", item.get("text", item.get("event")))
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            start, summary = item
        else:
            raise ValueError(f"unrecognized timeline entry {item!r}")
        if isinstance(summary, list):
            summary = " ".join(str(s).strip() for s in summary)
        if start is None or not isinstance(summary, str):
            raise ValueError(f"timeline entry lacks date or summary: {item!r}")
        events.append(DatedEvent(_date(start), summary))
    return events


def topic_from_record(rec: Any, path: str | None = None, line: int | None = None) -> Topic:
    if not isinstance(rec, dict):
        raise SchemaError("topic record must be an object", path, line)
    query = _pick(rec, _QUERY_KEYS)
    if not isinstance(query, str) or not query.strip():
        raise SchemaError("topic record lacks a query", path, line)
    raw_tl = _pick(rec, _TIMELINE_KEYS)
    cutoff_raw = _pick(rec, _CUTOFF_KEYS)
    try:
        reference = Timeline(tuple(_events(raw_tl))) if raw_tl is not None else None
        if cutoff_raw is None:
            if reference is None or not reference:
                raise ValueError("topic record lacks a cutoff date")
            cutoff = reference.dates[-1]
        else:
            cutoff = _date(cutoff_raw)
        return Topic(query.strip(), cutoff, reference)
    except (DateError, ValueError) as exc:
        raise SchemaError(f"topic {query!r}: {exc}", path, line) from None


def _records_with_lines(path: Path) -> Iterator[tuple[int, Any]]:
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        for n, line in enumerate(text.splitlines(), 1):
            if line.strip():
                try:
                    yield n, json.loads(line)
                except ValueError as exc:
                    raise SchemaError(f"invalid JSON: {exc}", str(path), n) from None
        return
    stripped = text.lstrip()
    if stripped.startswith("["):
        # walk array elements so each record keeps its source line
        dec = json.JSONDecoder()
        pos = text.index("[") + 1
        while True:
            while pos < len(text) and text[pos] in " \t\r\n,":
                pos += 1
            if pos >= len(text):
                raise SchemaError("unterminated array", str(path), text.count("\n", 0, pos) + 1)
            if text[pos] == "]":
                return
            line = text.count("\n", 0, pos) + 1
            try:
                rec, pos = dec.raw_decode(text, pos)
            except ValueError as exc:
                raise SchemaError(f"invalid JSON: {exc}", str(path), line) from None
            yield line, rec
    try:
        data = json.loads(text)
    except ValueError as exc:
        raise SchemaError(f"invalid JSON: {exc}", str(path), getattr(exc, "lineno", None)) from None
    if isinstance(data, dict) and isinstance(data.get("topics"), list):
        for rec in data["topics"]:
            yield None, rec  # type: ignore[misc]
    else:
        yield 1, data


def _topic_files(path: Path) -> list[Path]:
    if path.is_file():
        return [path]
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix in (".json", ".jsonl") and p.is_file())
    raise FileNotFoundError(path)


def _load_open_tls(path: Path) -> Dataset:
    topics = []
    for f in _topic_files(path):
        for line, rec in _records_with_lines(f):
            topics.append(topic_from_record(rec, str(f), line))
    return Dataset("open_tls", topics)


def iter_corpus(path: str | Path) -> Iterator[dict[str, Any]]:
    """Corpus records normalized to ``{"id", "title", "text", "published"}``."""
    p = Path(path)
    with p.open(encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError as exc:
                raise SchemaError(f"invalid JSON: {exc}", str(p), n) from None
            pub = rec.get("published", rec.get("time", rec.get("date")))
            try:
                published = str(_date(pub)) if pub else None
            except DateError:
                published = None
            text = rec.get("text")
            if text is None and isinstance(rec.get("sentences"), list):
                text = " ".join(str(s.get("raw", s)) if isinstance(s, dict) else str(s) for s in rec["sentences"])
            if "id" not in rec:
                raise SchemaError("corpus record lacks id", str(p), n)
            yield {"id": str(rec["id"]), "title": rec.get("title") or "", "text": text or "", "published": published}


def _load_closed(path: Path) -> Dataset:
    if not path.is_dir():
        raise FileNotFoundError(f"{path} is not a directory")
    ds = Dataset("t17_crisis", [])
    topic_files = [p for p in (path / "topics.json", path / "topics.jsonl") if p.exists()]
    if topic_files:
        for f in topic_files:
            for line, rec in _records_with_lines(f):
                topic = topic_from_record(rec, str(f), line)
                corpus = rec.get("corpus") if isinstance(rec, dict) else None
                if not corpus:
                    raise SchemaError(f"topic {topic.query!r} lacks a corpus path", str(f), line)
                cpath = (f.parent / corpus).resolve()
                if not cpath.exists():
                    raise SchemaError(f"corpus file {cpath} not found", str(f), line)
                ds.topics.append(topic)
                ds.corpora[topic.query] = cpath
        return ds
    for sub in sorted(p for p in path.iterdir() if p.is_dir()):
        tl_file = sub / "timelines.jsonl"
        if not tl_file.exists():
            continue
        articles = next(
            (sub / n for n in ("articles.jsonl", "articles.preprocessed.jsonl") if (sub / n).exists()), None
        )
        if articles is None:
            raise SchemaError("no articles.jsonl next to timelines.jsonl", str(sub))
        base = sub.name.replace("_", " ")
        kw_file = sub / "keywords.json"
        if kw_file.exists():
            kws = json.loads(kw_file.read_text(encoding="utf-8"))
            if isinstance(kws, list) and kws:
                base = " ".join(str(k) for k in kws)
        count = 0
        for n, line in enumerate(tl_file.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            count += 1
            try:
                raw = json.loads(line)
                ref = Timeline(tuple(_events(raw)))
            except (ValueError, DateError) as exc:
                raise SchemaError(str(exc), str(tl_file), n) from None
            # several timelines share a topic; keep queries unique
            query = base if count == 1 else f"{base} ({count})"
            ds.topics.append(Topic(query, ref.dates[-1], ref, extra={"query_text": base}))
            ds.corpora[query] = articles
    return ds


def load_dataset(path: str | Path, kind: str = "open_tls") -> Dataset:
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(p)
    return _load_open_tls(p) if kind == "open_tls" else _load_closed(p)
