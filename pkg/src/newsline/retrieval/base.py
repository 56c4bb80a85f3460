"""Search request type, provider protocol and provider-agnostic helpers."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

from newsline.core import Article, EventDate, parse_date
from newsline.errors import EmptyQuery

logger = logging.getLogger(__name__)

MAX_TOP_K = 50


@dataclass(frozen=True)
class SearchRequest:
    query: str
    cutoff: EventDate | None = None
    top_k: int = 10
    offset: int = 0
    max_top_k: int = MAX_TOP_K

    def __post_init__(self) -> None:
        if not isinstance(self.query, str) or not self.query.strip():
            raise EmptyQuery("search query must be nonempty")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.top_k > self.max_top_k:
            raise ValueError(f"top_k {self.top_k} exceeds configured maximum {self.max_top_k}")
        if self.offset < 0:
            raise ValueError("offset must be >= 0")

    def cache_key(self) -> str:
        payload = json.dumps(
            [self.query, str(self.cutoff) if self.cutoff else None, self.top_k, self.offset],
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode()).hexdigest()


class SearchProvider(Protocol):
    def search(self, req: SearchRequest) -> list[Article]: ...


def search_many(
    provider: SearchProvider, requests: Sequence[SearchRequest], parallelism: int = 4
) -> list[list[Article]]:
    """Run requests concurrently; results come back in request order."""
    if parallelism <= 1 or len(requests) <= 1:
        return [provider.search(r) for r in requests]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(provider.search, requests))


def interleave(result_lists: Sequence[Sequence[Article]]) -> list[Article]:
    """Round-robin merge ordered by (rank, list position)."""
    out: list[Article] = []
    depth = max((len(r) for r in result_lists), default=0)
    for rank in range(depth):
        for results in result_lists:
            if rank < len(results):
                out.append(results[rank])
    return out


def search_paged(
    provider: SearchProvider,
    query: str,
    cutoff: EventDate | None,
    wanted: int,
    max_top_k: int = MAX_TOP_K,
) -> list[Article]:
    """Collect up to ``wanted`` hits for one query, paging by ``max_top_k``."""
    hits: list[Article] = []
    offset = 0
    while len(hits) < wanted:
        size = min(max_top_k, wanted - len(hits))
        page = provider.search(SearchRequest(query, cutoff, size, offset, max_top_k))
        hits.extend(page)
        if len(page) < size:
            break
        offset += size
    return hits


class FixtureSearchProvider:
    """Deterministic provider backed by a ``query -> hits`` mapping.

    Hits are dicts with ``url``, ``title``, ``body`` and optional ``published``.
    Queries missing from the mapping fall back to ``default`` hits (if given).
    Cutoff filtering, dedup by URL and ``top_k``/``offset`` slicing follow the
    web provider's contract.
    """

    def __init__(self, results: Mapping[str, Sequence[Mapping[str, Any]]], default: Sequence[Mapping[str, Any]] = ()):
        self.results = {k: list(v) for k, v in results.items()}
        self.default = list(default)
        self.calls: list[SearchRequest] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> FixtureSearchProvider:
        """Load ``{"results": {query: [hit, ...]}, "default": [...]}``.

        With a ``documents`` table (``url -> hit``), hits may be given as URLs.
        """
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        docs = data.get("documents", {})

        def resolve(hits: Sequence[Any]) -> list[Mapping[str, Any]]:
            return [docs[h] if isinstance(h, str) else h for h in hits]

        results = {q: resolve(h) for q, h in data.get("results", {}).items()}
        return cls(results, resolve(data.get("default", ())))

    def search(self, req: SearchRequest) -> list[Article]:
        with self._lock:
            self.calls.append(req)
        from newsline.retrieval.web import hits_to_articles

        raw = self.results.get(req.query, self.default)
        articles = hits_to_articles(raw, req.query, req.cutoff)
        return articles[req.offset : req.offset + req.top_k]


class CachedSearchProvider:
    """Wraps a provider with an append-only JSON Lines cache keyed by request hash."""

    def __init__(self, inner: SearchProvider, path: str | Path | None = None, replay_only: bool = False):
        self.inner = inner
        self.path = Path(path) if path else None
        self.replay_only = replay_only
        self._mem: dict[str, list[Article]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if self.path and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = json.loads(line)
                    self._mem[rec["key"]] = [Article.from_json(a) for a in rec["articles"]]

    def search(self, req: SearchRequest) -> list[Article]:
        key = req.cache_key()
        with self._lock:
            if key in self._mem:
                self.hits += 1
                return list(self._mem[key])
        if self.replay_only:
            from newsline.errors import ProviderError

            raise ProviderError(f"no cached result for query {req.query!r} (replay-only)")
        articles = self.inner.search(req)
        with self._lock:
            self.misses += 1
            self._mem[key] = list(articles)
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                rec = {"key": key, "query": req.query, "articles": [a.to_json() for a in articles]}
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        return articles


def tag_round(articles: Iterable[Article], round_index: int) -> list[Article]:
    return [replace(a, round=round_index) for a in articles]


def coerce_date(value: Any) -> tuple[EventDate | None, bool]:
    """Best-effort publication date from a provider field.

    Returns ``(date, unparsed)``; ``unparsed`` is True when a value was present
    but no calendar date could be read from it.
    """
    if value is None or value == "":
        return None, False
    text = str(value).strip()
    try:
        return parse_date(text[:10]), False
    except ValueError:
        return None, True
