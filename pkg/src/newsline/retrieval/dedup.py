"""Exact-id and near-duplicate filtering of retrieved articles.

Near duplicates are detected with word 8-gram shingles hashed to 64 bits: an
incoming article is dropped when at least ``threshold`` of its shingles
already occur in a single kept article.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from typing import Iterable, Sequence

from newsline.core import Article

SHINGLE_SIZE = 8
NEAR_DUP_THRESHOLD = 0.9


def fingerprint(body: str, n: int = SHINGLE_SIZE) -> frozenset[int]:
    words = body.lower().split()
    if not words:
        return frozenset()
    if len(words) < n:
        grams = [words]
    else:
        grams = [words[i : i + n] for i in range(len(words) - n + 1)]
    return frozenset(
        int.from_bytes(hashlib.blake2b("\x1f".join(g).encode(), digest_size=8).digest(), "big")
        for g in grams
    )


def containment(a: frozenset[int], b: frozenset[int]) -> float:
    """Fraction of ``a``'s shingles present in ``b``."""
    if not a:
        return 0.0
    return len(a & b) / len(a)


class Deduplicator:
    """Stateful filter; remembers every article it has accepted."""

    def __init__(self, pool: Iterable[Article] = (), threshold: float = NEAR_DUP_THRESHOLD):
        self.threshold = threshold
        self.ids: set[str] = set()
        self._prints: list[frozenset[int]] = []
        self._owners: dict[int, list[int]] = {}
        for art in pool:
            self._remember(art)

    def _remember(self, art: Article) -> None:
        self.ids.add(art.id)
        fp = fingerprint(art.body)
        slot = len(self._prints)
        self._prints.append(fp)
        for h in fp:
            self._owners.setdefault(h, []).append(slot)

    def is_duplicate(self, art: Article) -> bool:
        if art.id in self.ids:
            return True
        fp = fingerprint(art.body)
        if not fp:
            return False
        shared: Counter[int] = Counter()
        for h in fp:
            shared.update(self._owners.get(h, ()))
        need = self.threshold * len(fp)
        return any(count >= need for count in shared.values())

    def filter(self, incoming: Sequence[Article], limit: int | None = None) -> list[Article]:
        """Accept non-duplicates in order, stopping once ``limit`` are kept."""
        kept: list[Article] = []
        for art in incoming:
            if limit is not None and len(kept) >= limit:
                break
            if self.is_duplicate(art):
                continue
            self._remember(art)
            kept.append(art)
        return kept


def dedup_articles(
    pool: Sequence[Article], incoming: Sequence[Article], threshold: float = NEAR_DUP_THRESHOLD
) -> list[Article]:
    """Incoming articles that are neither id- nor near-duplicates of the pool or of each other."""
    return Deduplicator(pool, threshold).filter(incoming)
