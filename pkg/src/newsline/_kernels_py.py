"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``."""

from __future__ import annotations

from collections import Counter

import numpy as np


def sorted_overlap(a, b) -> int:
    """Size of the multiset intersection of two ascending-sorted arrays."""
    if len(a) == 0 or len(b) == 0:
        return 0
    common = Counter(a.tolist()) & Counter(b.tolist())
    return sum(common.values())


def overlap_matrix(left: list, right: list) -> np.ndarray:
    out = np.zeros((len(left), len(right)), dtype=np.int64)
    right_counts = [Counter(r.tolist()) for r in right]
    for p, a in enumerate(left):
        ca = Counter(a.tolist())
        for r, cb in enumerate(right_counts):
            out[p, r] = sum((ca & cb).values())
    return out


def bm25_accumulate(scores, docs, tfs, doc_len, idf, k1, b, avgdl) -> None:
    """Add one query term's BM25 contribution to ``scores`` in place."""
    tf = tfs.astype(np.float64)
    norm = k1 * (1.0 - b + b * doc_len[docs] / avgdl)
    # docs are unique within one posting list, so fancy-index += is safe
    scores[docs] += idf * tf * (k1 + 1.0) / (tf + norm)
