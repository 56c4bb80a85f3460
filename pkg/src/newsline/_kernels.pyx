# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t

cnp.import_array()


cpdef Py_ssize_t sorted_overlap(const int64_t[::1] a, const int64_t[::1] b):
    """Size of the multiset intersection of two ascending-sorted arrays."""
    cdef Py_ssize_t i = 0, j = 0, n = 0
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    while i < na and j < nb:
        if a[i] == b[j]:
            n += 1
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return n


def overlap_matrix(list left, list right):
    """Pairwise ``sorted_overlap`` counts as an int64 matrix."""
    cdef Py_ssize_t p, r
    cdef Py_ssize_t np_ = len(left), nr = len(right)
    out = np.zeros((np_, nr), dtype=np.int64)
    cdef int64_t[:, ::1] view = out
    cdef const int64_t[::1] a
    for p in range(np_):
        a = left[p]
        for r in range(nr):
            view[p, r] = sorted_overlap(a, right[r])
    return out


def bm25_accumulate(
    double[::1] scores,
    const int32_t[::1] docs,
    const int32_t[::1] tfs,
    const double[::1] doc_len,
    double idf,
    double k1,
    double b,
    double avgdl,
):
    """Add one query term's BM25 contribution to ``scores`` in place."""
    cdef Py_ssize_t i, d
    cdef double tf, norm
    for i in range(docs.shape[0]):
        d = docs[i]
        tf = tfs[i]
        norm = k1 * (1.0 - b + b * doc_len[d] / avgdl)
        scores[d] += idf * tf * (k1 + 1.0) / (tf + norm)
