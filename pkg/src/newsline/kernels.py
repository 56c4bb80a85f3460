"""Kernel selection: compiled extension when built, Python otherwise.

Set ``NEWSLINE_PURE_PYTHON=1`` to force the Python implementations.
"""

from __future__ import annotations

import os

BACKEND: str

if os.environ.get("NEWSLINE_PURE_PYTHON", "") not in ("", "0"):
    from newsline._kernels_py import bm25_accumulate, overlap_matrix, sorted_overlap

    BACKEND = "python"
else:
    try:
        from newsline._kernels import bm25_accumulate, overlap_matrix, sorted_overlap

        BACKEND = "cython"
    except ImportError:
        from newsline._kernels_py import bm25_accumulate, overlap_matrix, sorted_overlap

        BACKEND = "python"

__all__ = ["BACKEND", "bm25_accumulate", "overlap_matrix", "sorted_overlap"]
