"""Compare the compiled kernels with their pure-Python fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Also times a whole metric evaluation and a BM25 query under each backend,
each in a fresh interpreter so ``NEWSLINE_PURE_PYTHON`` takes effect.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from newsline import _kernels_py as pure

try:
    from newsline import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def kernel_cases(rng: np.random.Generator):
    def sorted_ids(n):
        return np.sort(rng.integers(0, 2000, size=n)).astype(np.int64)

    a, b = sorted_ids(5000), sorted_ids(5000)
    left = [sorted_ids(int(rng.integers(20, 80))) for _ in range(30)]
    right = [sorted_ids(int(rng.integers(20, 80))) for _ in range(30)]
    n_docs = 20000
    doc_len = rng.integers(50, 600, size=n_docs).astype(np.float64)
    docs = np.sort(rng.choice(n_docs, size=4000, replace=False)).astype(np.int32)
    tfs = rng.integers(1, 8, size=docs.size).astype(np.int32)
    avgdl = float(doc_len.mean())

    def bm25(mod):
        scores = np.zeros(n_docs)
        mod.bm25_accumulate(scores, docs, tfs, doc_len, 1.3, 1.2, 0.75, avgdl)

    return {
        "sorted_overlap (5k x 5k)": lambda mod: mod.sorted_overlap(a, b),
        "overlap_matrix (30 x 30)": lambda mod: mod.overlap_matrix(left, right),
        "bm25_accumulate (4k postings)": bm25,
    }


END_TO_END = r"""
import random, timeit
from newsline import kernels
from newsline.core import Timeline
from newsline.metrics import evaluate
from newsline.retrieval import CorpusIndex, SearchRequest, bm25_search
rng = random.Random(0)
words = [f"w{i}" for i in range(400)]
def timeline(n):
    return Timeline.from_json([{"start": f"2023-{1 + i // 28:02d}-{1 + i % 28:02d}",
                                "summary": " ".join(rng.choice(words) for _ in range(30))} for i in range(n)])
pred, ref = timeline(40), timeline(40)
docs = [{"id": str(i), "text": " ".join(rng.choice(words) for _ in range(300))} for i in range(2000)]
index = CorpusIndex.from_documents(docs)
req = SearchRequest("w1 w2 w3 w4 w5", top_k=10)
m = min(timeit.repeat(lambda: evaluate(pred, ref), number=5, repeat=REPEAT)) / 5
q = min(timeit.repeat(lambda: bm25_search(index, req), number=20, repeat=REPEAT)) / 20
print(kernels.BACKEND, m, q)
"""


def end_to_end(repeat: int) -> list[tuple[str, float, float]]:
    rows = []
    for flag in ("0", "1"):
        env = dict(os.environ, NEWSLINE_PURE_PYTHON=flag)
        out = subprocess.run(
            [sys.executable, "-c", END_TO_END.replace("REPEAT", str(repeat))],
            env=env, capture_output=True, text=True, check=True,
        ).stdout.split()
        rows.append((out[0], float(out[1]), float(out[2])))
    return rows


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return
    cases = kernel_cases(np.random.default_rng(0))
    print(f"{'kernel':<32}{'cython ms':>12}{'python ms':>12}{'speedup':>10}")
    for name, fn in cases.items():
        times = {}
        for label, mod in (("cython", compiled), ("python", pure)):
            number = 3 if label == "python" else 50
            times[label] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number * 1e3
        print(f"{name:<32}{times['cython']:>12.3f}{times['python']:>12.3f}{times['python'] / times['cython']:>9.1f}x")
    print()
    print(f"{'backend':<10}{'evaluate ms':>14}{'bm25 query ms':>16}")
    for backend, m, q in end_to_end(args.repeat):
        print(f"{backend:<10}{m * 1e3:>14.2f}{q * 1e3:>16.2f}")


if __name__ == "__main__":
    main()
