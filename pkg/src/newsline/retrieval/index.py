"""Closed-domain retrieval: word chunking and an embedded BM25 index."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import replace
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from newsline.core import Article, EventDate, parse_date
from newsline.errors import EmptyDocument, EmptyQuery
from newsline.kernels import bm25_accumulate
from newsline.metrics import TokenizerConfig
from newsline.retrieval.base import SearchRequest

INDEX_FORMAT = "newsline-bm25-index"
INDEX_VERSION = 1
DEFAULT_CHUNK_SIZE = 500

_TOKENIZER = TokenizerConfig()


def chunk_document(
    doc_id: str,
    text: str,
    published: EventDate | None = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    title: str = "",
) -> list[Article]:
    """Split on whitespace into ``chunk_size``-word pieces; ids are ``doc_id#i``."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    words = text.split()
    if not words:
        raise EmptyDocument(f"document {doc_id!r} has no words")
    return [
        Article(
            id=f"{doc_id}#{i}",
            title=title,
            body=" ".join(words[start : start + chunk_size]),
            published=published,
        )
        for i, start in enumerate(range(0, len(words), chunk_size))
    ]


def _split_id(chunk_id: str) -> tuple[str, int]:
    doc, _, idx = chunk_id.rpartition("#")
    return doc, int(idx)


class CorpusIndex:
    """Immutable BM25 index over chunks.

    Postings are stored CSR-style: ``indptr[t]:indptr[t+1]`` slices
    ``post_docs``/``post_tf`` for term id ``t``. Scoring uses
    ``idf = ln(1 + (N - df + 0.5) / (df + 0.5))`` and the classic
    ``tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))`` saturation.
    """

    def __init__(self, chunks: list[Article], k1: float = 1.2, b: float = 0.75, chunk_size: int = DEFAULT_CHUNK_SIZE):
        self.chunks = list(chunks)
        self.k1 = k1
        self.b = b
        self.chunk_size = chunk_size
        ids = [c.id for c in self.chunks]
        if len(set(ids)) != len(ids):
            raise ValueError("chunk ids must be unique")
        self._build()

    def _build(self) -> None:
        vocab: dict[str, int] = {}
        postings: list[list[tuple[int, int]]] = []
        lengths = np.zeros(len(self.chunks), dtype=np.float64)
        for ci, chunk in enumerate(self.chunks):
            toks = _TOKENIZER.tokenize(chunk.body)
            lengths[ci] = len(toks)
            for term, tf in Counter(toks).items():
                tid = vocab.setdefault(term, len(vocab))
                if tid == len(postings):
                    postings.append([])
                postings[tid].append((ci, tf))
        self.vocab = vocab
        self.doc_len = lengths
        self.avgdl = float(lengths.mean()) if len(lengths) and lengths.mean() > 0 else 1.0
        counts = np.array([len(p) for p in postings], dtype=np.int64)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        flat = [pair for plist in postings for pair in plist]
        self.post_docs = np.array([d for d, _ in flat], dtype=np.int32)
        self.post_tf = np.array([t for _, t in flat], dtype=np.int32)
        self.published_ord = np.array(
            [c.published.ordinal() if c.published else -1 for c in self.chunks], dtype=np.int64
        )
        keys = [_split_id(c.id) for c in self.chunks]
        order = sorted(range(len(keys)), key=keys.__getitem__)
        self.key_rank = np.empty(len(keys), dtype=np.int64)
        self.key_rank[order] = np.arange(len(keys))

    def __len__(self) -> int:
        return len(self.chunks)

    @property
    def n_chunks(self) -> int:
        return len(self.chunks)

    def df(self, term: str) -> int:
        tid = self.vocab.get(term)
        if tid is None:
            return 0
        return int(self.indptr[tid + 1] - self.indptr[tid])

    def idf(self, term: str) -> float:
        n = self.df(term)
        return math.log(1.0 + (self.n_chunks - n + 0.5) / (n + 0.5))

    @classmethod
    def from_documents(
        cls,
        documents: Iterable[Mapping[str, Any]],
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        k1: float = 1.2,
        b: float = 0.75,
    ) -> CorpusIndex:
        """Build from ``{"id", "title", "text", "published"}`` records; empty documents are skipped."""
        chunks: list[Article] = []
        for doc in documents:
            pub = doc.get("published")
            try:
                chunks.extend(
                    chunk_document(
                        str(doc["id"]),
                        doc.get("text", ""),
                        parse_date(pub) if pub else None,
                        chunk_size,
                        doc.get("title", ""),
                    )
                )
            except EmptyDocument:
                continue
        return cls(chunks, k1=k1, b=b, chunk_size=chunk_size)

    @classmethod
    def from_jsonl(cls, path: str | Path, chunk_size: int = DEFAULT_CHUNK_SIZE, **kw: Any) -> CorpusIndex:
        def records():
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        yield json.loads(line)

        return cls.from_documents(records(), chunk_size=chunk_size, **kw)

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        header = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "k1": self.k1,
            "b": self.b,
            "chunk_size": self.chunk_size,
            "n_chunks": self.n_chunks,
            "n_terms": len(self.vocab),
            "avgdl": self.avgdl,
        }
        (d / "header.json").write_text(json.dumps(header, indent=2), encoding="utf-8")
        with (d / "chunks.jsonl").open("w", encoding="utf-8") as fh:
            for c in self.chunks:
                fh.write(json.dumps(c.to_json(), ensure_ascii=False) + "\n")
        terms = sorted(self.vocab, key=self.vocab.__getitem__)
        (d / "vocab.json").write_text(json.dumps(terms, ensure_ascii=False), encoding="utf-8")
        np.savez(d / "postings.npz", indptr=self.indptr, docs=self.post_docs, tf=self.post_tf, doc_len=self.doc_len)

    @classmethod
    def load(cls, directory: str | Path) -> CorpusIndex:
        d = Path(directory)
        header = json.loads((d / "header.json").read_text(encoding="utf-8"))
        if header.get("format") != INDEX_FORMAT or header.get("version") != INDEX_VERSION:
            raise ValueError(f"unsupported index format in {d}: {header.get('format')} v{header.get('version')}")
        chunks = [
            Article.from_json(json.loads(line))
            for line in (d / "chunks.jsonl").read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        index = cls(chunks, k1=header["k1"], b=header["b"], chunk_size=header["chunk_size"])
        if not index.matches_stored(d):
            raise ValueError(f"index statistics in {d} are inconsistent with its chunks")
        return index

    def matches_stored(self, directory: str | Path) -> bool:
        """Recompute statistics from chunks and compare with persisted arrays."""
        d = Path(directory)
        stored = np.load(d / "postings.npz")
        terms = json.loads((d / "vocab.json").read_text(encoding="utf-8"))
        return (
            terms == sorted(self.vocab, key=self.vocab.__getitem__)
            and np.array_equal(stored["indptr"], self.indptr)
            and np.array_equal(stored["docs"], self.post_docs)
            and np.array_equal(stored["tf"], self.post_tf)
            and np.array_equal(stored["doc_len"], self.doc_len)
        )

    def score_all(self, query: str) -> tuple[np.ndarray, np.ndarray]:
        """BM25 score of every chunk plus a mask of chunks matching any query term."""
        terms = list(dict.fromkeys(_TOKENIZER.tokenize(query)))
        if not terms:
            raise EmptyQuery(f"query {query!r} has no searchable terms")
        scores = np.zeros(self.n_chunks, dtype=np.float64)
        matched = np.zeros(self.n_chunks, dtype=bool)
        for term in terms:
            tid = self.vocab.get(term)
            if tid is None:
                continue
            lo, hi = self.indptr[tid], self.indptr[tid + 1]
            docs = self.post_docs[lo:hi]
            bm25_accumulate(scores, docs, self.post_tf[lo:hi], self.doc_len, self.idf(term), self.k1, self.b, self.avgdl)
            matched[docs] = True
        return scores, matched


def bm25_search(index: CorpusIndex, req: SearchRequest) -> list[Article]:
    """Ranked chunks matching at least one query term, best first.

    Chunks published after ``req.cutoff`` are excluded; ties go to the lower
    ``(doc_id, chunk_index)``.
    """
    if index.n_chunks == 0:
        raise ValueError("cannot search an empty index")
    scores, keep = index.score_all(req.query)
    if req.cutoff is not None:
        keep &= index.published_ord <= req.cutoff.ordinal()
    cand = np.flatnonzero(keep)
    order = cand[np.lexsort((index.key_rank[cand], -scores[cand]))]
    picked = order[req.offset : req.offset + req.top_k]
    return [replace(index.chunks[i], score=float(scores[i]), source_query=req.query) for i in picked]


class LocalSearchProvider:
    """SearchProvider adapter over a :class:`CorpusIndex`."""

    def __init__(self, index: CorpusIndex):
        self.index = index

    def search(self, req: SearchRequest) -> list[Article]:
        return bm25_search(self.index, req)
