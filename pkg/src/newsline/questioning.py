"""Self-questioning with retrieved few-shot examples, and question rewriting."""

from __future__ import annotations

import hashlib
import json
import logging
import re
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol, Sequence

import httpx
import numpy as np

from newsline.core import Article, Topic
from newsline.errors import BackendError, CorruptPoolFile, InsufficientQuestions, UnparseableOutput
from newsline.llm.gateway import Gateway
from newsline.llm.parsing import parse_question_list
from newsline.llm.prompts import TEMPLATES, render

logger = logging.getLogger(__name__)

POOL_FORMAT = "newsline-example-pool"
POOL_VERSION = 1
MAX_QUERY_CHARS = 120
QUESTION_DOC_WORDS = 100

_PUNCT = str.maketrans("", "", string.punctuation + "‘’“”")


def normalize_question(q: str) -> str:
    """Case-fold, drop punctuation, collapse whitespace."""
    return " ".join(q.casefold().translate(_PUNCT).split())


# ---------------------------------------------------------------- embeddings


class EmbeddingProvider(Protocol):
    dimension: int
    descriptor: str

    def embed(self, text: str) -> np.ndarray: ...


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        out = np.zeros_like(vec)
        out[0] = 1.0
        return out
    return vec / norm


class HashingEmbedder:
    """Signed feature hashing over word unigrams and bigrams; offline and deterministic."""

    def __init__(self, dimension: int = 256):
        self.dimension = dimension
        self.descriptor = f"hashing-v1/{dimension}"

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        words = re.findall(r"[^\W_]+", text.lower())
        feats = words + [a + " " + b for a, b in zip(words, words[1:])]
        for f in feats:
            h = int.from_bytes(hashlib.blake2b(f.encode(), digest_size=8).digest(), "big")
            vec[h % self.dimension] += 1.0 if (h >> 63) & 1 else -1.0
        return _unit(vec)


class HttpEmbedder:
    """OpenAI-compatible ``/embeddings`` endpoint."""

    def __init__(self, endpoint: str, model: str, dimension: int, credential: str | None = None, client: httpx.Client | None = None):
        self.url = endpoint.rstrip("/")
        if not self.url.endswith("/embeddings"):
            self.url += "/embeddings"
        self.model = model
        self.dimension = dimension
        self.descriptor = f"http/{model}/{dimension}"
        self.credential = credential
        self.client = client or httpx.Client(timeout=60.0)

    def embed(self, text: str) -> np.ndarray:
        headers = {"Authorization": f"Bearer {self.credential}"} if self.credential else {}
        try:
            resp = self.client.post(self.url, json={"model": self.model, "input": text}, headers=headers)
        except httpx.HTTPError as exc:
            raise BackendError(f"embedding transport error: {exc}") from exc
        if resp.status_code >= 400:
            raise BackendError(f"embedding backend returned {resp.status_code}: {resp.text[:200]}")
        try:
            vec = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float64)
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError("unexpected embedding payload") from exc
        if vec.shape != (self.dimension,):
            raise BackendError(f"embedding dimension {vec.shape} != configured {self.dimension}")
        return _unit(vec)


# -------------------------------------------------------------- example pool


@dataclass(frozen=True)
class PoolEntry:
    topic_query: str
    questions: tuple[str, ...]
    embedding: np.ndarray = field(compare=False, repr=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PoolEntry):
            return NotImplemented
        return (
            self.topic_query == other.topic_query
            and self.questions == other.questions
            and np.array_equal(self.embedding, other.embedding)
        )

    __hash__ = None  # type: ignore[assignment]


class ExamplePool:
    def __init__(self, dimension: int, descriptor: str = "", entries: Sequence[PoolEntry] = ()):
        self.dimension = dimension
        self.descriptor = descriptor
        self.entries: list[PoolEntry] = []
        for e in entries:
            self._put(e)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExamplePool):
            return NotImplemented
        return (self.dimension, self.descriptor, self.entries) == (other.dimension, other.descriptor, other.entries)

    def _put(self, entry: PoolEntry) -> None:
        if entry.embedding.shape != (self.dimension,):
            raise ValueError(f"embedding dimension {entry.embedding.shape} != pool dimension {self.dimension}")
        for i, old in enumerate(self.entries):
            if old.topic_query == entry.topic_query:
                self.entries[i] = entry
                return
        self.entries.append(entry)

    def add(self, topic_query: str, questions: Sequence[str], embedding: np.ndarray) -> PoolEntry:
        """Insert or replace the entry for ``topic_query``; the embedding is L2-normalized."""
        entry = PoolEntry(topic_query, tuple(questions), _unit(np.asarray(embedding, dtype=np.float64)))
        self._put(entry)
        return entry

    def to_json(self) -> dict[str, Any]:
        return {
            "format": POOL_FORMAT,
            "version": POOL_VERSION,
            "embedding": {"descriptor": self.descriptor, "dimension": self.dimension},
            "entries": [
                {"topic": e.topic_query, "questions": list(e.questions), "embedding": e.embedding.tolist()}
                for e in self.entries
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), ensure_ascii=False, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, embedder: EmbeddingProvider | None = None) -> ExamplePool:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            if data.get("format") != POOL_FORMAT or data.get("version") != POOL_VERSION:
                raise CorruptPoolFile(f"{path}: not a version-{POOL_VERSION} example pool")
            dim = int(data["embedding"]["dimension"])
            pool = cls(dim, data["embedding"].get("descriptor", ""))
            for rec in data["entries"]:
                emb = np.asarray(rec["embedding"], dtype=np.float64)
                pool._put(PoolEntry(rec["topic"], tuple(rec["questions"]), emb))
        except CorruptPoolFile:
            raise
        except (OSError, ValueError, KeyError, TypeError, AttributeError) as exc:
            raise CorruptPoolFile(f"{path}: {exc}") from exc
        if embedder is not None and embedder.dimension != pool.dimension:
            raise CorruptPoolFile(
                f"{path}: pool dimension {pool.dimension} does not match embedder dimension {embedder.dimension}"
            )
        return pool


def pool_add(pool: ExamplePool, topic_query: str, questions: Sequence[str], embedder: EmbeddingProvider) -> PoolEntry:
    return pool.add(topic_query, questions, embedder.embed(topic_query))


def pool_save(pool: ExamplePool, path: str | Path) -> None:
    pool.save(path)


def pool_load(path: str | Path, embedder: EmbeddingProvider | None = None) -> ExamplePool:
    return ExamplePool.load(path, embedder)


def select_examples(
    pool: ExamplePool, target_query: str, s: int, embedder: EmbeddingProvider
) -> list[PoolEntry]:
    """The ``s`` entries most cosine-similar to the target, never the target itself."""
    if s < 0:
        raise ValueError("s must be >= 0")
    if s == 0 or not pool.entries:
        return []
    q = embedder.embed(target_query)
    target = normalize_question(target_query)
    scored = [
        (float(np.dot(e.embedding, q)), i, e)
        for i, e in enumerate(pool.entries)
        if normalize_question(e.topic_query) != target
    ]
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [e for _, _, e in scored[:s]]


# --------------------------------------------------------------- questioning


@dataclass
class QuestionSet:
    round: int
    questions: list[str]
    rewrites: dict[str, list[str]] = field(default_factory=dict)

    def queries(self) -> list[str]:
        return [q for question in self.questions for q in self.rewrites.get(question, [question])]

    def to_json(self) -> dict[str, Any]:
        return {"round": self.round, "questions": self.questions, "rewrites": self.rewrites}


def self_question(
    gateway: Gateway,
    topic: Topic,
    database: Sequence[Article],
    asked: Sequence[str],
    examples: Sequence[Any],
    m: int = 5,
    doc_word_budget: int = QUESTION_DOC_WORDS,
) -> list[str]:
    """Ask the model for new questions; keep the first ``m`` not already asked."""
    prompt = render(
        TEMPLATES["self_question"],
        {"Retrieved Examples": examples, "docs": database, "news": topic.query, "questions": list(asked)},
        doc_word_budget=doc_word_budget,
    )
    proposed = gateway.ask(prompt, lambda raw: parse_question_list(raw, 1))
    seen = {normalize_question(q) for q in asked}
    fresh = []
    for q in proposed:
        key = normalize_question(q)
        if not key or key in seen:
            continue
        seen.add(key)
        fresh.append(q)
    if len(fresh) < m:
        raise InsufficientQuestions(f"model proposed {len(fresh)} new questions, need {m}")
    return fresh[:m]


def _clip_query(q: str, limit: int = MAX_QUERY_CHARS) -> str:
    q = " ".join(q.split())
    if len(q) <= limit:
        return q
    cut = q[: limit + 1].rfind(" ")
    return q[:cut] if cut > 0 else q[:limit]


def rewrite_question(gateway: Gateway, question: str) -> list[str]:
    """Two or three focused search queries; falls back to the question itself."""
    prompt = render(TEMPLATES["rewrite"], {"question": question})
    try:
        queries = gateway.ask(prompt, lambda raw: parse_question_list(raw, 1))
    except UnparseableOutput:
        logger.warning("rewrite failed for %r; searching with the question itself", question)
        return [_clip_query(question)]
    out: list[str] = []
    for q in queries[:3]:
        clipped = _clip_query(q)
        if clipped and clipped not in out:
            out.append(clipped)
    return out or [_clip_query(question)]


def rewrite_all(gateway: Gateway, questions: Sequence[str], parallelism: int = 4) -> dict[str, list[str]]:
    """Rewrite concurrently; the mapping preserves question order."""
    if parallelism <= 1 or len(questions) <= 1:
        results = [rewrite_question(gateway, q) for q in questions]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as ex:
            results = list(ex.map(lambda q: rewrite_question(gateway, q), questions))
    return dict(zip(questions, results))
