"""Offline construction of the few-shot example pool.

For each topic with a reference timeline, candidate questions are generated
from the news context, then a greedy search picks the ``m`` questions whose
retrieved documents yield the best date F1 against the reference
(chrono-informativeness, CI).
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from newsline.core import Article, Timeline, Topic
from newsline.errors import MissingReference, NewslineError
from newsline.llm.gateway import Gateway
from newsline.metrics import date_f1
from newsline.pipeline import fetch_news_context, generate_timeline
from newsline.questioning import (
    EmbeddingProvider,
    ExamplePool,
    normalize_question,
    rewrite_question,
    self_question,
)
from newsline.retrieval.base import MAX_TOP_K, SearchProvider, SearchRequest, interleave, search_many
from newsline.retrieval.dedup import Deduplicator

logger = logging.getLogger(__name__)

SubsetKey = tuple[str, ...]


def subset_key(questions: Sequence[str]) -> SubsetKey:
    return tuple(sorted(normalize_question(q) for q in questions))


@dataclass
class CandidateSet:
    topic: Topic
    candidates: list[str]
    retrieval_cache: dict[str, list[Article]] = field(default_factory=dict)
    ci_cache: dict[SubsetKey, float] = field(default_factory=dict)
    evaluations: int = 0


class CIEvaluator:
    """Computes CI(Q, N) for question subsets of one topic.

    Rewrites and search results are memoized per question/query; generation is
    memoized by the gateway's transcript cache.
    """

    def __init__(
        self,
        gateway: Gateway,
        provider: SearchProvider,
        topic: Topic,
        *,
        max_top_k: int = MAX_TOP_K,
        doc_word_budget: int = 600,
        parallelism: int = 4,
        retrieval_cache: dict[str, list[Article]] | None = None,
    ):
        if topic.reference is None:
            raise MissingReference(f"topic {topic.query!r} has no reference timeline")
        self.gateway = gateway
        self.provider = provider
        self.topic = topic
        self.max_top_k = max_top_k
        self.doc_word_budget = doc_word_budget
        self.parallelism = parallelism
        self.rewrites: dict[str, list[str]] = {}
        self.retrieval_cache = retrieval_cache if retrieval_cache is not None else {}

    def documents(self, questions: Sequence[str], N: int) -> list[Article]:
        """The ``N`` best-ranked deduplicated documents for the rewritten questions."""
        for q in questions:
            if q not in self.rewrites:
                self.rewrites[q] = rewrite_question(self.gateway, q)
        queries = list(dict.fromkeys(x for q in questions for x in self.rewrites[q]))
        k = max(1, min(N, self.max_top_k))
        missing = [q for q in queries if q not in self.retrieval_cache]
        reqs = [SearchRequest(q, self.topic.cutoff, k, 0, self.max_top_k) for q in missing]
        for q, hits in zip(missing, search_many(self.provider, reqs, self.parallelism)):
            self.retrieval_cache[q] = hits
        merged = interleave([self.retrieval_cache[q] for q in queries])
        return Deduplicator().filter(merged, N)

    def timeline(self, questions: Sequence[str], N: int) -> Timeline:
        docs = self.documents(questions, N)
        tl, _ = generate_timeline(self.gateway, self.topic, docs, self.doc_word_budget)
        return tl

    def __call__(self, questions: Sequence[str], N: int) -> float:
        assert self.topic.reference is not None
        return date_f1(self.timeline(questions, N), self.topic.reference)


def chrono_informativeness(
    questions: Sequence[str],
    topic: Topic,
    N: int,
    gateway: Gateway,
    provider: SearchProvider,
    **kw,
) -> float:
    """Date F1 of the timeline generated from the ``N`` documents the questions retrieve."""
    return CIEvaluator(gateway, provider, topic, **kw)(questions, N)


@dataclass
class GreedyStep:
    step: int
    # candidate index -> CI of (selected + candidate); failed evaluations absent
    marginals: dict[int, float]
    chosen: int
    value: float
    padded: bool = False


@dataclass
class GreedyResult:
    questions: list[str]
    value: float
    trace: list[GreedyStep]
    evaluations: int


CIFunction = Callable[[Sequence[str], int], float]


def greedy_select(
    cands: CandidateSet, m: int, N: int, ci: CIFunction, parallelism: int = 1
) -> GreedyResult:
    """Grow the question set one candidate at a time by best CI.

    Each step evaluates CI(selected + c) for every remaining candidate (cached
    per canonical subset) and keeps the best, lowest index on ties. When no
    candidate strictly improves CI, the remaining slots are filled in
    candidate order.
    """
    if m < 1:
        raise ValueError("m must be >= 1")

    lock = threading.Lock()

    def evaluate(subset: list[str]) -> float | None:
        key = subset_key(subset)
        with lock:
            if key in cands.ci_cache:
                return cands.ci_cache[key]
        try:
            value = float(ci(subset, N))
        except NewslineError as exc:
            logger.warning("CI evaluation failed for %s: %s", subset, exc)
            return None
        with lock:
            cands.ci_cache[key] = value
            cands.evaluations += 1
        return value

    selected: list[int] = []
    current = 0.0
    trace: list[GreedyStep] = []
    target = min(m, len(cands.candidates))
    while len(selected) < target:
        remaining = [i for i in range(len(cands.candidates)) if i not in selected]
        base = [cands.candidates[j] for j in selected]
        subsets = [base + [cands.candidates[i]] for i in remaining]
        if parallelism > 1:
            # warm uncached subsets concurrently; the argmax below reads the cache
            todo = [s for s in subsets if subset_key(s) not in cands.ci_cache]
            with ThreadPoolExecutor(max_workers=parallelism) as ex:
                list(ex.map(evaluate, todo))
        marginals = {}
        for i, subset in zip(remaining, subsets):
            value = evaluate(subset)
            if value is not None:
                marginals[i] = value
        if marginals:
            best = max(marginals, key=lambda i: (marginals[i], -i))
            if marginals[best] > current:
                selected.append(best)
                current = marginals[best]
                trace.append(GreedyStep(len(trace) + 1, marginals, best, current))
                continue
        for i in remaining[: target - len(selected)]:
            selected.append(i)
            trace.append(GreedyStep(len(trace) + 1, marginals, i, current, padded=True))
            marginals = {}
        break
    return GreedyResult([cands.candidates[i] for i in selected], current, trace, cands.evaluations)


@dataclass
class BuildReport:
    done: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"done": self.done, "skipped": self.skipped}


def generate_candidates(
    gateway: Gateway,
    topic: Topic,
    context: Sequence[Article],
    count: int = 50,
    batch: int = 5,
    doc_word_budget: int = 100,
) -> list[str]:
    """Repeated zero-shot self-questioning until ``count`` distinct candidates exist."""
    asked: list[str] = []
    attempts = 0
    max_attempts = -(-count // batch) * 2
    while len(asked) < count and attempts < max_attempts:
        attempts += 1
        try:
            fresh = self_question(gateway, topic, context, asked, [], batch, doc_word_budget)
        except NewslineError as exc:
            logger.warning("candidate batch %d failed for %r: %s", attempts, topic.query, exc)
            continue
        asked.extend(fresh)
    return asked[:count]


def build_pool(
    topics: Sequence[Topic],
    m: int,
    N: int,
    *,
    gateway: Gateway,
    provider: SearchProvider,
    embedder: EmbeddingProvider,
    candidate_count: int = 50,
    pool: ExamplePool | None = None,
    max_top_k: int = MAX_TOP_K,
    parallelism: int = 1,
) -> tuple[ExamplePool, BuildReport]:
    pool = pool if pool is not None else ExamplePool(embedder.dimension, embedder.descriptor)
    report = BuildReport()
    for topic in topics:
        try:
            if topic.reference is None:
                raise MissingReference("no reference timeline")
            context = fetch_news_context(provider, topic, N, max_top_k)
            candidates = generate_candidates(gateway, topic, context, candidate_count)
            if not candidates:
                raise NewslineError("candidate generation produced no questions")
            cands = CandidateSet(topic, candidates)
            evaluator = CIEvaluator(
                gateway, provider, topic, max_top_k=max_top_k, retrieval_cache=cands.retrieval_cache
            )
            result = greedy_select(cands, m, N, evaluator, parallelism)
            pool.add(topic.query, result.questions, embedder.embed(topic.query))
        except NewslineError as exc:
            logger.warning("skipping topic %r: %s", topic.query, exc)
            report.skipped.append({"topic": topic.query, "reason": f"{type(exc).__name__}: {exc}"})
            continue
        report.done.append(
            {
                "topic": topic.query,
                "candidates": len(candidates),
                "selected": result.questions,
                "ci": result.value,
                "evaluations": result.evaluations,
            }
        )
    return pool, report
