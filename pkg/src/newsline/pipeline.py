"""End-to-end timeline runs: context search, questioning rounds, generation, merging.

Three modes share the same retrieval and generation plumbing:

* ``chronos`` searches the topic itself (round 0), then runs ``rounds``
  rounds of self-questioning, generates one timeline per round and merges
  them down to ``l`` dates.
* ``direct`` searches the topic keyphrase once with a document budget and
  generates a single timeline.
* ``rewrite`` rewrites the keyphrase into 2-3 queries, searches those, and
  generates a single timeline.
"""

from __future__ import annotations

import json
import logging
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Sequence

from newsline.core import Article, DatedEvent, EventDate, Timeline, Topic
from newsline.errors import BackendError, NewslineError, UnparseableOutput
from newsline.llm.gateway import Gateway
from newsline.llm.parsing import parse_timeline
from newsline.llm.prompts import DOC_WORD_BUDGET, TEMPLATES, render
from newsline.questioning import (
    QUESTION_DOC_WORDS,
    EmbeddingProvider,
    ExamplePool,
    QuestionSet,
    rewrite_all,
    rewrite_question,
    select_examples,
    self_question,
)
from newsline.retrieval.base import MAX_TOP_K, SearchProvider, SearchRequest, interleave, search_many, search_paged
from newsline.retrieval.dedup import Deduplicator

logger = logging.getLogger(__name__)

MODES = ("chronos", "direct", "rewrite")
DEFAULT_L = 23


class PipelineError(NewslineError):
    pass


@dataclass
class PipelineConfig:
    m: int = 5
    N: int = 30
    s: int = 3
    rounds: int = 2
    l: int | None = None
    mode: str = "chronos"
    include_context_round: bool = True
    # generate each round from the whole article pool instead of that round's articles
    cumulative: bool = False
    doc_word_budget: int = DOC_WORD_BUDGET
    question_doc_words: int = QUESTION_DOC_WORDS
    per_query_top_k: int | None = None
    # baseline document budget; defaults to the chronos ceiling N * (rounds + 1)
    budget: int | None = None
    max_top_k: int = MAX_TOP_K
    search_parallelism: int = 4
    default_l: int = DEFAULT_L
    max_output: int = 4096

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("m", "N", "s", "rounds"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.l is not None and self.l < 1:
            raise ValueError("l must be >= 1")
        if self.default_l < 1:
            raise ValueError("default_l must be >= 1")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PipelineConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown pipeline config keys: {sorted(unknown)}")
        return cls(**d)

    def resolve_l(self, topic: Topic) -> tuple[int, str]:
        if self.l is not None:
            return self.l, "config"
        if topic.reference is not None and topic.reference.l > 0:
            return topic.reference.l, "reference"
        return self.default_l, "default"

    def baseline_budget(self) -> int:
        return self.budget if self.budget is not None else self.N * (self.rounds + 1)

    def query_top_k(self) -> int:
        k = self.per_query_top_k if self.per_query_top_k is not None else self.N
        return max(1, min(k, self.max_top_k))


@dataclass
class Services:
    gateway: Gateway
    provider: SearchProvider
    embedder: EmbeddingProvider | None = None
    pool: ExamplePool | None = None
    clock: Callable[[], float] = time.perf_counter


@dataclass
class RoundRecord:
    round: int
    questions: list[str] = field(default_factory=list)
    rewrites: dict[str, list[str]] = field(default_factory=dict)
    queries: list[str] = field(default_factory=list)
    examples: list[str] = field(default_factory=list)
    retrieved: int = 0
    article_ids: list[str] = field(default_factory=list)
    events: int = 0
    dates: int = 0
    dropped_events: int = 0
    error: str | None = None
    seconds: float = 0.0


@dataclass
class RunReport:
    topic: str
    cutoff: str
    mode: str
    config: dict[str, Any]
    l: int
    l_source: str
    rounds: list[RoundRecord] = field(default_factory=list)
    total_articles: int = 0
    final_dates: int = 0
    final_events: int = 0
    merge: str = ""
    warnings: list[str] = field(default_factory=list)
    seconds: float = 0.0

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, indent=2, sort_keys=True)


class Session:
    """Mutable state of one run: article pool, asked questions, round timelines."""

    def __init__(self, topic: Topic, cfg: PipelineConfig, services: Services):
        self.topic = topic
        self.cfg = cfg
        self.services = services
        self.articles: dict[str, Article] = {}
        self.dedup = Deduplicator()
        self.asked: list[str] = []
        self.round_timelines: dict[int, Timeline] = {}
        self.question_sets: list[QuestionSet] = []
        l, source = cfg.resolve_l(topic)
        self.report = RunReport(
            topic=topic.query,
            cutoff=str(topic.cutoff),
            mode=cfg.mode,
            config=asdict(cfg),
            l=l,
            l_source=source,
        )

    def admit(self, candidates: Sequence[Article], round_index: int, limit: int) -> list[Article]:
        """Dedup against the pool, keep at most ``limit``, tag and store them."""
        fresh = self.dedup.filter(candidates, limit)
        tagged = [replace(a, round=round_index) for a in fresh]
        for a in tagged:
            self.articles[a.id] = a
        return tagged

    def warn(self, msg: str) -> None:
        logger.warning(msg)
        self.report.warnings.append(msg)


def fetch_news_context(
    provider: SearchProvider, topic: Topic, N: int, max_top_k: int = MAX_TOP_K
) -> list[Article]:
    """Top ``N`` deduplicated hits for the topic keyphrase, tagged as round 0."""
    if N == 0:
        return []
    hits = search_paged(provider, topic.query, topic.cutoff, N, max_top_k)
    return [replace(a, round=0) for a in Deduplicator().filter(hits, N)]


def generate_timeline(
    gateway: Gateway,
    topic: Topic,
    articles: Sequence[Article],
    doc_word_budget: int = DOC_WORD_BUDGET,
    max_output: int = 4096,
) -> tuple[Timeline, int]:
    """One generation call over ``articles``; returns the timeline and dropped-entry count."""
    if not articles:
        return Timeline(), 0
    prompt = render(TEMPLATES["generate"], {"news": topic.query, "docs": articles}, doc_word_budget=doc_word_budget)
    events, dropped = gateway.ask(prompt, parse_timeline, max_output=max_output)
    return Timeline(tuple(events)), dropped


def _date_weights(rounds: Sequence[Timeline]) -> Counter[EventDate]:
    weights: Counter[EventDate] = Counter()
    for t in rounds:
        for ev in t.events:
            weights[ev.date] += 1
    return weights


def top_dates(rounds: Sequence[Timeline], l: int) -> list[EventDate]:
    """The ``l`` dates with most events across rounds; earlier date wins ties."""
    weights = _date_weights(rounds)
    ranked = sorted(weights, key=lambda d: (-weights[d], d))
    return sorted(ranked[:l])


def mechanical_merge(rounds: Sequence[Timeline], l: int) -> Timeline:
    """LLM-free merge: top-``l`` dates by precedence, one joined summary per date."""
    keep = set(top_dates(rounds, l))
    texts: dict[EventDate, list[str]] = {}
    for t in rounds:
        for ev in t.events:
            if ev.date in keep and ev.summary not in texts.setdefault(ev.date, []):
                texts[ev.date].append(ev.summary)
    return Timeline(tuple(DatedEvent(d, " ".join(parts)) for d, parts in texts.items()))


def merge_timelines(
    gateway: Gateway, rounds: Sequence[Timeline], l: int, topic: Topic, max_output: int = 4096
) -> tuple[Timeline, str]:
    """Merge round timelines into at most ``l`` dates, all drawn from the rounds.

    Returns the merged timeline and how it was produced: ``"passthrough"``
    (single round already within budget), ``"llm"`` or ``"fallback"``.
    """
    nonempty = [t for t in rounds if t]
    if not nonempty:
        raise ValueError("merge needs at least one nonempty round timeline")
    if len(nonempty) == 1 and nonempty[0].l <= l:
        return nonempty[0], "passthrough"
    allowed = set().union(*(t.dates for t in nonempty))
    prompt = render(TEMPLATES["merge"], {"l": l, "news": topic.query, "timelines": nonempty})
    try:
        events, _ = gateway.ask(prompt, parse_timeline, max_output=max_output)
    except (UnparseableOutput, BackendError) as exc:
        logger.warning("merge call failed (%s); using mechanical merge", exc)
        return mechanical_merge(nonempty, l), "fallback"
    kept = [ev for ev in events if ev.date in allowed]
    if len(kept) < len(events):
        logger.warning("merge produced %d events on dates absent from every round; dropped", len(events) - len(kept))
    if not kept:
        return mechanical_merge(nonempty, l), "fallback"
    merged = Timeline(tuple(kept))
    if merged.l > l:
        weights = _date_weights(nonempty)
        keep = set(sorted(merged.dates, key=lambda d: (-weights[d], d))[:l])
        merged = Timeline(tuple(ev for ev in merged.events if ev.date in keep))
    return merged, "llm"


def run_round(session: Session, round_index: int) -> Timeline:
    """One self-questioning round; failures are recorded and yield an empty timeline."""
    if round_index < 1:
        raise ValueError("questioning rounds start at 1")
    cfg, sv, topic = session.cfg, session.services, session.topic
    rec = RoundRecord(round=round_index)
    session.report.rounds.append(rec)
    t0 = sv.clock()
    timeline = Timeline()
    try:
        examples = []
        if sv.pool is not None and sv.embedder is not None and cfg.s > 0:
            examples = select_examples(sv.pool, topic.query, cfg.s, sv.embedder)
        rec.examples = [e.topic_query for e in examples]
        questions = self_question(
            sv.gateway,
            topic,
            list(session.articles.values()),
            session.asked,
            examples,
            cfg.m,
            cfg.question_doc_words,
        )
        session.asked.extend(questions)
        rec.questions = list(questions)
        rewrites = rewrite_all(sv.gateway, questions, cfg.search_parallelism)
        rec.rewrites = rewrites
        session.question_sets.append(QuestionSet(round_index, list(questions), rewrites))
        queries = list(dict.fromkeys(q for qs in rewrites.values() for q in qs))
        rec.queries = queries
        k = cfg.query_top_k()
        requests = [SearchRequest(q, topic.cutoff, k, 0, cfg.max_top_k) for q in queries]
        results = search_many(sv.provider, requests, cfg.search_parallelism)
        rec.retrieved = sum(len(r) for r in results)
        new = session.admit(interleave(results), round_index, cfg.N)
        rec.article_ids = [a.id for a in new]
        docs = list(session.articles.values()) if cfg.cumulative else new
        if not docs:
            session.warn(f"round {round_index}: no new articles after dedup")
        else:
            timeline, rec.dropped_events = generate_timeline(
                sv.gateway, topic, docs, cfg.doc_word_budget, cfg.max_output
            )
    except NewslineError as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
        session.warn(f"round {round_index} failed: {rec.error}")
        timeline = Timeline()
    rec.events = len(timeline)
    rec.dates = timeline.l
    rec.seconds = sv.clock() - t0
    if rec.error is None:
        session.round_timelines[round_index] = timeline
    return timeline


def _context_round(session: Session) -> None:
    cfg, sv, topic = session.cfg, session.services, session.topic
    rec = RoundRecord(round=0, queries=[topic.query])
    session.report.rounds.append(rec)
    t0 = sv.clock()
    try:
        hits = search_paged(sv.provider, topic.query, topic.cutoff, cfg.N, cfg.max_top_k) if cfg.N else []
        rec.retrieved = len(hits)
        context = session.admit(hits, 0, cfg.N)
        rec.article_ids = [a.id for a in context]
        if not context:
            session.warn("news context search returned no articles")
        if cfg.include_context_round and context:
            tl, rec.dropped_events = generate_timeline(sv.gateway, topic, context, cfg.doc_word_budget, cfg.max_output)
            session.round_timelines[0] = tl
            rec.events, rec.dates = len(tl), tl.l
    except NewslineError as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
        session.warn(f"context round failed: {rec.error}")
    rec.seconds = sv.clock() - t0


def _baseline_articles(session: Session) -> list[Article]:
    cfg, sv, topic = session.cfg, session.services, session.topic
    budget = cfg.baseline_budget()
    rec = RoundRecord(round=0)
    session.report.rounds.append(rec)
    if cfg.mode == "direct":
        queries = [topic.query]
    else:
        queries = rewrite_question(sv.gateway, topic.query)
        rec.rewrites = {topic.query: queries}
    rec.queries = queries
    results = [search_paged(sv.provider, q, topic.cutoff, budget, cfg.max_top_k) for q in queries]
    rec.retrieved = sum(len(r) for r in results)
    docs = session.admit(interleave(results), 0, budget)
    rec.article_ids = [a.id for a in docs]
    return docs


def run_pipeline(topic: Topic, cfg: PipelineConfig, services: Services) -> tuple[Timeline, RunReport]:
    session = Session(topic, cfg, services)
    report = session.report
    clock = services.clock
    t_start = clock()

    if cfg.mode == "chronos":
        _context_round(session)
        for r in range(1, cfg.rounds + 1):
            run_round(session, r)
    else:
        rec_t0 = clock()
        try:
            docs = _baseline_articles(session)
            tl, report.rounds[-1].dropped_events = generate_timeline(
                services.gateway, topic, docs, cfg.doc_word_budget, cfg.max_output
            )
            session.round_timelines[0] = tl
            report.rounds[-1].events, report.rounds[-1].dates = len(tl), tl.l
        except NewslineError as exc:
            if not report.rounds:
                report.rounds.append(RoundRecord(round=0))
            report.rounds[-1].error = f"{type(exc).__name__}: {exc}"
            session.warn(f"{cfg.mode} baseline failed: {report.rounds[-1].error}")
        report.rounds[-1].seconds = clock() - rec_t0

    report.total_articles = len(session.articles)
    ordered = [session.round_timelines[r] for r in sorted(session.round_timelines)]
    if all(rec.error for rec in report.rounds):
        raise PipelineError(f"every round failed for topic {topic.query!r}")
    if any(ordered):
        final, report.merge = merge_timelines(services.gateway, ordered, report.l, topic, cfg.max_output)
    else:
        session.warn("no round produced any events")
        final, report.merge = Timeline(), "empty"
    report.final_dates = final.l
    report.final_events = len(final)
    report.seconds = clock() - t_start
    logger.debug(
        "session %r: %d articles, %d questions asked, merge=%s",
        topic.query,
        len(session.articles),
        len(session.asked),
        report.merge,
    )
    return final, report
