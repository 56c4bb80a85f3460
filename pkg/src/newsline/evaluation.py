"""Scoring runs against references and the multi-system benchmark sweep."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

from newsline.core import Timeline, Topic
from newsline.metrics import DEFAULT_TOKENIZER, MetricReport, TokenizerConfig, evaluate, mean_report, render_table
from newsline.pipeline import PipelineConfig, PipelineError, Services, run_pipeline

logger = logging.getLogger(__name__)


def evaluate_run(
    pred: Timeline,
    ref: Timeline,
    out: str | Path | None = None,
    cfg: TokenizerConfig = DEFAULT_TOKENIZER,
    label: str = "",
) -> MetricReport:
    """All seven metrics; optionally writes ``out`` (JSON) and ``out`` with a ``.txt`` table."""
    report = evaluate(pred, ref, cfg)
    if out is not None:
        p = Path(out)
        p.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        p.with_suffix(".txt").write_text(report.to_table(label) + "\n", encoding="utf-8")
    return report


@dataclass
class BenchResult:
    # system label -> per-topic reports (topic order preserved)
    per_system: dict[str, list[MetricReport]] = field(default_factory=dict)
    per_topic: list[dict[str, Any]] = field(default_factory=list)
    failures: list[dict[str, str]] = field(default_factory=list)

    def aggregate(self) -> dict[str, MetricReport]:
        return {k: mean_report(v) for k, v in self.per_system.items() if v}

    def table(self) -> str:
        return render_table(self.aggregate().items())

    def to_json(self) -> dict[str, Any]:
        return {
            "aggregate": {k: r.to_dict() for k, r in self.aggregate().items()},
            "topics": self.per_topic,
            "failures": self.failures,
        }


def run_bench(
    topics: Sequence[Topic],
    base: PipelineConfig,
    services_for: Callable[[Topic], Services],
    rounds_sweep: Sequence[int] = (0, 1, 2, 3),
    baselines: Sequence[str] = ("direct", "rewrite"),
    tokenizer: TokenizerConfig = DEFAULT_TOKENIZER,
) -> BenchResult:
    """Chronos at every ``R`` in the sweep plus baselines with matched document budget.

    Baseline budget is the article count of the chronos run at ``base.rounds``.
    A failed run scores as an empty timeline and is listed in ``failures``.
    """
    result = BenchResult()
    sweep = list(dict.fromkeys([*rounds_sweep, base.rounds]))
    for topic in topics:
        if topic.reference is None:
            result.failures.append({"topic": topic.query, "system": "*", "error": "no reference timeline"})
            continue
        services = services_for(topic)
        row: dict[str, Any] = {"topic": topic.query, "systems": {}}
        budget = None

        def score(label: str, cfg: PipelineConfig) -> int | None:
            try:
                pred, report = run_pipeline(topic, cfg, services)
                articles = report.total_articles
            except PipelineError as exc:
                result.failures.append({"topic": topic.query, "system": label, "error": str(exc)})
                pred, articles = Timeline(), None
            m = evaluate(pred, topic.reference, tokenizer)  # type: ignore[arg-type]
            result.per_system.setdefault(label, []).append(m)
            row["systems"][label] = {"articles": articles, **m.scores()}
            return articles

        for r in sweep:
            n = score(f"chronos R={r}", replace(base, mode="chronos", rounds=r))
            if r == base.rounds:
                budget = n
        for mode in baselines:
            b = budget if budget is not None else base.baseline_budget()
            score(mode, replace(base, mode=mode, budget=b))
        result.per_topic.append(row)
    return result
