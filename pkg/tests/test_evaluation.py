from __future__ import annotations

import json

import pytest

from newsline.core import Timeline, Topic, parse_date
from newsline.errors import ProviderError
from newsline.evaluation import evaluate_run, run_bench
from newsline.llm import Gateway, TranscriptCache
from newsline.pipeline import PipelineConfig, Services

import sim
from conftest import tick_clock, tl
from metric_cases import CASES, TWO_DATE_EXPECTED


def test_evaluate_run_identity_empty_and_hand_values(tmp_path):
    ref = tl(("2023-01-01", "dam breaks"), ("2023-01-02", "rescue begins"))
    assert set(evaluate_run(ref, ref).scores().values()) == {1.0}
    assert set(evaluate_run(Timeline(), ref).scores().values()) == {0.0}
    pred, gold = CASES["two_date_fixture"]
    out = tmp_path / "m.json"
    rep = evaluate_run(tl(*pred), tl(*gold), out, label="fixture")
    for key, want in TWO_DATE_EXPECTED.items():
        assert json.loads(out.read_text())[key] == pytest.approx(want, abs=1e-9)
        assert getattr(rep, key) == pytest.approx(want, abs=1e-9)
    assert "fixture" in out.with_suffix(".txt").read_text()


def test_run_bench_sweep_and_failures():
    topic = Topic(sim.TOPIC, parse_date(sim.CUTOFF), Timeline.from_json(sim.reference_timeline()))
    no_ref = Topic("unscored", parse_date(sim.CUTOFF))

    def services(_topic):
        return Services(Gateway(sim.SimulatedLLM(), TranscriptCache()), sim.bm25_provider(), clock=tick_clock())

    result = run_bench([topic, no_ref], PipelineConfig(m=5, N=6, rounds=1), services, rounds_sweep=(0, 2))
    assert list(result.per_system) == ["chronos R=0", "chronos R=2", "chronos R=1", "direct", "rewrite"]
    row = result.per_topic[0]["systems"]
    assert row["direct"]["articles"] == row["chronos R=1"]["articles"]
    assert result.failures == [{"topic": "unscored", "system": "*", "error": "no reference timeline"}]
    assert "direct" in result.table()

    class Down:
        def search(self, req):
            raise ProviderError("offline")

    def broken(_topic):
        backend = sim.SimulatedLLM({"self_question": ["x"] * 20, "rewrite": ["x"] * 20})
        return Services(Gateway(backend, TranscriptCache()), Down(), clock=tick_clock())

    failed = run_bench([topic], PipelineConfig(m=5, N=6, rounds=1), broken, rounds_sweep=(1,))
    assert {f["system"] for f in failed.failures} == {"chronos R=1", "direct", "rewrite"}
    assert all(v == 0.0 for v in failed.aggregate()["direct"].scores().values())
