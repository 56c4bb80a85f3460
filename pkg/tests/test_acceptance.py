"""Acceptance gate: one test per criterion, each reporting PASS, FAIL or SKIP."""

from __future__ import annotations

import contextlib
import datetime as dt
import os
import random
import time

import pytest

from newsline import pipeline
from newsline.core import Timeline, Topic, parse_date
from newsline.llm import render
from newsline.metrics import agree_f1, align_f1, concat_f1, date_f1, evaluate
from newsline.pipeline import PipelineConfig, run_pipeline
from newsline.pool_builder import CandidateSet, greedy_select
from newsline.retrieval import SearchRequest, bm25_search, chunk_document

import oracles
from conftest import ACCEPTANCE, tl
from metric_cases import CASES, TWO_DATE_EXPECTED
from test_pool_builder import CANDS, ScriptedCI, brute_force_trace, random_table
from test_retrieval import HAND_CORPUS, HAND_SCORES, hand_index

METRICS_ORACLE = "metric oracle suite"
METRICS_SANITY = "metric sanity"
DATE_F1 = "date F1 spot values and fuzz"
BM25 = "BM25 correctness and chunker losslessness"
GREEDY = "greedy CI selection"
END_TO_END = "deterministic end-to-end session"
PARITY = "baseline budget parity"
DATASET = "dataset statistics"
PROMPTS = "prompt fidelity"
LIVE = "live smoke"

SESSION = PipelineConfig(m=5, N=10, rounds=2)


@contextlib.contextmanager
def criterion(name: str):
    try:
        yield
    except pytest.skip.Exception:
        ACCEPTANCE[name] = "SKIP"
        print(f"ACCEPTANCE {name}: SKIP")
        raise
    except BaseException:
        ACCEPTANCE[name] = "FAIL"
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    ACCEPTANCE[name] = "PASS"
    print(f"ACCEPTANCE {name}: PASS")


def test_metric_oracle_suite():
    with criterion(METRICS_ORACLE):
        assert len(CASES) >= 10
        t0 = time.perf_counter()
        for name, (pred, ref) in CASES.items():
            assert len({d for d, _ in pred}) <= 4 and len({d for d, _ in ref}) <= 4, name
            p, r = tl(*pred), tl(*ref)
            for n in (1, 2):
                assert abs(concat_f1(p, r, n) - oracles.concat(pred, ref, n)) <= 1e-9, name
                assert abs(agree_f1(p, r, n) - oracles.agree(pred, ref, n)) <= 1e-9, name
                (best,) = oracles.align_candidates(pred, ref, n)
                assert abs(align_f1(p, r, n) - best) <= 1e-9, name
            assert abs(date_f1(p, r) - oracles.date_f1(pred, ref)) <= 1e-9, name
        rep = evaluate(*(tl(*x) for x in CASES["two_date_fixture"]))
        for key, want in TWO_DATE_EXPECTED.items():
            assert abs(getattr(rep, key) - want) <= 1e-9, key
        assert time.perf_counter() - t0 < 1.0


def test_metric_sanity():
    with criterion(METRICS_SANITY):
        t0 = time.perf_counter()
        same = tl(("2023-01-01", "dam breaks near town"), ("2023-01-04", "rescue teams arrive"))
        assert all(v == pytest.approx(1.0, abs=1e-12) for v in evaluate(same, same).scores().values())
        other = tl(("2024-07-01", "election results announced"), ("2024-07-02", "parliament convenes"))
        assert all(v == 0.0 for v in evaluate(same, other).scores().values())
        pred, ref = CASES["one_day_offset"]
        assert abs(evaluate(tl(*pred), tl(*ref)).align_r1 - 0.5) <= 1e-9
        assert time.perf_counter() - t0 < 1.0


def test_date_f1_spot_and_fuzz():
    with criterion(DATE_F1):
        p = tl(("2023-01-01", "x"), ("2023-01-02", "y"))
        r = tl(("2023-01-01", "x"), ("2023-01-03", "z"))
        assert date_f1(p, r) == 0.5
        rng = random.Random(2024)
        base = dt.date(2023, 1, 1)
        for _ in range(1000):
            a = {base + dt.timedelta(days=rng.randrange(10)) for _ in range(rng.randrange(1, 6))}
            b = {base + dt.timedelta(days=rng.randrange(10)) for _ in range(rng.randrange(1, 6))}
            f = date_f1(tl(*((str(d), "e") for d in a)), tl(*((str(d), "e") for d in b)))
            assert 0.0 <= f <= 1.0
            assert (f == 1.0) == (a == b)


def test_bm25_and_chunker():
    with criterion(BM25):
        assert len(HAND_CORPUS) == 6
        hits = bm25_search(hand_index(), SearchRequest("bank collapse", top_k=10))
        assert [h.id for h in hits] == list(HAND_SCORES)
        for h in hits:
            assert abs(h.score - HAND_SCORES[h.id]) <= 1e-9
        rng = random.Random(500)
        vocab = ["dam", "flood", "rain", "x1", "Ünïcode", "a", "2023-03-10"]
        for _ in range(500):
            words = [rng.choice(vocab) for _ in range(rng.randint(1, 3000))]
            size = rng.randint(1, 700)
            chunks = chunk_document("d", " ".join(words), chunk_size=size)
            assert [w for c in chunks for w in c.body.split()] == words
            assert all(len(c.body.split()) <= size for c in chunks)


def test_greedy_ci_selection():
    with criterion(GREEDY):
        assert len(CANDS) == 6
        for seed in range(50):
            table = random_table(seed)
            oracle = ScriptedCI(table)
            cands = CandidateSet(Topic("t", parse_date("2023-01-01")), list(CANDS))
            result = greedy_select(cands, 4, 10, oracle)
            want_sel, want_steps = brute_force_trace(table, 4)
            assert [(s.chosen, s.value, s.padded) for s in result.trace] == want_steps
            assert result.questions == [CANDS[i] for i in want_sel]
            assert all(n == 1 for n in oracle.calls.values())


def test_deterministic_end_to_end(replay_services, fixture_topic, monkeypatch):
    seen_rounds: list[list[Timeline]] = []
    real_merge = pipeline.merge_timelines

    def spy(gateway, rounds, *args, **kw):
        seen_rounds.append(list(rounds))
        return real_merge(gateway, rounds, *args, **kw)

    monkeypatch.setattr(pipeline, "merge_timelines", spy)
    with criterion(END_TO_END):
        t0 = time.perf_counter()
        outputs = set()
        for _ in range(3):
            final, report = run_pipeline(fixture_topic, SESSION, replay_services())
            outputs.add((final.dumps(), report.dumps()))
        assert len(outputs) == 1
        assert all(r.error is None for r in report.rounds)
        assert report.total_articles <= SESSION.N * (SESSION.rounds + 1)
        asked = [q for r in report.rounds for q in r.questions]
        assert len(asked) == len(set(asked)) == SESSION.m * SESSION.rounds
        round_dates = {d for t in seen_rounds[-1] for d in t.dates}
        assert len(seen_rounds[-1]) == SESSION.rounds + 1
        assert set(final.dates) <= round_dates
        assert final.l <= report.l
        assert time.perf_counter() - t0 < 10.0


def test_baseline_budget_parity(replay_services, fixture_topic):
    with criterion(PARITY):
        _, chronos = run_pipeline(fixture_topic, SESSION, replay_services())
        for mode in ("direct", "rewrite"):
            cfg = PipelineConfig(m=5, N=10, rounds=2, mode=mode, budget=chronos.total_articles)
            _, rep = run_pipeline(fixture_topic, cfg, replay_services())
            assert rep.total_articles == chronos.total_articles


def test_dataset_statistics():
    with criterion(DATASET):
        path = os.environ.get("NEWSLINE_OPEN_TLS")
        if not path:
            pytest.skip("Open-TLS release files not available (set NEWSLINE_OPEN_TLS)")
        from newsline.datasets import load_dataset

        stats = load_dataset(path).stats()
        assert stats["timelines"] == 50
        assert abs(stats["mean_l"] - 23) <= 0.5
        assert abs(stats["mean_k"] - 1.8) <= 0.1


def test_prompt_fidelity():
    with criterion(PROMPTS):
        rendered = [
            render("self_question", {"Retrieved Examples": [], "docs": [], "news": "N", "questions": []}),
            render("rewrite", {"question": "Q?"}),
            render("merge", {"l": 23, "news": "N", "timelines": [Timeline()]}),
            render("generate", {"news": "N", "docs": []}),
        ]
        text = "\n".join(rendered)
        for anchor in (
            "propose at least 5 questions",
            "Generate 2-3 rewrite queries",
            "select the top-",
            'format as "2023-02-02"',
        ):
            assert anchor in text, anchor


@pytest.mark.live
def test_live_smoke(tmp_path):
    with criterion(LIVE):
        needed = ("NEWSLINE_LLM_ENDPOINT", "NEWSLINE_SEARCH_ENDPOINT")
        if not all(os.environ.get(k) for k in needed):
            pytest.skip("no live LLM and search credentials configured")
        from newsline.config import RunConfig, build_services

        query = os.environ.get("NEWSLINE_LIVE_QUERY", "Silicon Valley Bank collapse")
        cutoff = os.environ.get("NEWSLINE_LIVE_CUTOFF", "2023-06-30")
        services = build_services(RunConfig(), tmp_path)
        final, _ = run_pipeline(Topic(query, parse_date(cutoff)), PipelineConfig(rounds=1, N=10), services)
        assert final.l >= 3
