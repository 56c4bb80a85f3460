from __future__ import annotations

import datetime as dt
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsline.core import Timeline
from newsline.metrics import (
    MetricReport,
    TokenizerConfig,
    agree_f1,
    align_dates,
    align_f1,
    concat_f1,
    date_f1,
    date_penalty,
    evaluate,
    mean_report,
    rouge_f1,
    render_table,
)

import oracles
from conftest import tl
from metric_cases import CASES, TWO_DATE_EXPECTED


def as_tl(pairs):
    return tl(*pairs)


@pytest.mark.parametrize("name", sorted(CASES))
def test_metrics_match_brute_force(name):
    pred, ref = CASES[name]
    p, r = as_tl(pred), as_tl(ref)
    for n in (1, 2):
        assert concat_f1(p, r, n) == pytest.approx(oracles.concat(pred, ref, n), abs=1e-9)
        assert agree_f1(p, r, n) == pytest.approx(oracles.agree(pred, ref, n), abs=1e-9)
        cands = oracles.align_candidates(pred, ref, n)
        assert len(cands) == 1, "hand cases must have a unique optimal alignment"
        assert align_f1(p, r, n) == pytest.approx(cands.pop(), abs=1e-9)
    assert date_f1(p, r) == pytest.approx(oracles.date_f1(pred, ref), abs=1e-9)


def test_two_date_fixture_hand_values():
    pred, ref = CASES["two_date_fixture"]
    report = evaluate(as_tl(pred), as_tl(ref))
    for key, want in TWO_DATE_EXPECTED.items():
        assert getattr(report, key) == pytest.approx(want, abs=1e-9), key


def test_rouge_spot_values():
    assert rouge_f1("the cat sat", "the cat ran", 1) == pytest.approx(2 / 3)
    assert rouge_f1("same words here", "same words here", 2) == 1.0
    assert rouge_f1("alpha", "beta", 1) == 0.0
    assert rouge_f1("", "beta", 1) == 0.0
    assert rouge_f1("one", "one", 2) == 0.0  # no bigrams on either side


def test_rouge_rejects_other_n():
    with pytest.raises(ValueError):
        rouge_f1("a b c", "a b c", 3)


def test_agree_micro_average():
    # one shared date with 2 of 3 tokens overlapping, plus one extra 3-token date per side
    pred, ref = CASES["shared_date_extra_dates"]
    assert agree_f1(as_tl(pred), as_tl(ref), 1) == pytest.approx(1 / 3, abs=1e-12)


def test_align_one_day_offset_is_half():
    pred, ref = CASES["one_day_offset"]
    assert align_f1(as_tl(pred), as_tl(ref), 1) == pytest.approx(0.5, abs=1e-12)
    assert date_penalty(1) == 0.5
    assert date_penalty(-3) == 0.25


def test_date_f1_spot_value():
    p = tl(("2023-01-01", "x"), ("2023-01-02", "y"))
    r = tl(("2023-01-01", "x"), ("2023-01-03", "z"))
    assert date_f1(p, r) == 0.5


def test_empty_prediction_scores_zero():
    ref = tl(("2023-01-01", "a b"))
    report = evaluate(Timeline(), ref)
    assert all(v == 0.0 for v in report.scores().values())


def test_concat_joined_events_equal_single_summary():
    p = tl(("2023-01-01", "the dam"), ("2023-01-02", "breaks open"))
    r = tl(("2023-01-05", "the dam breaks open"))
    assert concat_f1(p, r, 1) == 1.0
    assert concat_f1(p, r, 2) == 1.0


def test_alignment_drops_zero_weight_pairs():
    pred, ref = CASES["disjoint"]
    a = align_dates(as_tl(pred), as_tl(ref))
    assert a.pairs == []


def test_report_roundtrip_and_table():
    pred, ref = CASES["two_date_fixture"]
    cfg = TokenizerConfig(stopword_removal=True)
    rep = evaluate(as_tl(pred), as_tl(ref), cfg)
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["tokenizer"] == {"lowercase": True, "stemming": False, "stopword_removal": True}
    assert MetricReport.from_dict(d) == rep
    table = render_table([("run", rep)])
    assert "Date F1" in table and "run" in table
    avg = mean_report([rep, evaluate(as_tl(ref), as_tl(ref), cfg)])
    assert avg.date_f1 == pytest.approx(0.75)


def test_tokenizer_options():
    assert TokenizerConfig().tokenize("The Dam_Breaks, 2023!") == ["the", "dam", "breaks", "2023"]
    assert TokenizerConfig(lowercase=False).tokenize("The Dam") == ["The", "Dam"]
    assert TokenizerConfig(stopword_removal=True).tokenize("the dam of the river") == ["dam", "river"]


def test_stemming_uses_porter():
    pytest.importorskip("nltk")
    toks = TokenizerConfig(stemming=True).tokenize("protests protesting")
    assert toks == ["protest", "protest"]


# ------------------------------------------------------------------ properties

WORDS = ["rain", "dam", "flood", "vote", "city", "fire", "storm", "aid", "troops", "court"]
_BASE = dt.date(2023, 1, 1)


@st.composite
def timelines(draw, max_dates=4):
    offsets = draw(st.lists(st.integers(0, 12), min_size=0, max_size=max_dates, unique=True))
    events = []
    for off in offsets:
        words = draw(st.lists(st.sampled_from(WORDS), min_size=1, max_size=5))
        events.append((str(_BASE + dt.timedelta(days=off)), " ".join(words)))
    return events


@settings(max_examples=150, deadline=None)
@given(timelines(), timelines())
def test_property_align_matches_exhaustive(pred, ref):
    p, r = as_tl(pred), as_tl(ref)
    for n in (1, 2):
        got = align_f1(p, r, n)
        cands = oracles.align_candidates(pred, ref, n)
        assert any(abs(got - c) <= 1e-9 for c in cands)
        assert concat_f1(p, r, n) == pytest.approx(oracles.concat(pred, ref, n), abs=1e-9)
        assert agree_f1(p, r, n) == pytest.approx(oracles.agree(pred, ref, n), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(timelines(), timelines())
def test_property_bounds_and_symmetry(pred, ref):
    p, r = as_tl(pred), as_tl(ref)
    rep = evaluate(p, r)
    for v in rep.scores().values():
        assert 0.0 <= v <= 1.0 + 1e-12
    swapped = evaluate(r, p)
    for key in ("concat_r1", "concat_r2", "agree_r1", "agree_r2", "date_f1"):
        assert getattr(rep, key) == pytest.approx(getattr(swapped, key), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(timelines(), st.randoms(use_true_random=False))
def test_property_order_invariance(pred, rnd):
    shuffled = list(pred)
    rnd.shuffle(shuffled)
    ref = [(d, "rain dam") for d, _ in pred[:2]]
    assert evaluate(as_tl(pred), as_tl(ref)) == evaluate(as_tl(shuffled), as_tl(ref))


@settings(max_examples=100, deadline=None)
@given(timelines(max_dates=4).filter(bool))
def test_property_identity_scores_one(events):
    t = as_tl(events)
    rep = evaluate(t, t)
    assert rep.date_f1 == 1.0
    assert rep.concat_r1 == pytest.approx(1.0)
    assert rep.agree_r1 == pytest.approx(1.0)
    assert rep.align_r1 == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(WORDS), st.lists(st.sampled_from(WORDS), min_size=1, max_size=6))
def test_property_agree_equals_concat_single_shared_date(_, words):
    p = tl(("2023-01-01", " ".join(words)))
    r = tl(("2023-01-01", " ".join(reversed(words)) + " rain"))
    for n in (1, 2):
        assert agree_f1(p, r, n) == pytest.approx(concat_f1(p, r, n), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(timelines(), timelines())
def test_property_date_f1_ignores_text(pred, ref):
    relabeled = [(d, "completely different words") for d, _ in pred]
    assert date_f1(as_tl(pred), as_tl(ref)) == date_f1(as_tl(relabeled), as_tl(ref))
