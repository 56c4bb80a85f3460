"""Timeline evaluation: ROUGE-N F1 in concat / agreement / alignment modes, and date F1.

All ROUGE variants are micro-averaged over n-gram counts. Multiple events on
one date are joined into a single date summary before scoring.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from newsline.core import EventDate, Timeline
from newsline.kernels import overlap_matrix, sorted_overlap

_TOKEN = re.compile(r"[^\W_]+")

# Compact English function-word list, used only when stopword_removal is on.
STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because been
    before being below between both but by can could did do does doing down during
    each few for from further had has have having he her here hers herself him
    himself his how i if in into is it its itself just me more most my myself no
    nor not now of off on once only or other our ours ourselves out over own same
    she should so some such than that the their theirs them themselves then there
    these they this those through to too under until up very was we were what when
    where which while who whom why will with would you your yours yourself
    yourselves
    """.split()
)


def date_penalty(days: int) -> float:
    """Weight applied to an aligned pair whose dates differ by ``days``."""
    return 1.0 / (1.0 + abs(days))


@lru_cache(maxsize=1)
def _stemmer():
    try:
        from nltk.stem import PorterStemmer
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise ImportError("stemming needs nltk: pip install 'newsline[stem]'") from exc
    return PorterStemmer()


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    stemming: bool = False
    stopword_removal: bool = False

    def tokenize(self, text: str) -> list[str]:
        if self.lowercase:
            text = text.lower()
        tokens = _TOKEN.findall(text)
        if self.stopword_removal:
            tokens = [t for t in tokens if t.lower() not in STOPWORDS]
        if self.stemming:
            stem = _stemmer().stem
            tokens = [stem(t) for t in tokens]
        return tokens


DEFAULT_TOKENIZER = TokenizerConfig()


class _NgramCoder:
    """Interns n-grams to integers so overlaps reduce to sorted-array merges."""

    def __init__(self, cfg: TokenizerConfig):
        self.cfg = cfg
        self._ids: dict[tuple[str, ...], int] = {}

    def encode(self, text: str, n: int) -> np.ndarray:
        toks = self.cfg.tokenize(text)
        ids = self._ids
        out = np.empty(max(len(toks) - n + 1, 0), dtype=np.int64)
        for i in range(out.shape[0]):
            gram = tuple(toks[i : i + n])
            code = ids.get(gram)
            if code is None:
                code = ids[gram] = len(ids)
            out[i] = code
        out.sort()
        return out


def _f1(overlap: float, pred_total: float, ref_total: float) -> float:
    if overlap <= 0 or pred_total <= 0 or ref_total <= 0:
        return 0.0
    p = overlap / pred_total
    r = overlap / ref_total
    return float(2 * p * r / (p + r))


def _check_n(n: int) -> None:
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")


def rouge_f1(pred: str, ref: str, n: int = 1, cfg: TokenizerConfig = DEFAULT_TOKENIZER) -> float:
    """F1 of clipped n-gram overlap between two texts."""
    _check_n(n)
    coder = _NgramCoder(cfg)
    a = coder.encode(pred, n)
    b = coder.encode(ref, n)
    return _f1(sorted_overlap(a, b), a.shape[0], b.shape[0])


def _concat_text(t: Timeline) -> str:
    return " ".join(t.by_date().values())


def concat_f1(pred: Timeline, ref: Timeline, n: int = 1, cfg: TokenizerConfig = DEFAULT_TOKENIZER) -> float:
    return rouge_f1(_concat_text(pred), _concat_text(ref), n, cfg)


def _encode_dates(t: Timeline, coder: _NgramCoder, n: int) -> tuple[list[EventDate], list[np.ndarray]]:
    grouped = t.by_date()
    return list(grouped), [coder.encode(text, n) for text in grouped.values()]


def agree_f1(pred: Timeline, ref: Timeline, n: int = 1, cfg: TokenizerConfig = DEFAULT_TOKENIZER) -> float:
    """Overlap counted only between same-date summaries; totals span all dates."""
    _check_n(n)
    coder = _NgramCoder(cfg)
    p_dates, p_grams = _encode_dates(pred, coder, n)
    r_dates, r_grams = _encode_dates(ref, coder, n)
    ref_by_date = dict(zip(r_dates, r_grams))
    overlap = 0
    for d, grams in zip(p_dates, p_grams):
        other = ref_by_date.get(d)
        if other is not None:
            overlap += sorted_overlap(grams, other)
    p_total = sum(g.shape[0] for g in p_grams)
    r_total = sum(g.shape[0] for g in r_grams)
    return _f1(overlap, p_total, r_total)


@dataclass
class Alignment:
    pairs: list[tuple[int, int]]
    weights: np.ndarray  # unigram-F1 x date penalty, shape (pred dates, ref dates)
    penalties: np.ndarray


def align_dates(pred: Timeline, ref: Timeline, cfg: TokenizerConfig = DEFAULT_TOKENIZER) -> Alignment:
    """One-to-one date alignment maximizing summed (unigram F1 x date penalty)."""
    coder = _NgramCoder(cfg)
    p_dates, p_uni = _encode_dates(pred, coder, 1)
    r_dates, r_uni = _encode_dates(ref, coder, 1)
    penalties = np.array(
        [[date_penalty(pd.days_between(rd)) for rd in r_dates] for pd in p_dates], dtype=np.float64
    ).reshape(len(p_dates), len(r_dates))
    if not p_dates or not r_dates:
        return Alignment([], np.zeros_like(penalties), penalties)
    overlaps = overlap_matrix(p_uni, r_uni)
    p_tot = np.array([g.shape[0] for g in p_uni], dtype=np.float64)
    r_tot = np.array([g.shape[0] for g in r_uni], dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = p_tot[:, None] + r_tot[None, :]
        f1 = np.where(denom > 0, 2.0 * overlaps / np.where(denom > 0, denom, 1.0), 0.0)
    weights = f1 * penalties
    rows, cols = linear_sum_assignment(weights, maximize=True)
    pairs = [(int(r), int(c)) for r, c in zip(rows, cols) if weights[r, c] > 0]
    return Alignment(pairs, weights, penalties)


def align_f1(pred: Timeline, ref: Timeline, n: int = 1, cfg: TokenizerConfig = DEFAULT_TOKENIZER) -> float:
    """ROUGE over date-aligned summary pairs, each pair's overlap scaled by its date penalty."""
    _check_n(n)
    alignment = align_dates(pred, ref, cfg)
    coder = _NgramCoder(cfg)
    _, p_grams = _encode_dates(pred, coder, n)
    _, r_grams = _encode_dates(ref, coder, n)
    overlap = 0.0
    for p, r in alignment.pairs:
        overlap += sorted_overlap(p_grams[p], r_grams[r]) * alignment.penalties[p, r]
    p_total = sum(g.shape[0] for g in p_grams)
    r_total = sum(g.shape[0] for g in r_grams)
    return _f1(overlap, p_total, r_total)


def date_f1(pred: Timeline, ref: Timeline) -> float:
    dp = set(pred.dates)
    dr = set(ref.dates)
    return _f1(len(dp & dr), len(dp), len(dr))


@dataclass(frozen=True)
class MetricReport:
    concat_r1: float
    concat_r2: float
    agree_r1: float
    agree_r2: float
    align_r1: float
    align_r2: float
    date_f1: float
    tokenizer: TokenizerConfig = field(default=DEFAULT_TOKENIZER)

    SCORE_FIELDS = ("concat_r1", "concat_r2", "agree_r1", "agree_r2", "align_r1", "align_r2", "date_f1")

    def scores(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.SCORE_FIELDS}

    def to_dict(self) -> dict:
        d = dict(self.scores())
        d["tokenizer"] = asdict(self.tokenizer)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MetricReport:
        tok = TokenizerConfig(**d.get("tokenizer", {}))
        return cls(**{k: float(d[k]) for k in cls.SCORE_FIELDS}, tokenizer=tok)

    def to_table(self, label: str = "") -> str:
        return render_table([(label, self)])


def evaluate(pred: Timeline, ref: Timeline, cfg: TokenizerConfig = DEFAULT_TOKENIZER) -> MetricReport:
    return MetricReport(
        concat_r1=concat_f1(pred, ref, 1, cfg),
        concat_r2=concat_f1(pred, ref, 2, cfg),
        agree_r1=agree_f1(pred, ref, 1, cfg),
        agree_r2=agree_f1(pred, ref, 2, cfg),
        align_r1=align_f1(pred, ref, 1, cfg),
        align_r2=align_f1(pred, ref, 2, cfg),
        date_f1=date_f1(pred, ref),
        tokenizer=cfg,
    )


def mean_report(reports: Sequence[MetricReport]) -> MetricReport:
    if not reports:
        raise ValueError("no reports to average")
    tok = reports[0].tokenizer
    means = {k: float(np.mean([getattr(r, k) for r in reports])) for k in MetricReport.SCORE_FIELDS}
    return MetricReport(**means, tokenizer=tok)


def render_table(rows: Iterable[tuple[str, MetricReport]]) -> str:
    header = f"{'':<22}{'Concat R1':>10}{'R2':>7}{'Agree R1':>10}{'R2':>7}{'Align R1':>10}{'R2':>7}{'Date F1':>9}"
    lines = [header]
    for label, r in rows:
        lines.append(
            f"{label:<22}{r.concat_r1:>10.3f}{r.concat_r2:>7.3f}{r.agree_r1:>10.3f}{r.agree_r2:>7.3f}"
            f"{r.align_r1:>10.3f}{r.align_r2:>7.3f}{r.date_f1:>9.3f}"
        )
    return "\n".join(lines)
