"""Per-segment temporal rate selection.

Each segment ``i`` gets the rate ``c`` maximising

    (1 - alpha_i) * Q(c, x_i) + alpha_i * log2(c) * w

where the tolerance factor ``alpha_i`` grows with the segment's mean quality
and shrinks with its quality spread across rates. The objective is separable,
so the joint optimum is the per-segment argmax; :func:`brute_force_plan`
enumerates assignments to check that.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .codec import CodecConfig, reconstruct_at_rate
from .metrics import QualityKind, compressibility, psnr
from .tensor import SegmentedVideo

DEFAULT_W = 1.5
PLANNER_RATES = (4, 8, 16)
BRUTE_FORCE_MAX_N = 12
RANDOM_Q_RANGE = (20.0, 40.0)


@dataclass(frozen=True, eq=False)
class QualityMatrix:
    values: np.ndarray  # (N, R)
    rates: tuple[int, ...]
    kind: QualityKind = QualityKind.PSNR

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] != len(self.rates):
            raise ValueError(f"quality matrix shape {vals.shape} does not fit {len(self.rates)} rates")
        if not np.all(np.isfinite(vals)):
            raise ValueError("quality matrix has non-finite entries")
        if any(a >= b for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError(f"rates must be strictly ascending: {self.rates}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "rates", tuple(int(r) for r in self.rates))

    @property
    def N(self) -> int:
        return self.values.shape[0]

    def columns(self, rates) -> "QualityMatrix":
        """Restrict to ``rates`` (each must be present)."""
        missing = [r for r in rates if r not in self.rates]
        if missing:
            raise ValueError(f"quality matrix has no column for rate(s) {missing}")
        idx = [self.rates.index(r) for r in sorted(rates)]
        return QualityMatrix(self.values[:, idx], tuple(sorted(rates)), self.kind)

    def __eq__(self, other):
        if not isinstance(other, QualityMatrix):
            return NotImplemented
        return self.rates == other.rates and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class AlphaStats:
    mean: np.ndarray  # per segment
    std: np.ndarray  # per segment, population std over rates
    q_min: float
    q_max: float
    std_max: float

    @classmethod
    def from_matrix(cls, q: QualityMatrix) -> "AlphaStats":
        std = q.values.std(axis=1)
        return cls(
            mean=q.values.mean(axis=1),
            std=std,
            q_min=float(q.values.min()),
            q_max=float(q.values.max()),
            std_max=float(std.max()),
        )


def alpha(stats: AlphaStats, i: int) -> float:
    """Compression tolerance factor of segment ``i``, in ``[0, 1]``.

    Degenerate statistics fall back to fixed terms: 0.25 for the quality term
    when ``q_max == q_min`` and 0.5 for the spread term when ``std_max == 0``.
    """
    span = stats.q_max - stats.q_min
    if span > 0:
        level = 0.5 * (stats.mean[i] - stats.q_min) / span
    else:
        level = 0.25
    if stats.std_max > 0:
        spread = 0.5 * (1.0 - stats.std[i] / stats.std_max)
    else:
        spread = 0.5
    # float noise in the mean can land a hair outside the range
    return float(min(1.0, max(0.0, level + spread)))


def alphas(stats: AlphaStats) -> np.ndarray:
    return np.array([alpha(stats, i) for i in range(len(stats.mean))])


@dataclass
class CompressionPlan:
    rates: list[int]
    w: float
    score: float
    alphas: np.ndarray | None = field(default=None, repr=False)
    evaluations: int = 0

    def __len__(self) -> int:
        return len(self.rates)


def score_table(q: QualityMatrix, w: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-(segment, rate) objective values and the alphas they used."""
    a = alphas(AlphaStats.from_matrix(q))
    bonus = np.log2(np.array(q.rates, dtype=np.float64)) * w
    table = (1.0 - a)[:, None] * q.values + a[:, None] * bonus[None, :]
    return table, a


def _prepare(q: QualityMatrix, w: float, rates) -> QualityMatrix:
    if w < 0:
        raise ValueError(f"w must be non-negative, got {w}")
    return q.columns(rates)


def plan(q: QualityMatrix, w: float = DEFAULT_W, rates=PLANNER_RATES) -> CompressionPlan:
    """Per-segment argmax of the objective; ties go to the larger rate."""
    q = _prepare(q, w, rates)
    table, a = score_table(q, w)
    # argmax returns the first maximum, so scan the rates from largest down
    pick = table.shape[1] - 1 - np.argmax(table[:, ::-1], axis=1)
    chosen = [q.rates[k] for k in pick]
    score = 0.0
    for i, k in enumerate(pick):
        score += float(table[i, k])
    return CompressionPlan(chosen, w, score, a, evaluations=table.size)


def brute_force_plan(q: QualityMatrix, w: float = DEFAULT_W, rates=PLANNER_RATES) -> CompressionPlan:
    """Exhaustive search over all ``R**N`` assignments (N <= 12).

    Among equal maxima the lexicographically largest rate vector wins.
    """
    q = _prepare(q, w, rates)
    if q.N > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to N <= {BRUTE_FORCE_MAX_N}, got {q.N}")
    table, a = score_table(q, w)
    R = len(q.rates)
    # descending index order enumerates rate vectors lexicographically descending
    combos = np.array(list(itertools.product(range(R - 1, -1, -1), repeat=q.N)), dtype=np.intp)
    # compensated sums: a plain float total can round away a one-ulp edge that
    # decides a segment, turning a strict optimum into a false tie
    hi = np.zeros(len(combos))
    lo = np.zeros(len(combos))
    for i in range(q.N):
        term = table[i, combos[:, i]]
        s = hi + term
        bb = s - hi
        lo = lo + ((hi - (s - bb)) + (term - bb))
        hi = s
    top = hi + lo
    rest = lo - (top - hi)
    cand = np.flatnonzero(top == top.max())
    best = int(cand[np.flatnonzero(rest[cand] == rest[cand].max())[0]])
    chosen = [q.rates[k] for k in combos[best]]
    return CompressionPlan(chosen, w, float(hi[best]), a, evaluations=table.size)


def tercile_thresholds(bytes_per_pixel) -> tuple[float, float]:
    bpp = np.asarray(bytes_per_pixel, dtype=np.float64)
    return float(np.quantile(bpp, 1 / 3)), float(np.quantile(bpp, 2 / 3))


def tercile_plan(q: QualityMatrix, thresholds=None, w: float = DEFAULT_W) -> CompressionPlan:
    """Rate choice for compressibility-based quality.

    Segments in the lowest / middle / highest bytes-per-pixel tercile get
    16 / 8 / 4. ``thresholds`` default to this matrix's own terciles.
    """
    bpp = -q.values[:, 0]
    lo, hi = thresholds if thresholds is not None else tercile_thresholds(bpp)
    chosen = [16 if b <= lo else 8 if b <= hi else 4 for b in bpp]
    return CompressionPlan(chosen, w, float("nan"), None, evaluations=q.N)


def select_plan(q: QualityMatrix, w: float = DEFAULT_W, thresholds=None, rates=PLANNER_RATES) -> CompressionPlan:
    """Dispatch on the quality kind: tercile mapping for compressibility, argmax otherwise."""
    if q.kind is QualityKind.COMPRESS:
        return tercile_plan(q, thresholds, w)
    return plan(q, w, rates)


def build_quality_matrix(
    video: SegmentedVideo,
    rates=PLANNER_RATES,
    kind: QualityKind | str = QualityKind.PSNR,
    cfg: CodecConfig = CodecConfig(),
    seed: int = 0,
) -> QualityMatrix:
    kind = QualityKind(kind)
    rates = tuple(sorted(rates))
    bad = [r for r in rates if r not in cfg.analysis_rates]
    if bad:
        raise ValueError(f"rates {bad} not in analysis rates {cfg.analysis_rates}")
    N, R = video.N, len(rates)
    if kind is QualityKind.PSNR:
        values = np.array(
            [[psnr(seg, reconstruct_at_rate(seg, r, cfg)) for r in rates] for seg in video.segments]
        )
    elif kind is QualityKind.COMPRESS:
        bpp = np.array([compressibility(seg) for seg in video.segments])
        values = np.repeat(-bpp[:, None], R, axis=1)
    else:
        rng = np.random.default_rng(seed)
        values = rng.uniform(*RANDOM_Q_RANGE, size=(N, R))
    return QualityMatrix(values, rates, kind)
