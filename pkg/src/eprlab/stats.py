"""Same-color tallies, perfect-correlation checks, and independence tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from . import rng as keyed
from .model import ALL_PAIRS, SETTINGS, Outcome, SettingPair, StationId, TrialRecord, TrialSchedule
from .strategies import ContractError, Strategy, respond


class InsufficientDataError(ValueError):
    """A statistic needs observations that the records do not contain."""


class DegenerateInputError(ValueError):
    """Independence is undefined because a variable never varies."""


@dataclass(frozen=True, eq=False)
class CountsMatrix:
    """(same, diff) counts for each of the nine ordered setting pairs."""

    cells: np.ndarray  # int64 (9, 2)

    def __post_init__(self):
        c = np.asarray(self.cells, dtype=np.int64).reshape(9, 2).copy()
        if (c < 0).any():
            raise ValueError("counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "cells", c)

    @property
    def total(self) -> int:
        return int(self.cells.sum())

    def same(self, pair: SettingPair) -> int:
        return int(self.cells[pair.index, 0])

    def diff(self, pair: SettingPair) -> int:
        return int(self.cells[pair.index, 1])

    def n(self, pair: SettingPair) -> int:
        return int(self.cells[pair.index].sum())

    def __add__(self, other: "CountsMatrix") -> "CountsMatrix":
        return CountsMatrix(self.cells + other.cells)

    def __eq__(self, other) -> bool:
        return isinstance(other, CountsMatrix) and np.array_equal(self.cells, other.cells)

    @classmethod
    def zeros(cls) -> "CountsMatrix":
        return cls(np.zeros((9, 2), dtype=np.int64))


def tally(records) -> CountsMatrix:
    """Count same/different colors per setting pair.

    Accepts a RunResult (column form) or any iterable of TrialRecords.
    """
    if hasattr(records, "out1") and hasattr(records, "pairs"):
        same = records.out1 == records.out2
        pairs = records.pairs.astype(np.int64)
        s = np.bincount(pairs[same], minlength=9)
        d = np.bincount(pairs[~same], minlength=9)
        return CountsMatrix(np.column_stack([s, d]))
    cells = np.zeros((9, 2), dtype=np.int64)
    for r in records:
        cells[r.pair.index, 0 if r.outcome1 == r.outcome2 else 1] += 1
    return CountsMatrix(cells)


def _as_fraction(w) -> Fraction:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, float):
        return Fraction(repr(w))
    return Fraction(w)


def normalize_pair_weights(weights: Mapping) -> dict[SettingPair, Fraction]:
    out = {SettingPair.parse(k): _as_fraction(v) for k, v in weights.items()}
    if any(v < 0 for v in out.values()):
        raise ValueError("pair weights must be non-negative")
    total = sum(out.values(), Fraction(0))
    if abs(float(total) - 1.0) > 1e-12:
        raise ValueError(f"pair weights sum to {float(total)!r}, expected 1")
    return out


def uniform_pair_weights(pairs: Iterable[SettingPair] = ALL_PAIRS) -> dict[SettingPair, Fraction]:
    pairs = list(pairs)
    return {p: Fraction(1, len(pairs)) for p in pairs}


def overall_same_color(m: CountsMatrix, weights: Mapping) -> Fraction:
    """Weighted mean of per-pair same-color frequencies, as an exact fraction.

    A positive weight on a pair with no observations raises
    :class:`InsufficientDataError`; nothing is imputed.
    """
    w = normalize_pair_weights(weights)
    total = Fraction(0)
    for pair, wt in w.items():
        if wt == 0:
            continue
        n = m.n(pair)
        if n == 0:
            raise InsufficientDataError(f"pair {pair.label} has weight {wt} but no observations")
        total += wt * Fraction(m.same(pair), n)
    return total


def check_perfect_correlation(records) -> list[int]:
    """Ticks where equal settings produced different colors."""
    if hasattr(records, "out1") and hasattr(records, "pairs"):
        p = records.pairs.astype(np.int64)
        bad = ((p // 3) == (p % 3)) & (records.out1 != records.out2)
        return records.ticks[bad].tolist()
    return [r.tick for r in records if r.pair.is_diagonal and r.outcome1 != r.outcome2]


@dataclass(frozen=True)
class TimeVariabilityWitness:
    """Same station, setting and source parameter; different colors at two ticks."""

    tick_a: int
    tick_b: int
    setting: int
    lam: int

    def to_dict(self) -> dict:
        return {"tick_11": self.tick_a, "tick_12": self.tick_b, "setting": SETTINGS[self.setting].label, "lambda": self.lam}


def _closest_disagreeing(ta: np.ndarray, oa: np.ndarray, tb: np.ndarray, ob: np.ndarray):
    """Closest (ta_i, tb_j) with oa_i != ob_j; ties by smaller ta then tb."""
    best = None
    for color in (1, -1):
        a = ta[oa == color]
        b = tb[ob == -color]
        if not len(a) or not len(b):
            continue
        # the nearest b on either side of each a
        pos = np.searchsorted(b, a)
        for side in (pos - 1, pos):
            ok = (side >= 0) & (side < len(b))
            if not ok.any():
                continue
            aa, bb = a[ok], b[side[ok]]
            dist = np.abs(aa - bb)
            order = np.lexsort((bb, aa, dist))
            k = order[0]
            cand = (int(dist[k]), int(aa[k]), int(bb[k]))
            if best is None or cand < best:
                best = cand
    return None if best is None else (best[1], best[2])


def find_time_variability_witness(
    s: Strategy, schedule: TrialSchedule, lam, rng: keyed.KeyedStream | None = None
) -> TimeVariabilityWitness | None:
    """Search station 1 for a setting whose color at ``lam`` changes between a
    tick scheduled for pair 11 and one scheduled for pair 12.

    Settings are tried in order 1, 2, 3; for each, the closest such pair of
    ticks is returned.
    """
    if not s.is_local:
        raise ContractError(f"strategy {s.name!r} is nonlocal")
    rng = rng or keyed.KeyedStream(0)
    lam = int(getattr(lam, "id", lam))
    p11, p12 = SettingPair.parse("11").index, SettingPair.parse("12").index
    t11 = schedule.ticks[schedule.pairs == p11]
    t12 = schedule.ticks[schedule.pairs == p12]
    if not len(t11) or not len(t12):
        return None
    for x in SETTINGS:
        o11 = np.array([int(respond(s, StationId.STATION1, x, lam, t, rng)[0]) for t in t11.tolist()])
        o12 = np.array([int(respond(s, StationId.STATION1, x, lam, t, rng)[0]) for t in t12.tolist()])
        hit = _closest_disagreeing(t11, o11, t12, o12)
        if hit is not None:
            return TimeVariabilityWitness(hit[0], hit[1], int(x), lam)
    return None


def realized_time_variability_witness(result) -> TimeVariabilityWitness | None:
    """Time-variability witness read off realized records: station 1 at setting 1 with the
    same source parameter shows different colors on a pair-11 and a pair-12 trial.
    """
    p11, p12 = SettingPair.parse("11").index, SettingPair.parse("12").index
    best = None
    for lam in np.unique(result.lam).tolist():
        sel = result.lam == lam
        m11 = sel & (result.pairs == p11)
        m12 = sel & (result.pairs == p12)
        hit = _closest_disagreeing(result.ticks[m11], result.out1[m11], result.ticks[m12], result.out1[m12])
        if hit is None:
            continue
        cand = (abs(hit[0] - hit[1]), hit[0], hit[1], lam)
        if best is None or cand < best:
            best = cand
    if best is None:
        return None
    return TimeVariabilityWitness(best[1], best[2], 0, best[3])


@dataclass(frozen=True, eq=False)
class IndependenceReport:
    statistic: float
    dof: int
    p_value: float
    reject_at: float
    contingency: np.ndarray
    method: str = "chi-square"

    @property
    def reject(self) -> bool:
        return self.p_value < self.reject_at

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "alpha": self.reject_at,
            "reject": self.reject,
            "n": int(self.contingency.sum()),
            "contingency": self.contingency.tolist(),
        }


def contingency_table(x: Sequence, y: Sequence) -> np.ndarray:
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("traces must be 1-d and of equal length")
    xs, xi = np.unique(x, return_inverse=True)
    ys, yi = np.unique(y, return_inverse=True)
    if len(xs) < 2 or len(ys) < 2:
        raise DegenerateInputError("each trace needs at least two observed categories")
    table = np.zeros((len(xs), len(ys)), dtype=np.int64)
    np.add.at(table, (xi, yi), 1)
    return table


def _pearson(table: np.ndarray) -> float:
    n = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    return float(((table - expected) ** 2 / expected).sum())


def chi_square_independence(x: Sequence, y: Sequence, alpha: float = 0.05) -> IndependenceReport:
    """Pearson chi-square test of independence on paired categorical traces.

    Requires at least five observations per contingency cell on average.
    """
    table = contingency_table(x, y)
    n = int(table.sum())
    if n < 5 * table.size:
        raise InsufficientDataError(f"{n} observations for {table.size} cells; need at least {5 * table.size}")
    stat = _pearson(table)
    dof = (table.shape[0] - 1) * (table.shape[1] - 1)
    p = float(sps.chi2.sf(stat, dof))
    return IndependenceReport(stat, dof, min(max(p, 0.0), 1.0), alpha, table)


def permutation_independence(
    x: Sequence, y: Sequence, n_shuffles: int = 10_000, seed: int = 0, alpha: float = 0.05
) -> IndependenceReport:
    """Permutation test on the chi-square statistic, for small samples."""
    table = contingency_table(x, y)
    stat = _pearson(table)
    x = np.unique(np.asarray(x), return_inverse=True)[1]
    y = np.unique(np.asarray(y), return_inverse=True)[1]
    shape = table.shape
    gen = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_shuffles):
        t = np.zeros(shape, dtype=np.int64)
        np.add.at(t, (x, gen.permutation(y)), 1)
        if _pearson(t) >= stat - 1e-12:
            hits += 1
    p = (hits + 1) / (n_shuffles + 1)
    dof = (shape[0] - 1) * (shape[1] - 1)
    return IndependenceReport(stat, dof, p, alpha, table, method="permutation")


def wilson_interval(k: int, n: int, conf: float = 0.95) -> tuple[float, float]:
    if n < 1:
        raise ValueError("Wilson interval needs n >= 1")
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    z = float(sps.norm.ppf(0.5 + conf / 2))
    p = k / n
    z2n = z * z / n
    centre = (p + z2n / 2) / (1 + z2n)
    half = z * math.sqrt(p * (1 - p) / n + z2n / (4 * n)) / (1 + z2n)
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # guard the endpoints against rounding so the interval always holds k/n
    return min(lo, p), max(hi, p)


@dataclass(frozen=True)
class PairFrequency:
    pair: SettingPair
    same: int
    n: int
    interval: tuple[float, float]

    @property
    def frequency(self) -> float:
        return self.same / self.n


@dataclass(frozen=True)
class CorrelationReport:
    pairs: tuple[PairFrequency, ...]
    overall: Fraction
    weights: dict
    perfect_correlation_violations: list
    time_variability_witness: TimeVariabilityWitness | None
    conf: float = 0.95


def correlation_report(result, weights: Mapping, conf: float = 0.95) -> CorrelationReport:
    m = tally(result)
    freqs = tuple(
        PairFrequency(p, m.same(p), m.n(p), wilson_interval(m.same(p), m.n(p), conf))
        for p in ALL_PAIRS
        if m.n(p)
    )
    return CorrelationReport(
        pairs=freqs,
        overall=overall_same_color(m, weights),
        weights=normalize_pair_weights(weights),
        perfect_correlation_violations=check_perfect_correlation(result),
        time_variability_witness=realized_time_variability_witness(result),
        conf=conf,
    )
