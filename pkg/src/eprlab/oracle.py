"""Exact same-color probabilities for instruction sets and time-dependent adversaries.

Everything here is rational arithmetic. An adversary programs each station
with a deterministic map ``f_station(setting, tick)``; per tick that is a
pair of instruction sets, 64 choices. Constraints and objective are sums of
per-tick terms, so the minimum over all programs is the sum of per-tick
minima. :func:`brute_force_min` re-derives the same numbers by enumerating
raw outcome bits without that decomposition.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .model import ALL_PAIRS, InstructionSet, SettingPair


class ExactProbability(Fraction):
    """A probability in lowest terms."""

    def __new__(cls, numerator=0, denominator=None):
        self = super().__new__(cls, numerator, denominator)
        if not 0 <= self <= 1:
            raise ValueError(f"{self} is not a probability")
        return self

    def __repr__(self) -> str:
        return f"ExactProbability({self.numerator}, {self.denominator})"

    def as_pair(self) -> list[int]:
        return [self.numerator, self.denominator]


class PcMode(str, enum.Enum):
    COUNTERFACTUAL = "COUNTERFACTUAL"
    REALIZED = "REALIZED"


class ChoiceMode(str, enum.Enum):
    FIXED_SCHEDULE = "FIXED_SCHEDULE"
    DELAYED_CHOICE = "DELAYED_CHOICE"


UNIFORM_RANDOM = "UNIFORM_RANDOM"


class OracleConfigError(ValueError):
    pass


def _pair_weights(weights: Mapping | None) -> dict[SettingPair, Fraction]:
    if weights is None:
        return {p: Fraction(1, 9) for p in ALL_PAIRS}
    w = {SettingPair.parse(k): Fraction(v) for k, v in weights.items()}
    if sum(w.values(), Fraction(0)) != 1 or any(v < 0 for v in w.values()):
        raise OracleConfigError("pair weights must be non-negative rationals summing to 1")
    return w


def enumerate_instruction_sets() -> list[InstructionSet]:
    return [InstructionSet(i) for i in range(8)]


def exact_same_color(s: InstructionSet, weights: Mapping | None = None) -> ExactProbability:
    """P(same color) when both stations follow ``s`` and pairs are drawn by ``weights``."""
    w = _pair_weights(weights)
    return ExactProbability(sum((wt for p, wt in w.items() if s.response(p.first) == s.response(p.second)), Fraction(0)))


def min_same_color_classic(weights: Mapping | None = None) -> tuple[ExactProbability, InstructionSet]:
    best = None
    for s in enumerate_instruction_sets():
        v = exact_same_color(s, weights)
        if best is None or v < best[0]:
            best = (v, s)
    return best


@dataclass(frozen=True)
class AdversarialSearchConfig:
    T: int
    schedule: tuple[SettingPair, ...] | str = UNIFORM_RANDOM
    pc_mode: PcMode = PcMode.COUNTERFACTUAL
    choice_mode: ChoiceMode = ChoiceMode.DELAYED_CHOICE
    weights: Mapping | None = None

    def __post_init__(self):
        object.__setattr__(self, "pc_mode", PcMode(self.pc_mode))
        object.__setattr__(self, "choice_mode", ChoiceMode(self.choice_mode))
        if self.T < 1:
            raise OracleConfigError("T must be at least 1")
        if self.pc_mode is PcMode.REALIZED and self.choice_mode is ChoiceMode.DELAYED_CHOICE:
            raise OracleConfigError(
                "REALIZED perfect correlation needs FIXED_SCHEDULE: realized constraints "
                "are undefined before the settings exist"
            )
        if self.schedule != UNIFORM_RANDOM:
            sched = tuple(SettingPair.parse(p) for p in self.schedule)
            if len(sched) != self.T:
                raise OracleConfigError(f"schedule has {len(sched)} entries, T is {self.T}")
            object.__setattr__(self, "schedule", sched)


# per-tick building blocks: agreement of station maps s1, s2 at settings x, y
_IDX = range(8)


def _agree(s1: int, x: int, s2: int, y: int) -> bool:
    return ((s1 >> (2 - x)) & 1) == ((s2 >> (2 - y)) & 1)


def _feasible(s1: int, s2: int, pc_mode: PcMode, pair: SettingPair | None) -> bool:
    if pc_mode is PcMode.COUNTERFACTUAL:
        return s1 == s2
    return pair is None or not pair.is_diagonal or _agree(s1, int(pair.first), s2, int(pair.second))


def _tick_min_fixed(pair: SettingPair, pc_mode: PcMode) -> Fraction:
    x, y = int(pair.first), int(pair.second)
    return min(
        Fraction(int(_agree(s1, x, s2, y)))
        for s1 in _IDX
        for s2 in _IDX
        if _feasible(s1, s2, pc_mode, pair)
    )


def _tick_min_delayed(pc_mode: PcMode, w: Mapping[SettingPair, Fraction]) -> Fraction:
    return min(
        sum((wt for p, wt in w.items() if _agree(s1, int(p.first), s2, int(p.second))), Fraction(0))
        for s1 in _IDX
        for s2 in _IDX
        if _feasible(s1, s2, pc_mode, None)
    )


def adversarial_min(cfg: AdversarialSearchConfig) -> ExactProbability:
    """Minimum same-color frequency over time-dependent deterministic programs.

    FIXED_SCHEDULE averages over the T scheduled trials (a UNIFORM_RANDOM
    schedule is drawn uniformly and revealed to the adversary, so the value is
    its expectation). DELAYED_CHOICE averages over independent pairs drawn
    with ``cfg.weights`` after the program is fixed.
    """
    if cfg.choice_mode is ChoiceMode.DELAYED_CHOICE:
        w = _pair_weights(cfg.weights)
        # every tick faces the same pair distribution, so the mean is the per-tick minimum
        return ExactProbability(_tick_min_delayed(cfg.pc_mode, w))
    if cfg.schedule == UNIFORM_RANDOM:
        w = _pair_weights(cfg.weights)
        per_tick = sum((wt * _tick_min_fixed(p, cfg.pc_mode) for p, wt in w.items()), Fraction(0))
        return ExactProbability(per_tick)
    total = sum((_tick_min_fixed(p, cfg.pc_mode) for p in cfg.schedule), Fraction(0))
    return ExactProbability(total / cfg.T)


# ---------------------------------------------------------------------------
# unpruned brute force


def _bits(codes: np.ndarray, station: int, setting: int, tick: int, n_lam: int = 1, lam: int = 0) -> np.ndarray:
    """Outcome bit for (station, setting, tick, lam) in a packed assignment."""
    pos = ((tick * n_lam + lam) * 2 + station) * 3 + setting
    return (codes >> np.uint64(pos)) & np.uint64(1)


def _brute_fixed(T, schedule, pc_mode, n_lam=1, rho=None, chunk=1 << 20):
    nbits = 6 * T * n_lam
    rho = rho or [Fraction(1)]
    den = math.lcm(*(r.denominator for r in rho))
    rho_int = [int(r * den) for r in rho]
    best = None
    for start in range(0, 1 << nbits, chunk):
        codes = np.arange(start, min(start + chunk, 1 << nbits), dtype=np.uint64)
        ok = np.ones(len(codes), dtype=bool)
        score = np.zeros(len(codes), dtype=np.int64)
        for lam in range(n_lam):
            for t in range(T):
                if pc_mode is PcMode.COUNTERFACTUAL:
                    for x in range(3):
                        ok &= _bits(codes, 0, x, t, n_lam, lam) == _bits(codes, 1, x, t, n_lam, lam)
                pair = schedule[t]
                a = _bits(codes, 0, int(pair.first), t, n_lam, lam)
                b = _bits(codes, 1, int(pair.second), t, n_lam, lam)
                if pc_mode is PcMode.REALIZED and pair.is_diagonal:
                    ok &= a == b
                score += rho_int[lam] * (a == b)
        if ok.any():
            m = int(score[ok].min())
            best = m if best is None else min(best, m)
    return Fraction(best, T * den)


def _brute_delayed(T, pc_mode, w, chunk=1 << 20):
    den = math.lcm(*(v.denominator for v in w.values()))
    nbits = 6 * T
    best = None
    for start in range(0, 1 << nbits, chunk):
        codes = np.arange(start, min(start + chunk, 1 << nbits), dtype=np.uint64)
        ok = np.ones(len(codes), dtype=bool)
        score = np.zeros(len(codes), dtype=np.int64)
        for t in range(T):
            for x in range(3):
                ok &= _bits(codes, 0, x, t) == _bits(codes, 1, x, t)
            for p, wt in w.items():
                a = _bits(codes, 0, int(p.first), t)
                b = _bits(codes, 1, int(p.second), t)
                score += int(wt * den) * (a == b)
        if ok.any():
            m = int(score[ok].min())
            best = m if best is None else min(best, m)
    return Fraction(best, T * den)


def brute_force_min(cfg: AdversarialSearchConfig, K: int = 1, rho: Sequence | None = None) -> ExactProbability:
    """Independent re-derivation of :func:`adversarial_min` by raw enumeration.

    Enumerates every assignment of outcome bits to (station, setting, tick)
    jointly, and with ``K > 1`` lets the program also depend on a source
    parameter with distribution ``rho``. Cost is 2**(6*T*K); intended for
    T*K <= 4.
    """
    if 6 * cfg.T * K > 24:
        raise OracleConfigError("brute force limited to 6*T*K <= 24 outcome bits")
    rho_f = [Fraction(1, K)] * K if rho is None else [Fraction(r) for r in rho]
    if cfg.choice_mode is ChoiceMode.DELAYED_CHOICE:
        if K != 1:
            raise OracleConfigError("source dependence is only brute-forced for fixed schedules")
        return ExactProbability(_brute_delayed(cfg.T, cfg.pc_mode, _pair_weights(cfg.weights)))
    if cfg.schedule == UNIFORM_RANDOM:
        w = _pair_weights(cfg.weights)
        total = Fraction(0)
        for sched in itertools.product(ALL_PAIRS, repeat=cfg.T):
            wt = Fraction(1)
            for p in sched:
                wt *= w.get(p, Fraction(0))
            if wt:
                total += wt * _brute_fixed(cfg.T, sched, cfg.pc_mode, K, rho_f)
        return ExactProbability(total)
    return ExactProbability(_brute_fixed(cfg.T, cfg.schedule, cfg.pc_mode, K, rho_f))
