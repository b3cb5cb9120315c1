"""Domain vocabulary: settings, outcomes, stations, instruction sets, schedules, records."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np


class ModelError(ValueError):
    """Raised when a domain value violates its invariants."""


class Setting(enum.IntEnum):
    S1 = 0
    S2 = 1
    S3 = 2

    @property
    def label(self) -> str:
        return str(self.value + 1)

    @classmethod
    def parse(cls, text) -> "Setting":
        if isinstance(text, Setting):
            return text
        s = str(text).strip().upper().lstrip("S")
        if s not in ("1", "2", "3"):
            raise ModelError(f"unknown setting {text!r}; expected 1, 2 or 3")
        return cls(int(s) - 1)


SETTINGS = (Setting.S1, Setting.S2, Setting.S3)


def check_direction(vec: Sequence[float], tol: float = 1e-12) -> tuple[float, float, float]:
    """Validate optional direction metadata attached to a setting."""
    if len(vec) != 3:
        raise ModelError("setting direction must have 3 components")
    norm = math.sqrt(sum(float(v) ** 2 for v in vec))
    if abs(norm - 1.0) > tol:
        raise ModelError(f"setting direction has norm {norm!r}, expected 1")
    return tuple(float(v) for v in vec)  # type: ignore[return-value]


class Outcome(enum.IntEnum):
    GREEN = 1
    RED = -1

    @property
    def color(self) -> str:
        return "G" if self is Outcome.GREEN else "R"

    @classmethod
    def parse(cls, value) -> "Outcome":
        if isinstance(value, str):
            v = value.strip().upper()
            if v == "G":
                return cls.GREEN
            if v == "R":
                return cls.RED
            raise ModelError(f"unknown outcome {value!r}; expected G or R")
        if value in (1, -1):
            return cls(int(value))
        raise ModelError(f"outcome must be +1 or -1, got {value!r}")


class StationId(enum.IntEnum):
    STATION1 = 0
    STATION2 = 1


@dataclass(frozen=True)
class SourceParameter:
    id: int
    K: int = 8

    def __post_init__(self):
        if self.K < 1 or not 0 <= self.id < self.K:
            raise ModelError(f"source parameter {self.id} outside [0, {self.K})")


@dataclass(frozen=True)
class InstrumentParameter:
    """A station-local parameter, always tagged with one (station, setting, tick)."""

    id: int
    station: StationId
    setting: Setting
    tick: int


@dataclass(frozen=True, order=True)
class InstructionSet:
    """Total map setting -> outcome, indexed 0..7.

    Setting S1 is the most significant of the three bits; a set bit means GREEN.
    Index 7 is GGG, index 0 is RRR, index 6 is GGR.
    """

    index: int

    def __post_init__(self):
        if not 0 <= self.index <= 7:
            raise ModelError(f"instruction set index {self.index} outside 0..7")

    def response(self, x: Setting) -> Outcome:
        bit = (self.index >> (2 - int(x))) & 1
        return Outcome.GREEN if bit else Outcome.RED

    @property
    def responses(self) -> dict[Setting, Outcome]:
        return {x: self.response(x) for x in SETTINGS}

    def __str__(self) -> str:
        return "".join(self.response(x).color for x in SETTINGS)

    @classmethod
    def parse(cls, text: str) -> "InstructionSet":
        s = str(text).strip().upper()
        if len(s) != 3 or set(s) - {"G", "R"}:
            raise ModelError(f"instruction set must be 3 characters over G/R, got {text!r}")
        return cls(sum(1 << (2 - i) for i, ch in enumerate(s) if ch == "G"))


def instruction_set_response(s: InstructionSet, x: Setting) -> Outcome:
    return s.response(x)


def index_to_instruction_set(i: int) -> InstructionSet:
    if not isinstance(i, (int, np.integer)) or not 0 <= i <= 7:
        raise IndexError(f"instruction set index {i!r} outside 0..7")
    return InstructionSet(int(i))


def instruction_set_to_index(s: InstructionSet) -> int:
    return s.index


@dataclass(frozen=True)
class SettingPair:
    first: Setting
    second: Setting

    @property
    def index(self) -> int:
        return 3 * int(self.first) + int(self.second)

    @property
    def label(self) -> str:
        return self.first.label + self.second.label

    @property
    def is_diagonal(self) -> bool:
        return self.first == self.second

    def __str__(self) -> str:
        return self.label

    @classmethod
    def from_index(cls, i: int) -> "SettingPair":
        return ALL_PAIRS[i]

    @classmethod
    def parse(cls, text) -> "SettingPair":
        if isinstance(text, SettingPair):
            return text
        if isinstance(text, (list, tuple)) and len(text) == 2:
            return cls(Setting.parse(text[0]), Setting.parse(text[1]))
        s = str(text).strip()
        if len(s) != 2:
            raise ModelError(f"setting pair must look like '12', got {text!r}")
        return cls(Setting.parse(s[0]), Setting.parse(s[1]))


ALL_PAIRS = tuple(SettingPair(a, b) for a in SETTINGS for b in SETTINGS)


@dataclass(frozen=True)
class SourceDistribution:
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if not w:
            raise ModelError("source distribution needs at least one weight")
        if any(x < 0 or not math.isfinite(x) for x in w):
            raise ModelError("source weights must be finite and non-negative")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ModelError(f"source weights sum to {math.fsum(w)!r}, expected 1")

    @property
    def K(self) -> int:
        return len(self.weights)

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.weights, dtype=np.float64))

    @classmethod
    def uniform(cls, K: int = 8) -> "SourceDistribution":
        return cls(tuple([1.0 / K] * K))

    @classmethod
    def point(cls, lam: int, K: int = 8) -> "SourceDistribution":
        w = [0.0] * K
        w[lam] = 1.0
        return cls(tuple(w))


@dataclass(frozen=True, eq=False)
class TrialSchedule:
    """Tick-ordered (tick, setting pair) assignments.

    Stored as columns: ``ticks`` (int64) and ``pairs`` (pair index 0..8).
    """

    ticks: np.ndarray
    pairs: np.ndarray
    pairs_per_setting: int
    delayed: bool = False
    counts: dict[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        ticks = np.ascontiguousarray(self.ticks, dtype=np.int64)
        pairs = np.ascontiguousarray(self.pairs, dtype=np.int8)
        ticks.setflags(write=False)
        pairs.setflags(write=False)
        object.__setattr__(self, "ticks", ticks)
        object.__setattr__(self, "pairs", pairs)
        if ticks.shape != pairs.shape or ticks.ndim != 1:
            raise ModelError("ticks and pairs must be 1-d columns of equal length")
        if len(ticks) and ticks[0] < 0:
            raise ModelError("ticks must be non-negative")
        if np.any(np.diff(ticks) <= 0):
            dup = ticks[1:][np.diff(ticks) == 0]
            if len(dup):
                raise ModelError(f"duplicate tick {int(dup[0])} in schedule")
            raise ModelError("schedule entries must be sorted by tick")
        if len(pairs) and (pairs.min() < 0 or pairs.max() > 8):
            raise ModelError("pair index outside 0..8")
        present = np.bincount(pairs, minlength=9)
        counts = {int(i): int(c) for i, c in enumerate(present) if c}
        L = self.pairs_per_setting
        bad = {ALL_PAIRS[i].label: c for i, c in counts.items() if c != L}
        if bad:
            raise ModelError(f"unbalanced schedule: expected {L} per pair, got {bad}")
        object.__setattr__(self, "counts", counts)

    def __len__(self) -> int:
        return len(self.ticks)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TrialSchedule)
            and self.pairs_per_setting == other.pairs_per_setting
            and self.delayed == other.delayed
            and np.array_equal(self.ticks, other.ticks)
            and np.array_equal(self.pairs, other.pairs)
        )

    @property
    def entries(self) -> Iterator[tuple[int, SettingPair, bool]]:
        for t, p in zip(self.ticks.tolist(), self.pairs.tolist()):
            yield t, ALL_PAIRS[p], self.delayed

    @property
    def pair_set(self) -> list[SettingPair]:
        return [ALL_PAIRS[i] for i in sorted(self.counts)]


@dataclass(frozen=True)
class TrialRecord:
    tick: int
    pair: SettingPair
    lam: int
    outcome1: Outcome
    outcome2: Outcome
    iparam1: int | None
    iparam2: int | None

    @property
    def same_color(self) -> bool:
        return self.outcome1 == self.outcome2
