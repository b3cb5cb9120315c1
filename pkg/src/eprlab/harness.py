"""Schedules, delayed choice, and trial execution under the locality contract."""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Sequence

import numpy as np

from . import kernel as kernels
from . import rng as keyed
from .model import (
    ALL_PAIRS,
    ModelError,
    Outcome,
    Setting,
    SettingPair,
    SourceDistribution,
    StationId,
    TrialRecord,
    TrialSchedule,
)
from .strategies import ContractError, LocalStrategy, QuantumReference, Strategy, emit, joint_respond, respond

SCHEDULE_TAG = 0x5C4ED


class ScheduleKind(str, enum.Enum):
    MERMIN_TWO_PAIR = "MERMIN_TWO_PAIR"
    ALL_NINE_UNIFORM = "ALL_NINE_UNIFORM"
    CUSTOM = "CUSTOM"


MERMIN_PAIRS = (SettingPair.parse("11"), SettingPair.parse("12"))


class ConfigurationError(ValueError):
    pass


class RunError(RuntimeError):
    """A strategy contract violation aborted the run."""

    def __init__(self, tick: int, message: str):
        super().__init__(f"tick {tick}: {message}")
        self.tick = tick


def schedule_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & keyed.MASK64, SCHEDULE_TAG])))


def build_schedule(
    kind: ScheduleKind | str,
    L: int,
    rng: np.random.Generator,
    entries: Sequence[tuple[int, SettingPair]] | None = None,
    delayed: bool = False,
) -> TrialSchedule:
    """Lay out ``L`` trials per setting pair on distinct ticks 0, 1, 2, ...

    The assignment of pairs to ticks is a uniformly random interleaving.
    ``CUSTOM`` takes an explicit ``entries`` list instead.
    """
    kind = ScheduleKind(kind)
    if L < 1:
        raise ConfigurationError("L must be at least 1")
    if kind is ScheduleKind.CUSTOM:
        if not entries:
            raise ConfigurationError("CUSTOM schedule requires an explicit entry list")
        ordered = sorted(entries, key=lambda e: e[0])
        ticks = np.array([int(t) for t, _ in ordered], dtype=np.int64)
        pairs = np.array([SettingPair.parse(p).index for _, p in ordered], dtype=np.int8)
        try:
            return TrialSchedule(ticks, pairs, L, delayed)
        except ModelError as exc:
            raise ConfigurationError(str(exc)) from exc
    pair_set = MERMIN_PAIRS if kind is ScheduleKind.MERMIN_TWO_PAIR else ALL_PAIRS
    pool = np.repeat(np.array([p.index for p in pair_set], dtype=np.int8), L)
    pairs = rng.permutation(pool)
    return TrialSchedule(np.arange(len(pairs), dtype=np.int64), pairs, L, delayed)


@dataclass(frozen=True)
class RunConfig:
    strategy: Strategy
    schedule_kind: ScheduleKind = ScheduleKind.ALL_NINE_UNIFORM
    L: int = 10
    delayed_choice: bool = False
    seed: int = 0
    source: SourceDistribution = field(default_factory=SourceDistribution.uniform)
    clock_offsets: tuple[int, int] = (0, 0)
    entries: tuple[tuple[int, SettingPair], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "schedule_kind", ScheduleKind(self.schedule_kind))
        if self.L < 1:
            raise ConfigurationError("L must be at least 1")
        if not 0 <= self.seed <= keyed.MASK64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if len(self.clock_offsets) != 2:
            raise ConfigurationError("clock_offsets needs one integer per station")
        object.__setattr__(self, "clock_offsets", tuple(int(o) for o in self.clock_offsets))

    def schedule(self) -> TrialSchedule:
        return build_schedule(
            self.schedule_kind, self.L, schedule_rng(self.seed), self.entries, self.delayed_choice
        )


@dataclass(frozen=True, eq=False)
class RunResult:
    """Column store of trial records; ``records`` materializes TrialRecords."""

    ticks: np.ndarray
    pairs: np.ndarray
    lam: np.ndarray
    out1: np.ndarray
    out2: np.ndarray
    ip1: np.ndarray | None
    ip2: np.ndarray | None
    config_echo: RunConfig
    nonlocal_: bool = False

    def __len__(self) -> int:
        return len(self.ticks)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RunResult):
            return NotImplemented
        cols = ("ticks", "pairs", "lam", "out1", "out2", "ip1", "ip2")
        for c in cols:
            a, b = getattr(self, c), getattr(other, c)
            if (a is None) != (b is None) or (a is not None and not np.array_equal(a, b)):
                return False
        return self.nonlocal_ == other.nonlocal_

    @property
    def records(self) -> list[TrialRecord]:
        return list(self.iter_records())

    def iter_records(self) -> Iterator[TrialRecord]:
        ip1 = self.ip1.tolist() if self.ip1 is not None else [None] * len(self)
        ip2 = self.ip2.tolist() if self.ip2 is not None else [None] * len(self)
        for t, p, lam, o1, o2, i1, i2 in zip(
            self.ticks.tolist(), self.pairs.tolist(), self.lam.tolist(),
            self.out1.tolist(), self.out2.tolist(), ip1, ip2,
        ):
            yield TrialRecord(t, ALL_PAIRS[p], lam, Outcome(o1), Outcome(o2), i1, i2)

    @property
    def trace(self) -> np.ndarray:
        """Audit trace: one (tick, lambda, iparam1, iparam2) row per trial."""
        if self.ip1 is None:
            raise ContractError("nonlocal runs carry no instrument-parameter trace")
        return np.column_stack([self.ticks, self.lam, self.ip1, self.ip2])

    @classmethod
    def from_records(cls, records: Sequence[TrialRecord], config: RunConfig, nonlocal_: bool = False) -> "RunResult":
        recs = sorted(records, key=lambda r: r.tick)
        ip_missing = any(r.iparam1 is None for r in recs)
        return cls(
            ticks=np.array([r.tick for r in recs], dtype=np.int64),
            pairs=np.array([r.pair.index for r in recs], dtype=np.int8),
            lam=np.array([r.lam for r in recs], dtype=np.int32),
            out1=np.array([int(r.outcome1) for r in recs], dtype=np.int8),
            out2=np.array([int(r.outcome2) for r in recs], dtype=np.int8),
            ip1=None if ip_missing else np.array([r.iparam1 for r in recs], dtype=np.int32),
            ip2=None if ip_missing else np.array([r.iparam2 for r in recs], dtype=np.int32),
            config_echo=config,
            nonlocal_=nonlocal_,
        )


def realized_pairs(cfg: RunConfig, schedule: TrialSchedule, backend=None) -> np.ndarray:
    """Pairs actually measured at each tick.

    Without delayed choice these are the scheduled pairs. With it, each tick
    draws from the pool of scheduled pairs not yet used, from the CHOICE
    stream only; emission never reads that stream, so the draw is made with
    no bearing on the already-emitted source parameter.
    """
    if not cfg.delayed_choice:
        return np.asarray(schedule.pairs, dtype=np.int8)
    backend = backend or kernels.default
    return backend.resolve_choices(cfg.seed, schedule.ticks, schedule.pairs)


def _check_views(cfg: RunConfig, ticks: np.ndarray):
    if len(ticks):
        for who, off in enumerate(cfg.clock_offsets):
            if int(ticks[0]) + off < 0:
                raise RunError(int(ticks[0]), f"station {who + 1} clock reads negative time")


def _chunks(n: int, workers: int) -> list[slice]:
    workers = max(1, min(workers, n or 1))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def run_experiment(cfg: RunConfig, workers: int = 1, backend: str | None = None) -> RunResult:
    """Run every scheduled trial through the batch kernel.

    Per trial: emit the source parameter, fix the setting pair (after
    emission under delayed choice), then evaluate each station from its own
    (setting, source parameter, clock) only. Trials are split over
    ``workers`` threads; all randomness is keyed by tick, so the result does
    not depend on the split.
    """
    be = kernels.get(backend)
    schedule = cfg.schedule()
    ticks = schedule.ticks
    pairs = realized_pairs(cfg, schedule, be)
    _check_views(cfg, ticks)
    strat = cfg.strategy
    K = cfg.source.K
    cdf = cfg.source.cdf

    if isinstance(strat, QuantumReference):
        def work(sl):
            return be.simulate_joint(
                cfg.seed, ticks[sl], pairs[sl], cdf, strat.same_setting_agree, strat.cross_setting_agree
            )
    elif isinstance(strat, LocalStrategy):
        try:
            p1 = strat.program(StationId.STATION1, K)
            p2 = strat.program(StationId.STATION2, K)
        except ContractError as exc:
            raise RunError(int(ticks[0]) if len(ticks) else 0, str(exc)) from exc
        off1, off2 = cfg.clock_offsets

        def work(sl):
            return be.simulate_local(cfg.seed, ticks[sl], pairs[sl], cdf, p1, off1, p2, off2)
    else:
        raise ContractError(f"unsupported strategy {strat!r}")

    slices = _chunks(len(ticks), workers)
    if len(slices) == 1:
        parts = [work(slices[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(slices)) as pool:
            parts = list(pool.map(work, slices))
    cols = [np.concatenate(c) for c in zip(*parts)]
    if isinstance(strat, QuantumReference):
        lam, out1, out2 = cols
        return RunResult(ticks, pairs, lam, out1, out2, None, None, cfg, nonlocal_=True)
    lam, out1, out2, ip1, ip2 = cols
    return RunResult(ticks, pairs, lam, out1, out2, ip1, ip2, cfg)


StationHook = Callable[[StationId, tuple], None]


def run_trials(cfg: RunConfig, on_station_call: StationHook | None = None) -> RunResult:
    """Trial-by-trial reference engine built on ``emit``/``respond``.

    Slow, but every station call goes through one boundary, and
    ``on_station_call(who, inputs)`` sees exactly what that station received.
    """
    schedule = cfg.schedule()
    pairs = realized_pairs(cfg, schedule, kernels.get("numpy"))
    _check_views(cfg, schedule.ticks)
    stream = keyed.KeyedStream(cfg.seed)
    strat = cfg.strategy
    recs = []
    for t, p in zip(schedule.ticks.tolist(), pairs.tolist()):
        lam = emit(cfg.source, t, stream)
        pair = ALL_PAIRS[p]
        if not strat.is_local:
            o1, o2 = joint_respond(strat, pair, t, stream)
            recs.append(TrialRecord(t, pair, lam.id, o1, o2, None, None))
            continue
        got = []
        for who, x in ((StationId.STATION1, pair.first), (StationId.STATION2, pair.second)):
            view = t + cfg.clock_offsets[who]
            inputs = (who, x, lam.id, view)
            if on_station_call is not None:
                on_station_call(who, inputs)
            try:
                got.append(respond(strat, who, x, lam, view, stream))
            except ContractError as exc:
                raise RunError(t, str(exc)) from exc
        (o1, ip1), (o2, ip2) = got
        recs.append(TrialRecord(t, pair, lam.id, o1, o2, ip1.id, ip2.id))
    return RunResult.from_records(recs, cfg, nonlocal_=not strat.is_local)


def rezero_clocks(result: RunResult, workers: int = 1, backend: str | None = None) -> RunResult:
    """Re-run with each station's clock reading zero at its first detection.

    A station's view of tick ``t`` is ``t + offset``; shifting the view so the
    first detection reads 0 sets each offset to ``-first_tick``. Source
    emission and setting choice are keyed by the global tick and unchanged.
    """
    if len(result) == 0:
        raise ValueError("cannot re-zero clocks of an empty result")
    first = int(result.ticks[0])
    cfg = replace(result.config_echo, clock_offsets=(-first, -first))
    return run_experiment(cfg, workers=workers, backend=backend)


def offset_covariant(strategy: Strategy, shift: int) -> bool:
    """Whether shifting station clocks by ``shift`` provably leaves outcomes unchanged."""
    if not isinstance(strategy, LocalStrategy):
        return False
    if strategy.tick_invariant:
        return True
    period = strategy.offset_period
    return period is not None and shift % period == 0
