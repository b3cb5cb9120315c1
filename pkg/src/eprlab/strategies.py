"""Hidden-variable programs: a source emitter and two station responders.

A local responder is called with ``(who, x, lam, t, rng)`` and nothing
else; there is no argument through which the remote setting could arrive.
The only nonlocal strategy, :class:`QuantumReference`, is sampled jointly
through :func:`joint_respond` and refuses the local entry points.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import rng as keyed
from .model import (
    SETTINGS,
    InstructionSet,
    InstrumentParameter,
    ModelError,
    Outcome,
    Setting,
    SettingPair,
    SourceDistribution,
    SourceParameter,
    StationId,
)


class ContractError(RuntimeError):
    """A strategy was used outside its contract (e.g. nonlocal via respond)."""


class Kind(str, enum.Enum):
    DETERMINISTIC_SET = "DETERMINISTIC_SET"
    MIXED_SET = "MIXED_SET"
    BELL_STATIC = "BELL_STATIC"
    TIME_DEPENDENT = "TIME_DEPENDENT"
    QUANTUM_REFERENCE = "QUANTUM_REFERENCE"


@dataclass(frozen=True, eq=False)
class StationProgram:
    """Table form of one station's responder, consumed by the batch kernels.

    ``iparam = table[x, view % P]`` (or a draw from ``stoch_cdf[x]`` on the
    station's keyed stream) and ``outcome = resp[iparam, lam]``.
    """

    table: np.ndarray  # int32 (3, P)
    resp: np.ndarray  # int8 (M, K)
    stoch_cdf: np.ndarray | None = None  # float64 (3, M)
    stream_key: int = 0


class Strategy:
    name: str
    kind: Kind
    is_local: bool = True

    def to_dict(self) -> dict:
        raise NotImplementedError


class LocalStrategy(Strategy):
    is_local = True
    #: respond() ignores t entirely
    tick_invariant = False
    #: respond() is unchanged under a shift of t by any multiple of this
    offset_period: int | None = None
    #: respond() consumes station-local randomness
    randomized = False

    def respond(self, who: StationId, x: Setting, lam: int, t: int, rng: keyed.KeyedStream):
        raise NotImplementedError

    def program(self, who: StationId, K: int) -> StationProgram:
        raise NotImplementedError


def _set_program(sets: Sequence[InstructionSet], K: int) -> StationProgram:
    if len(sets) not in (1, K):
        raise ContractError(f"need 1 or {K} instruction sets, got {len(sets)}")
    full = list(sets) * K if len(sets) == 1 else list(sets)
    resp = np.array([[int(s.response(x)) for s in full] for x in SETTINGS], dtype=np.int8)
    table = np.arange(3, dtype=np.int32).reshape(3, 1)
    return StationProgram(table=table, resp=resp)


def _pick(sets: Sequence[InstructionSet], lam: int) -> InstructionSet:
    if len(sets) == 1:
        return sets[0]
    if not 0 <= lam < len(sets):
        raise ContractError(f"no instruction set declared for source parameter {lam}")
    return sets[lam]


@dataclass(frozen=True, eq=False)
class InstructionSetStrategy(LocalStrategy):
    """Both stations follow the instruction set selected by the source parameter.

    ``DETERMINISTIC_SET`` carries a single set used for every source value;
    ``MIXED_SET`` carries one set per source value, so the source distribution
    induces a mixture over instruction sets.
    """

    name: str
    sets: tuple[InstructionSet, ...]
    kind: Kind = Kind.DETERMINISTIC_SET
    tick_invariant = True
    offset_period = 1

    def __post_init__(self):
        if not self.sets:
            raise ModelError("instruction-set strategy needs at least one set")
        if self.kind is Kind.DETERMINISTIC_SET and len(self.sets) != 1:
            raise ModelError("DETERMINISTIC_SET takes exactly one instruction set")

    def respond(self, who, x, lam, t, rng):
        s = _pick(self.sets, int(lam))
        return s.response(x), InstrumentParameter(int(x), StationId(who), Setting(x), int(t))

    def program(self, who, K):
        return _set_program(self.sets, K)

    def to_dict(self):
        if self.kind is Kind.DETERMINISTIC_SET:
            return {"kind": self.kind.value, "name": self.name, "set": str(self.sets[0])}
        return {"kind": self.kind.value, "name": self.name, "sets": [str(s) for s in self.sets]}


@dataclass(frozen=True, eq=False)
class BellStatic(LocalStrategy):
    """Tick-independent responders; each station has its own source-indexed sets."""

    name: str
    sets1: tuple[InstructionSet, ...]
    sets2: tuple[InstructionSet, ...]
    kind: Kind = field(default=Kind.BELL_STATIC, init=False)
    tick_invariant = True
    offset_period = 1

    def _sets(self, who):
        return self.sets1 if StationId(who) is StationId.STATION1 else self.sets2

    def respond(self, who, x, lam, t, rng):
        s = _pick(self._sets(who), int(lam))
        return s.response(x), InstrumentParameter(int(x), StationId(who), Setting(x), int(t))

    def program(self, who, K):
        return _set_program(self._sets(who), K)

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "name": self.name,
            "station1": [str(s) for s in self.sets1],
            "station2": [str(s) for s in self.sets2],
        }


@dataclass(frozen=True, eq=False)
class TimeDependentConfig:
    """Time- and setting-dependent instrument parameters.

    ``tables[(station, setting)]`` lists the instrument-parameter id for each
    tick residue ``t % period``. In stochastic mode the id is instead drawn
    from ``stochastic[(station, setting)]`` on the station's keyed stream;
    ``shared_stream`` makes both stations read the same stream, i.e. two
    synchronized computers running the same program. ``response[id][lam]``
    gives the outcome. Nothing here reads the source parameter when the
    instrument parameter is generated.
    """

    period: int
    tables: Mapping[tuple[StationId, Setting], tuple[int, ...]]
    response: tuple[tuple[int, ...], ...]
    stochastic: Mapping[tuple[StationId, Setting], tuple[float, ...]] | None = None
    shared_stream: bool = False

    def __post_init__(self):
        if self.period < 1:
            raise ModelError("period must be a positive integer")
        M = len(self.response)
        if M == 0:
            raise ModelError("response table is empty")
        widths = {len(r) for r in self.response} - {1}
        if len(widths) > 1:
            raise ModelError("response rows must be constant (one entry) or share one length")
        for row in self.response:
            for v in row:
                if v not in (1, -1):
                    raise ModelError(f"response entries must be +1/-1, got {v!r}")
        if self.stochastic is None:
            for who in StationId:
                for x in SETTINGS:
                    row = self.tables.get((who, x))
                    if row is None:
                        raise ModelError(f"missing table for station {who.value + 1}, setting {x.label}")
                    if len(row) != self.period:
                        raise ModelError(
                            f"table for station {who.value + 1}, setting {x.label} has "
                            f"{len(row)} entries, period is {self.period}"
                        )
                    if any(not 0 <= i < M for i in row):
                        raise ModelError(f"instrument parameter id outside [0, {M})")
        else:
            for who in StationId:
                for x in SETTINGS:
                    probs = self.stochastic.get((who, x))
                    if probs is None:
                        raise ModelError(f"missing probabilities for station {who.value + 1}, setting {x.label}")
                    if len(probs) != M or any(p < 0 for p in probs) or abs(sum(probs) - 1) > 1e-12:
                        raise ModelError(
                            f"probabilities for station {who.value + 1}, setting {x.label} "
                            f"must be a length-{M} probability vector"
                        )

    @property
    def n_params(self) -> int:
        return len(self.response)

    @property
    def width(self) -> int:
        return max(len(r) for r in self.response)

    def station_key(self, who: StationId) -> int:
        return 0 if self.shared_stream else int(who)


@dataclass(frozen=True, eq=False)
class TimeDependentStrategy(LocalStrategy):
    name: str
    config: TimeDependentConfig
    kind: Kind = field(default=Kind.TIME_DEPENDENT, init=False)

    @property
    def randomized(self) -> bool:  # type: ignore[override]
        return self.config.stochastic is not None

    @property
    def offset_period(self) -> int | None:  # type: ignore[override]
        return None if self.randomized else self.config.period

    def instrument_parameter(self, who: StationId, x: Setting, t: int, rng: keyed.KeyedStream) -> int:
        cfg = self.config
        if cfg.stochastic is not None:
            u = rng.uniform(keyed.iparam_stream(cfg.station_key(who), int(x)), t)
            cdf = np.cumsum(np.asarray(cfg.stochastic[(StationId(who), Setting(x))], dtype=np.float64))
            return keyed.categorical(u, cdf)
        return cfg.tables[(StationId(who), Setting(x))][t % cfg.period]

    def respond(self, who, x, lam, t, rng):
        ip = self.instrument_parameter(who, x, int(t), rng)
        row = self.config.response[ip]
        lam = int(lam)
        if len(row) == 1:
            v = row[0]
        elif 0 <= lam < len(row):
            v = row[lam]
        else:
            raise ContractError(f"response table has no column for source parameter {lam}")
        return Outcome(v), InstrumentParameter(ip, StationId(who), Setting(x), int(t))

    def program(self, who, K):
        cfg = self.config
        if cfg.width not in (1, K):
            raise ContractError(f"response table width {cfg.width} does not match K={K}")
        resp = np.array([row * K if len(row) == 1 else row for row in cfg.response], dtype=np.int8)
        if cfg.stochastic is None:
            table = np.array([cfg.tables[(StationId(who), x)] for x in SETTINGS], dtype=np.int32)
            return StationProgram(table=table, resp=resp)
        cdf = np.array(
            [np.cumsum(np.asarray(cfg.stochastic[(StationId(who), x)], dtype=np.float64)) for x in SETTINGS]
        )
        return StationProgram(
            table=np.zeros((3, 1), dtype=np.int32),
            resp=resp,
            stoch_cdf=cdf,
            stream_key=cfg.station_key(who),
        )

    def to_dict(self):
        cfg = self.config
        out: dict = {"kind": self.kind.value, "name": self.name, "period": cfg.period}
        if cfg.stochastic is None:
            out["tables"] = {
                f"station{who.value + 1}": {x.label: list(cfg.tables[(who, x)]) for x in SETTINGS}
                for who in StationId
            }
        else:
            out["stochastic"] = {
                f"station{who.value + 1}": {x.label: list(cfg.stochastic[(who, x)]) for x in SETTINGS}
                for who in StationId
            }
            out["shared_stream"] = cfg.shared_stream
        out["response"] = ["".join(Outcome(v).color for v in row) for row in cfg.response]
        return out


@dataclass(frozen=True, eq=False)
class QuantumReference(Strategy):
    """Nonlocal correlation-table sampler used only as a comparison target."""

    name: str
    same_setting_agree: float = 1.0
    cross_setting_agree: float = 0.25
    kind: Kind = field(default=Kind.QUANTUM_REFERENCE, init=False)
    is_local = False

    def __post_init__(self):
        for p in (self.same_setting_agree, self.cross_setting_agree):
            if not 0.0 <= p <= 1.0:
                raise ModelError(f"agreement probability {p!r} outside [0, 1]")

    def agree_probability(self, pair: SettingPair) -> float:
        return self.same_setting_agree if pair.is_diagonal else self.cross_setting_agree

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "name": self.name,
            "same_setting_agree": self.same_setting_agree,
            "cross_setting_agree": self.cross_setting_agree,
        }


def emit(dist: SourceDistribution, t: int, rng: keyed.KeyedStream) -> SourceParameter:
    """Draw the source parameter for tick ``t``; no setting enters the draw."""
    u = rng.uniform(keyed.EMIT, t)
    return SourceParameter(keyed.categorical(u, dist.cdf), dist.K)


def respond(s: Strategy, who: StationId, x: Setting, lam, t: int, rng: keyed.KeyedStream):
    if not s.is_local:
        raise ContractError(f"strategy {s.name!r} is nonlocal; use joint_respond")
    lam_id = lam.id if isinstance(lam, SourceParameter) else int(lam)
    return s.respond(StationId(who), Setting(x), lam_id, int(t), rng)


def joint_respond(s: Strategy, pair: SettingPair, t: int, rng: keyed.KeyedStream) -> tuple[Outcome, Outcome]:
    if not isinstance(s, QuantumReference):
        raise ContractError(f"joint_respond requires the quantum reference, got {s.kind.value}")
    a = Outcome.GREEN if rng.uniform(keyed.JOINT_MARGINAL, t) < 0.5 else Outcome.RED
    agree = rng.uniform(keyed.JOINT_AGREE, t) < s.agree_probability(pair)
    return a, (a if agree else Outcome(-a))


def counterfactual_table(s: Strategy, t: int, lam, rng: keyed.KeyedStream | None = None):
    """Probe both stations at all three settings with the same (t, lam)."""
    if not s.is_local:
        raise ContractError(f"strategy {s.name!r} is nonlocal; counterfactual probing is undefined")
    rng = rng or keyed.KeyedStream(0)
    maps = []
    for who in StationId:
        maps.append({x: respond(s, who, x, lam, t, rng)[0] for x in SETTINGS})
    return maps[0], maps[1]


def as_instruction_set(station_map: Mapping[Setting, Outcome]) -> InstructionSet:
    return InstructionSet(sum(1 << (2 - int(x)) for x, o in station_map.items() if o is Outcome.GREEN))
