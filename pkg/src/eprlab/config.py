"""Run-configuration files (YAML, version 1).

Parsing is strict: unknown keys are errors, and every problem found is
reported together, each prefixed with the line it came from.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import yaml

from .harness import RunConfig, ScheduleKind
from .model import ALL_PAIRS, SETTINGS, InstructionSet, ModelError, Outcome, Setting, SettingPair, SourceDistribution, StationId
from .oracle import UNIFORM_RANDOM, AdversarialSearchConfig, ChoiceMode, OracleConfigError, PcMode
from .strategies import (
    BellStatic,
    TimeDependentStrategy,
    TimeDependentConfig,
    InstructionSetStrategy,
    Kind,
    QuantumReference,
    Strategy,
)

VERSION = 1


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        errors = sorted(errors, key=_line_of)
        super().__init__("\n".join(errors))
        self.errors = errors


def _line_of(msg: str) -> int:
    m = re.match(r"line (\d+):", msg)
    return int(m.group(1)) if m else 0


@dataclass(frozen=True)
class Outputs:
    dir: str = "out"
    records: str = "records.jsonl"
    report: str = "report.json"
    csv: str | None = None


@dataclass(frozen=True, eq=False)
class ConfigFile:
    version: int
    run: RunConfig
    pair_weights: dict[SettingPair, Fraction]
    alpha: float = 0.05
    workers: int = 1
    outputs: Outputs = field(default_factory=Outputs)
    oracle: tuple[AdversarialSearchConfig, ...] = ()

    @property
    def strategy(self) -> Strategy:
        return self.run.strategy

    def to_dict(self) -> dict:
        run = self.run
        d_run: dict[str, Any] = {
            "schedule": run.schedule_kind.value,
            "L": run.L,
            "delayed_choice": run.delayed_choice,
            "seed": run.seed,
            "source": {"weights": list(run.source.weights)},
            "clock_offsets": list(run.clock_offsets),
        }
        if run.entries is not None:
            d_run["entries"] = [[t, p.label] for t, p in run.entries]
        d_run["pair_weights"] = {p.label: str(w) for p, w in self.pair_weights.items()}
        d_run["alpha"] = self.alpha
        d_run["workers"] = self.workers
        out: dict[str, Any] = {"version": self.version, "run": d_run, "strategy": self.strategy.to_dict()}
        outputs = {"dir": self.outputs.dir, "records": self.outputs.records, "report": self.outputs.report}
        if self.outputs.csv is not None:
            outputs["csv"] = self.outputs.csv
        out["outputs"] = outputs
        if self.oracle:
            out["oracle"] = [_oracle_dict(o) for o in self.oracle]
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfigFile) and self.to_dict() == other.to_dict()


def _oracle_dict(o: AdversarialSearchConfig) -> dict:
    sched = o.schedule if o.schedule == UNIFORM_RANDOM else [p.label for p in o.schedule]
    d = {"T": o.T, "schedule": sched, "pc_mode": o.pc_mode.value, "choice_mode": o.choice_mode.value}
    if o.weights is not None:
        d["weights"] = {SettingPair.parse(k).label: str(Fraction(v)) for k, v in o.weights.items()}
    return d


def render(cfg: ConfigFile) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------------------
# line tracking


def _line_map(node, path=(), out=None) -> dict[tuple, int]:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_map(v, path + (key,), out)
            out[path + (key,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Checker:
    def __init__(self, lines: dict[tuple, int]):
        self.lines = lines
        self.errors: list[str] = []

    def line(self, path) -> int | None:
        path = tuple(str(p) if not isinstance(p, int) else p for p in path)
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path)

    def err(self, path, msg: str):
        dotted = ".".join(str(p) for p in path) or "<root>"
        ln = self.line(path)
        prefix = f"line {ln}: " if ln is not None else ""
        self.errors.append(f"{prefix}{dotted}: {msg}")

    def mapping(self, value, path, allowed: set[str], required: set[str] = frozenset()) -> dict | None:
        if not isinstance(value, dict):
            self.err(path, "expected a mapping")
            return None
        for k in value:
            if str(k) not in allowed:
                self.err(path + (str(k),), "unknown key")
        for k in sorted(required - {str(k) for k in value}):
            self.err(path, f"missing required field '{k}'")
        return {str(k): v for k, v in value.items()}

    def integer(self, value, path, minimum=None) -> int | None:
        if isinstance(value, bool) or not isinstance(value, int):
            self.err(path, f"expected an integer, got {value!r}")
            return None
        if minimum is not None and value < minimum:
            self.err(path, f"must be >= {minimum}")
            return None
        return value

    def boolean(self, value, path) -> bool | None:
        if not isinstance(value, bool):
            self.err(path, f"expected true/false, got {value!r}")
            return None
        return value

    def number(self, value, path) -> Fraction | None:
        try:
            if isinstance(value, bool):
                raise ValueError
            if isinstance(value, float):
                if not math.isfinite(value):
                    raise ValueError
                return Fraction(repr(value))
            return Fraction(str(value).strip())
        except (ValueError, ZeroDivisionError):
            self.err(path, f"expected a number or fraction, got {value!r}")
            return None

    def wrap(self, path, fn, *args):
        try:
            return fn(*args)
        except (ModelError, OracleConfigError, ValueError) as exc:
            self.err(path, str(exc))
            return None


# ---------------------------------------------------------------------------
# sections


def _source(c: _Checker, v, path) -> SourceDistribution | None:
    if v is None:
        return SourceDistribution.uniform(8)
    m = c.mapping(v, path, {"K", "weights"})
    if m is None:
        return None
    K = c.integer(m["K"], path + ("K",), 1) if "K" in m else None
    w = m.get("weights", "uniform")
    if w == "uniform":
        return SourceDistribution.uniform(K or 8)
    if not isinstance(w, list):
        c.err(path + ("weights",), "expected 'uniform' or a list of probabilities")
        return None
    vals = [c.number(x, path + ("weights", i)) for i, x in enumerate(w)]
    if any(x is None for x in vals):
        return None
    if K is not None and K != len(vals):
        c.err(path + ("K",), f"K={K} but {len(vals)} weights given")
        return None
    return c.wrap(path + ("weights",), SourceDistribution, tuple(float(x) for x in vals))


def _pair_weights(c: _Checker, v, path, default_pairs) -> dict | None:
    if v is None or v == "uniform":
        return {p: Fraction(1, len(default_pairs)) for p in default_pairs}
    if not isinstance(v, dict):
        c.err(path, "expected 'uniform' or a mapping pair -> weight")
        return None
    out = {}
    for k, x in v.items():
        pair = c.wrap(path + (str(k),), SettingPair.parse, str(k))
        w = c.number(x, path + (str(k),))
        if pair is None or w is None:
            return None
        if w < 0:
            c.err(path + (str(k),), "weight must be non-negative")
            return None
        out[pair] = w
    total = sum(out.values(), Fraction(0))
    if abs(float(total) - 1.0) > 1e-12:
        c.err(path, f"pair weights sum to {float(total):g}, expected 1")
        return None
    return out


def _sets(c: _Checker, v, path) -> tuple[InstructionSet, ...] | None:
    items = v if isinstance(v, list) else [v]
    out = [c.wrap(path + ((i,) if isinstance(v, list) else ()), InstructionSet.parse, x) for i, x in enumerate(items)]
    if not items or any(x is None for x in out):
        if not items:
            c.err(path, "needs at least one instruction set")
        return None
    return tuple(out)


def _station_tables(c: _Checker, v, path, kind: str):
    m = c.mapping(v, path, {"station1", "station2"}, {"station1", "station2"})
    if m is None:
        return None
    out = {}
    for who in StationId:
        key = f"station{who.value + 1}"
        block = m.get(key)
        if block == "mirror":
            if who is StationId.STATION1:
                c.err(path + (key,), "station1 cannot mirror itself")
                return None
            block = m["station1"]
        bm = c.mapping(block, path + (key,), {"1", "2", "3"}, {"1", "2", "3"})
        if bm is None:
            return None
        for x in SETTINGS:
            row = bm.get(x.label)
            if not isinstance(row, list) or not row:
                c.err(path + (key, x.label), f"expected a non-empty list of {kind}")
                return None
            if kind == "ids":
                vals = [c.integer(r, path + (key, x.label, i), 0) for i, r in enumerate(row)]
            else:
                vals = [c.number(r, path + (key, x.label, i)) for i, r in enumerate(row)]
            if any(r is None for r in vals):
                return None
            out[(who, x)] = tuple(vals) if kind == "ids" else tuple(float(r) for r in vals)
    return out


def _response(c: _Checker, v, path):
    if not isinstance(v, list) or not v:
        c.err(path, "expected a list of rows over G/R (one row per instrument parameter id)")
        return None
    rows = []
    for i, row in enumerate(v):
        try:
            if isinstance(row, str):
                rows.append(tuple(int(Outcome.parse(ch)) for ch in row))
            elif isinstance(row, list):
                rows.append(tuple(int(Outcome.parse(x)) for x in row))
            else:
                raise ModelError(f"bad response row {row!r}")
        except ModelError as exc:
            c.err(path + (i,), str(exc))
            return None
    return tuple(rows)


def _strategy(c: _Checker, v, path) -> Strategy | None:
    if not isinstance(v, dict) or "kind" not in v:
        c.err(path, "strategy block needs a 'kind'")
        return None
    try:
        kind = Kind(str(v["kind"]))
    except ValueError:
        c.err(path + ("kind",), f"unknown strategy kind {v['kind']!r}; one of {[k.value for k in Kind]}")
        return None
    name = str(v.get("name", kind.value.lower()))
    if kind is Kind.DETERMINISTIC_SET:
        m = c.mapping(v, path, {"kind", "name", "set"}, {"set"})
        if m is None or "set" not in m:
            return None
        sets = _sets(c, m["set"], path + ("set",))
        if sets is None:
            return None
        if len(sets) != 1:
            c.err(path + ("set",), "DETERMINISTIC_SET takes a single instruction set; use MIXED_SET for a list")
            return None
        return InstructionSetStrategy(name, sets, Kind.DETERMINISTIC_SET)
    if kind is Kind.MIXED_SET:
        m = c.mapping(v, path, {"kind", "name", "sets"}, {"sets"})
        if m is None or "sets" not in m:
            return None
        sets = _sets(c, m["sets"], path + ("sets",))
        return None if sets is None else InstructionSetStrategy(name, sets, Kind.MIXED_SET)
    if kind is Kind.BELL_STATIC:
        m = c.mapping(v, path, {"kind", "name", "station1", "station2"}, {"station1", "station2"})
        if m is None or not {"station1", "station2"} <= set(m):
            return None
        s1 = _sets(c, m["station1"], path + ("station1",))
        s2 = _sets(c, m["station2"], path + ("station2",))
        return None if s1 is None or s2 is None else BellStatic(name, s1, s2)
    if kind is Kind.TIME_DEPENDENT:
        m = c.mapping(
            v, path, {"kind", "name", "period", "tables", "stochastic", "shared_stream", "response"}, {"response"}
        )
        if m is None or "response" not in m:
            return None
        if ("tables" in m) == ("stochastic" in m):
            c.err(path, "TIME_DEPENDENT needs exactly one of 'tables' or 'stochastic'")
            return None
        response = _response(c, m["response"], path + ("response",))
        period = c.integer(m.get("period", 1), path + ("period",), 1)
        shared = c.boolean(m.get("shared_stream", False), path + ("shared_stream",))
        if "tables" in m:
            tables = _station_tables(c, m["tables"], path + ("tables",), "ids")
            stoch = None
        else:
            tables, stoch = {}, _station_tables(c, m["stochastic"], path + ("stochastic",), "probabilities")
        if response is None or period is None or shared is None or tables is None or ("stochastic" in m and stoch is None):
            return None
        cfg = c.wrap(path, TimeDependentConfig, period, tables, response, stoch, shared)
        return None if cfg is None else TimeDependentStrategy(name, cfg)
    m = c.mapping(v, path, {"kind", "name", "same_setting_agree", "cross_setting_agree"})
    if m is None:
        return None
    same = c.number(m.get("same_setting_agree", 1.0), path + ("same_setting_agree",))
    cross = c.number(m.get("cross_setting_agree", 0.25), path + ("cross_setting_agree",))
    if same is None or cross is None:
        return None
    return c.wrap(path, QuantumReference, name, float(same), float(cross))


def _oracle(c: _Checker, v, path) -> tuple[AdversarialSearchConfig, ...]:
    items = v if isinstance(v, list) else [v]
    out = []
    for i, item in enumerate(items):
        p = path + ((i,) if isinstance(v, list) else ())
        m = c.mapping(item, p, {"T", "schedule", "pc_mode", "choice_mode", "weights"}, {"pc_mode", "choice_mode"})
        if m is None:
            continue
        sched = m.get("schedule", UNIFORM_RANDOM)
        if sched == "ALL_NINE":
            sched = [q.label for q in ALL_PAIRS]
        if sched != UNIFORM_RANDOM and not isinstance(sched, list):
            c.err(p + ("schedule",), "expected UNIFORM_RANDOM, ALL_NINE or a list of pairs")
            continue
        T = m.get("T", len(sched) if isinstance(sched, list) else None)
        T = c.integer(T, p + ("T",), 1) if T is not None else None
        if T is None:
            if "T" not in m:
                c.err(p, "missing required field 'T'")
            continue
        try:
            pc = PcMode(str(m["pc_mode"]))
            ch = ChoiceMode(str(m["choice_mode"]))
        except ValueError as exc:
            c.err(p, str(exc))
            continue
        weights = None
        if "weights" in m:
            weights = _pair_weights(c, m["weights"], p + ("weights",), ALL_PAIRS)
            if weights is None:
                continue
            if sum(weights.values(), Fraction(0)) != 1:
                c.err(p + ("weights",), "oracle weights must sum to exactly 1 (use fractions like 1/9)")
                continue
        cfg = c.wrap(p, AdversarialSearchConfig, T, sched if sched == UNIFORM_RANDOM else tuple(sched), pc, ch, weights)
        if cfg is not None:
            out.append(cfg)
    return tuple(out)


def parse_config(text: str) -> ConfigFile:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"invalid YAML: {exc}"]) from None
    if node is None:
        raise ConfigError(["empty configuration"])
    c = _Checker(_line_map(node))
    top = c.mapping(data, (), {"version", "run", "strategy", "outputs", "oracle"}, {"version", "run", "strategy"})
    if top is None:
        raise ConfigError(c.errors)
    if "version" in top and top["version"] != VERSION:
        c.err(("version",), f"unsupported version {top['version']!r}; expected {VERSION}")

    strategy = _strategy(c, top["strategy"], ("strategy",)) if "strategy" in top else None

    run = c.mapping(
        top.get("run", {}),
        ("run",),
        {"schedule", "L", "delayed_choice", "seed", "source", "clock_offsets", "entries", "pair_weights", "alpha", "workers"},
        {"schedule", "L", "seed"},
    ) or {}
    kind = None
    if "schedule" in run:
        try:
            kind = ScheduleKind(str(run["schedule"]))
        except ValueError:
            c.err(("run", "schedule"), f"unknown schedule {run['schedule']!r}; one of {[k.value for k in ScheduleKind]}")
    L = c.integer(run["L"], ("run", "L"), 1) if "L" in run else None
    seed = c.integer(run["seed"], ("run", "seed"), 0) if "seed" in run else None
    if seed is not None and seed >= 1 << 64:
        c.err(("run", "seed"), "seed must fit in 64 bits")
    delayed = c.boolean(run.get("delayed_choice", False), ("run", "delayed_choice"))
    source = _source(c, run.get("source"), ("run", "source"))
    offsets = run.get("clock_offsets", [0, 0])
    if not (isinstance(offsets, list) and len(offsets) == 2 and all(isinstance(o, int) and not isinstance(o, bool) for o in offsets)):
        c.err(("run", "clock_offsets"), "expected two integers")
        offsets = None
    entries = None
    if "entries" in run:
        raw = run["entries"]
        if not isinstance(raw, list):
            c.err(("run", "entries"), "expected a list of [tick, pair]")
        else:
            entries = []
            for i, e in enumerate(raw):
                if not (isinstance(e, list) and len(e) == 2):
                    c.err(("run", "entries", i), "expected [tick, pair]")
                    continue
                t = c.integer(e[0], ("run", "entries", i), 0)
                p = c.wrap(("run", "entries", i), SettingPair.parse, str(e[1]))
                if t is not None and p is not None:
                    entries.append((t, p))
            entries = tuple(entries)
    if kind is ScheduleKind.CUSTOM and not entries:
        c.err(("run",), "CUSTOM schedule requires 'entries'")
    if kind is not None and kind is not ScheduleKind.CUSTOM and "entries" in run:
        c.err(("run", "entries"), "entries are only allowed with a CUSTOM schedule")

    if kind is ScheduleKind.MERMIN_TWO_PAIR:
        default_pairs = [SettingPair.parse("11"), SettingPair.parse("12")]
    elif kind is ScheduleKind.CUSTOM and entries:
        default_pairs = sorted({p for _, p in entries}, key=lambda p: p.index)
    else:
        default_pairs = list(ALL_PAIRS)
    pair_weights = _pair_weights(c, run.get("pair_weights"), ("run", "pair_weights"), default_pairs)
    alpha = c.number(run.get("alpha", 0.05), ("run", "alpha"))
    if alpha is not None and not 0 < alpha < 1:
        c.err(("run", "alpha"), "must lie in (0, 1)")
    workers = c.integer(run.get("workers", 1), ("run", "workers"), 1)

    outputs = Outputs()
    if "outputs" in top:
        om = c.mapping(top["outputs"], ("outputs",), {"dir", "records", "report", "csv"})
        if om is not None:
            for k, val in om.items():
                if not isinstance(val, str) or not val:
                    c.err(("outputs", k), "expected a non-empty path string")
            outputs = Outputs(**{k: str(v) for k, v in om.items()})

    oracle = _oracle(c, top["oracle"], ("oracle",)) if "oracle" in top else ()

    run_cfg = None
    if not c.errors and strategy is not None:
        run_cfg = c.wrap(
            ("run",),
            RunConfig,
            strategy,
            kind,
            L,
            delayed,
            seed,
            source,
            tuple(offsets),
            entries,
        )
        if run_cfg is not None and kind is ScheduleKind.CUSTOM:
            c.wrap(("run", "entries"), run_cfg.schedule)
    if c.errors or run_cfg is None:
        raise ConfigError(c.errors or ["invalid configuration"])
    return ConfigFile(
        version=VERSION,
        run=run_cfg,
        pair_weights=pair_weights,
        alpha=float(alpha),
        workers=workers,
        outputs=outputs,
        oracle=oracle,
    )


def load_config(path) -> ConfigFile:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
