"""Record files (line-delimited JSON) and the JSON report document."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import _pykernel
from .config import ConfigFile
from .harness import RunResult
from .model import ALL_PAIRS, SETTINGS, Outcome, SettingPair, StationId, TrialRecord
from .oracle import exact_same_color, min_same_color_classic
from .stats import (
    DegenerateInputError,
    InsufficientDataError,
    chi_square_independence,
    correlation_report,
    find_time_variability_witness,
    tally,
)
from .strategies import BellStatic, InstructionSetStrategy, LocalStrategy, QuantumReference

COLOR = {1: "G", -1: "R"}


def write_atomic(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def records_jsonl(result: RunResult) -> bytes:
    buf = io.StringIO()
    ip1 = result.ip1.tolist() if result.ip1 is not None else None
    ip2 = result.ip2.tolist() if result.ip2 is not None else None
    for i, (t, p, lam, o1, o2) in enumerate(
        zip(result.ticks.tolist(), result.pairs.tolist(), result.lam.tolist(), result.out1.tolist(), result.out2.tolist())
    ):
        rec = {
            "tick": t,
            "pair": ALL_PAIRS[p].label,
            "lambda": lam,
            "outcome1": COLOR[o1],
            "outcome2": COLOR[o2],
            "iparam1": ip1[i] if ip1 is not None else None,
            "iparam2": ip2[i] if ip2 is not None else None,
        }
        if result.nonlocal_:
            rec["nonlocal"] = True
        buf.write(json.dumps(rec, separators=(",", ":")))
        buf.write("\n")
    return buf.getvalue().encode("utf-8")


def read_records(path) -> tuple[list[TrialRecord], bool]:
    """Parse a record file; returns the records and whether they are nonlocal."""
    recs = []
    nonlocal_ = False
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                recs.append(
                    TrialRecord(
                        tick=int(d["tick"]),
                        pair=SettingPair.parse(d["pair"]),
                        lam=int(d["lambda"]),
                        outcome1=Outcome.parse(d["outcome1"]),
                        outcome2=Outcome.parse(d["outcome2"]),
                        iparam1=d["iparam1"],
                        iparam2=d["iparam2"],
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{n}: malformed record ({exc})") from None
            nonlocal_ = nonlocal_ or bool(d.get("nonlocal", False))
    return recs, nonlocal_


def sidecar_path(records_path) -> Path:
    p = Path(records_path)
    return p.with_name(p.stem + ".config.yaml")


def _frac(x: Fraction) -> dict:
    return {"exact": [x.numerator, x.denominator], "value": float(x)}


def _expected_same_color(cfg: ConfigFile) -> Fraction | None:
    """Exact expectation under the configured pair weights, where it exists."""
    s = cfg.strategy
    rho = [Fraction(repr(w)) for w in cfg.run.source.weights]
    w = cfg.pair_weights
    if isinstance(s, InstructionSetStrategy):
        if len(s.sets) == 1:
            return Fraction(exact_same_color(s.sets[0], w))
        return sum((r * exact_same_color(st, w) for r, st in zip(rho, s.sets)), Fraction(0))
    if isinstance(s, BellStatic):
        total = Fraction(0)
        for lam, r in enumerate(rho):
            a = s.sets1[0] if len(s.sets1) == 1 else s.sets1[lam]
            b = s.sets2[0] if len(s.sets2) == 1 else s.sets2[lam]
            total += r * sum((wt for p, wt in w.items() if a.response(p.first) == b.response(p.second)), Fraction(0))
        return total
    if isinstance(s, QuantumReference):
        same, cross = Fraction(repr(s.same_setting_agree)), Fraction(repr(s.cross_setting_agree))
        return sum((wt * (same if p.is_diagonal else cross) for p, wt in w.items()), Fraction(0))
    return None


def counterfactual_perfect_correlation(result: RunResult, cfg: ConfigFile) -> dict:
    """Probe both stations at every setting at each realized (tick, lambda)."""
    s = cfg.strategy
    K = cfg.run.source.K
    off1, off2 = cfg.run.clock_offsets
    p1, p2 = s.program(StationId.STATION1, K), s.program(StationId.STATION2, K)
    bad = np.zeros(len(result), dtype=bool)
    for x in SETTINGS:
        xs = np.full(len(result), int(x), dtype=np.int64)
        a, _ = _pykernel._station(cfg.run.seed, result.ticks + off1, xs, result.lam, p1.table, p1.resp, p1.stoch_cdf, p1.stream_key)
        b, _ = _pykernel._station(cfg.run.seed, result.ticks + off2, xs, result.lam, p2.table, p2.resp, p2.stoch_cdf, p2.stream_key)
        bad |= a != b
    ticks = result.ticks[bad].tolist()
    return {"checked_trials": len(result), "violation_count": len(ticks), "violating_ticks": ticks[:100]}


def counterfactual_time_variability(cfg: ConfigFile) -> dict | None:
    s = cfg.strategy
    if getattr(s, "tick_invariant", False):
        return None
    schedule = cfg.run.schedule()
    for lam in range(cfg.run.source.K):
        w = find_time_variability_witness(s, schedule, lam)
        if w is not None:
            return w.to_dict()
    return None


def _independence(name: str, x, y, alpha: float) -> dict:
    try:
        rep = chi_square_independence(x, y, alpha)
    except (DegenerateInputError, InsufficientDataError) as exc:
        return {"name": name, "skipped": str(exc), "alpha": alpha}
    return {"name": name, **rep.to_dict()}


def build_report(result: RunResult, cfg: ConfigFile) -> dict:
    m = tally(result)
    corr = correlation_report(result, cfg.pair_weights)
    doc: dict = {
        "tool": {"name": "eprlab", "version": __version__},
        "seed": cfg.run.seed,
        "config": {k: v for k, v in cfg.to_dict().items() if k != "outputs"},
        "nonlocal": result.nonlocal_,
        "counts": {
            "total": m.total,
            "pairs": {p.label: {"same": m.same(p), "diff": m.diff(p)} for p in ALL_PAIRS},
        },
        "correlation": {
            "confidence": corr.conf,
            "pairs": {
                f.pair.label: {
                    "same": f.same,
                    "n": f.n,
                    "frequency": f.frequency,
                    "interval": list(f.interval),
                }
                for f in corr.pairs
            },
            "overall_same_color": {
                **_frac(corr.overall),
                "weights": {p.label: str(w) for p, w in corr.weights.items()},
            },
            "perfect_correlation_violations": corr.perfect_correlation_violations,
            "time_variability_witness": corr.time_variability_witness.to_dict() if corr.time_variability_witness else None,
        },
    }
    if isinstance(cfg.strategy, LocalStrategy):
        doc["counterfactual"] = {
            "perfect_correlation_all_settings": counterfactual_perfect_correlation(result, cfg),
            "time_variability_witness": counterfactual_time_variability(cfg),
        }
    alpha = cfg.alpha
    tests = []
    if result.ip1 is not None:
        tests.append(_independence("iparam1_vs_lambda", result.ip1, result.lam, alpha))
        tests.append(_independence("iparam2_vs_lambda", result.ip2, result.lam, alpha))
    tests.append(_independence("pair_vs_lambda", result.pairs, result.lam, alpha))
    doc["independence"] = tests

    classic, argmin = min_same_color_classic()
    expected = _expected_same_color(cfg)
    n = m.total
    doc["oracle"] = {
        "classic_min_uniform": {**_frac(classic), "argmin": str(argmin)},
        "expected_same_color": _frac(expected) if expected is not None else None,
        "empirical_same_color": _frac(corr.overall),
        "three_sigma": (
            3 * float(np.sqrt(float(expected) * (1 - float(expected)) / n)) if expected is not None and n else None
        ),
    }
    return doc


def report_json(doc: dict) -> bytes:
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def frequencies_csv(doc: dict) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["pair", "same", "n", "frequency", "lower", "upper"])
    for label, f in doc["correlation"]["pairs"].items():
        w.writerow([label, f["same"], f["n"], repr(f["frequency"]), repr(f["interval"][0]), repr(f["interval"][1])])
    return buf.getvalue().encode("utf-8")
