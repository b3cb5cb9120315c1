"""Command line: ``enumerate``, ``run <config>``, ``oracle <config>``, ``report --from-records <path>``.

Exit codes: 0 ok, 1 configuration error, 2 runtime or strategy-contract
error, 3 insufficient data. ``EPRLAB_OUTPUT_DIR`` overrides the output
directory named in the config.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, ConfigFile, load_config, render
from .harness import ConfigurationError, RunError, RunResult, run_experiment
from .oracle import UNIFORM_RANDOM, OracleConfigError, adversarial_min, exact_same_color, min_same_color_classic, enumerate_instruction_sets
from .report import (
    build_report,
    frequencies_csv,
    read_records,
    records_jsonl,
    report_json,
    sidecar_path,
    write_atomic,
)
from .stats import InsufficientDataError
from .strategies import ContractError

log = logging.getLogger("eprlab")

EXIT_CONFIG, EXIT_RUNTIME, EXIT_DATA = 1, 2, 3


def cmd_enumerate(out=None) -> int:
    out = out or sys.stdout
    for s in enumerate_instruction_sets():
        p = exact_same_color(s)
        print(f"{s} {p.numerator}/{p.denominator}", file=out)
    m, arg = min_same_color_classic()
    print(f"argmin {arg}", file=out)
    print(f"min {m.numerator}/{m.denominator}", file=out)
    return 0


def _output_dir(cfg: ConfigFile) -> Path:
    return Path(os.environ.get("EPRLAB_OUTPUT_DIR") or cfg.outputs.dir)


def _load(path) -> ConfigFile:
    try:
        return load_config(path)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None


def write_outputs(result: RunResult, cfg: ConfigFile, outdir: Path) -> dict:
    doc = build_report(result, cfg)
    records_path = outdir / cfg.outputs.records
    write_atomic(records_path, records_jsonl(result))
    write_atomic(sidecar_path(records_path), render(cfg).encode("utf-8"))
    write_atomic(outdir / cfg.outputs.report, report_json(doc))
    if cfg.outputs.csv:
        write_atomic(outdir / cfg.outputs.csv, frequencies_csv(doc))
    return doc


def cmd_run(config_path, workers: int | None = None, backend: str | None = None, out=None) -> int:
    out = out or sys.stdout
    cfg = _load(config_path)
    result = run_experiment(cfg.run, workers=workers or cfg.workers, backend=backend)
    outdir = _output_dir(cfg)
    doc = write_outputs(result, cfg, outdir)
    overall = doc["correlation"]["overall_same_color"]
    num, den = overall["exact"]
    print(f"trials {len(result)}", file=out)
    print(f"overall_same_color {num}/{den} ({overall['value']:.6f})", file=out)
    print(f"perfect_correlation_violations {len(doc['correlation']['perfect_correlation_violations'])}", file=out)
    print(f"wrote {outdir / cfg.outputs.report}", file=out)
    return 0


def cmd_oracle(config_path, out=None) -> int:
    out = out or sys.stdout
    cfg = _load(config_path)
    if not cfg.oracle:
        raise ConfigError([f"{config_path}: no oracle block"])
    for o in cfg.oracle:
        v = adversarial_min(o)
        sched = o.schedule if o.schedule == UNIFORM_RANDOM else ",".join(p.label for p in o.schedule)
        print(
            f"T={o.T} schedule={sched} pc_mode={o.pc_mode.value} choice_mode={o.choice_mode.value} "
            f"min={v.numerator}/{v.denominator} ({float(v):.6f})",
            file=out,
        )
    return 0


def cmd_report(records_path, config_path=None, output=None, out=None) -> int:
    out = out or sys.stdout
    cfg = _load(config_path or sidecar_path(records_path))
    try:
        recs, nonlocal_ = read_records(records_path)
    except OSError as exc:
        raise ConfigError([f"cannot read {records_path}: {exc}"]) from None
    result = RunResult.from_records(recs, cfg.run, nonlocal_)
    data = report_json(build_report(result, cfg))
    if output:
        write_atomic(output, data)
    else:
        out.write(data.decode("utf-8"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eprlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"eprlab {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    sub.add_parser("enumerate", help="same-color probability of all 8 instruction sets")
    r = sub.add_parser("run", help="simulate a configured experiment")
    r.add_argument("config")
    r.add_argument("--workers", type=int, default=None, help="override run.workers")
    r.add_argument("--backend", choices=["cython", "numpy"], default=None)
    o = sub.add_parser("oracle", help="exact adversarial minima for the oracle block")
    o.add_argument("config")
    rp = sub.add_parser("report", help="recompute a report from a record file")
    rp.add_argument("--from-records", required=True, dest="records")
    rp.add_argument("--config", default=None, help="config (default: the records' sidecar)")
    rp.add_argument("-o", "--output", default=None, help="write here instead of stdout")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.cmd == "enumerate":
            return cmd_enumerate()
        if args.cmd == "run":
            return cmd_run(args.config, args.workers, args.backend)
        if args.cmd == "oracle":
            return cmd_oracle(args.config)
        return cmd_report(args.records, args.config, args.output)
    except (ConfigError, ConfigurationError, OracleConfigError) as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientDataError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RunError, ContractError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
