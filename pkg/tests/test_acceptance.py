"""Acceptance criteria 1-7. Each test prints one PASS/FAIL line; the lines are
also collected and echoed in the pytest terminal summary.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

import io
import itertools
import json
import math
import time
from dataclasses import replace
from fractions import Fraction

from eprlab.cli import cmd_enumerate, main
from eprlab.config import load_config
from eprlab.harness import RunConfig, ScheduleKind, rezero_clocks, run_experiment
from eprlab.model import ALL_PAIRS, InstructionSet
from eprlab.oracle import AdversarialSearchConfig, adversarial_min, brute_force_min, exact_same_color
from eprlab.report import build_report
from eprlab.stats import chi_square_independence, overall_same_color, tally, uniform_pair_weights
from eprlab.strategies import InstructionSetStrategy, QuantumReference

from conftest import CONFIGS, flip_strategy

RESULTS: list[str] = []
NINE = tuple(p.label for p in ALL_PAIRS)


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_criterion_1_classic_bound():
    start = time.perf_counter()
    buf = io.StringIO()
    cmd_enumerate(buf)
    elapsed = time.perf_counter() - start
    last = buf.getvalue().splitlines()[-1]
    ok = last == "min 5/9" and elapsed < 1.0
    verdict(1, ok, f"{last!r} in {elapsed:.3f}s")


def test_criterion_2_adversarial_gap():
    realized = adversarial_min(AdversarialSearchConfig(9, NINE, "REALIZED", "FIXED_SCHEDULE"))
    delayed = {T: adversarial_min(AdversarialSearchConfig(T)) for T in range(1, 7)}
    start = time.perf_counter()
    t12 = adversarial_min(AdversarialSearchConfig(12))
    t12_fixed = adversarial_min(
        AdversarialSearchConfig(12, tuple(itertools.islice(itertools.cycle(NINE), 12)), "REALIZED", "FIXED_SCHEDULE")
    )
    elapsed = time.perf_counter() - start
    # unpruned brute force up to T=4
    cross = all(brute_force_min(AdversarialSearchConfig(T)) == delayed[T] for T in range(1, 5))
    for T in range(1, 5):
        sched = NINE[:T]
        for pc in ("REALIZED", "COUNTERFACTUAL"):
            c = AdversarialSearchConfig(T, sched, pc, "FIXED_SCHEDULE")
            cross &= brute_force_min(c) == adversarial_min(c)
    ok = (
        realized == Fraction(1, 3)
        and all(v == Fraction(5, 9) for v in delayed.values())
        and t12 == Fraction(5, 9)
        and t12_fixed == Fraction(1, 3)
        and elapsed < 60
        and cross
    )
    verdict(2, ok, f"realized={realized}, delayed T<=6={set(map(str, delayed.values()))}, T=12 in {elapsed:.3f}s, brute force agrees={cross}")


def test_criterion_3_monte_carlo_vs_oracle():
    L = 11112  # 9 * 11112 = 100008 trials
    start = time.perf_counter()
    worst = 100
    for index in range(8):
        s = InstructionSet(index)
        p = float(exact_same_color(s))
        bound = 3 * math.sqrt(p * (1 - p) / (9 * L))
        strategy = InstructionSetStrategy(str(s), (s,))
        passes = 0
        for seed in range(100):
            res = run_experiment(RunConfig(strategy, ScheduleKind.ALL_NINE_UNIFORM, L=L, seed=seed, delayed_choice=True))
            emp = float(overall_same_color(tally(res), uniform_pair_weights()))
            passes += abs(emp - p) <= bound + 1e-12
        worst = min(worst, passes)
    elapsed = time.perf_counter() - start
    ok = worst >= 99 and elapsed < 30
    verdict(3, ok, f"fewest passing seeds over 8 sets = {worst}/100, {elapsed:.1f}s")


def test_criterion_4_quantum_reference():
    res = run_experiment(RunConfig(QuantumReference("q"), ScheduleKind.ALL_NINE_UNIFORM, L=11112, seed=2024, delayed_choice=True))
    f = float(overall_same_color(tally(res), uniform_pair_weights()))
    verdict(4, abs(f - 0.5) <= 0.01, f"overall={f:.5f} over {len(res)} trials")


def test_criterion_5_correlation_witness_and_independence():
    cfg = load_config(CONFIGS / "timedep_mirrored.yaml")
    res = run_experiment(cfg.run)
    doc = build_report(res, cfg)
    violations = doc["correlation"]["perfect_correlation_violations"]
    counterfactual = doc["counterfactual"]["perfect_correlation_all_settings"]["violation_count"]
    witness = doc["correlation"]["time_variability_witness"]
    rejects = 0
    for seed in range(200):
        r = run_experiment(replace(cfg.run, seed=seed))
        rejects += chi_square_independence(r.ip1, r.lam, alpha=0.05).reject
    ok = violations == [] and counterfactual == 0 and witness is not None and 2 <= rejects <= 19
    verdict(5, ok, f"perfect-correlation violations={len(violations)}, witness={witness}, chi-square rejections={rejects}/200")


def _stats(doc: dict) -> dict:
    return {k: v for k, v in doc.items() if k != "config"}


def test_criterion_6_rezero_invariance():
    bell = load_config(CONFIGS / "bell_static.yaml")
    cases = [bell, replace(bell, run=replace(bell.run, clock_offsets=(1000, 3)))]
    td = load_config(CONFIGS / "timedep_mirrored.yaml")
    P = td.strategy.config.period
    cases.append(replace(td, run=replace(td.run, clock_offsets=(P, P))))
    flip4 = flip_strategy(4, mirrored=False)
    cases.append(replace(td, run=replace(td.run, strategy=flip4, clock_offsets=(4, 4))))
    same = []
    for cfg in cases:
        res = run_experiment(cfg.run)
        again = rezero_clocks(res)
        a = json.dumps(_stats(build_report(res, cfg)), sort_keys=True)
        b = json.dumps(_stats(build_report(again, replace(cfg, run=again.config_echo))), sort_keys=True)
        same.append(a == b)
    verdict(6, all(same), f"bit-identical statistics for {sum(same)}/{len(same)} offset cases")


def test_criterion_7_reproducibility_across_workers(tmp_path, monkeypatch):
    identical = []
    for name in ("timedep_mirrored.yaml", "quantum.yaml", "timedep_stochastic.yaml", "bell_static.yaml"):
        blobs = []
        for workers in (1, 2, 8):
            out = tmp_path / f"{name}-{workers}"
            monkeypatch.setenv("EPRLAB_OUTPUT_DIR", str(out))
            assert main(["run", str(CONFIGS / name), "--workers", str(workers)]) == 0
            blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        identical.append(blobs[0] == blobs[1] == blobs[2])
    verdict(7, all(identical), f"byte-identical outputs for {sum(identical)}/{len(identical)} configs at 1/2/8 workers")


if __name__ == "__main__":
    import sys

    import pytest

    sys.exit(pytest.main([__file__, "-q"]))
