from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats as sps

from eprlab.harness import (
    ConfigurationError,
    RunConfig,
    RunError,
    ScheduleKind,
    build_schedule,
    offset_covariant,
    rezero_clocks,
    run_experiment,
    run_trials,
)
from eprlab.model import ALL_PAIRS, InstructionSet, SettingPair, SourceDistribution, StationId
from eprlab.stats import tally
from eprlab.strategies import BellStatic, InstructionSetStrategy, QuantumReference

from conftest import BACKENDS, flip_strategy

GGR = InstructionSetStrategy("ggr", (InstructionSet.parse("GGR"),))


def test_mermin_two_pair_schedule():
    s = build_schedule(ScheduleKind.MERMIN_TWO_PAIR, 3, np.random.default_rng(0))
    assert len(s) == 6
    assert len(set(s.ticks.tolist())) == 6
    assert Counter(p.label for _, p, _ in s.entries) == {"11": 3, "12": 3}


def test_all_nine_schedule():
    s = build_schedule(ScheduleKind.ALL_NINE_UNIFORM, 1, np.random.default_rng(0))
    assert sorted(s.pairs.tolist()) == list(range(9))


@pytest.mark.parametrize("kind", ["MERMIN_TWO_PAIR", "ALL_NINE_UNIFORM"])
@pytest.mark.parametrize("L", [1, 7, 50])
def test_schedule_ticks_distinct(kind, L):
    s = build_schedule(kind, L, np.random.default_rng(L))
    assert len(np.unique(s.ticks)) == len(s)


def test_schedule_interleaving_is_random():
    a = build_schedule("ALL_NINE_UNIFORM", 20, np.random.default_rng(1))
    b = build_schedule("ALL_NINE_UNIFORM", 20, np.random.default_rng(2))
    assert not np.array_equal(a.pairs, b.pairs)


def test_custom_schedule_needs_entries():
    with pytest.raises(ConfigurationError):
        build_schedule("CUSTOM", 1, np.random.default_rng(0))
    s = build_schedule("CUSTOM", 1, None, entries=[(5, "12"), (2, "11")])
    assert s.ticks.tolist() == [2, 5]


def test_ggr_all_nine_records():
    res = run_experiment(RunConfig(GGR, ScheduleKind.ALL_NINE_UNIFORM, L=1, seed=3))
    assert len(res) == 9
    same = {r.pair.label for r in res.records if r.same_color}
    # GGR agrees with itself on the diagonal and on 12/21
    assert same == {"11", "22", "33", "12", "21"}


@pytest.mark.parametrize("backend", BACKENDS)
def test_run_twice_identical(backend):
    cfg = RunConfig(flip_strategy(), ScheduleKind.ALL_NINE_UNIFORM, L=200, delayed_choice=True, seed=5)
    assert run_experiment(cfg, backend=backend) == run_experiment(cfg, backend=backend)


def test_quantum_reference_runs_nonlocal():
    cfg = RunConfig(QuantumReference("q"), ScheduleKind.ALL_NINE_UNIFORM, L=30, delayed_choice=True, seed=1)
    res = run_experiment(cfg)
    assert res.nonlocal_ and res.ip1 is None
    assert run_trials(cfg) == res


@pytest.mark.parametrize(
    "strategy",
    [
        GGR,
        flip_strategy(),
        flip_strategy(4, mirrored=False),
        BellStatic("b", tuple(InstructionSet(i) for i in range(8)), tuple(InstructionSet(7 - i) for i in range(8))),
    ],
    ids=["ggr", "flip", "antiflip", "bell"],
)
def test_batch_engine_matches_trial_engine(strategy):
    cfg = RunConfig(strategy, ScheduleKind.ALL_NINE_UNIFORM, L=20, delayed_choice=True, seed=8, clock_offsets=(3, 1))
    assert run_experiment(cfg) == run_trials(cfg)


def test_station_inputs_never_carry_remote_setting():
    """Changing station 2's settings leaves everything station 1 received unchanged."""
    base = [(t, SettingPair.parse(p)) for t, p in enumerate(["11", "12", "13", "21", "22", "23"])]
    alt = [(t, SettingPair(p.first, ALL_PAIRS[(p.index + 1) % 3].second)) for t, p in base]

    def transcript(entries):
        calls = {StationId.STATION1: [], StationId.STATION2: []}
        cfg = RunConfig(flip_strategy(), ScheduleKind.CUSTOM, L=1, seed=2, entries=tuple(entries))
        run_trials(cfg, lambda who, inputs: calls[who].append(inputs))
        return calls

    a, b = transcript(base), transcript(alt)
    assert a[StationId.STATION1] == b[StationId.STATION1]
    assert a[StationId.STATION2] != b[StationId.STATION2]
    for inputs in a[StationId.STATION1]:
        # (station, own setting, lambda, own clock)
        assert len(inputs) == 4 and inputs[0] is StationId.STATION1


def test_delayed_choice_conserves_schedule_multiset():
    cfg = RunConfig(GGR, ScheduleKind.ALL_NINE_UNIFORM, L=40, delayed_choice=True, seed=4)
    res = run_experiment(cfg)
    sched = cfg.schedule()
    assert sorted(res.pairs.tolist()) == sorted(sched.pairs.tolist())
    assert not np.array_equal(res.pairs, sched.pairs)


def test_delayed_choice_lambda_independent_of_pair():
    """Chi-square of lambda vs realized pair at alpha=0.01 over 40 seeds."""
    rejects = 0
    seeds = range(40)
    for seed in seeds:
        cfg = RunConfig(GGR, ScheduleKind.ALL_NINE_UNIFORM, L=1112, delayed_choice=True, seed=seed)
        res = run_experiment(cfg)
        table = np.zeros((9, 8))
        np.add.at(table, (res.pairs, res.lam), 1)
        p = sps.chi2_contingency(table, correction=False).pvalue
        rejects += p < 0.01
    assert rejects <= 0.05 * len(seeds)


@pytest.mark.parametrize("workers", [2, 3, 8])
def test_parallel_equivalence(workers):
    cfg = RunConfig(flip_strategy(), ScheduleKind.ALL_NINE_UNIFORM, L=333, delayed_choice=True, seed=6)
    assert run_experiment(cfg, workers=workers) == run_experiment(cfg, workers=1)


def test_contract_violation_aborts_with_tick():
    short = InstructionSetStrategy("short", tuple(InstructionSet(i) for i in range(3)), kind="MIXED_SET")
    with pytest.raises(RunError, match="tick"):
        run_experiment(RunConfig(short, ScheduleKind.MERMIN_TWO_PAIR, L=2, seed=0))
    with pytest.raises(RunError, match="tick"):
        run_trials(RunConfig(short, ScheduleKind.MERMIN_TWO_PAIR, L=20, seed=0))


def test_rezero_identity():
    cfg = RunConfig(flip_strategy(), ScheduleKind.MERMIN_TWO_PAIR, L=30, seed=1)
    res = run_experiment(cfg)
    assert res.ticks[0] == 0
    assert rezero_clocks(res) == res


@pytest.mark.parametrize("offsets", [(0, 9), (13, 2), (1000, 1)])
def test_rezero_bell_static_any_offsets(offsets):
    sets = tuple(InstructionSet(i) for i in range(8))
    cfg = RunConfig(BellStatic("b", sets, sets), ScheduleKind.ALL_NINE_UNIFORM, L=30, seed=2, clock_offsets=offsets)
    res = run_experiment(cfg)
    assert rezero_clocks(res) == res


@pytest.mark.parametrize("P", [2, 4, 6])
def test_rezero_periodic_by_resimulation(P):
    s = flip_strategy(P, mirrored=False)
    cfg = RunConfig(s, ScheduleKind.ALL_NINE_UNIFORM, L=30, seed=3, clock_offsets=(P, P))
    res = run_experiment(cfg)
    again = rezero_clocks(res)
    assert again.config_echo.clock_offsets == (0, 0)
    assert np.array_equal(again.out1, res.out1) and np.array_equal(again.out2, res.out2)
    assert offset_covariant(s, P) and not offset_covariant(s, 1)
    # a half-period shift is not covariant and does change outcomes
    shifted = run_experiment(replace(cfg, clock_offsets=(1, 1)))
    assert not np.array_equal(shifted.out1, res.out1)


def test_rezero_empty_rejected():
    res = run_experiment(RunConfig(GGR, ScheduleKind.CUSTOM, L=1, seed=0, entries=((0, SettingPair.parse("11")),)))
    empty = replace(res, ticks=res.ticks[:0], pairs=res.pairs[:0], lam=res.lam[:0], out1=res.out1[:0], out2=res.out2[:0])
    with pytest.raises(ValueError):
        rezero_clocks(empty)


def test_negative_clock_view_rejected():
    with pytest.raises(RunError):
        run_experiment(RunConfig(GGR, ScheduleKind.MERMIN_TWO_PAIR, L=2, seed=0, clock_offsets=(-1, 0)))


def test_source_distribution_respected():
    cfg = RunConfig(GGR, ScheduleKind.ALL_NINE_UNIFORM, L=2000, seed=1, source=SourceDistribution.point(3))
    assert set(run_experiment(cfg).lam.tolist()) == {3}


def test_tally_of_run_matches_records():
    cfg = RunConfig(flip_strategy(4, mirrored=False), ScheduleKind.ALL_NINE_UNIFORM, L=50, seed=1)
    res = run_experiment(cfg)
    assert tally(res) == tally(res.records)
