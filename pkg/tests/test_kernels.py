"""The numpy and compiled kernels must agree bit for bit, and with the scalar path."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eprlab import _pykernel, kernel
from eprlab import rng as keyed
from eprlab.model import SETTINGS, SourceDistribution, StationId
from eprlab.strategies import TimeDependentStrategy, TimeDependentConfig

from conftest import BACKENDS, flip_strategy


def test_splitmix_reference_value():
    # first output of the canonical splitmix64 generator seeded with 0
    assert keyed.splitmix64(0) == 0xE220A8397B1DCDAF


@given(st.integers(0, 2**64 - 1), st.integers(0, 40), st.lists(st.integers(-(2**40), 2**40), min_size=1, max_size=20))
def test_array_uniform_matches_scalar(seed, stream, ticks):
    arr = keyed.uniform_array(seed, stream, np.array(ticks, dtype=np.int64))
    assert arr.tolist() == [keyed.uniform(seed, stream, t) for t in ticks]


@given(st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=50))
def test_categorical_twins_agree(us):
    cdf = np.cumsum([0.1, 0.0, 0.3, 0.6])
    assert keyed.categorical_array(np.array(us), cdf).tolist() == [keyed.categorical(u, cdf) for u in us]


def test_uniform_in_unit_interval():
    u = keyed.uniform_array(5, keyed.EMIT, np.arange(100_000))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.005


def _stochastic():
    stoch = {(w, x): (0.2, 0.3, 0.5) for w in StationId for x in SETTINGS}
    return TimeDependentStrategy("s", TimeDependentConfig(1, {}, ((1,), (-1,), (1, -1, 1, -1)), stoch, shared_stream=False))


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernel not built")
@pytest.mark.parametrize("strategy", [flip_strategy(), flip_strategy(4, mirrored=False), _stochastic()])
@pytest.mark.parametrize("seed", [0, 1, 2**63 + 12345])
def test_backends_bit_identical(strategy, seed):
    rng = np.random.default_rng(seed % 1000)
    ticks = np.sort(rng.choice(10_000, 3000, replace=False)).astype(np.int64)
    pairs = rng.integers(0, 9, 3000).astype(np.int8)
    src = SourceDistribution((0.1, 0.2, 0.3, 0.4))
    p1, p2 = strategy.program(StationId.STATION1, 4), strategy.program(StationId.STATION2, 4)
    outs = [
        kernel.get(b).simulate_local(seed, ticks, pairs, src.cdf, p1, 3, p2, -1) for b in BACKENDS
    ]
    for a, b in zip(outs[0], outs[1]):
        assert a.dtype == b.dtype and np.array_equal(a, b)
    joint = [kernel.get(b).simulate_joint(seed, ticks, pairs, src.cdf, 0.9, 0.3) for b in BACKENDS]
    for a, b in zip(*joint):
        assert np.array_equal(a, b)
    choice = [kernel.get(b).resolve_choices(seed, ticks, pairs) for b in BACKENDS]
    assert np.array_equal(*choice)


def test_resolve_choices_preserves_multiset():
    pairs = np.repeat(np.arange(9, dtype=np.int8), 50)
    out = _pykernel.resolve_choices(3, np.arange(len(pairs)), pairs)
    assert sorted(out.tolist()) == sorted(pairs.tolist())
    assert not np.array_equal(out, pairs)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 30))
def test_resolve_choices_backends_agree(seed, n):
    pairs = np.arange(n, dtype=np.int8) % 9
    ticks = np.arange(n, dtype=np.int64) * 3
    outs = [kernel.get(b).resolve_choices(seed, ticks, pairs) for b in BACKENDS]
    for o in outs:
        assert sorted(o.tolist()) == sorted(pairs.tolist())
    assert all(np.array_equal(outs[0], o) for o in outs)
