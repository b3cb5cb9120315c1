"""Counter-based keyed random numbers.

Every random draw in a run is a pure function of ``(seed, stream, tick)``,
so trials can be evaluated in any order or on any number of workers and
still reproduce bit for bit. The mixing function is splitmix64's finalizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# stream identifiers
EMIT = 1
CHOICE = 2
JOINT_MARGINAL = 3
JOINT_AGREE = 4
IPARAM_BASE = 8


def iparam_stream(station_key: int, setting: int) -> int:
    """Stream for a station's stochastic instrument parameter at one setting."""
    return IPARAM_BASE + 4 * station_key + setting


def splitmix64(z: int) -> int:
    z = (z + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def key64(seed: int, stream: int, tick: int) -> int:
    h = splitmix64(seed & MASK64)
    h = splitmix64(h ^ (stream & MASK64))
    return splitmix64(h ^ (tick & MASK64))


def to_unit(h: int) -> float:
    return (h >> 11) * (1.0 / 9007199254740992.0)


def uniform(seed: int, stream: int, tick: int) -> float:
    """Uniform double in [0, 1) keyed by (seed, stream, tick)."""
    return to_unit(key64(seed, stream, tick))


def categorical(u: float, cdf) -> int:
    """Index of the first cdf entry strictly greater than ``u`` (clipped)."""
    n = len(cdf)
    i = 0
    while i < n - 1 and u >= cdf[i]:
        i += 1
    return i


@dataclass(frozen=True)
class KeyedStream:
    """The random-stream argument handed to emitters and responders."""

    seed: int

    def uniform(self, stream: int, tick: int) -> float:
        return uniform(self.seed, stream, tick)


# vectorised twins, used by the numpy backend

_U_GAMMA = np.uint64(_GAMMA)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))


def splitmix64_array(z: np.ndarray) -> np.ndarray:
    z = z + _U_GAMMA
    z = (z ^ (z >> _S30)) * _U_M1
    z = (z ^ (z >> _S27)) * _U_M2
    return z ^ (z >> _S31)


def stream_prefix(seed: int, stream: int) -> int:
    return splitmix64(splitmix64(seed & MASK64) ^ (stream & MASK64))


def uniform_array(seed: int, stream: int, ticks: np.ndarray) -> np.ndarray:
    prefix = np.uint64(stream_prefix(seed, stream))
    h = splitmix64_array(np.asarray(ticks, dtype=np.int64).astype(np.uint64) ^ prefix)
    return (h >> _S11).astype(np.float64) * (1.0 / 9007199254740992.0)


def categorical_array(u: np.ndarray, cdf: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)
