"""Pure numpy batch kernels. Bit-identical twin of ``_kernel.pyx``."""

from __future__ import annotations

import numpy as np

from . import rng as keyed

NAME = "numpy"


def resolve_choices(seed, ticks, pairs):
    """Delayed choice: at each tick, draw the pair from the not-yet-used pool.

    Position ``i`` swaps in a uniform pick from ``pool[i:]``, keyed by the
    tick's own CHOICE draw. The realized multiset equals the scheduled one.
    """
    n = len(ticks)
    pool = np.array(pairs, dtype=np.int8)
    if n == 0:
        return pool
    u = keyed.uniform_array(seed, keyed.CHOICE, ticks)
    remaining = np.arange(n, 0, -1, dtype=np.float64)
    jumps = np.minimum((u * remaining).astype(np.int64), remaining.astype(np.int64) - 1)
    pool_list = pool.tolist()
    for i, d in enumerate(jumps.tolist()):
        j = i + d
        pool_list[i], pool_list[j] = pool_list[j], pool_list[i]
    return np.array(pool_list, dtype=np.int8)


def emit_lambdas(seed, ticks, lam_cdf):
    u = keyed.uniform_array(seed, keyed.EMIT, ticks)
    return keyed.categorical_array(u, lam_cdf).astype(np.int32)


def _station(seed, views, settings, lam, table, resp, stoch_cdf, stream_key):
    if stoch_cdf is not None and stoch_cdf.size:
        ip = np.empty(len(views), dtype=np.int32)
        for x in range(3):
            mask = settings == x
            if mask.any():
                u = keyed.uniform_array(seed, keyed.iparam_stream(stream_key, x), views[mask])
                ip[mask] = keyed.categorical_array(u, stoch_cdf[x])
    else:
        P = table.shape[1]
        ip = table[settings, np.mod(views, P)].astype(np.int32)
    out = resp[ip, lam].astype(np.int8)
    return out, ip


def simulate_local(seed, ticks, pairs, lam_cdf, prog1, off1, prog2, off2):
    ticks = np.asarray(ticks, dtype=np.int64)
    pairs = np.asarray(pairs, dtype=np.int8)
    lam = emit_lambdas(seed, ticks, lam_cdf)
    x1 = (pairs // 3).astype(np.int64)
    x2 = (pairs % 3).astype(np.int64)
    out1, ip1 = _station(seed, ticks + off1, x1, lam, prog1.table, prog1.resp, prog1.stoch_cdf, prog1.stream_key)
    out2, ip2 = _station(seed, ticks + off2, x2, lam, prog2.table, prog2.resp, prog2.stoch_cdf, prog2.stream_key)
    return lam, out1, out2, ip1, ip2


def simulate_joint(seed, ticks, pairs, lam_cdf, same_agree, cross_agree):
    ticks = np.asarray(ticks, dtype=np.int64)
    pairs = np.asarray(pairs, dtype=np.int8)
    lam = emit_lambdas(seed, ticks, lam_cdf)
    a = np.where(keyed.uniform_array(seed, keyed.JOINT_MARGINAL, ticks) < 0.5, 1, -1).astype(np.int8)
    diag = (pairs // 3) == (pairs % 3)
    p = np.where(diag, same_agree, cross_agree)
    agree = keyed.uniform_array(seed, keyed.JOINT_AGREE, ticks) < p
    b = np.where(agree, a, -a).astype(np.int8)
    return lam, a, b
