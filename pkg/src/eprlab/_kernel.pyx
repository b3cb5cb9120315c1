# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch kernels. Must stay bit-identical to ``_pykernel``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int32_t, int8_t

cnp.import_array()

NAME = "cython"

DEF EMIT = 1
DEF CHOICE = 2
DEF JOINT_MARGINAL = 3
DEF JOINT_AGREE = 4
DEF IPARAM_BASE = 8


cdef inline uint64_t splitmix64(uint64_t z) noexcept nogil:
    z = z + <uint64_t>0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t prefix(uint64_t seed, uint64_t stream) noexcept nogil:
    return splitmix64(splitmix64(seed) ^ stream)


cdef inline double unit(uint64_t pre, int64_t tick) noexcept nogil:
    return <double>(splitmix64(pre ^ <uint64_t>tick) >> 11) * (1.0 / 9007199254740992.0)


cdef inline int32_t categorical(double u, const double[:] cdf) noexcept nogil:
    cdef Py_ssize_t n = cdf.shape[0]
    cdef Py_ssize_t i = 0
    while i < n - 1 and u >= cdf[i]:
        i += 1
    return <int32_t>i


cdef inline uint64_t _seed64(seed):
    return <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)


def resolve_choices(seed, ticks, pairs):
    cdef const int64_t[:] t = np.ascontiguousarray(ticks, dtype=np.int64)
    out = np.array(pairs, dtype=np.int8)
    cdef int8_t[:] pool = out
    cdef Py_ssize_t n = t.shape[0]
    cdef Py_ssize_t i, j
    cdef int64_t d, rem
    cdef int8_t tmp
    cdef uint64_t pre = prefix(_seed64(seed), CHOICE)
    with nogil:
        for i in range(n):
            rem = n - i
            d = <int64_t>(unit(pre, t[i]) * <double>rem)
            if d > rem - 1:
                d = rem - 1
            j = i + d
            tmp = pool[i]
            pool[i] = pool[j]
            pool[j] = tmp
    return out


cdef void _emit(uint64_t seed, const int64_t[:] t, const double[:] lam_cdf, int32_t[:] lam) noexcept nogil:
    cdef uint64_t pre = prefix(seed, EMIT)
    cdef Py_ssize_t i
    for i in range(t.shape[0]):
        lam[i] = categorical(unit(pre, t[i]), lam_cdf)


cdef void _station(uint64_t seed, const int64_t[:] t, const int8_t[:] pairs, int which,
                   int64_t offset, const int32_t[:] lam,
                   const int32_t[:, :] table, const int8_t[:, :] resp,
                   const double[:, :] stoch_cdf, bint stochastic, int stream_key,
                   int8_t[:] out, int32_t[:] ip) noexcept nogil:
    cdef Py_ssize_t i
    cdef int x
    cdef int64_t view, P = table.shape[1], r
    cdef int32_t p
    cdef uint64_t pre0 = prefix(seed, IPARAM_BASE + 4 * stream_key + 0)
    cdef uint64_t pre1 = prefix(seed, IPARAM_BASE + 4 * stream_key + 1)
    cdef uint64_t pre2 = prefix(seed, IPARAM_BASE + 4 * stream_key + 2)
    cdef uint64_t pre
    for i in range(t.shape[0]):
        if which == 0:
            x = pairs[i] // 3
        else:
            x = pairs[i] % 3
        view = t[i] + offset
        if stochastic:
            if x == 0:
                pre = pre0
            elif x == 1:
                pre = pre1
            else:
                pre = pre2
            p = categorical(unit(pre, view), stoch_cdf[x])
        else:
            r = view % P
            if r < 0:
                r += P
            p = table[x, r]
        ip[i] = p
        out[i] = resp[p, lam[i]]


def _as_prog(prog):
    table = np.ascontiguousarray(prog.table, dtype=np.int32)
    resp = np.ascontiguousarray(prog.resp, dtype=np.int8)
    if prog.stoch_cdf is not None and prog.stoch_cdf.size:
        return table, resp, np.ascontiguousarray(prog.stoch_cdf, dtype=np.float64), True, int(prog.stream_key)
    return table, resp, np.zeros((3, 1), dtype=np.float64), False, int(prog.stream_key)


def simulate_local(seed, ticks, pairs, lam_cdf, prog1, off1, prog2, off2):
    t_arr = np.ascontiguousarray(ticks, dtype=np.int64)
    p_arr = np.ascontiguousarray(pairs, dtype=np.int8)
    cdf = np.ascontiguousarray(lam_cdf, dtype=np.float64)
    n = t_arr.shape[0]
    lam = np.empty(n, dtype=np.int32)
    out1 = np.empty(n, dtype=np.int8)
    out2 = np.empty(n, dtype=np.int8)
    ip1 = np.empty(n, dtype=np.int32)
    ip2 = np.empty(n, dtype=np.int32)
    tb1, rs1, sc1, st1, sk1 = _as_prog(prog1)
    tb2, rs2, sc2, st2, sk2 = _as_prog(prog2)

    cdef uint64_t s = _seed64(seed)
    cdef const int64_t[:] tv = t_arr
    cdef const int8_t[:] pv = p_arr
    cdef const double[:] cv = cdf
    cdef int32_t[:] lv = lam
    cdef int8_t[:] o1 = out1
    cdef int8_t[:] o2 = out2
    cdef int32_t[:] i1 = ip1
    cdef int32_t[:] i2 = ip2
    cdef const int32_t[:, :] t1 = tb1
    cdef const int32_t[:, :] t2 = tb2
    cdef const int8_t[:, :] r1 = rs1
    cdef const int8_t[:, :] r2 = rs2
    cdef const double[:, :] c1 = sc1
    cdef const double[:, :] c2 = sc2
    cdef bint b1 = st1, b2 = st2
    cdef int k1 = sk1, k2 = sk2
    cdef int64_t f1 = off1, f2 = off2
    with nogil:
        _emit(s, tv, cv, lv)
        _station(s, tv, pv, 0, f1, lv, t1, r1, c1, b1, k1, o1, i1)
        _station(s, tv, pv, 1, f2, lv, t2, r2, c2, b2, k2, o2, i2)
    return lam, out1, out2, ip1, ip2


def simulate_joint(seed, ticks, pairs, lam_cdf, double same_agree, double cross_agree):
    t_arr = np.ascontiguousarray(ticks, dtype=np.int64)
    p_arr = np.ascontiguousarray(pairs, dtype=np.int8)
    cdf = np.ascontiguousarray(lam_cdf, dtype=np.float64)
    cdef Py_ssize_t n = t_arr.shape[0]
    lam = np.empty(n, dtype=np.int32)
    out1 = np.empty(n, dtype=np.int8)
    out2 = np.empty(n, dtype=np.int8)

    cdef uint64_t s = _seed64(seed)
    cdef const int64_t[:] tv = t_arr
    cdef const int8_t[:] pv = p_arr
    cdef const double[:] cv = cdf
    cdef int32_t[:] lv = lam
    cdef int8_t[:] o1 = out1
    cdef int8_t[:] o2 = out2
    cdef uint64_t pm = prefix(s, JOINT_MARGINAL)
    cdef uint64_t pa = prefix(s, JOINT_AGREE)
    cdef Py_ssize_t i
    cdef int8_t a
    cdef double p
    with nogil:
        _emit(s, tv, cv, lv)
        for i in range(n):
            a = 1 if unit(pm, tv[i]) < 0.5 else -1
            p = same_agree if (pv[i] // 3) == (pv[i] % 3) else cross_agree
            o1[i] = a
            o2[i] = a if unit(pa, tv[i]) < p else -a
    return lam, out1, out2
