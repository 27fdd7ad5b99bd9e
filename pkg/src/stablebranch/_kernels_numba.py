"""Compiled particle kernels (scalar loops, one particle lineage at a time)."""
import math

import numpy as np
from numba import njit as _njit

from .catalyst import KIND_BALL, KIND_GRID, KIND_NONE, KIND_POINT, KIND_SPHERE

ABORT_CAP = 1

# numpy error model: no Python-style ZeroDivisionError checks inside hot loops
_OPTS = {"cache": True, "error_model": "numpy"}


def njit(fn):
    return _njit(**_OPTS)(fn)


def njit_inline(fn):
    # helpers are inlined into the main loop; a real call costs reference-count traffic
    # on every array argument
    return _njit(inline="always", **_OPTS)(fn)


@njit_inline
def _norm(x):
    s = 0.0
    for j in range(x.size):
        s += x[j] * x[j]
    return math.sqrt(s)


@njit_inline
def _gap(x, center):
    s = 0.0
    for j in range(x.size):
        s += (x[j] - center[j]) ** 2
    return math.sqrt(s)


@njit_inline
def density(x, kind, center, fparams, g_origin, g_spacing, g_shape, g_values):
    if kind == KIND_NONE:
        return 0.0
    if kind == KIND_POINT or kind == KIND_BALL:
        s = 0.0
        for j in range(x.size):
            s += (x[j] - center[j]) ** 2
        return fparams[0] if math.sqrt(s) <= fparams[1] else 0.0
    if kind == KIND_SPHERE:
        return fparams[0] if abs(_norm(x) - fparams[1]) <= fparams[2] else 0.0
    if kind == KIND_GRID:
        flat = 0
        for j in range(x.size):
            k = int(np.rint((x[j] - g_origin[j]) / g_spacing[j]))
            if k < 0 or k >= g_shape[j]:
                return 0.0
            flat = flat * g_shape[j] + k
        return g_values[flat]
    return 0.0


@njit_inline
def distance(x, kind, center, fparams, lo, hi):
    if kind == KIND_POINT or kind == KIND_BALL:
        s = 0.0
        for j in range(x.size):
            s += (x[j] - center[j]) ** 2
        return max(math.sqrt(s) - fparams[1], 0.0)
    if kind == KIND_SPHERE:
        return max(abs(_norm(x) - fparams[1]) - fparams[2], 0.0)
    if kind == KIND_GRID:
        s = 0.0
        for j in range(x.size):
            g = max(max(lo[j] - x[j], x[j] - hi[j]), 0.0)
            s += g * g
        return math.sqrt(s)
    return np.inf


@njit_inline
def add_increment(x, alpha, dt, rng):
    """In-place ``x += X_dt - X_0``; stream order matches ``stable.sample_increment``."""
    if dt <= 0.0:
        return
    u = rng.random()
    w = rng.standard_exponential()
    d = x.size
    if d == 1:
        v = math.pi * (u - 0.5)
        if alpha == 1.0:
            z = math.tan(v)
        else:
            z = (math.sin(alpha * v) / math.cos(v) ** (1.0 / alpha)
                 * (math.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))
        x[0] += (dt / 2.0) ** (1.0 / alpha) * z
        return
    beta = alpha / 2.0
    a = math.pi * u
    s = (math.sin(beta * a) / math.sin(a) ** (1.0 / beta)
         * (math.sin((1.0 - beta) * a) / w) ** ((1.0 - beta) / beta))
    s *= (2.0 ** (alpha / 2.0 - 1.0) * dt) ** (2.0 / alpha)
    r = math.sqrt(s)
    for j in range(d):
        x[j] += r * rng.standard_normal()


@njit
def _grow2(a, n):
    out = np.empty((n, a.shape[1]), a.dtype)
    out[:a.shape[0]] = a
    return out


@njit
def _grow1(a, n):
    out = np.empty(n, a.dtype)
    out[:a.size] = a
    return out


@njit
def advance(pos, t, s0, s1, acc, thr, rmax, birth, pid, parent,
            t_end, alpha, h_min, h_max, theta, adaptive, branching,
            kind, center, fparams, g_origin, g_spacing, g_shape, g_values, lo, hi,
            off_n, off_cdf, rng_motion, rng_branch, cap, next_id):
    """Evolve every particle (and its descendants) to ``t_end``.

    Particles follow the piecewise-constant interpolation of their skeleton;
    the occupation integral is exact for that path, so split times are exact
    threshold crossings.  Children are born at the parent's held position and
    finish the parent's current grid step before their first jump.
    """
    n_in, d = pos.shape
    capacity = max(2 * n_in, 64)
    o_pos = np.empty((capacity, d))
    o_sc = np.empty((capacity, 7))  # t, s0, s1, acc, thr, rmax, birth
    o_id = np.empty((capacity, 2), np.int64)
    n_out = 0

    st_cap = 64
    st_pos = np.empty((st_cap, d))
    st_sc = np.empty((st_cap, 7))
    st_id = np.empty((st_cap, 2), np.int64)
    x = np.empty(d)
    status = 0
    # scalar copies: passing the parameter arrays to a helper on every step is
    # dominated by reference counting
    c_dens = fparams[0]
    c_rad = fparams[1]
    c_eps = fparams[2]

    for i in range(n_in):
        st_pos[0] = pos[i]
        st_sc[0, 0] = t[i]
        st_sc[0, 1] = s0[i]
        st_sc[0, 2] = s1[i]
        st_sc[0, 3] = acc[i]
        st_sc[0, 4] = thr[i]
        st_sc[0, 5] = rmax[i]
        st_sc[0, 6] = birth[i]
        st_id[0, 0] = pid[i]
        st_id[0, 1] = parent[i]
        top = 1
        while top > 0:
            top -= 1
            x[:] = st_pos[top]
            tc = st_sc[top, 0]
            a0 = st_sc[top, 1]
            a1 = st_sc[top, 2]
            ac = st_sc[top, 3]
            th = st_sc[top, 4]
            rm = st_sc[top, 5]
            bt = st_sc[top, 6]
            me = st_id[top, 0]
            par = st_id[top, 1]
            while True:
                if kind == KIND_GRID:
                    v = density(x, kind, center, fparams, g_origin, g_spacing, g_shape, g_values)
                elif kind == KIND_SPHERE:
                    v = c_dens if abs(_norm(x) - c_rad) <= c_eps else 0.0
                elif kind == KIND_NONE:
                    v = 0.0
                else:
                    v = c_dens if _gap(x, center) <= c_rad else 0.0
                gain = v * (a1 - tc)
                if branching and v > 0.0 and ac + gain >= th:
                    ts = tc + (th - ac) / v
                    if ts > a1:
                        ts = a1
                    u = rng_branch.random()
                    k = 0
                    while k < off_cdf.size - 1 and u >= off_cdf[k]:
                        k += 1
                    nkids = off_n[k]
                    if n_out + top + nkids + (n_in - i - 1) > cap:
                        status = ABORT_CAP
                        break
                    if top + nkids > st_cap:
                        st_cap = 2 * (top + nkids)
                        st_pos = _grow2(st_pos, st_cap)
                        st_sc = _grow2(st_sc, st_cap)
                        st_id = _grow2(st_id, st_cap)
                    for _ in range(nkids):
                        st_pos[top] = x
                        st_sc[top, 0] = ts
                        st_sc[top, 1] = a0
                        st_sc[top, 2] = a1
                        st_sc[top, 3] = 0.0
                        st_sc[top, 4] = rng_branch.standard_exponential()
                        st_sc[top, 5] = rm
                        st_sc[top, 6] = ts
                        st_id[top, 0] = next_id
                        st_id[top, 1] = me
                        next_id += 1
                        top += 1
                    break
                ac += gain
                tc = a1
                if a1 > a0:
                    add_increment(x, alpha, a1 - a0, rng_motion)
                    r = _norm(x)
                    if r > rm:
                        rm = r
                if tc >= t_end:
                    if n_out >= capacity:
                        capacity = min(2 * capacity, max(cap, 1) + 1)
                        o_pos = _grow2(o_pos, capacity)
                        o_sc = _grow2(o_sc, capacity)
                        o_id = _grow2(o_id, capacity)
                    o_pos[n_out] = x
                    o_sc[n_out, 0] = tc
                    o_sc[n_out, 1] = tc
                    o_sc[n_out, 2] = tc
                    o_sc[n_out, 3] = ac
                    o_sc[n_out, 4] = th
                    o_sc[n_out, 5] = rm
                    o_sc[n_out, 6] = bt
                    o_id[n_out, 0] = me
                    o_id[n_out, 1] = par
                    n_out += 1
                    break
                h = h_min
                if adaptive:
                    if kind == KIND_GRID:
                        dist = distance(x, kind, center, fparams, lo, hi)
                    elif kind == KIND_SPHERE:
                        dist = max(abs(_norm(x) - c_rad) - c_eps, 0.0)
                    elif kind == KIND_NONE:
                        dist = np.inf
                    else:
                        dist = max(_gap(x, center) - c_rad, 0.0)
                    h = (theta * dist) ** alpha if dist < np.inf else h_max
                    if h < h_min:
                        h = h_min
                    if h > h_max:
                        h = h_max
                a0 = tc
                a1 = min(tc + h, t_end)
            if status != 0:
                break
        if status != 0:
            break
    return (o_pos[:n_out], o_sc[:n_out], o_id[:n_out], next_id, status)
