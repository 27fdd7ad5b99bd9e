"""Vectorised pure-numpy kernels: all live particles advance one stage per sweep."""
import numpy as np

from .catalyst import KIND_BALL, KIND_GRID, KIND_NONE, KIND_POINT, KIND_SPHERE

ABORT_CAP = 1


def density(x, kind, center, fparams, g_origin, g_spacing, g_shape, g_values):
    out = np.zeros(x.shape[0])
    if kind == KIND_POINT or kind == KIND_BALL:
        r = np.sqrt(((x - center) ** 2).sum(axis=1))
        out[r <= fparams[1]] = fparams[0]
    elif kind == KIND_SPHERE:
        r = np.sqrt((x ** 2).sum(axis=1))
        out[np.abs(r - fparams[1]) <= fparams[2]] = fparams[0]
    elif kind == KIND_GRID:
        idx = np.rint((x - g_origin) / g_spacing).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < g_shape), axis=1)
        flat = np.ravel_multi_index(tuple(idx[inside].T), tuple(g_shape))
        out[inside] = g_values[flat]
    return out


def distance(x, kind, center, fparams, lo, hi):
    if kind == KIND_POINT or kind == KIND_BALL:
        return np.maximum(np.sqrt(((x - center) ** 2).sum(axis=1)) - fparams[1], 0.0)
    if kind == KIND_SPHERE:
        return np.maximum(np.abs(np.sqrt((x ** 2).sum(axis=1)) - fparams[1]) - fparams[2], 0.0)
    if kind == KIND_GRID:
        gap = np.maximum(np.maximum(lo - x, x - hi), 0.0)
        return np.sqrt((gap ** 2).sum(axis=1))
    return np.full(x.shape[0], np.inf)


def increments(alpha, dt, d, rng):
    """Independent increments over the time steps ``dt`` (array); shape ``(len(dt), d)``."""
    n = dt.size
    u = rng.random(n)
    w = rng.standard_exponential(n)
    if d == 1:
        v = np.pi * (u - 0.5)
        if alpha == 1.0:
            z = np.tan(v)
        else:
            z = (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
                 * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))
        return ((dt / 2.0) ** (1.0 / alpha) * z)[:, None]
    beta = alpha / 2.0
    a = np.pi * u
    s = (np.sin(beta * a) / np.sin(a) ** (1.0 / beta)
         * (np.sin((1.0 - beta) * a) / w) ** ((1.0 - beta) / beta))
    s *= (2.0 ** (alpha / 2.0 - 1.0) * dt) ** (2.0 / alpha)
    return np.sqrt(s)[:, None] * rng.standard_normal((n, d))


def advance(pos, t, s0, s1, acc, thr, rmax, birth, pid, parent,
            t_end, alpha, h_min, h_max, theta, adaptive, branching,
            kind, center, fparams, g_origin, g_spacing, g_shape, g_values, lo, hi,
            off_n, off_cdf, rng_motion, rng_branch, cap, next_id):
    """Same model and signature as the compiled kernel; different stream order."""
    d = pos.shape[1]
    pos = pos.copy()
    sc = np.column_stack([t, s0, s1, acc, thr, rmax, birth]).astype(float)
    ids = np.column_stack([pid, parent]).astype(np.int64)
    done_pos, done_sc, done_id = [], [], []
    n_done = 0
    while pos.shape[0] > 0:
        tc, a0, a1, ac, th = sc[:, 0], sc[:, 1], sc[:, 2], sc[:, 3], sc[:, 4]
        v = density(pos, kind, center, fparams, g_origin, g_spacing, g_shape, g_values)
        gain = v * (a1 - tc)
        split = (v > 0) & (ac + gain >= th) if branching else np.zeros(v.size, bool)
        kids_pos = kids_sc = kids_id = None
        if split.any():
            ps = np.flatnonzero(split)
            ts = np.minimum(tc[ps] + (th[ps] - ac[ps]) / v[ps], a1[ps])
            nk = off_n[np.minimum(np.searchsorted(off_cdf, rng_branch.random(ps.size), side="right"),
                                  off_cdf.size - 1)]
            if n_done + (pos.shape[0] - ps.size) + nk.sum() > cap:
                return _pack(done_pos, done_sc, done_id, d) + (next_id, ABORT_CAP)
            rep = np.repeat(ps, nk)
            m = rep.size
            kids_pos = pos[rep]
            kids_sc = np.empty((m, 7))
            kids_sc[:, 0] = np.repeat(ts, nk)
            kids_sc[:, 1] = a0[rep]
            kids_sc[:, 2] = a1[rep]
            kids_sc[:, 3] = 0.0
            kids_sc[:, 4] = rng_branch.standard_exponential(m)
            kids_sc[:, 5] = sc[rep, 5]
            kids_sc[:, 6] = kids_sc[:, 0]
            kids_id = np.empty((m, 2), np.int64)
            kids_id[:, 0] = next_id + np.arange(m)
            kids_id[:, 1] = ids[rep, 0]
            next_id += m
        keep = ~split
        pos, sc, ids, gain = pos[keep], sc[keep], ids[keep], gain[keep]
        sc[:, 3] += gain
        sc[:, 0] = sc[:, 2]
        moving = sc[:, 2] > sc[:, 1]
        if moving.any():
            mv = np.flatnonzero(moving)
            pos[mv] += increments(alpha, sc[mv, 2] - sc[mv, 1], d, rng_motion)
            sc[mv, 5] = np.maximum(sc[mv, 5], np.sqrt((pos[mv] ** 2).sum(axis=1)))
        fin = sc[:, 0] >= t_end
        if fin.any():
            f = sc[fin]
            f[:, 1] = f[:, 0]
            f[:, 2] = f[:, 0]
            done_pos.append(pos[fin])
            done_sc.append(f)
            done_id.append(ids[fin])
            n_done += int(fin.sum())
            pos, sc, ids = pos[~fin], sc[~fin], ids[~fin]
        if pos.shape[0]:
            h = np.full(pos.shape[0], h_min)
            if adaptive:
                dist = distance(pos, kind, center, fparams, lo, hi)
                with np.errstate(invalid="ignore", over="ignore"):
                    h = np.where(np.isfinite(dist), (theta * dist) ** alpha, h_max)
                h = np.clip(h, h_min, h_max)
            sc[:, 1] = sc[:, 0]
            sc[:, 2] = np.minimum(sc[:, 0] + h, t_end)
        if kids_pos is not None:
            pos = np.concatenate([pos, kids_pos])
            sc = np.concatenate([sc, kids_sc])
            ids = np.concatenate([ids, kids_id])
    return _pack(done_pos, done_sc, done_id, d) + (next_id, 0)


def _pack(done_pos, done_sc, done_id, d):
    if not done_pos:
        return np.empty((0, d)), np.empty((0, 7)), np.empty((0, 2), np.int64)
    return np.concatenate(done_pos), np.concatenate(done_sc), np.concatenate(done_id)
