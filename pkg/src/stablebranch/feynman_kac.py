"""Single-particle Feynman-Kac estimators.

``E_x[exp(A_t^nu) f(X_t)]`` with ``nu = nu_scale * mu`` is estimated either by
plain Monte Carlo (``method="mc"``) or by a resampling particle approximation
(``method="smc"``).  The latter multiplies the running averages of the
incremental weights ``exp(nu_scale * (A_{s'} - A_s))`` across stages and
resamples when the effective sample size drops below half; the product is
unbiased and, unlike the plain average, its relative variance grows only
linearly in time.  It runs as independent batches whose spread gives the
standard error.

All averaging is done on log weights through ``logsumexp``.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np
from scipy.special import logsumexp

from . import rng as rngmod
from .branching import run_replication
from .catalyst import KernelCatalyst, NoCatalyst, max_admissible_step
from .kernels import ParticleArrays, StepRule, advance_particles, run_paths
from .stable import cauchy_tail_exact

MC_CHUNK = 20000


@dataclass
class FkEstimate:
    value: float
    std_error: float
    n_samples: int
    t: float
    kappa: float | None = None
    log_value: float = 0.0
    method: str = "mc"
    hits: int | None = None
    flags: list = field(default_factory=list)
    regime: dict = field(default_factory=dict)

    def to_dict(self):
        return {"value": self.value, "std_error": self.std_error, "n": self.n_samples,
                "t": self.t, "kappa": self.kappa, "log_value": self.log_value,
                "method": self.method, "hits": self.hits, "flags": self.flags,
                "regime": self.regime}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


class LogMeanAccumulator:
    """Streaming mean and variance of ``exp(a_i)`` kept in log scale; ``merge`` is associative."""

    def __init__(self):
        self.shift = -math.inf
        self.s1 = 0.0
        self.s2 = 0.0
        self.n = 0

    def add(self, log_w):
        log_w = np.asarray(log_w, dtype=float).ravel()
        if log_w.size == 0:
            return self
        other = LogMeanAccumulator()
        finite = log_w[np.isfinite(log_w)]
        other.shift = float(finite.max()) if finite.size else -math.inf
        if finite.size:
            w = np.exp(finite - other.shift)
            other.s1, other.s2 = float(w.sum()), float((w * w).sum())
        other.n = log_w.size
        return self.merge(other)

    def merge(self, other):
        shift = max(self.shift, other.shift)
        if shift == -math.inf:
            self.n += other.n
            return self
        a = math.exp(self.shift - shift) if self.shift > -math.inf else 0.0
        b = math.exp(other.shift - shift) if other.shift > -math.inf else 0.0
        self.s1 = self.s1 * a + other.s1 * b
        self.s2 = self.s2 * a * a + other.s2 * b * b
        self.shift = shift
        self.n += other.n
        return self

    def log_mean(self):
        if self.s1 == 0.0:
            return -math.inf
        return self.shift + math.log(self.s1 / self.n)

    def log_se(self):
        if self.n < 2 or self.s1 == 0.0:
            return -math.inf
        m = self.s1 / self.n
        var = max(self.s2 / self.n - m * m, 0.0) * self.n / (self.n - 1)
        return -math.inf if var == 0.0 else self.shift + 0.5 * math.log(var / self.n)


def default_rule(spec, motion):
    return StepRule(min(max_admissible_step(spec, motion.alpha), 0.01))


def _functional_masks(X, M, fns):
    """Evaluate functionals ``fns`` (callables of (X_t, runmax)) to nonnegative arrays."""
    return [np.asarray(f(X, M), dtype=float) for f in fns]


def fk_mc(spec, motion, nu_scale, x0, times, n, seed, fns, rule=None):
    """Plain Monte Carlo: accumulators ``acc[j][k]`` for time ``times[j]`` and functional ``k``."""
    rule = rule or default_rule(spec, motion)
    enc = KernelCatalyst(spec, motion.alpha, motion.dim, nu_scale)
    acc = [[LogMeanAccumulator() for _ in fns] for _ in times]
    hits = np.zeros((len(times), len(fns)), dtype=np.int64)
    done = 0
    chunk = 0
    while done < n:
        m = min(MC_CHUNK, n - done)
        A, X, M = run_paths(x0, m, times, motion.alpha, enc, rule,
                            rngmod.stream(seed, chunk, rngmod.MOTION))
        for j in range(len(times)):
            for k, val in enumerate(_functional_masks(X[:, j], M[:, j], fns)):
                with np.errstate(divide="ignore"):
                    acc[j][k].add(nu_scale * A[:, j] + np.log(val))
                hits[j, k] += int(np.count_nonzero(val))
        done += m
        chunk += 1
    return acc, hits


def _systematic(log_w, rng):
    w = np.exp(log_w - logsumexp(log_w))
    m = w.size
    u = (rng.random() + np.arange(m)) / m
    idx = np.searchsorted(np.cumsum(w), u, side="right")
    return np.minimum(idx, m - 1)


def fk_smc_batch(enc, motion, nu_scale, x0, times, m, seed, batch, fns, rule, resample_every):
    """One resampling run; returns ``(log_est[j, k], hits[j, k])``."""
    times = np.asarray(times, dtype=float)
    stages = np.union1d(times, np.arange(resample_every, times.max(), resample_every))
    rng_m = rngmod.stream(seed, batch, rngmod.MOTION)
    rng_r = rngmod.stream(seed, batch, rngmod.PROBE)
    parts = ParticleArrays.roots(x0, m, np.full(m, math.inf))
    prev_a = np.zeros(m)
    log_w = np.full(m, -math.log(m))
    log_z = 0.0
    out = np.full((times.size, len(fns)), -math.inf)
    hits = np.zeros((times.size, len(fns)), dtype=np.int64)
    for tau in stages:
        parts, _, _ = advance_particles(parts, tau, motion.alpha, enc, rule, None, rng_m, rng_m,
                                        branching=False)
        order = np.argsort(parts.ids[:, 0], kind="stable")
        parts = ParticleArrays(parts.pos[order], parts.sc[order], parts.ids[order])
        a = parts.acc
        log_w = log_w + nu_scale * (a - prev_a)
        prev_a = a.copy()
        j = np.flatnonzero(times == tau)
        if j.size:
            for k, val in enumerate(_functional_masks(parts.pos, parts.rmax, fns)):
                with np.errstate(divide="ignore"):
                    out[j[0], k] = log_z + logsumexp(log_w + np.log(val))
                hits[j[0], k] = int(np.count_nonzero(val))
        ess = math.exp(2 * logsumexp(log_w) - logsumexp(2 * log_w))
        if ess < m / 2 and tau < times.max():
            idx = _systematic(log_w, rng_r)
            log_z += logsumexp(log_w)
            log_w = np.full(m, -math.log(m))
            ids = parts.ids[idx].copy()
            ids[:, 0] = np.arange(m)
            parts = ParticleArrays(parts.pos[idx].copy(), parts.sc[idx].copy(), ids)
            prev_a = prev_a[idx]
    return out, hits


def fk_smc(spec, motion, nu_scale, x0, times, n, seed, fns, rule=None, batches=20,
           resample_every=1.0):
    if batches < 2:
        raise ValueError("smc needs at least two batches for an error estimate")
    rule = rule or default_rule(spec, motion)
    enc = KernelCatalyst(spec, motion.alpha, motion.dim, nu_scale)
    m = max(n // batches, 2)
    logs = []
    hits = 0
    for b in range(batches):
        est, h = fk_smc_batch(enc, motion, nu_scale, x0, times, m, seed, b, fns, rule,
                              resample_every)
        logs.append(est)
        hits = hits + h
    return np.array(logs), hits


def _combine_batches(log_b):
    """Mean and standard error of ``exp(log_b)`` across batches, in log scale."""
    B = log_b.size
    finite = np.isfinite(log_b)
    if not finite.any():
        return -math.inf, 0.0
    shift = log_b[finite].max()
    v = np.exp(log_b - shift)
    mean = v.mean()
    se = v.std(ddof=1) / math.sqrt(B)
    return shift + math.log(mean), se * math.exp(shift)


def _estimate(spec, motion, nu_scale, x0, times, n, seed, fns, rule, method, batches,
              resample_every):
    """Estimates for every (time, functional): list over times of lists of (log_v, se, hits)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if isinstance(spec, NoCatalyst) or nu_scale == 0:
        method = "mc"
    if method == "mc":
        acc, hits = fk_mc(spec, motion, nu_scale, x0, times, n, seed, fns, rule)
        return [[(a.log_mean(), math.exp(a.log_se()) if a.log_se() > -math.inf else 0.0,
                  int(hits[j, k])) for k, a in enumerate(row)] for j, row in enumerate(acc)], n
    if method == "smc":
        logs, hits = fk_smc(spec, motion, nu_scale, x0, times, n, seed, fns, rule, batches,
                            resample_every)
        out = []
        for j in range(len(times)):
            out.append([_combine_batches(logs[:, j, k]) + (int(hits[j, k]),)
                        for k in range(len(fns))])
        return out, (n // batches) * batches
    raise ValueError(f"unknown method {method!r}")


def _one(x, _m):
    return np.ones(x.shape[0])


def estimate_exp_functional_series(spec, motion, nu_scale, x0, times, n, seed, rule=None,
                                   method="mc", batches=20, resample_every=1.0):
    """:func:`estimate_exp_functional` at several horizons from one set of paths."""
    res, n_used = _estimate(spec, motion, nu_scale, x0, list(times), n, seed, [_one], rule,
                            method, batches, resample_every)
    out = []
    for t, row in zip(times, res):
        log_v, se, _ = row[0]
        out.append(FkEstimate(math.exp(log_v), se, n_used, float(t), None, log_v,
                              method if nu_scale and not isinstance(spec, NoCatalyst) else "mc"))
    return out


def estimate_exp_functional(spec, motion, nu_scale, x0, t, n, seed, rule=None, method="mc",
                            batches=20, resample_every=1.0):
    """Estimate ``E_x[exp(A_t^nu)]`` with ``nu = nu_scale * mu``."""
    return estimate_exp_functional_series(spec, motion, nu_scale, x0, [t], n, seed, rule, method,
                                          batches, resample_every)[0]


def tail_regime(motion, t, kappa):
    scaled = kappa * t ** (-1.0 / motion.alpha)
    return {"kappa_t_scaled": scaled, "asymptotic": bool(scaled >= 3.0),
            "importance_sampling_needed": bool(scaled > 1e3)}


def estimate_tail_functional(spec, motion, nu_scale, x0, t, kappa, n, seed, rule=None,
                             method="mc", batches=20, resample_every=1.0):
    """Estimate ``E_x[exp(A_t^nu); |X_t| >= kappa]``; flags ``no-hit`` when nothing exceeds."""
    def beyond(x, _m):
        return (np.linalg.norm(x, axis=1) >= kappa).astype(float)

    res, n_used = _estimate(spec, motion, nu_scale, x0, [t], n, seed, [beyond], rule, method,
                            batches, resample_every)
    log_v, se, hits = res[0][0]
    est = FkEstimate(math.exp(log_v), se, n_used, float(t), float(kappa), log_v, method, hits,
                     regime=tail_regime(motion, t, kappa))
    if hits == 0:
        est.flags.append("no-hit")
        est.value, est.log_value = 0.0, -math.inf
    return est


def estimate_running_max_functional(spec, motion, nu_scale, x0, t, kappa, n, seed, rule=None,
                                    method="mc", batches=20, resample_every=1.0):
    """Estimate ``E_x[exp(A_t^nu); sup_{s<=t} |X_s| >= kappa]`` (grid supremum)."""
    def beyond(_x, m):
        return (m >= kappa).astype(float)

    res, n_used = _estimate(spec, motion, nu_scale, x0, [t], n, seed, [beyond], rule, method,
                            batches, resample_every)
    log_v, se, hits = res[0][0]
    est = FkEstimate(math.exp(log_v), se, n_used, float(t), float(kappa), log_v, method, hits)
    if hits == 0:
        est.flags.append("no-hit")
    return est


def ball_indicator(center, radius):
    center = np.atleast_1d(np.asarray(center, dtype=float))

    def f(x, _m=None):
        return (np.linalg.norm(x - center, axis=1) <= radius).astype(float)

    return f


def many_to_one_pair(motion, spec, law, x0, t, n, seed, f_ball=(0.0, 1.0), rule=None,
                     running_max_kappa=None, n_fk=None):
    """Compare the branching ensemble mean of ``Z_t(f)`` with the Feynman-Kac value.

    ``f`` is the indicator of the ball ``B(center, radius)``; ``f_ball=None`` means
    ``f = 1``.  With ``running_max_kappa`` the historical version is compared:
    particles whose ancestral grid path reached ``|X| >= kappa`` versus
    ``E_x[exp(A_t^{(Q-1)mu}); sup |X_s| >= kappa]``.
    """
    from .catalyst import q_r_moments

    rule = rule or default_rule(spec, motion)
    nu_scale = q_r_moments(law)[0] - 1.0
    if running_max_kappa is not None:
        kappa = float(running_max_kappa)
        fk_f = lambda x, m: (m >= kappa).astype(float)  # noqa: E731
    elif f_ball is None:
        fk_f = _one
    else:
        fk_f = ball_indicator(*f_ball)
    z_vals = np.empty(n)
    for rep in range(n):
        res = run_replication(motion, spec, law, x0, [t], rule, seed, rep,
                              f=None if running_max_kappa is not None else (lambda x: fk_f(x, None)),
                              lineage_kappas=[running_max_kappa] if running_max_kappa else None)
        last = res.stats_log[-1]
        if res.status != "ok":
            raise RuntimeError(f"replication {rep} aborted: {res.status}")
        z_vals[rep] = last.H_t_kappa[kappa] if running_max_kappa is not None else last.Z_f
    b_mean = float(z_vals.mean())
    b_se = float(z_vals.std(ddof=1) / math.sqrt(n))
    res, _ = _estimate(spec, motion, nu_scale, x0, [t], n_fk or n, seed + 1, [fk_f], rule, "mc",
                       20, 1.0)
    log_v, fk_se, _ = res[0][0]
    fk_mean = math.exp(log_v)
    denom = math.hypot(b_se, fk_se)
    z = (b_mean - fk_mean) / denom if denom > 0 else 0.0
    return {"branching_mean": b_mean, "branching_se": b_se, "fk_mean": fk_mean, "fk_se": fk_se,
            "z_score": z, "t": t, "n": n}


def running_max_sandwich_check(motion, x0, kappa, n, seed, step=0.01, t=1.0, min_hits=50):
    """Grid running max ``M_t`` against ``P(|X_t| >= kappa) <= P(M_t >= kappa) <= 2 P(|X_t| >= kappa)``.

    The grid maximum understates the continuous one, so only the lower half of
    the band is biased (towards failing).  When alpha = 1 and d = 1 the exact
    Cauchy tail is used as the reference, otherwise the empirical end-point tail.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if np.linalg.norm(x0) >= kappa:
        raise ValueError("need |x0| < kappa")
    rule = StepRule(step, adaptive=False, max_step=step)
    enc = KernelCatalyst(NoCatalyst(), motion.alpha, motion.dim)
    hits_max = 0
    hits_end = 0
    done, chunk = 0, 0
    while done < n:
        m = min(10 * MC_CHUNK, n - done)
        _, X, M = run_paths(x0, m, [t], motion.alpha, enc, rule,
                            rngmod.stream(seed, chunk, rngmod.MOTION))
        hits_max += int(np.count_nonzero(M[:, 0] >= kappa))
        hits_end += int(np.count_nonzero(np.linalg.norm(X[:, 0], axis=1) >= kappa))
        done += m
        chunk += 1
    p_max = hits_max / n
    p_end = hits_end / n
    exact = None
    if motion.alpha == 1.0 and motion.dim == 1 and np.allclose(x0, 0.0):
        exact = float(cauchy_tail_exact(kappa, t))
    ref = exact if exact is not None else p_end
    se = math.sqrt(max(p_max * (1 - p_max), 1e-300) / n)
    rel_se = se / p_max if p_max > 0 else math.inf
    lower = ref * (1 - 3 * rel_se)
    upper = 2 * ref * (1 + 3 * rel_se)
    flags = []
    if hits_max < min_hits:
        flags.append("insufficient exceedances")
    return {"p_max": p_max, "p_end": p_end, "p_reference": ref, "exact": exact, "se": se,
            "band": [lower, upper], "hits": hits_max,
            "passed": bool(lower <= p_max <= upper) and not flags, "flags": flags,
            "note": "grid maximum is a lower bound for the continuous running maximum"}
