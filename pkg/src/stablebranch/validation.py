"""Statistical checks of the stable sampler (tails, self-similarity, running maximum)."""
import math

import numpy as np
from scipy import stats

from . import rng as rngmod
from .stable import StableParams, sample_stable, tail_probability_reference
from .feynman_kac import running_max_sandwich_check

CHUNK = 10**6


def _norms(params, dt, n, g):
    out = np.empty(n)
    for s in range(0, n, CHUNK):
        m = min(CHUNK, n - s)
        out[s:s + m] = np.linalg.norm(sample_stable(params, dt, m, g), axis=1)
    return out


def tail_check(alpha, dim, n=10**7, seed=1, min_exceed=500, tol=0.10):
    """Compare ``kappa^alpha P(|X_1| >= kappa)`` with ``omega_d C / alpha``.

    ``kappa`` is the largest sample radius that still has ``min_exceed``
    exceedances, i.e. the ``min_exceed``-th largest norm.
    """
    params = StableParams(alpha, dim)
    r = _norms(params, 1.0, n, rngmod.stream(seed, rngmod.PROBE, 1, int(alpha * 1000), dim))
    kappa = float(np.partition(r, n - min_exceed)[n - min_exceed])
    hits = int(np.count_nonzero(r >= kappa))
    p_hat = hits / n
    ref = tail_probability_reference(params, kappa) * kappa ** alpha
    measured = kappa ** alpha * p_hat
    rel = measured / ref - 1.0
    return {"check": "tail", "alpha": alpha, "dim": dim, "n": n, "kappa": kappa,
            "exceedances": hits, "measured": measured, "reference": ref, "rel_error": rel,
            "passed": bool(abs(rel) <= tol)}


def scaling_check(alpha, dim=1, n=10**5, seed=2, t=4.0, p_min=0.01):
    """Two-sample KS test between ``X_t`` and ``t^{1/alpha} X_1`` (first coordinate)."""
    params = StableParams(alpha, dim)
    a = sample_stable(params, t, n, rngmod.stream(seed, rngmod.PROBE, 2, 0))[:, 0]
    b = t ** (1.0 / alpha) * sample_stable(params, 1.0, n, rngmod.stream(seed, rngmod.PROBE, 2, 1))[:, 0]
    res = stats.ks_2samp(a, b)
    return {"check": "scaling", "alpha": alpha, "dim": dim, "n": n, "t": t,
            "ks_statistic": float(res.statistic), "p_value": float(res.pvalue),
            "passed": bool(res.pvalue > p_min)}


def sandwich_check(kappa=20.0, n=10**6, seed=3, step=0.01):
    """Running-maximum band for the Cauchy process (alpha = 1, d = 1)."""
    out = running_max_sandwich_check(StableParams(1.0, 1), [0.0], kappa, n, seed, step=step)
    out["check"] = "running-max"
    return out


def run_suite(seed=2024, n_tail=10**7, n_ks=10**5, n_max=10**6):
    """All sampler checks; ``passed`` is true only if every check passed."""
    results = [tail_check(a, d, n_tail, seed) for a in (1.0, 1.5) for d in (1, 2)]
    results += [scaling_check(a, 1, n_ks, seed) for a in (1.0, 1.5)]
    results.append(sandwich_check(n=n_max, seed=seed))
    for r in results:
        for k, v in list(r.items()):
            if isinstance(v, float) and not math.isfinite(v):
                r[k] = None
    return {"passed": all(r["passed"] for r in results), "results": results}
