"""Growth-exponent pipelines for ``L_t``, ``N_t`` and the exceedance counts ``N_t^kappa``.

The limits being checked are almost-sure ``t -> infinity`` statements, so
finite-horizon slopes are compared with their targets through declared bands
(``BANDS``).  Band widths are engineering choices; they are recorded in each
report's ``meta``.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import json
import math
import os

import numpy as np

from . import rng as rngmod
from .branching import run_replication
from .catalyst import PointMass, q_r_moments
from .spectral import lambda_numeric, lambda_point_catalyst, potential_on_box

BANDS = {
    "log_Lt": (0.5, 2.0),
    "log_Nt": (0.85, 1.15),
    "log_Nt_pathwise": (0.7, 1.3),
    "log_Nt_kappa": (0.5, 2.0),
    "zero_fraction_min": 0.9,
}
MAX_ABORTED = 0.2
WORKERS_ENV = "STABLEBRANCH_MAX_WORKERS"


@dataclass(frozen=True)
class ThresholdSchedule:
    """``kappa(t) = exp(delta t) a(t)`` with ``a`` constant, logarithmic or a power."""

    delta: float
    a_kind: str = "constant"
    a0: float = 1.0
    p: float = 0.5

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.a_kind not in ("constant", "log", "power"):
            raise ValueError("a_kind must be 'constant', 'log' or 'power'")
        if not self.a0 > 0 or (self.a_kind == "power" and not self.p > 0):
            raise ValueError("a0 (and p for the power family) must be positive")

    def a(self, t):
        t = np.asarray(t, dtype=float)
        if self.a_kind == "constant":
            return self.a0 * np.ones_like(t)
        if self.a_kind == "log":
            return self.a0 * np.log1p(t)
        return self.a0 * t ** self.p

    def __call__(self, t):
        return np.exp(self.delta * np.asarray(t, dtype=float)) * self.a(t)


@dataclass
class GrowthReport:
    observable: str
    slope: float
    slope_ci: tuple
    target: float
    t_range: tuple
    replications: int
    conditioning: str = "none"
    statistic: str = "median-pathwise"
    delta: float | None = None
    zero_fraction: float | None = None
    valid: bool = True
    meta: dict = field(default_factory=dict)

    def ratio(self):
        return self.slope / self.target if self.target else math.nan

    def to_dict(self):
        d = dict(self.__dict__)
        d["slope_ci"] = list(self.slope_ci)
        d["t_range"] = list(self.t_range)
        return d


@dataclass
class Ensemble:
    """Replication-by-time arrays from :func:`simulate_ensemble`; row ``i`` is replication ``i``."""

    t_grid: np.ndarray
    N: np.ndarray
    L: np.ndarray
    M: np.ndarray
    Nk: dict
    status: list
    lam: float
    alpha: float
    seed: int

    @property
    def ok(self):
        return np.array([s == "ok" for s in self.status])

    def aborted_fraction(self):
        return 1.0 - self.ok.mean()


def spectral_bottom(config):
    """``(lambda, SpectralResult or None)`` for the effective potential ``(Q-1) mu``."""
    q, _ = q_r_moments(config.offspring)
    spec = config.catalyst
    if config.motion.dim == 1:
        sp = config.spectral
        V = potential_on_box(spec, config.motion.alpha, sp["L"], sp["nodes"], q - 1.0)
        if not V.any():
            return 0.0, None
        res = lambda_numeric(V, config.motion.alpha, sp["L"], tol=sp["tol"])
        return res.lam, (res if res.bound_state else None)
    if isinstance(spec, PointMass):
        return lambda_point_catalyst((q - 1.0) * spec.mass, config.motion.alpha), None
    return math.nan, None


def _run_one(args):
    config, t_grid, rep, schedules, spectral = args
    res = run_replication(config.motion, config.catalyst, config.offspring, config.x0, t_grid,
                          config.step_rule(), config.seed, rep, cap=config.population_cap,
                          spectral=spectral, kappa_schedules=schedules)
    out = {"status": res.status}
    if res.status == "ok":
        rows = res.stats_log[1:]
        out["N"] = [s.N_t for s in rows]
        out["L"] = [s.L_t for s in rows]
        out["M"] = [math.nan if s.M_t is None else s.M_t for s in rows]
        out["Nk"] = [[s.N_t_kappa[f"sched{i}"] for s in rows] for i in range(len(schedules))]
    return out


def simulate_ensemble(config, t_grid, reps=None, schedules=(), workers=None):
    """Run ``reps`` replications and collect ``N_t``, ``L_t``, ``M_t`` and ``N_t^{kappa_s(t)}``.

    Replications may run in worker processes (``STABLEBRANCH_MAX_WORKERS``);
    results are assembled by replication index, so output does not depend on
    the worker count.
    """
    reps = config.replications if reps is None else reps
    t_grid = np.asarray(t_grid, dtype=float)
    lam, spectral = spectral_bottom(config)
    workers = workers or int(os.environ.get(WORKERS_ENV, "1"))
    jobs = [(config, t_grid, rep, tuple(schedules), spectral) for rep in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    T = t_grid.size
    N, L, M = (np.full((reps, T), np.nan) for _ in range(3))
    Nk = [np.full((reps, T), np.nan) for _ in schedules]
    status = []
    for rep, r in enumerate(results):
        status.append(r["status"])
        if r["status"] == "ok":
            N[rep], L[rep], M[rep] = r["N"], r["L"], r["M"]
            for i in range(len(schedules)):
                Nk[i][rep] = r["Nk"][i]
    return Ensemble(t_grid, N, L, M, Nk, status, lam, config.motion.alpha, config.seed)


def _slopes(t, Y):
    """Least-squares slope of each row of ``Y`` against ``t`` (rows with non-finite values give nan)."""
    tc = t - t.mean()
    denom = float(tc @ tc)
    with np.errstate(invalid="ignore"):
        out = (Y - Y.mean(axis=1, keepdims=True)) @ tc / denom
    out[~np.all(np.isfinite(Y), axis=1)] = np.nan
    return out


def _slope(t, y):
    return float(_slopes(t, y[None, :])[0])


def _bootstrap_ci(values, stat, seed, n_boot=2000, level=0.95):
    values = np.asarray(values)
    if values.size < 2:
        v = stat(values) if values.size else math.nan
        return (v, v)
    g = rngmod.stream(seed, rngmod.PROBE, 7)
    idx = g.integers(0, values.size, size=(n_boot, values.size))
    boots = np.array([stat(values[i]) for i in idx])
    a = (1 - level) / 2
    return (float(np.quantile(boots, a)), float(np.quantile(boots, 1 - a)))


def survival_mask(ens, q=0.2):
    """Replications whose final ``M_t`` (or ``N_t`` when ``M`` is unavailable) is above its ``q`` quantile."""
    ok = ens.ok
    last = ens.M[:, -1]
    if not np.all(np.isfinite(last[ok])):
        last = ens.N[:, -1]
    if not ok.any():
        return ok
    cut = np.quantile(last[ok], q)
    return ok & (last > cut) if q > 0 else ok


def _select(ens, conditioning, q):
    if conditioning == "none":
        return ens.ok
    if conditioning == "survival-proxy":
        return survival_mask(ens, q)
    raise ValueError("conditioning must be 'none' or 'survival-proxy'")


def _meta(config, ens, band_key, extra=None):
    meta = {"band": list(BANDS[band_key]) if isinstance(BANDS[band_key], tuple) else BANDS[band_key],
            "band_note": "engineering tolerance for a finite-horizon estimate of a t -> infinity limit",
            "lambda": ens.lam, "alpha": ens.alpha, "seed": int(ens.seed),
            "aborted_fraction": float(ens.aborted_fraction()),
            "step": config.step, "adaptive_steps": bool(config.adaptive_steps)}
    meta.update(extra or {})
    return meta


def _check_growth(lam):
    if not (np.isfinite(lam) and lam < 0):
        return False
    return True


def _report(observable, slopes, target, ens, config, conditioning, statistic, band_key,
            extra=None, delta=None):
    slopes = slopes[np.isfinite(slopes)]
    slope = float(np.median(slopes)) if slopes.size else math.nan
    ci = _bootstrap_ci(slopes, np.median, ens.seed)
    ci = (min(ci[0], slope), max(ci[1], slope))
    return GrowthReport(observable, slope, ci, float(target),
                        (float(ens.t_grid[0]), float(ens.t_grid[-1])), len(ens.status),
                        conditioning, statistic, delta, None,
                        ens.aborted_fraction() <= MAX_ABORTED,
                        _meta(config, ens, band_key, extra))


def growth_exponent_Lt(config, t_grid=None, reps=None, conditioning="none", ensemble=None, q=None):
    """Median over replications of the regression slope of ``log L_t`` on ``t``; target ``-lambda/alpha``.

    With no exponential growth (``lambda = 0``) the target is 0.
    """
    ens = ensemble or simulate_ensemble(config, config.t_grid() if t_grid is None else t_grid, reps)
    q = config.experiment["conditioning_q"] if q is None else q
    target = -ens.lam / ens.alpha if _check_growth(ens.lam) else 0.0
    mask = _select(ens, conditioning, q)
    with np.errstate(divide="ignore"):
        slopes = _slopes(ens.t_grid, np.log(ens.L[mask]))
    return _report("log_Lt", slopes, target, ens, config, conditioning, "median-pathwise",
                   "log_Lt", {"used_replications": int(mask.sum())})


def growth_exponent_Nt(config, t_grid=None, reps=None, statistic="ensemble-mean",
                       conditioning="none", ensemble=None, q=None):
    """Slope of ``log N_t``; target ``-lambda``.

    ``statistic="ensemble-mean"`` regresses ``log mean N_t`` (CI by bootstrap
    over replications); ``"median-pathwise"`` takes the median of per-replication
    slopes.
    """
    ens = ensemble or simulate_ensemble(config, config.t_grid() if t_grid is None else t_grid, reps)
    q = config.experiment["conditioning_q"] if q is None else q
    target = -ens.lam if _check_growth(ens.lam) else 0.0
    mask = _select(ens, conditioning, q)
    N = ens.N[mask]
    if statistic == "median-pathwise":
        return _report("log_Nt", _slopes(ens.t_grid, np.log(N)), target, ens, config,
                       conditioning, statistic, "log_Nt_pathwise",
                       {"used_replications": int(mask.sum())})
    if statistic != "ensemble-mean":
        raise ValueError("statistic must be 'ensemble-mean' or 'median-pathwise'")
    t = ens.t_grid
    slope = _slope(t, np.log(N.mean(axis=0)))
    ci = _bootstrap_ci(np.arange(N.shape[0]), lambda i: _slope(t, np.log(N[i].mean(axis=0))),
                       ens.seed, n_boot=500)
    ci = (min(ci[0], slope), max(ci[1], slope))
    return GrowthReport("log_Nt", slope, ci, float(target), (float(t[0]), float(t[-1])),
                        len(ens.status), conditioning, statistic, None, None,
                        ens.aborted_fraction() <= MAX_ABORTED,
                        _meta(config, ens, "log_Nt", {"used_replications": int(mask.sum())}))


def threshold_scan(config, deltas, schedule_family="constant", t_grid=None, reps=None,
                   conditioning="survival-proxy", a0=None, p=None, ensemble=None, q=None):
    """Exceedance counts ``N_t^{kappa_delta(t)}`` across a scan of ``delta``.

    ``deltas`` are absolute rates.  For ``delta`` above the critical rate
    ``-lambda/alpha`` the report carries the fraction of replications with no
    exceedance at the final time; below it, the median pathwise slope of
    ``log N_t^kappa`` (over replications with a positive count throughout)
    against ``-lambda - alpha delta``.
    """
    ex = config.experiment
    a0 = ex["a0"] if a0 is None else a0
    p = ex["p"] if p is None else p
    q = ex["conditioning_q"] if q is None else q
    deltas = [float(d) for d in deltas]
    schedules = [ThresholdSchedule(d, schedule_family, a0, p) for d in deltas]
    ens = ensemble or simulate_ensemble(config, config.t_grid() if t_grid is None else t_grid,
                                        reps, schedules=schedules)
    if not _check_growth(ens.lam):
        raise ValueError("threshold_scan requires lambda < 0")
    crit = -ens.lam / ens.alpha
    if any(math.isclose(d, crit, rel_tol=1e-9) for d in deltas):
        raise ValueError("delta equal to the critical rate -lambda/alpha is excluded")
    mask = _select(ens, conditioning, q)
    reports = []
    for i, d in enumerate(deltas):
        Nk = ens.Nk[i][mask]
        extra = {"critical_delta": crit, "a_kind": schedule_family, "a0": a0,
                 "used_replications": int(mask.sum())}
        if schedule_family == "power":
            extra["p"] = p
        if d > crit:
            zero = float(np.mean(Nk[:, -1] == 0)) if Nk.size else math.nan
            rep = GrowthReport("log_Nt_kappa", math.nan, (math.nan, math.nan), 0.0,
                               (float(ens.t_grid[0]), float(ens.t_grid[-1])), len(ens.status),
                               conditioning, "zero-fraction", d, zero,
                               ens.aborted_fraction() <= MAX_ABORTED,
                               _meta(config, ens, "zero_fraction_min", extra))
        else:
            with np.errstate(divide="ignore"):
                slopes = _slopes(ens.t_grid, np.log(Nk))
            extra["positive_replications"] = int(np.isfinite(slopes).sum())
            rep = _report("log_Nt_kappa", slopes, -ens.lam - ens.alpha * d, ens, config,
                          conditioning, "median-pathwise", "log_Nt_kappa", extra, delta=d)
            rep.zero_fraction = float(np.mean(Nk[:, -1] == 0)) if Nk.size else math.nan
        reports.append(rep)
    return reports


def reports_json(reports):
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, np.generic):
            return clean(v.item())
        return v
    return json.dumps([clean(r.to_dict()) for r in reports], indent=2, sort_keys=True)


def ensemble_csv(ens, deltas=()):
    """Flat CSV: one row per replication, observable and time."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rep", "status", "observable", "delta", "t", "value"])
    series = [("N_t", None, ens.N), ("L_t", None, ens.L), ("M_t", None, ens.M)]
    series += [("N_t_kappa", d, Nk) for d, Nk in zip(deltas, ens.Nk)]
    for rep, status in enumerate(ens.status):
        for name, d, arr in series:
            for t, v in zip(ens.t_grid, arr[rep]):
                w.writerow([rep, status, name, "" if d is None else repr(float(d)), repr(float(t)),
                            repr(float(v))])
    return buf.getvalue()
