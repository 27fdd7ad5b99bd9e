"""Branching alpha-stable particle system clocked by a catalyst's additive functional.

A particle splits when the occupation integral of the branching-rate density
along its own path since birth exceeds an independent unit exponential
threshold, so ``P(T > t | path) = exp(-A_t)``.  It is replaced by ``n ~ law``
children at its position just before the split.  The raw clock uses ``mu``;
the mean offspring number enters only through the offspring draw.
"""
from dataclasses import dataclass, field
import csv
import io
import json
import math

import numpy as np

from . import rng as rngmod
from .catalyst import KernelCatalyst, q_r_moments
from .kernels import ParticleArrays, StepRule, advance_particles
from .spectral import eigenfunction_eval

STATUS_OK = "ok"
STATUS_CAP = "population-cap"


@dataclass
class Particle:
    id: int
    parent_id: int | None
    birth_time: float
    position: np.ndarray
    pcaf_accum: float
    split_threshold: float
    lineage_max: float


@dataclass
class Snapshot:
    t: float
    N_t: int
    L_t: float
    N_t_kappa: dict
    M_t: float | None = None
    Z_f: float | None = None
    H_t_kappa: dict | None = None


@dataclass
class PopulationState:
    """Population at a common clock, plus the snapshot log."""

    clock: float
    parts: ParticleArrays
    next_id: int = 1
    status: str = STATUS_OK
    stats_log: list = field(default_factory=list)

    @classmethod
    def initial(cls, x0, rng_branch, t0=0.0, threshold=None):
        thr = rng_branch.standard_exponential() if threshold is None else threshold
        return cls(clock=t0, parts=ParticleArrays.roots(x0, 1, np.array([thr]), t0=t0))

    @property
    def particles(self):
        p = self.parts
        return [Particle(int(p.ids[i, 0]), None if p.ids[i, 1] < 0 else int(p.ids[i, 1]),
                         float(p.sc[i, 6]), p.pos[i].copy(), float(p.sc[i, 3]),
                         float(p.sc[i, 4]), float(p.sc[i, 5])) for i in range(len(p))]

    @property
    def size(self):
        return len(self.parts)


def advance(state, dt_step, spec, law, motion, rng_motion, rng_branch, rule=None,
            cap=10**6, nu_scale=None, branching=True):
    """Evolve the population from ``state.clock`` to ``state.clock + dt_step``.

    Each particle moves on its own skeleton (``rule``; defaults to the catalyst's
    admissible step).  On reaching ``cap`` live particles the state is left
    unchanged apart from ``status = "population-cap"``.
    """
    from .catalyst import max_admissible_step

    if state.status != STATUS_OK:
        return state
    if nu_scale is None:
        nu_scale = q_r_moments(law)[0] - 1.0
    if rule is None:
        rule = StepRule(min(max_admissible_step(spec, motion.alpha), 0.01))
    enc = KernelCatalyst(spec, motion.alpha, motion.dim, nu_scale)
    t_end = state.clock + dt_step
    parts, next_id, status = advance_particles(state.parts, t_end, motion.alpha, enc, rule, law,
                                               rng_motion, rng_branch, cap=cap,
                                               next_id=state.next_id, branching=branching)
    if status:
        state.status = STATUS_CAP
        return state
    order = np.argsort(parts.ids[:, 0], kind="stable")
    state.parts = ParticleArrays(parts.pos[order], parts.sc[order], parts.ids[order])
    state.next_id = next_id
    state.clock = t_end
    return state


def snapshot(state, kappa_list=(), spectral=None, f=None, lineage_kappas=None):
    """Population statistics at the current clock."""
    pos = state.parts.pos
    r = np.linalg.norm(pos, axis=1)
    n = int(r.size)
    kappa = {float(k): int(np.count_nonzero(r >= k)) for k in kappa_list}
    m_t = None
    if spectral is not None and spectral.bound_state:
        h = eigenfunction_eval(spectral, pos[:, 0] if spectral.dim == 1 else pos)
        m_t = float(math.exp(spectral.lam * state.clock) * np.sum(h))
    z_f = None if f is None else float(np.sum(f(pos)))
    hist = None
    if lineage_kappas is not None:
        rm = state.parts.rmax
        hist = {float(k): int(np.count_nonzero(rm >= k)) for k in lineage_kappas}
    return Snapshot(state.clock, n, float(r.max()) if n else 0.0, kappa, m_t, z_f, hist)


def geometric_schedule(t_start, t_stop, num):
    """``num`` geometrically spaced snapshot times from ``t_start`` to ``t_stop``."""
    return np.geomspace(t_start, t_stop, num)


@dataclass
class ReplicationResult:
    rep: int
    seed: int
    status: str
    stats_log: list
    final_size: int
    meta: dict = field(default_factory=dict)

    def rows(self, kappa_list=(), lineage_kappas=None):
        out = []
        for s in self.stats_log:
            row = {"t": s.t, "N_t": s.N_t, "L_t": s.L_t,
                   "M_t": "" if s.M_t is None else s.M_t}
            if s.Z_f is not None:
                row["Z_f"] = s.Z_f
            for k in kappa_list:
                row[f"N_kappa_{k:g}"] = s.N_t_kappa[float(k)]
            for k in (lineage_kappas or ()):
                row[f"H_kappa_{k:g}"] = s.H_t_kappa[float(k)]
            out.append(row)
        return out

    def to_csv(self, kappa_list=(), lineage_kappas=None):
        rows = self.rows(kappa_list, lineage_kappas)
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                           for k, v in row.items()})
        return buf.getvalue()

    def metadata_json(self):
        return json.dumps({"rep": self.rep, "seed": self.seed, "status": self.status,
                           "final_size": self.final_size, **self.meta}, sort_keys=True)


def run_replication(motion, spec, law, x0, times, rule, seed, rep, kappa_list=(), cap=10**6,
                    spectral=None, f=None, lineage_kappas=None, kappa_schedules=()):
    """One replication: snapshots at ``times`` (``t = 0`` is logged first).

    Each of ``kappa_schedules`` maps ``t`` to a moving threshold; its count is
    logged as ``N_t_kappa["sched<i>"]``.  Deterministic given ``(seed, rep)``
    and the backend.
    """
    rng_motion, rng_branch = rngmod.replication_streams(seed, rep)
    q, _ = q_r_moments(law)
    state = PopulationState.initial(x0, rng_branch)

    def snap():
        s = snapshot(state, kappa_list, spectral, f, lineage_kappas)
        if kappa_schedules:
            r = np.linalg.norm(state.parts.pos, axis=1)
            for i, sched in enumerate(kappa_schedules):
                s.N_t_kappa[f"sched{i}"] = int(np.count_nonzero(r >= float(sched(state.clock))))
        state.stats_log.append(s)

    snap()
    for t in times:
        if t <= state.clock:
            continue
        advance(state, t - state.clock, spec, law, motion, rng_motion, rng_branch, rule=rule,
                cap=cap, nu_scale=q - 1.0)
        if state.status != STATUS_OK:
            break
        snap()
    return ReplicationResult(rep, int(seed), state.status, state.stats_log, state.size)


def run(config, seed=None, rep=0, spectral=None):
    """Run one replication described by a :class:`~stablebranch.config.SimConfig`."""
    seed = config.seed if seed is None else seed
    res = run_replication(config.motion, config.catalyst, config.offspring, config.x0,
                          config.snapshot_times(), config.step_rule(), seed, rep,
                          kappa_list=config.kappa_list, cap=config.population_cap,
                          spectral=spectral,
                          lineage_kappas=config.kappa_list if config.record_lineage_max else None)
    return res
