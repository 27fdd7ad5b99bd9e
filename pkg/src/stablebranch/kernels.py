"""Dispatch between the compiled and the vectorised particle kernels."""
from dataclasses import dataclass
import math

import numpy as np

from . import _kernels_numpy
from ._backend import use_numba


@dataclass(frozen=True)
class StepRule:
    """Per-particle time step.

    ``step`` is used within ``(theta * dist)^{1/alpha}``-reach of the support;
    farther away the step grows as ``(theta * dist)^alpha`` up to
    ``max_step``.  With ``adaptive=False`` every step equals ``step``.
    """

    step: float
    adaptive: bool = True
    theta: float = 0.125
    max_step: float = 1.0

    def __post_init__(self):
        if not self.step > 0 or not self.max_step >= self.step or not self.theta > 0:
            raise ValueError("need step > 0, max_step >= step, theta > 0")


_EMPTY_N = np.array([1], dtype=np.int64)
_EMPTY_CDF = np.array([1.0])


@dataclass
class ParticleArrays:
    """Struct-of-arrays particle storage.

    ``sc`` columns: current time, grid-step start, grid-step end, PCAF since
    birth, split threshold, lineage running max of ``|X|``, birth time.
    ``ids`` columns: particle id, parent id (-1 for roots).
    """

    pos: np.ndarray
    sc: np.ndarray
    ids: np.ndarray

    @classmethod
    def roots(cls, x0, n, thresholds, t0=0.0, first_id=0):
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        pos = np.tile(x0, (n, 1))
        sc = np.empty((n, 7))
        sc[:, 0:3] = t0
        sc[:, 3] = 0.0
        sc[:, 4] = thresholds
        sc[:, 5] = np.linalg.norm(x0)
        sc[:, 6] = t0
        ids = np.empty((n, 2), np.int64)
        ids[:, 0] = first_id + np.arange(n)
        ids[:, 1] = -1
        return cls(pos, sc, ids)

    def __len__(self):
        return self.pos.shape[0]

    @property
    def acc(self):
        return self.sc[:, 3]

    @property
    def rmax(self):
        return self.sc[:, 5]


def advance_particles(parts, t_end, alpha, enc, rule, law, rng_motion, rng_branch,
                      cap=10**6, next_id=0, branching=True):
    """Evolve ``parts`` to ``t_end``; returns ``(ParticleArrays, next_id, status)``."""
    if law is not None:
        off_n, off_cdf = law.table()
    else:
        off_n, off_cdf = _EMPTY_N, _EMPTY_CDF
        branching = False
    sc = np.ascontiguousarray(parts.sc)
    args = (np.ascontiguousarray(parts.pos), sc[:, 0].copy(), sc[:, 1].copy(), sc[:, 2].copy(),
            sc[:, 3].copy(), sc[:, 4].copy(), sc[:, 5].copy(), sc[:, 6].copy(),
            parts.ids[:, 0].copy(), parts.ids[:, 1].copy(),
            float(t_end), float(alpha), float(rule.step), float(rule.max_step), float(rule.theta),
            bool(rule.adaptive), bool(branching)) + enc.arrays() + (
            off_n, off_cdf, rng_motion, rng_branch, int(min(cap, 2**62)), int(next_id))
    if use_numba():
        from . import _kernels_numba

        pos, sc, ids, next_id, status = _kernels_numba.advance(*args)
    else:
        pos, sc, ids, next_id, status = _kernels_numpy.advance(*args)
    return ParticleArrays(pos, sc, ids), int(next_id), int(status)


def run_paths(x0, n, checkpoints, alpha, enc, rule, rng_motion):
    """Independent single-particle skeletons; no branching.

    Returns ``(A, X, M)``: PCAF, position and grid running max of ``|X|`` at each
    checkpoint, with shapes ``(n, k)``, ``(n, k, d)``, ``(n, k)``.
    """
    checkpoints = np.asarray(checkpoints, dtype=float)
    d = np.atleast_1d(x0).size
    parts = ParticleArrays.roots(x0, n, np.full(n, math.inf))
    A = np.empty((n, checkpoints.size))
    X = np.empty((n, checkpoints.size, d))
    M = np.empty((n, checkpoints.size))
    for j, tc in enumerate(checkpoints):
        parts, _, _ = advance_particles(parts, tc, alpha, enc, rule, None, rng_motion,
                                        rng_motion, branching=False)
        order = np.argsort(parts.ids[:, 0], kind="stable")
        parts = ParticleArrays(parts.pos[order], parts.sc[order], parts.ids[order])
        A[:, j] = parts.acc
        X[:, j] = parts.pos
        M[:, j] = parts.rmax
    return A, X, M
