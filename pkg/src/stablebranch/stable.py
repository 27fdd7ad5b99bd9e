"""Rotation-invariant alpha-stable motion with generator -(1/2)(-Delta)^{alpha/2}.

The characteristic function of an increment over time ``dt`` is
``exp(-dt * |xi|**alpha / 2)``.

* d = 1: Chambers-Mallows-Stuck transform of a standard symmetric stable
  variable (characteristic function ``exp(-|xi|**alpha)``) rescaled by
  ``(dt / 2) ** (1 / alpha)``.
* d >= 2: Gaussian subordination ``sqrt(S) * G`` with ``S`` positive
  (alpha/2)-stable, Laplace transform ``exp(-dt * 2**(alpha/2 - 1) * u**(alpha/2))``.
  Then ``E exp(i xi.X) = E exp(-S |xi|^2 / 2) = exp(-dt |xi|^alpha / 2)``.

Scalar samplers consume the stream in a fixed order (uniform, exponential,
then ``d`` normals for d >= 2) which the compiled kernels reproduce exactly.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gamma

from .errors import ConfigurationError


@dataclass(frozen=True)
class StableParams:
    alpha: float
    dim: int = 1

    def __post_init__(self):
        problems = []
        if not (0.0 < float(self.alpha) < 2.0):
            problems.append(f"alpha: must lie in (0, 2), got {self.alpha}")
        if int(self.dim) != self.dim or self.dim < 1:
            problems.append(f"dim: must be a positive integer, got {self.dim}")
        if problems:
            raise ConfigurationError(problems)


@dataclass
class PathGrid:
    """Discrete skeleton of a path: ``positions[k]`` is the state at ``times[k]``."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.shape[0] != self.times.size and self.times.size == 1:
            self.positions = self.positions.reshape(1, -1)
        if self.positions.shape[0] != self.times.size:
            raise ValueError("times and positions must have the same length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def slice(self, t0, t1=None):
        """Grid points with ``t0 <= t <= t1`` (times, not indices)."""
        tol = 1e-12 * max(1.0, abs(self.times[-1]))
        keep = self.times >= t0 - tol
        if t1 is not None:
            keep &= self.times <= t1 + tol
        return PathGrid(self.times[keep], self.positions[keep])

    def running_max(self):
        """Grid running maximum of ``|X|``; a lower bound for the true running maximum."""
        return np.maximum.accumulate(np.linalg.norm(self.positions, axis=1))


def subordinator_scale(alpha):
    """Multiplier ``c`` with ``S_dt = (c * dt) ** (2/alpha) * S_unit`` for d >= 2."""
    return 2.0 ** (alpha / 2.0 - 1.0)


def _cms_unit(alpha, u, w):
    # u ~ U(0,1), w ~ Exp(1); returns standard symmetric stable (exp(-|xi|^alpha))
    v = math.pi * (u - 0.5)
    if alpha == 1.0:
        return math.tan(v)
    return (math.sin(alpha * v) / math.cos(v) ** (1.0 / alpha)
            * (math.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))


def _positive_stable_unit(beta, u, w):
    # Kanter's representation, Laplace transform exp(-s^beta), 0 < beta < 1
    a = math.pi * u
    return (math.sin(beta * a) / math.sin(a) ** (1.0 / beta)
            * (math.sin((1.0 - beta) * a) / w) ** ((1.0 - beta) / beta))


def sample_increment(params, dt, rng):
    """Draw ``X_dt - X_0`` exactly in law; returns an array of shape ``(dim,)``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    d = params.dim
    if dt == 0:
        return np.zeros(d)
    alpha = float(params.alpha)
    u = rng.random()
    w = rng.standard_exponential()
    if d == 1:
        return np.array([(dt / 2.0) ** (1.0 / alpha) * _cms_unit(alpha, u, w)])
    s = (subordinator_scale(alpha) * dt) ** (2.0 / alpha) * _positive_stable_unit(alpha / 2.0, u, w)
    g = np.array([rng.standard_normal() for _ in range(d)])
    return math.sqrt(s) * g


def sample_stable(params, dt, size, rng):
    """Vectorised batch of ``size`` increments over ``dt``; shape ``(size, dim)``.

    Same law as :func:`sample_increment` but a different stream order.
    """
    alpha = float(params.alpha)
    d = params.dim
    u = rng.random(size)
    w = rng.standard_exponential(size)
    if d == 1:
        v = np.pi * (u - 0.5)
        if alpha == 1.0:
            x = np.tan(v)
        else:
            x = (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
                 * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))
        return ((dt / 2.0) ** (1.0 / alpha) * x)[:, None]
    beta = alpha / 2.0
    a = np.pi * u
    s = (np.sin(beta * a) / np.sin(a) ** (1.0 / beta)
         * (np.sin((1.0 - beta) * a) / w) ** ((1.0 - beta) / beta))
    s *= (subordinator_scale(alpha) * dt) ** (2.0 / alpha)
    return np.sqrt(s)[:, None] * rng.standard_normal((size, d))


def sample_path(params, x0, times, rng):
    """Sample the skeleton ``X_{times[k]}`` started from ``x0`` at ``times[0]``."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("times must be nonempty")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be nonnegative and strictly increasing")
    x = np.array(x0, dtype=float).reshape(params.dim)
    positions = np.empty((times.size, params.dim))
    positions[0] = x
    for k in range(1, times.size):
        x = x + sample_increment(params, times[k] - times[k - 1], rng)
        positions[k] = x
    return PathGrid(times, positions)


def unit_sphere_area(d):
    """Surface area ``omega_d = 2 pi^{d/2} / Gamma(d/2)`` of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0)


def tail_constant(params):
    """``lim_{r->inf} r^{d+alpha} g(r)`` for the unit-time density ``g(|x|)``."""
    a, d = float(params.alpha), params.dim
    return (a * 2.0 ** (a - 2.0) * math.sin(a * math.pi / 2.0)
            * gamma((d + a) / 2.0) * gamma(a / 2.0) / math.pi ** (d / 2.0 + 1.0))


def tail_probability_reference(params, r, t=1.0):
    """First-order tail ``omega_d * C * t / (alpha r^alpha)`` of ``P(|X_t| >= r)``.

    Asymptotic in ``r t^{-1/alpha}``; not exact at moderate radii.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    out = unit_sphere_area(params.dim) * tail_constant(params) * t / (params.alpha * r ** params.alpha)
    return float(out) if out.ndim == 0 else out


def cauchy_tail_exact(r, t=1.0):
    """Exact ``P(|X_t| >= r)`` for alpha = 1, d = 1 (Cauchy with scale t/2)."""
    return 1.0 - (2.0 / np.pi) * np.arctan(2.0 * np.asarray(r, dtype=float) / t)


def cauchy_cdf(x, t=1.0):
    return 0.5 + np.arctan(2.0 * np.asarray(x, dtype=float) / t) / np.pi
