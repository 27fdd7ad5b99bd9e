"""Branching-rate measures, their additive functionals, and offspring laws.

Singular measures are replaced by tube mollifications: a point mass ``m`` at
``c`` becomes the density ``m / (2 eps)`` on ``[c - eps, c + eps]`` and a
surface measure of density ``c`` on the sphere of radius ``r`` becomes
``c / (2 eps)`` on the shell ``| |y| - r | <= eps``.

For the point mass (d = 1, 1 < alpha < 2) the mollified potential binds less
strongly than the Dirac potential; the defect in the Birman-Schwinger
condition is, to leading order, the energy-independent constant

    Delta(eps) = (2/pi) * I(b) * E|U - U'|^b,   b = alpha - 1,

with ``I(b) = int_0^inf (1 - cos u) u^{-1-b} du`` and ``U, U'`` independent
uniforms on ``[-eps, eps]``.  With ``renormalize=True`` the tube carries the
mass ``m / (1 - (Q-1) m Delta)`` so that ``(Q-1)`` times it has the same
spectral bottom as the Dirac potential up to ``O(Delta^2)``.
"""
from dataclasses import dataclass, field, asdict
import csv
import math

import numpy as np
from scipy.special import gamma

from .errors import ConfigurationError
from .stable import PathGrid

KIND_NONE = 0
KIND_POINT = 1
KIND_BALL = 2
KIND_GRID = 3
KIND_SPHERE = 4

DEFAULT_EPSILON = 0.05
STEP_RATIO = 4.0  # admissible step: step ** (1/alpha) <= eps / STEP_RATIO


@dataclass(frozen=True)
class NoCatalyst:
    tube_epsilon: float = DEFAULT_EPSILON
    kind = "none"


@dataclass(frozen=True)
class PointMass:
    mass: float
    center: tuple = (0.0,)
    tube_epsilon: float = DEFAULT_EPSILON
    renormalize: bool = True
    kind = "point"


@dataclass(frozen=True)
class BallIndicator:
    density: float
    radius: float
    center: tuple = (0.0,)
    tube_epsilon: float = DEFAULT_EPSILON
    kind = "ball"


@dataclass(frozen=True)
class SphereSurface:
    density: float
    radius: float
    tube_epsilon: float = DEFAULT_EPSILON
    kind = "sphere"


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Nonnegative density sampled at the nodes ``origin + k * spacing``.

    The density is piecewise constant on the cells centred at the nodes and
    vanishes outside the grid.
    """

    origin: np.ndarray
    spacing: np.ndarray
    values: np.ndarray
    tube_epsilon: float = DEFAULT_EPSILON
    source: str = ""
    kind = "grid"

    def __post_init__(self):
        object.__setattr__(self, "origin", np.atleast_1d(np.asarray(self.origin, dtype=float)))
        object.__setattr__(self, "spacing", np.atleast_1d(np.asarray(self.spacing, dtype=float)))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


CATALYST_TYPES = {
    "none": NoCatalyst,
    "point": PointMass,
    "ball": BallIndicator,
    "sphere": SphereSurface,
    "grid": GridDensity,
}


@dataclass(frozen=True)
class OffspringLaw:
    """Space-independent offspring distribution ``{n: p_n}`` with ``p_0 = 0``."""

    probabilities: dict = field(default_factory=lambda: {2: 1.0})

    def __post_init__(self):
        probs = {int(k): float(v) for k, v in dict(self.probabilities).items()}
        object.__setattr__(self, "probabilities", dict(sorted(probs.items())))
        problems = validate_offspring(self.probabilities)
        if problems:
            raise ConfigurationError(problems)

    def table(self):
        """Arrays ``(n, cumulative p)`` for inverse-CDF sampling."""
        ns = np.array(list(self.probabilities), dtype=np.int64)
        cdf = np.cumsum(list(self.probabilities.values()))
        cdf[-1] = 1.0
        return ns, cdf

    def sample(self, rng):
        ns, cdf = self.table()
        return int(ns[np.searchsorted(cdf, rng.random(), side="right")])


def validate_offspring(probabilities, path="offspring"):
    problems = []
    for n, p in probabilities.items():
        if n == 0 and p != 0:
            problems.append(f"{path}.p_0: extinction is excluded by the model (p_0 = 0 identically)")
        elif n < 0:
            problems.append(f"{path}.p_{n}: offspring counts must be >= 1")
        if not (0.0 <= p <= 1.0):
            problems.append(f"{path}.p_{n}: probability {p} outside [0, 1]")
    if not probabilities:
        problems.append(f"{path}: empty offspring law")
    elif abs(sum(probabilities.values()) - 1.0) > 1e-9:
        problems.append(f"{path}: probabilities sum to {sum(probabilities.values())}, not 1")
    return problems


def q_r_moments(law):
    """Return ``(Q, R)``: mean offspring number and second factorial moment."""
    q = math.fsum(n * p for n, p in law.probabilities.items())
    r = math.fsum(n * (n - 1) * p for n, p in law.probabilities.items())
    return q, r


def validate_catalyst(spec, alpha, dim, path="catalyst"):
    """List every violation of the variant's legality conditions."""
    problems = []
    eps = getattr(spec, "tube_epsilon", DEFAULT_EPSILON)
    if not eps > 0:
        problems.append(f"{path}.tube_epsilon: must be positive")
    if isinstance(spec, PointMass):
        if dim != 1:
            problems.append(f"{path}: point catalyst requires d = 1 (got d = {dim})")
        if not 1.0 < alpha < 2.0:
            problems.append(f"{path}: point catalyst requires 1 < alpha < 2 (got alpha = {alpha})")
        if not spec.mass > 0:
            problems.append(f"{path}.mass: must be positive")
        if len(spec.center) != dim:
            problems.append(f"{path}.center: expected {dim} coordinates")
    elif isinstance(spec, BallIndicator):
        if not spec.density > 0:
            problems.append(f"{path}.density: must be positive")
        if not spec.radius > 0:
            problems.append(f"{path}.radius: must be positive")
        if len(spec.center) != dim:
            problems.append(f"{path}.center: expected {dim} coordinates")
    elif isinstance(spec, SphereSurface):
        if not dim > alpha:
            problems.append(f"{path}: sphere catalyst requires d > alpha")
        if not 1.0 < alpha < 2.0:
            problems.append(f"{path}: sphere catalyst requires 1 < alpha < 2 (got alpha = {alpha})")
        if not spec.density > 0:
            problems.append(f"{path}.density: must be positive")
        if not spec.radius > eps:
            problems.append(f"{path}.radius: must exceed tube_epsilon")
    elif isinstance(spec, GridDensity):
        if spec.values.ndim != dim or spec.origin.size != dim or spec.spacing.size != dim:
            problems.append(f"{path}: grid dimension does not match d = {dim}")
        if np.any(spec.values < 0) or not np.all(np.isfinite(spec.values)):
            problems.append(f"{path}.values: density must be finite and nonnegative")
        if np.any(spec.spacing <= 0):
            problems.append(f"{path}.spacing: must be positive")
    elif not isinstance(spec, NoCatalyst):
        problems.append(f"{path}: unknown catalyst type {type(spec).__name__}")
    return problems


def renormalization_defect(eps, alpha):
    """Leading-order Birman-Schwinger defect of the eps-tube versus a Dirac mass (d = 1)."""
    b = alpha - 1.0
    one_minus_cos = math.pi / (2.0 * gamma(1.0 + b) * math.sin(math.pi * b / 2.0))
    mean_gap = 2.0 * (2.0 * eps) ** b / ((b + 1.0) * (b + 2.0))
    return (2.0 / math.pi) * one_minus_cos * mean_gap


def effective_point_mass(spec, alpha, nu_scale):
    """Mass carried by the tube of a :class:`PointMass` (raw, before the ``Q-1`` factor)."""
    if not spec.renormalize or nu_scale <= 0:
        return spec.mass
    shift = nu_scale * spec.mass * renormalization_defect(spec.tube_epsilon, alpha)
    if shift >= 1.0:
        raise ConfigurationError(
            "catalyst.tube_epsilon: too wide to renormalise this mass; decrease tube_epsilon")
    return spec.mass / (1.0 - shift)


def max_admissible_step(spec, alpha):
    """Largest grid step allowed near the support (``step^{1/alpha} <= width / 4``)."""
    if isinstance(spec, (PointMass, SphereSurface)):
        width = spec.tube_epsilon
    elif isinstance(spec, BallIndicator):
        width = spec.radius
    elif isinstance(spec, GridDensity):
        width = float(spec.spacing.min())
    else:
        return math.inf
    return (width / STEP_RATIO) ** alpha


def check_step(spec, alpha, step):
    limit = max_admissible_step(spec, alpha)
    if step > limit * (1.0 + 1e-9):
        raise ConfigurationError(
            f"time_step: {step:.6g} exceeds the admissible step {limit:.6g} "
            f"(step^(1/alpha) must not exceed tube width / {STEP_RATIO:g})")


def total_mass(spec, dim=1):
    if isinstance(spec, PointMass):
        return spec.mass
    if isinstance(spec, BallIndicator):
        return spec.density * math.pi ** (dim / 2) / gamma(dim / 2 + 1) * spec.radius ** dim
    if isinstance(spec, SphereSurface):
        return spec.density * 2 * math.pi ** (dim / 2) / gamma(dim / 2) * spec.radius ** (dim - 1)
    if isinstance(spec, GridDensity):
        return float(spec.values.sum() * np.prod(spec.spacing))
    return 0.0


class KernelCatalyst:
    """Flat-array encoding of a catalyst, shared by both kernel backends.

    ``density`` already includes any renormalisation but not the ``Q-1`` factor.
    """

    def __init__(self, spec, alpha, dim, nu_scale=1.0):
        self.dim = dim
        self.center = np.zeros(dim)
        self.fparams = np.zeros(4)  # density, radius, eps, unused
        self.grid_origin = np.zeros(dim)
        self.grid_spacing = np.ones(dim)
        self.grid_shape = np.ones(dim, dtype=np.int64)
        self.grid_values = np.zeros(1)
        self.grid_support_lo = np.zeros(dim)
        self.grid_support_hi = np.zeros(dim)
        eps = float(getattr(spec, "tube_epsilon", DEFAULT_EPSILON))
        self.fparams[2] = eps
        if isinstance(spec, NoCatalyst):
            self.kind = KIND_NONE
        elif isinstance(spec, PointMass):
            self.kind = KIND_POINT
            self.center[:] = spec.center
            self.fparams[0] = effective_point_mass(spec, alpha, nu_scale) / (2.0 * eps)
            self.fparams[1] = eps
        elif isinstance(spec, BallIndicator):
            self.kind = KIND_BALL
            self.center[:] = spec.center
            self.fparams[0] = spec.density
            self.fparams[1] = spec.radius
        elif isinstance(spec, SphereSurface):
            self.kind = KIND_SPHERE
            self.fparams[0] = spec.density / (2.0 * eps)
            self.fparams[1] = spec.radius
        elif isinstance(spec, GridDensity):
            self.kind = KIND_GRID
            self.grid_origin = spec.origin.astype(float).copy()
            self.grid_spacing = spec.spacing.astype(float).copy()
            self.grid_shape = np.array(spec.values.shape, dtype=np.int64)
            self.grid_values = np.ascontiguousarray(spec.values, dtype=float).ravel()
            nz = np.argwhere(spec.values > 0)
            if nz.size:
                self.grid_support_lo = self.grid_origin + (nz.min(axis=0) - 0.5) * self.grid_spacing
                self.grid_support_hi = self.grid_origin + (nz.max(axis=0) + 0.5) * self.grid_spacing
            else:
                self.kind = KIND_NONE
        else:
            raise ConfigurationError(f"catalyst: unsupported type {type(spec).__name__}")

    def arrays(self):
        return (self.kind, self.center, self.fparams, self.grid_origin, self.grid_spacing,
                self.grid_shape, self.grid_values, self.grid_support_lo, self.grid_support_hi)

    def density(self, x):
        """Vectorised density at points ``x`` of shape ``(n, dim)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[0])
        if self.kind == KIND_POINT or self.kind == KIND_BALL:
            r = np.linalg.norm(x - self.center, axis=1)
            out[r <= self.fparams[1]] = self.fparams[0]
        elif self.kind == KIND_SPHERE:
            r = np.linalg.norm(x, axis=1)
            out[np.abs(r - self.fparams[1]) <= self.fparams[2]] = self.fparams[0]
        elif self.kind == KIND_GRID:
            idx = np.rint((x - self.grid_origin) / self.grid_spacing).astype(np.int64)
            inside = np.all((idx >= 0) & (idx < self.grid_shape), axis=1)
            flat = np.ravel_multi_index(tuple(idx[inside].T), tuple(self.grid_shape))
            out[inside] = self.grid_values[flat]
        return out

    def distance(self, x):
        """Distance from ``x`` to the (tube-fattened) support; zero inside."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == KIND_POINT or self.kind == KIND_BALL:
            return np.maximum(np.linalg.norm(x - self.center, axis=1) - self.fparams[1], 0.0)
        if self.kind == KIND_SPHERE:
            r = np.linalg.norm(x, axis=1)
            return np.maximum(np.abs(r - self.fparams[1]) - self.fparams[2], 0.0)
        if self.kind == KIND_GRID:
            gap = np.maximum(np.maximum(self.grid_support_lo - x, x - self.grid_support_hi), 0.0)
            return np.linalg.norm(gap, axis=1)
        return np.full(x.shape[0], np.inf)


def pcaf_increment(spec, segment, step, alpha, nu_scale=1.0):
    """Left-endpoint occupation integral ``sum_k V(X_{t_k}) (t_{k+1} - t_k)`` over a path slice.

    ``step`` is the declared grid spacing; it must respect the tube-width rule
    and bound every spacing of ``segment``.
    """
    if len(segment) == 0:
        raise ValueError("segment must be nonempty")
    check_step(spec, alpha, step)
    gaps = np.diff(segment.times)
    if np.any(gaps > step * (1.0 + 1e-9)):
        raise ConfigurationError("segment spacing exceeds the declared step")
    enc = KernelCatalyst(spec, alpha, segment.positions.shape[1], nu_scale)
    v = enc.density(segment.positions[:-1])
    return math.fsum(v * gaps)


def read_grid_csv(path, tube_epsilon=DEFAULT_EPSILON):
    """Load a :class:`GridDensity` from CSV.

    Columns: ``x`` (or ``x1, ..., xd``) followed by ``V``; one row per node of a
    regular grid.  Missing nodes are zero.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [[float(v) for v in row] for row in reader if row and any(c.strip() for c in row)]
    if not header or header[-1] not in ("V", "v", "value"):
        raise ConfigurationError(f"{path}: last column must be 'V'")
    data = np.array(rows, dtype=float)
    coords, vals = data[:, :-1], data[:, -1]
    dim = coords.shape[1]
    origin = np.empty(dim)
    spacing = np.empty(dim)
    shape = []
    for j in range(dim):
        u = np.unique(coords[:, j])
        origin[j] = u[0]
        spacing[j] = np.min(np.diff(u)) if u.size > 1 else 1.0
        shape.append(int(round((u[-1] - u[0]) / spacing[j])) + 1)
    values = np.zeros(shape)
    idx = np.rint((coords - origin) / spacing).astype(int)
    values[tuple(idx.T)] = vals
    return GridDensity(origin, spacing, values, tube_epsilon=tube_epsilon, source=str(path))


def write_grid_csv(spec, path):
    dim = spec.values.ndim
    names = ["x"] if dim == 1 else [f"x{j + 1}" for j in range(dim)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["V"])
        for idx in np.ndindex(spec.values.shape):
            x = spec.origin + np.array(idx) * spec.spacing
            w.writerow([repr(float(v)) for v in x] + [repr(float(spec.values[idx]))])


def catalyst_to_dict(spec):
    if isinstance(spec, GridDensity):
        return {"type": "grid", "csv": spec.source, "tube_epsilon": spec.tube_epsilon}
    d = {"type": spec.kind}
    d.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(spec).items()})
    return d


def catalyst_from_dict(d, path="catalyst"):
    d = dict(d)
    kind = d.pop("type", None)
    if kind not in CATALYST_TYPES:
        raise ConfigurationError(f"{path}.type: must be one of {sorted(CATALYST_TYPES)}")
    if kind == "grid":
        if "csv" not in d:
            raise ConfigurationError(f"{path}.csv: grid catalyst needs a CSV path")
        return read_grid_csv(d["csv"], d.get("tube_epsilon", DEFAULT_EPSILON))
    if "center" in d:
        d["center"] = tuple(float(v) for v in np.atleast_1d(d["center"]))
    try:
        return CATALYST_TYPES[kind](**d)
    except TypeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
