"""Bottom of the spectrum of ``(1/2)(-Delta)^{alpha/2} - V`` and its ground state.

Closed forms cover the two classical catalysts (a Dirac mass in d = 1 and a
uniform sphere in d > alpha).  Everything else goes through
:func:`lambda_numeric`, a Fourier-collocation discretisation on the periodic
box ``[-L, L)^d``: the kinetic term is the multiplier ``|xi_k|^alpha / 2`` on
the discrete modes and ``V`` acts diagonally on the nodes.  The smallest
eigenpair is found with LOBPCG, preconditioned by
``(|xi|^alpha / 2 + max V + 1)^{-1}`` applied in Fourier space.
"""
from dataclasses import dataclass, field
import json
import math
import warnings

import numpy as np
from scipy.sparse.linalg import LinearOperator, lobpcg
from scipy.special import gamma

from .catalyst import (BallIndicator, GridDensity, KernelCatalyst, NoCatalyst, PointMass,
                       SphereSurface, effective_point_mass)
from .errors import DomainError, SolverError


def lambda_point_catalyst(c, alpha):
    """Exact spectral bottom for ``V = c * delta_0`` in d = 1, ``1 < alpha < 2``."""
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"point-catalyst formula needs 1 < alpha < 2, got {alpha}")
    if not c > 0:
        raise DomainError("c must be positive")
    base = c * 2.0 ** (1.0 / alpha) / (alpha * math.sin(math.pi / alpha))
    return -base ** (alpha / (alpha - 1.0))


def sphere_catalyst_threshold(c, alpha, d):
    """Critical radius for the surface measure ``c * sigma_r``: bound state iff ``r > r*``."""
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"sphere-catalyst formula needs 1 < alpha < 2, got {alpha}")
    if not d > alpha:
        raise DomainError(f"sphere-catalyst formula needs d > alpha, got d = {d}")
    if not c > 0:
        raise DomainError("c must be positive")
    num = math.sqrt(math.pi) * gamma((d + alpha - 2) / 2) * gamma(alpha / 2)
    den = c * gamma((d - alpha) / 2) * gamma((alpha - 1) / 2)
    return (num / den) ** (1.0 / (alpha - 1.0))


@dataclass
class SpectralResult:
    lam: float
    h_grid: np.ndarray
    L: float
    nodes: int
    alpha: float
    residual: float
    dim: int = 1
    bound_state: bool = True
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def dx(self):
        return 2.0 * self.L / self.nodes

    @property
    def x(self):
        return box_nodes(self.L, self.nodes)

    def l2_norm(self):
        return math.sqrt(float(np.sum(self.h_grid ** 2)) * self.dx ** self.dim)

    def to_dict(self):
        return {
            "lambda": self.lam,
            "bound_state": self.bound_state,
            "alpha": self.alpha,
            "dim": self.dim,
            "L": self.L,
            "nodes": self.nodes,
            "residual": self.residual,
            "iterations": self.iterations,
            "x": self.x.tolist() if self.dim == 1 else None,
            "h": self.h_grid.tolist(),
            "meta": self.meta,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d):
        return cls(lam=d["lambda"], h_grid=np.asarray(d["h"], dtype=float), L=d["L"],
                   nodes=d["nodes"], alpha=d["alpha"], residual=d["residual"],
                   dim=d.get("dim", 1), bound_state=d["bound_state"],
                   iterations=d.get("iterations", 0), meta=d.get("meta", {}))


def box_nodes(L, nodes):
    return -L + (2.0 * L / nodes) * np.arange(nodes)


def _multiplier(L, nodes, alpha, dim):
    xi = 2.0 * np.pi * np.fft.fftfreq(nodes, d=2.0 * L / nodes)
    if dim == 1:
        return 0.5 * np.abs(xi) ** alpha
    grids = np.meshgrid(*([xi] * dim), indexing="ij")
    return 0.5 * sum(g ** 2 for g in grids) ** (alpha / 2.0)


def lambda_numeric(V, alpha, L, nodes=None, tol=1e-8, maxiter=2000, x0=None):
    """Smallest eigenpair of the discretised operator for potential values ``V`` on the box nodes.

    ``V`` has shape ``(nodes,) * d``.  The returned ``h_grid`` is positive and
    normalised so that ``sum(h**2) * dx**d == 1``.  ``lam`` is clipped to 0 with
    ``bound_state=False`` when no eigenvalue lies below ``-tol``.
    """
    V = np.asarray(V, dtype=float)
    dim = V.ndim
    nodes = V.shape[0] if nodes is None else nodes
    if any(s != nodes for s in V.shape):
        raise ValueError("V must have shape (nodes,) * d")
    if np.any(V < 0):
        raise ValueError("V must be nonnegative")
    n = V.size
    mult = _multiplier(L, nodes, alpha, dim)
    shift = float(V.max()) + 1.0
    axes = tuple(range(1, dim + 1))
    shape = V.shape

    def matvec(U):
        U = np.asarray(U).reshape(n, -1).T.reshape((-1,) + shape)
        out = np.fft.ifftn(mult * np.fft.fftn(U, axes=axes), axes=axes).real - V * U
        return out.reshape(out.shape[0], n).T

    def precond(U):
        U = np.asarray(U).reshape(n, -1).T.reshape((-1,) + shape)
        out = np.fft.ifftn(np.fft.fftn(U, axes=axes) / (mult + shift), axes=axes).real
        return out.reshape(out.shape[0], n).T

    A = LinearOperator((n, n), matvec=matvec, matmat=matvec, dtype=float)
    M = LinearOperator((n, n), matvec=precond, matmat=precond, dtype=float)
    if x0 is None:
        x0 = V.ravel() + 1e-3 * V.max() + 1e-12
        x0 = precond(x0[:, None]).ravel()
    x0 = np.asarray(x0, dtype=float).reshape(n, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        w, vecs, hist = lobpcg(A, x0, M=M, largest=False, tol=tol, maxiter=maxiter,
                               retResidualNormsHistory=True)
    lam = float(w[0])
    v = vecs[:, 0]
    v /= np.linalg.norm(v)
    residual = float(np.linalg.norm(matvec(v[:, None]).ravel() - lam * v))
    if not np.isfinite(residual) or residual > max(tol, 1e-12) * 10:
        raise SolverError("LOBPCG did not converge",
                          {"lambda": lam, "residual": residual, "iterations": len(hist)})
    if v.sum() < 0:
        v = -v
    dx = 2.0 * L / nodes
    h = (v / math.sqrt(dx ** dim)).reshape(shape)
    bound = lam < -tol
    meta = {
        "box_floor": -float(V.sum() * dx ** dim) / (2.0 * L) ** dim,
        "h_outside_box": "constant extension by the nearest boundary value (approximation)",
    }
    return SpectralResult(lam if bound else 0.0, h, float(L), int(nodes), float(alpha), residual,
                          dim=dim, bound_state=bool(bound), iterations=len(hist), meta=meta)


def potential_on_box(spec, alpha, L, nodes, nu_scale=1.0, dim=1):
    """Effective potential ``(Q-1) * mu`` sampled on the box nodes.

    A point mass is spread over the nodes of its tube with the total mass kept
    exact (including any renormalisation); other variants use their density.
    """
    x = box_nodes(L, nodes)
    if dim == 1:
        pts = x[:, None]
    else:
        pts = np.stack(np.meshgrid(*([x] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    dx = 2.0 * L / nodes
    if isinstance(spec, NoCatalyst):
        return np.zeros((nodes,) * dim)
    if isinstance(spec, PointMass):
        mass = effective_point_mass(spec, alpha, nu_scale) * nu_scale
        r = np.abs(x - spec.center[0])
        inside = r <= spec.tube_epsilon * (1.0 + 1e-12)
        if not inside.any():
            inside = r == r.min()
        V = np.zeros(nodes)
        V[inside] = mass / (dx * inside.sum())
        return V
    enc = KernelCatalyst(spec, alpha, dim, nu_scale)
    V = nu_scale * enc.density(pts)
    return V.reshape((nodes,) * dim)


def eigenfunction_eval(result, x):
    """Ground state at ``x``: multilinear interpolation of ``h_grid``; boundary value outside."""
    if not result.bound_state:
        raise DomainError("no eigenfunction: spectral bottom is 0 (no bound state)")
    xs = np.asarray(x, dtype=float)
    nodes_x = np.append(result.x, result.L)
    if result.dim == 1:
        h = np.append(result.h_grid, result.h_grid[0])
        return np.interp(xs, nodes_x, h)
    from scipy.interpolate import RegularGridInterpolator

    h = np.pad(result.h_grid, [(0, 1)] * result.dim, mode="wrap")
    interp = RegularGridInterpolator([nodes_x] * result.dim, h)
    pts = np.atleast_2d(xs)
    pts = np.clip(pts, -result.L, result.L)
    return interp(pts)


def point_catalyst_ladder(c, alpha, eps_list=(0.04, 0.02, 0.01, 0.005), L=25.0,
                          nodes_per_eps=8.0, tol=1e-8):
    """Refinement study of the raw eps-tube approximation of ``c * delta_0``.

    The binding defect is linear in ``eps^{alpha-1}`` when expressed through
    ``|lambda|^{(alpha-1)/alpha}`` (which is proportional to the effective
    coupling); the two finest rungs are extrapolated to ``eps = 0``.  The
    renormalised tube at the coarsest rung is reported alongside.
    """
    rungs = []
    for eps in eps_list:
        nodes = int(2 ** math.ceil(math.log2(2.0 * L * nodes_per_eps / eps)))
        spec = PointMass(mass=c, tube_epsilon=eps, renormalize=False)
        res = lambda_numeric(potential_on_box(spec, alpha, L, nodes), alpha, L, tol=tol)
        rungs.append({"eps": eps, "L": L, "nodes": nodes, "lambda": res.lam,
                      "residual": res.residual})
    p = (alpha - 1.0) / alpha
    e1, e2 = rungs[-2]["eps"], rungs[-1]["eps"]
    y1, y2 = (-rungs[-2]["lambda"]) ** p, (-rungs[-1]["lambda"]) ** p
    s1, s2 = e1 ** (alpha - 1.0), e2 ** (alpha - 1.0)
    y0 = y2 - (y1 - y2) * s2 / (s1 - s2)
    eps0 = eps_list[0]
    nodes0 = rungs[0]["nodes"]
    ren = lambda_numeric(potential_on_box(PointMass(mass=c, tube_epsilon=eps0), alpha, L, nodes0),
                         alpha, L, tol=tol)
    return {
        "closed_form": lambda_point_catalyst(c, alpha),
        "rungs": rungs,
        "extrapolated": -y0 ** (1.0 / p),
        "renormalized": {"eps": eps0, "nodes": nodes0, "lambda": ren.lam},
    }
