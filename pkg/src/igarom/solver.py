"""Isogeometric Galerkin solver for the Laplace problem on a NURBS patch.

Edges of the parametric square are labelled

=========  ==========  =========================
label      location    role in the pipe problem
=========  ==========  =========================
inner      xi = 0      inner wall, u = 0
outer      xi = 1      outer wall, u = 0
inlet      eta = 0     prescribed flux g
outlet     eta = 1     u = 0
=========  ==========  =========================

Edges with no condition get the natural (zero flux) condition.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .splines import NurbsSurface

EDGES = ("inner", "outer", "inlet", "outlet")


class GeometryError(ValueError):
    """The patch map is not orientation preserving at some quadrature point."""


class SingularSystemError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundarySpec:
    """Constant Dirichlet values and constant fluxes per edge label."""

    dirichlet: Mapping[str, float] = field(
        default_factory=lambda: {"inner": 0.0, "outer": 0.0, "outlet": 0.0}
    )
    neumann: Mapping[str, float] = field(default_factory=lambda: {"inlet": 1.0})

    def __post_init__(self):
        d = {str(k): float(v) for k, v in dict(self.dirichlet).items()}
        n = {str(k): float(v) for k, v in dict(self.neumann).items()}
        unknown = (set(d) | set(n)) - set(EDGES)
        if unknown:
            raise ValueError(f"unknown edge labels {sorted(unknown)}; expected {EDGES}")
        if set(d) & set(n):
            raise ValueError(f"edges {sorted(set(d) & set(n))} carry both conditions")
        if not d:
            raise ValueError("at least one Dirichlet edge is required")
        object.__setattr__(self, "dirichlet", MappingProxyType(d))
        object.__setattr__(self, "neumann", MappingProxyType(n))

    @classmethod
    def pipe(cls, flux: float = 1.0) -> "BoundarySpec":
        return cls(neumann={"inlet": flux})


def edge_functions(surface: NurbsSurface, edge: str) -> np.ndarray:
    """Global indices of the functions that do not vanish on ``edge``."""
    n_u, n_v = surface.basis.shape
    if edge == "inner":
        return surface.basis.index(0, np.arange(n_v))
    if edge == "outer":
        return surface.basis.index(n_u - 1, np.arange(n_v))
    if edge == "inlet":
        return surface.basis.index(np.arange(n_u), 0)
    if edge == "outlet":
        return surface.basis.index(np.arange(n_u), n_v - 1)
    raise ValueError(f"unknown edge {edge!r}")


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    """Isoparametric field space on ``surface`` with Dirichlet functions split off."""

    surface: NurbsSurface
    constrained: np.ndarray
    free: np.ndarray
    dirichlet_values: np.ndarray
    mu: tuple | None = None
    quad_order: tuple[int, int] | None = None

    @classmethod
    def build(cls, surface, boundary: BoundarySpec, mu=None, quad_order=None) -> "DiscreteSpace":
        values = np.full(surface.basis.size, np.nan)
        # later edges win on shared corners
        for edge in EDGES:
            if edge in boundary.dirichlet:
                values[edge_functions(surface, edge)] = boundary.dirichlet[edge]
        constrained = np.flatnonzero(~np.isnan(values))
        free = np.flatnonzero(np.isnan(values))
        if mu is not None:
            mu = tuple(float(m) for m in np.asarray(mu).ravel())
        if quad_order is not None and np.isscalar(quad_order):
            quad_order = (int(quad_order), int(quad_order))
        return cls(surface, constrained, free, values[constrained], mu, quad_order)

    @property
    def size(self) -> int:
        return self.surface.basis.size

    @property
    def orders(self) -> tuple[int, int]:
        if self.quad_order is not None:
            return self.quad_order
        pu, pv = self.surface.basis.degrees
        return pu + 1, pv + 1


@dataclass(frozen=True, eq=False)
class FullOrderSolution:
    coefficients: np.ndarray
    surface: NurbsSurface
    mu: tuple | None = None
    solve_time: float = 0.0

    @property
    def mesh(self) -> dict:
        return mesh_metadata(self.surface)


def mesh_metadata(surface: NurbsSurface) -> dict:
    return {
        "degrees": list(surface.basis.degrees),
        "knots_u": surface.kv_u.knots.tolist(),
        "knots_v": surface.kv_v.knots.tolist(),
        "shape": list(surface.basis.shape),
    }


def gauss_rule(order: int):
    """Gauss-Legendre points and weights on ``[-1, 1]``."""
    if not 1 <= int(order) <= 10 or int(order) != order:
        raise ValueError(f"unsupported quadrature order {order}; expected 1..10")
    return np.polynomial.legendre.leggauss(int(order))


def element_quadrature(kv, order: int):
    """Gauss points and weights over every non-empty knot span of ``kv``."""
    t, w = gauss_rule(order)
    b = kv.breakpoints
    lo, hi = b[:-1, None], b[1:, None]
    half = 0.5 * (hi - lo)
    return (0.5 * (lo + hi) + half * t).ravel(), (half * w).ravel()


def _volume_rows(surface: NurbsSurface, orders):
    xu, wu = element_quadrature(surface.kv_u, orders[0])
    xv, wv = element_quadrature(surface.kv_v, orders[1])
    xi, eta = np.meshgrid(xu, xv, indexing="ij")
    wts = np.outer(wu, wv).ravel()
    rows = surface.rational_rows(xi.ravel(), eta.ravel())
    cp = surface.control_points[rows.indices]
    jac = np.empty((wts.size, 2, 2))
    jac[:, :, 0] = np.einsum("qa,qad->qd", rows.d_xi, cp)
    jac[:, :, 1] = np.einsum("qa,qad->qd", rows.d_eta, cp)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    return rows, jac, det, wts


def _check_det(det, mu):
    if np.any(~(det > 0)):
        where = "" if mu is None else f" at mu={mu}"
        raise GeometryError(
            f"non-positive Jacobian determinant (min {det.min():.3e}){where}"
        )


def stiffness_matrix(space: DiscreteSpace) -> sp.csr_matrix:
    """Full stiffness matrix over all basis functions, before elimination."""
    rows, jac, det, wts = _volume_rows(space.surface, space.orders)
    _check_det(det, space.mu)
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1]
    inv[:, 1, 1] = jac[:, 0, 0]
    inv[:, 0, 1] = -jac[:, 0, 1]
    inv[:, 1, 0] = -jac[:, 1, 0]
    inv /= det[:, None, None]
    ref = np.stack([rows.d_xi, rows.d_eta], axis=-1)  # (q, a, 2)
    grad = np.einsum("qak,qkd->qad", ref, inv)  # J^-T applied to each gradient
    local = np.einsum("qad,qbd->qab", grad, grad) * (det * wts)[:, None, None]
    idx = rows.indices
    nloc = idx.shape[1]
    r = np.repeat(idx, nloc, axis=1).ravel()
    c = np.tile(idx, (1, nloc)).ravel()
    n = space.size
    return sp.coo_matrix((local.ravel(), (r, c)), shape=(n, n)).tocsr()


def assemble_stiffness(space: DiscreteSpace) -> sp.csr_matrix:
    """Stiffness matrix restricted to the free functions."""
    a = stiffness_matrix(space)
    return a[space.free][:, space.free]


def _edge_points(surface: NurbsSurface, edge: str, order: int):
    kv = surface.kv_u if edge in ("inlet", "outlet") else surface.kv_v
    t, w = element_quadrature(kv, order)
    fixed = {"inner": surface.kv_u.lower, "outer": surface.kv_u.upper,
             "inlet": surface.kv_v.lower, "outlet": surface.kv_v.upper}[edge]
    if edge in ("inlet", "outlet"):
        return t, np.full_like(t, fixed), w, 0
    return np.full_like(t, fixed), t, w, 1


def boundary_load(surface: NurbsSurface, boundary: BoundarySpec, orders=None) -> np.ndarray:
    """Flux load vector over all basis functions, before elimination."""
    pu, pv = surface.basis.degrees
    orders = orders or (pu + 1, pv + 1)
    b = np.zeros(surface.basis.size)
    for edge, g in boundary.neumann.items():
        if g == 0.0:
            continue
        order = orders[0] if edge in ("inlet", "outlet") else orders[1]
        xi, eta, w, axis = _edge_points(surface, edge, order)
        rows = surface.rational_rows(xi, eta)
        deriv = rows.d_xi if axis == 0 else rows.d_eta
        tangent = np.einsum("qa,qad->qd", deriv, surface.control_points[rows.indices])
        ds = np.linalg.norm(tangent, axis=1) * w
        np.add.at(b, rows.indices.ravel(), (g * rows.values * ds[:, None]).ravel())
    return b


def assemble_flux_rhs(space: DiscreteSpace, boundary: BoundarySpec) -> np.ndarray:
    return boundary_load(space.surface, boundary, space.orders)[space.free]


def solve(space: DiscreteSpace, boundary: BoundarySpec) -> FullOrderSolution:
    """Assemble and solve by sparse LU; constrained coefficients are lifted."""
    start = time.perf_counter()
    a = stiffness_matrix(space)
    b = boundary_load(space.surface, boundary, space.orders)
    u = np.zeros(space.size)
    u[space.constrained] = space.dirichlet_values
    a_free = a[space.free]
    rhs = b[space.free] - a_free[:, space.constrained] @ u[space.constrained]
    aff = a_free[:, space.free].tocsc()
    try:
        u_free = spla.splu(aff).solve(rhs)
    except RuntimeError as exc:
        raise SingularSystemError(f"factorization failed at mu={space.mu}: {exc}") from exc
    if not np.all(np.isfinite(u_free)):
        raise SingularSystemError(f"non-finite solution at mu={space.mu}")
    scale = np.linalg.norm(rhs)
    if scale > 0 and np.linalg.norm(aff @ u_free - rhs) > 1e-10 * scale:
        raise SingularSystemError(f"residual check failed at mu={space.mu}")
    u[space.free] = u_free
    elapsed = time.perf_counter() - start
    return FullOrderSolution(u, space.surface, space.mu, elapsed)


def _coefficients(solution) -> np.ndarray:
    return np.asarray(getattr(solution, "coefficients", solution), dtype=float)


def evaluate_field(solution, surface: NurbsSurface, xi, eta):
    """Field value(s) ``sum_k R_k(xi, eta) u_k``."""
    u = _coefficients(solution)
    if u.size != surface.basis.size:
        raise ValueError(f"{u.size} coefficients for {surface.basis.size} basis functions")
    rows = surface.rational_rows(xi, eta)
    vals = np.einsum("qa,qa->q", rows.values, u[rows.indices])
    return float(vals[0]) if np.ndim(xi) == 0 and np.ndim(eta) == 0 else vals


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Field sampled on a uniform parametric grid; arrays indexed ``[j, i]``."""

    xi: np.ndarray
    eta: np.ndarray
    points: np.ndarray
    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def sample_field_grid(solution, surface: NurbsSurface, resolution=41) -> FieldGrid:
    res_u, res_v = (resolution, resolution) if np.isscalar(resolution) else resolution
    if min(res_u, res_v) < 2:
        raise ValueError("resolution must be at least 2 per direction")
    xi = np.linspace(surface.kv_u.lower, surface.kv_u.upper, int(res_u))
    eta = np.linspace(surface.kv_v.lower, surface.kv_v.upper, int(res_v))
    ee, xx = np.meshgrid(eta, xi, indexing="ij")
    u = _coefficients(solution)
    rows = surface.rational_rows(xx.ravel(), ee.ravel())
    pts = np.einsum("qa,qad->qd", rows.values, surface.control_points[rows.indices])
    vals = np.einsum("qa,qa->q", rows.values, u[rows.indices])
    return FieldGrid(xi, eta, pts.reshape(xx.shape + (2,)), vals.reshape(xx.shape))


def l2_error(solution, surface: NurbsSurface, exact: Callable, order: int = 6):
    """Absolute and relative L2 error against ``exact(x, y)`` by element quadrature."""
    u = _coefficients(solution)
    xu, wu = element_quadrature(surface.kv_u, order)
    xv, wv = element_quadrature(surface.kv_v, order)
    xi, eta = np.meshgrid(xu, xv, indexing="ij")
    wts = np.outer(wu, wv).ravel()
    rows = surface.rational_rows(xi.ravel(), eta.ravel())
    _, det = surface.jacobians(xi.ravel(), eta.ravel())
    pts = np.einsum("qa,qad->qd", rows.values, surface.control_points[rows.indices])
    uh = np.einsum("qa,qa->q", rows.values, u[rows.indices])
    ue = exact(pts[:, 0], pts[:, 1])
    dv = np.abs(det) * wts
    err = np.sqrt(np.sum((uh - ue) ** 2 * dv))
    return err, err / np.sqrt(np.sum(ue**2 * dv))
