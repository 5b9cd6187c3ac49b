"""B-spline and NURBS kernels: basis evaluation, tensor-product surfaces and
knot insertion.

Indices are zero-based throughout. Tensor-product functions are numbered with
the ``u`` index running fastest, ``k = i + n_u * j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Open (clamped) knot vector together with its polynomial degree."""

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        p = int(self.degree)
        if knots.ndim != 1:
            raise ValueError("knots must be one-dimensional")
        if p < 0:
            raise ValueError("degree must be non-negative")
        if knots.size < 2 * (p + 1):
            raise ValueError(f"need at least {2 * (p + 1)} knots for degree {p}")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        if knots[0] == knots[-1]:
            raise ValueError("knot vector spans an empty interval")
        if np.any(knots[: p + 1] != knots[0]) or np.any(knots[-p - 1 :] != knots[-1]):
            raise ValueError("knot vector is not open")
        if np.count_nonzero(knots == knots[0]) != p + 1 or np.count_nonzero(knots == knots[-1]) != p + 1:
            raise ValueError("end knots must have multiplicity exactly degree + 1")
        interior, counts = np.unique(knots[p + 1 : -p - 1], return_counts=True)
        if np.any(counts > p + 1):
            raise ValueError("interior knot multiplicity exceeds degree + 1")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "degree", p)

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @property
    def lower(self) -> float:
        return float(self.knots[0])

    @property
    def upper(self) -> float:
        return float(self.knots[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        """Distinct knot values, i.e. element boundaries."""
        return np.unique(self.knots)

    def multiplicity(self, xi: float) -> int:
        return int(np.count_nonzero(self.knots == xi))

    def __eq__(self, other):
        if not isinstance(other, KnotVector):
            return NotImplemented
        return self.degree == other.degree and np.array_equal(self.knots, other.knots)

    def __repr__(self):
        return f"KnotVector({self.knots.tolist()}, degree={self.degree})"


def _check_range(kv: KnotVector, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if np.any(~np.isfinite(xi)) or np.any(xi < kv.lower) or np.any(xi > kv.upper):
        raise ValueError(f"parametric coordinate outside [{kv.lower}, {kv.upper}]")
    return xi


def find_span(kv: KnotVector, xi) -> np.ndarray:
    """Knot-span index ``s`` with ``knots[s] <= xi < knots[s + 1]``.

    The final knot is assigned to the last non-empty span so that the basis
    covers the closed interval.
    """
    xi = _check_range(kv, xi)
    span = np.searchsorted(kv.knots, xi, side="right") - 1
    return np.clip(span, kv.degree, kv.n - 1)


def _basis_ders(knots, p, spans, xs, nders=1):
    """Non-zero basis functions and derivatives on the given spans.

    Vectorized version of the triangular Cox-de Boor table: returns an array
    of shape ``(npts, nders + 1, p + 1)`` where entry ``[q, k, r]`` is the
    ``k``-th derivative of function ``spans[q] - p + r`` at ``xs[q]``.
    Quotients with a zero denominator are taken as zero.
    """
    spans = np.atleast_1d(spans)
    xs = np.atleast_1d(xs).astype(float)
    npts = xs.size
    ndu = np.zeros((npts, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((npts, p + 1))
    right = np.zeros((npts, p + 1))
    for j in range(1, p + 1):
        left[:, j] = xs - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - xs
        saved = np.zeros(npts)
        for r in range(j):
            # lower triangle holds knot differences
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            denom = ndu[:, j, r]
            temp = np.divide(ndu[:, r, j - 1], denom, out=np.zeros(npts), where=denom != 0)
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    out = np.zeros((npts, nders + 1, p + 1))
    out[:, 0, :] = ndu[:, :, p]
    if nders == 0 or p == 0:
        return out
    for r in range(p + 1):
        a = np.zeros((npts, 2, p + 1))
        a[:, 0, 0] = 1.0
        s1, s2 = 0, 1
        for k in range(1, min(nders, p) + 1):
            d = np.zeros(npts)
            rk = r - k
            pk = p - k
            if r >= k:
                den = ndu[:, pk + 1, rk]
                a[:, s2, 0] = np.divide(a[:, s1, 0], den, out=np.zeros(npts), where=den != 0)
                d = a[:, s2, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                den = ndu[:, pk + 1, rk + j]
                a[:, s2, j] = np.divide(
                    a[:, s1, j] - a[:, s1, j - 1], den, out=np.zeros(npts), where=den != 0
                )
                d = d + a[:, s2, j] * ndu[:, rk + j, pk]
            if r <= pk:
                den = ndu[:, pk + 1, r]
                a[:, s2, k] = np.divide(-a[:, s1, k - 1], den, out=np.zeros(npts), where=den != 0)
                d = d + a[:, s2, k] * ndu[:, r, pk]
            out[:, k, r] = d
            s1, s2 = s2, s1
    factor = float(p)
    for k in range(1, min(nders, p) + 1):
        out[:, k, :] *= factor
        factor *= p - k
    return out


def basis_rows(kv: KnotVector, xs, nders: int = 1):
    """Batch evaluation: ``(first_index, values)`` for many coordinates.

    ``first_index`` has shape ``(npts,)`` and ``values`` shape
    ``(npts, nders + 1, p + 1)``.
    """
    spans = find_span(kv, np.atleast_1d(xs))
    vals = _basis_ders(kv.knots, kv.degree, spans, np.atleast_1d(xs), nders)
    return spans - kv.degree, vals


def eval_basis_row(kv: KnotVector, xi: float):
    """Return ``(first, values)``: the ``p + 1`` functions non-zero at ``xi``.

    ``values[r]`` is ``N_{first + r, p}(xi)``; every other function vanishes.
    """
    first, vals = basis_rows(kv, xi, nders=0)
    return int(first[0]), vals[0, 0].copy()


def _check_index(kv: KnotVector, i: int):
    if not 0 <= i < kv.n:
        raise IndexError(f"basis index {i} out of range for {kv.n} functions")


def eval_bspline_basis(kv: KnotVector, i: int, xi: float) -> float:
    """Value of the ``i``-th B-spline basis function of ``kv`` at ``xi``."""
    _check_index(kv, i)
    first, vals = basis_rows(kv, xi, nders=0)
    r = i - int(first[0])
    return float(vals[0, 0, r]) if 0 <= r <= kv.degree else 0.0


def eval_bspline_deriv(kv: KnotVector, i: int, xi: float) -> float:
    """First derivative of the ``i``-th basis function at ``xi``."""
    _check_index(kv, i)
    first, vals = basis_rows(kv, xi, nders=1)
    r = i - int(first[0])
    return float(vals[0, 1, r]) if 0 <= r <= kv.degree else 0.0


@dataclass(frozen=True, eq=False)
class TensorBasis:
    kv_u: KnotVector
    kv_v: KnotVector

    @property
    def shape(self) -> tuple[int, int]:
        return self.kv_u.n, self.kv_v.n

    @property
    def size(self) -> int:
        return self.kv_u.n * self.kv_v.n

    @property
    def degrees(self) -> tuple[int, int]:
        return self.kv_u.degree, self.kv_v.degree

    def index(self, i, j):
        return np.asarray(i) + self.kv_u.n * np.asarray(j)

    def unravel(self, k):
        return np.asarray(k) % self.kv_u.n, np.asarray(k) // self.kv_u.n


class RationalRows(NamedTuple):
    indices: np.ndarray
    values: np.ndarray
    d_xi: np.ndarray
    d_eta: np.ndarray


class Jacobian(NamedTuple):
    matrix: np.ndarray
    det: float

    @property
    def valid(self) -> bool:
        return self.det > 0


@dataclass(frozen=True, eq=False)
class NurbsSurface:
    """Tensor-product NURBS patch in the plane.

    ``control_points`` has shape ``(n_u * n_v, 2)`` and ``weights`` shape
    ``(n_u * n_v,)``, both ordered with ``u`` fastest.
    """

    basis: TensorBasis
    control_points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.control_points, dtype=float).reshape(-1, 2)
        w = np.array(self.weights, dtype=float).ravel()
        if pts.shape[0] != self.basis.size or w.size != self.basis.size:
            raise ValueError(
                f"expected {self.basis.size} control points and weights, "
                f"got {pts.shape[0]} and {w.size}"
            )
        if np.any(~(w > 0)):
            raise ValueError("NURBS weights must be positive")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "control_points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_net(cls, kv_u: KnotVector, kv_v: KnotVector, net, weights=None):
        """Build from a control net indexed ``[i, j]`` (shape ``(n_u, n_v, 2)``)."""
        net = np.asarray(net, dtype=float)
        if weights is None:
            weights = np.ones(net.shape[:2])
        pts = net.transpose(1, 0, 2).reshape(-1, 2)
        w = np.asarray(weights, dtype=float).T.ravel()
        return cls(TensorBasis(kv_u, kv_v), pts, w)

    @property
    def kv_u(self) -> KnotVector:
        return self.basis.kv_u

    @property
    def kv_v(self) -> KnotVector:
        return self.basis.kv_v

    @property
    def net(self) -> np.ndarray:
        """Control net indexed ``[i, j]``."""
        n_u, n_v = self.basis.shape
        return self.control_points.reshape(n_v, n_u, 2).transpose(1, 0, 2)

    @property
    def net_weights(self) -> np.ndarray:
        n_u, n_v = self.basis.shape
        return self.weights.reshape(n_v, n_u).T

    def with_control_points(self, points) -> "NurbsSurface":
        return NurbsSurface(self.basis, points, self.weights)

    def rational_rows(self, xi, eta) -> RationalRows:
        """Batch form of :func:`eval_nurbs_basis_row` over arrays of points.

        Returned arrays have shape ``(npts, (p_u + 1) * (p_v + 1))``.
        """
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        xi, eta = np.broadcast_arrays(xi, eta)
        fu, bu = basis_rows(self.kv_u, xi.ravel())
        fv, bv = basis_rows(self.kv_v, eta.ravel())
        pu, pv = self.basis.degrees
        ii = fu[:, None] + np.arange(pu + 1)[None, :]
        jj = fv[:, None] + np.arange(pv + 1)[None, :]
        idx = (ii[:, None, :] + self.kv_u.n * jj[:, :, None]).reshape(xi.size, -1)
        w = self.weights[idx]
        n = (bv[:, 0, :, None] * bu[:, 0, None, :]).reshape(xi.size, -1) * w
        nx = (bv[:, 0, :, None] * bu[:, 1, None, :]).reshape(xi.size, -1) * w
        ny = (bv[:, 1, :, None] * bu[:, 0, None, :]).reshape(xi.size, -1) * w
        big_w = n.sum(axis=1, keepdims=True)
        r = n / big_w
        rx = (nx - r * nx.sum(axis=1, keepdims=True)) / big_w
        ry = (ny - r * ny.sum(axis=1, keepdims=True)) / big_w
        return RationalRows(idx, r, rx, ry)

    def points(self, xi, eta) -> np.ndarray:
        rows = self.rational_rows(xi, eta)
        return np.einsum("qa,qad->qd", rows.values, self.control_points[rows.indices])

    def jacobians(self, xi, eta):
        """Jacobian matrices ``(npts, 2, 2)`` and determinants ``(npts,)``."""
        rows = self.rational_rows(xi, eta)
        cp = self.control_points[rows.indices]
        jac = np.empty((rows.values.shape[0], 2, 2))
        jac[:, :, 0] = np.einsum("qa,qad->qd", rows.d_xi, cp)
        jac[:, :, 1] = np.einsum("qa,qad->qd", rows.d_eta, cp)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        return jac, det


def eval_nurbs_basis_row(surface: NurbsSurface, xi: float, eta: float) -> RationalRows:
    """Active rational basis functions and their parametric partial derivatives."""
    rows = surface.rational_rows(xi, eta)
    return RationalRows(*(a[0] for a in rows))


def eval_surface_point(surface: NurbsSurface, xi: float, eta: float) -> np.ndarray:
    return surface.points(xi, eta)[0]


def eval_surface_jacobian(surface: NurbsSurface, xi: float, eta: float) -> Jacobian:
    """Columns are ``dx/dxi`` and ``dx/deta``; check ``.valid`` for orientation."""
    jac, det = surface.jacobians(xi, eta)
    return Jacobian(jac[0], float(det[0]))


def insert_knot(kv: KnotVector, control, weights, xi_new: float):
    """Insert ``xi_new`` once into ``kv`` (Boehm's algorithm).

    ``control`` has shape ``(n, ..., d)`` and ``weights`` shape ``(n, ...)``;
    axis 0 runs along the refined direction. The update is carried out in
    homogeneous coordinates so the rational geometry is unchanged.
    Returns the refined ``(KnotVector, control, weights)``.
    """
    p = kv.degree
    xi_new = float(xi_new)
    if not kv.lower < xi_new < kv.upper:
        raise ValueError(f"knot {xi_new} must lie strictly inside ({kv.lower}, {kv.upper})")
    if kv.multiplicity(xi_new) >= p:
        raise ValueError(f"knot {xi_new} already has multiplicity {kv.multiplicity(xi_new)} >= degree {p}")
    control = np.asarray(control, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if control.shape[0] != kv.n or weights.shape != control.shape[:-1]:
        raise ValueError("control/weights shape does not match the knot vector")

    u = kv.knots
    k = int(find_span(kv, xi_new))
    hom = np.concatenate([control * weights[..., None], weights[..., None]], axis=-1)
    new = np.empty((hom.shape[0] + 1,) + hom.shape[1:])
    new[: k - p + 1] = hom[: k - p + 1]
    new[k + 1 :] = hom[k:]
    for i in range(k - p + 1, k + 1):
        alpha = (xi_new - u[i]) / (u[i + p] - u[i])
        new[i] = alpha * hom[i] + (1.0 - alpha) * hom[i - 1]
    w_new = new[..., -1]
    pts_new = new[..., :-1] / w_new[..., None]
    kv_new = KnotVector(np.insert(u, k + 1, xi_new), p)
    return kv_new, pts_new, w_new


def insert_knot_surface(surface: NurbsSurface, direction: int, xi_new: float) -> NurbsSurface:
    """Insert one knot in direction 0 (``u``) or 1 (``v``) of a surface."""
    net, w = surface.net, surface.net_weights
    if direction == 0:
        kv, net, w = insert_knot(surface.kv_u, net, w, xi_new)
        return NurbsSurface.from_net(kv, surface.kv_v, net, w)
    if direction == 1:
        kv, net_t, w_t = insert_knot(surface.kv_v, net.transpose(1, 0, 2), w.T, xi_new)
        return NurbsSurface.from_net(surface.kv_u, kv, net_t.transpose(1, 0, 2), w_t.T)
    raise ValueError("direction must be 0 or 1")


def _new_knots(kv: KnotVector, target: int) -> list[float]:
    """Knots to insert so that ``kv`` ends up with ``target`` functions.

    When the existing interior knots sit on the uniform grid with
    ``target - p`` spans, the missing grid values are returned. Otherwise the
    widest span is bisected repeatedly.
    """
    extra = target - kv.n
    if extra == 0:
        return []
    p = kv.degree
    nspans = target - p
    grid = kv.lower + (kv.upper - kv.lower) * np.arange(1, nspans) / nspans
    interior = kv.knots[p + 1 : -p - 1]
    remaining = list(grid)
    ok = True
    for x in interior:
        hit = [r for r, g in enumerate(remaining) if abs(g - x) <= 1e-12 * (kv.upper - kv.lower)]
        if not hit:
            ok = False
            break
        remaining.pop(hit[0])
    if ok and len(remaining) == extra:
        return [float(g) for g in remaining]

    breaks = list(kv.breakpoints)
    added = []
    for _ in range(extra):
        widths = np.diff(breaks)
        s = int(np.argmax(widths))
        mid = 0.5 * (breaks[s] + breaks[s + 1])
        breaks.insert(s + 1, mid)
        added.append(mid)
    return sorted(added)


def refine_uniform(surface: NurbsSurface, n_u_target: int, n_v_target: int) -> NurbsSurface:
    """h-refine by single knot insertions until the net is ``n_u_target x n_v_target``."""
    n_u, n_v = surface.basis.shape
    if n_u_target < n_u or n_v_target < n_v:
        raise ValueError(f"cannot coarsen a {n_u}x{n_v} net to {n_u_target}x{n_v_target}")
    net, w = surface.net, surface.net_weights
    kv_u, kv_v = surface.kv_u, surface.kv_v
    for x in _new_knots(kv_u, n_u_target):
        kv_u, net, w = insert_knot(kv_u, net, w, x)
    net_t, w_t = net.transpose(1, 0, 2), w.T
    for x in _new_knots(kv_v, n_v_target):
        kv_v, net_t, w_t = insert_knot(kv_v, net_t, w_t, x)
    if kv_u is surface.kv_u and kv_v is surface.kv_v:
        return surface
    return NurbsSurface.from_net(kv_u, kv_v, net_t.transpose(1, 0, 2), w_t.T)
