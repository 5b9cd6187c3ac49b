"""POD with interpolation of the modal coefficients (PODI)."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, QhullError


class OutOfHullError(ValueError):
    """Query parameter lies outside the triangulated training set."""


@dataclass(frozen=True, eq=False)
class SnapshotDatabase:
    """Snapshot columns ``S`` (``n_dofs x n_train``) and their parameters."""

    parameters: np.ndarray
    snapshots: np.ndarray
    mesh: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        params = np.array(self.parameters, dtype=float)
        snaps = np.array(self.snapshots, dtype=float)
        if params.ndim == 1:
            params = params.reshape(-1, 1)
        if snaps.ndim != 2 or snaps.shape[1] != params.shape[0]:
            raise ValueError(
                f"{params.shape[0]} parameters but snapshot matrix has shape {snaps.shape}"
            )
        if np.unique(params, axis=0).shape[0] != params.shape[0]:
            raise ValueError("duplicate parameters in snapshot database")
        params.setflags(write=False)
        snaps.setflags(write=False)
        object.__setattr__(self, "parameters", params)
        object.__setattr__(self, "snapshots", snaps)

    @property
    def n_train(self) -> int:
        return self.snapshots.shape[1]

    @property
    def n_dofs(self) -> int:
        return self.snapshots.shape[0]

    def subset(self, columns) -> "SnapshotDatabase":
        columns = np.asarray(columns)
        return SnapshotDatabase(self.parameters[columns], self.snapshots[:, columns], self.mesh, self.config)


@dataclass(frozen=True, eq=False)
class PodBasis:
    modes: np.ndarray
    singular_values: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]


def numerical_rank(singular_values, shape) -> int:
    """Rank with the usual ``max(shape) * eps * sigma_1`` cut-off."""
    s = np.asarray(singular_values)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > max(shape) * np.finfo(float).eps * s[0]))


def _fix_signs(modes: np.ndarray) -> np.ndarray:
    pivot = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[pivot, np.arange(modes.shape[1])])
    signs[signs == 0] = 1.0
    return modes * signs


def _snapshot_method(s: np.ndarray):
    gram = s.T @ s
    lam, vecs = np.linalg.eigh(gram)
    order = np.argsort(lam)[::-1]
    lam, vecs = lam[order], vecs[:, order]
    sigma = np.sqrt(np.clip(lam, 0.0, None))
    keep = numerical_rank(sigma, gram.shape)
    modes = s @ vecs[:, :keep] / sigma[:keep]
    return modes, sigma


def compute_pod(db: SnapshotDatabase, n_modes: int | None = None, method: str = "svd") -> PodBasis:
    """Leading left singular vectors of the snapshot matrix.

    ``method="svd"`` uses a thin LAPACK SVD. ``method="snapshots"`` solves the
    ``n_train x n_train`` Gram eigenproblem instead, which is cheaper for very
    tall matrices but loses accuracy below ``sqrt(eps) * sigma_1``.
    Modes tied to zero singular values are never returned; when ``n_modes``
    is ``None`` all numerically non-zero modes are kept.
    """
    s = db.snapshots
    full = min(s.shape)
    if n_modes is not None and not 1 <= n_modes <= full:
        raise ValueError(f"mode count {n_modes} outside 1..{full}")
    if method == "svd":
        u, sigma, _ = np.linalg.svd(s, full_matrices=False)
        modes = u[:, : numerical_rank(sigma, s.shape)]
    elif method == "snapshots":
        modes, sigma = _snapshot_method(s)
        sigma = sigma[:full]
    else:
        raise ValueError(f"unknown POD method {method!r}")
    if modes.shape[1] == 0:
        raise ValueError("snapshot matrix is identically zero")
    keep = modes.shape[1] if n_modes is None else min(n_modes, modes.shape[1])
    return PodBasis(_fix_signs(modes[:, :keep]), sigma)


def energy_profile(basis_or_sigma) -> np.ndarray:
    """Cumulative fractions ``sum_{i<=k} sigma_i / sum_i sigma_i``."""
    sigma = np.asarray(getattr(basis_or_sigma, "singular_values", basis_or_sigma), dtype=float)
    total = sigma.sum()
    if not total > 0:
        raise ValueError("singular value spectrum is identically zero")
    return np.cumsum(sigma) / total


def modal_coefficients(basis: PodBasis, db: SnapshotDatabase) -> np.ndarray:
    if basis.modes.shape[0] != db.n_dofs:
        raise ValueError(f"modes have {basis.modes.shape[0]} rows, snapshots {db.n_dofs}")
    return basis.modes.T @ db.snapshots


class TriangulationInterpolator:
    """Piecewise-linear interpolation over a Delaunay triangulation."""

    def __init__(self, points, values):
        points = np.asarray(points, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != points.shape[0]:
            raise ValueError("values must have one column per parameter point")
        try:
            self.tri = Delaunay(points)
        except QhullError as exc:
            raise ValueError(f"degenerate parameter set: {exc}") from None
        missing = set(range(points.shape[0])) - set(np.unique(self.tri.simplices))
        if missing:
            raise ValueError(f"parameter points {sorted(missing)} were dropped by the triangulation")
        self.points = points
        self.values = values

    def weights(self, x):
        """Vertex indices and barycentric weights of ``x``."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        simplex = int(self.tri.find_simplex(x)[0])
        if simplex < 0:
            raise OutOfHullError(f"mu={tuple(x[0].tolist())} lies outside the training hull")
        t = self.tri.transform[simplex]
        b = t[:-1] @ (x[0] - t[-1])
        lam = np.append(b, 1.0 - b.sum())
        return self.tri.simplices[simplex], lam

    def __call__(self, x, rows=None):
        verts, lam = self.weights(x)
        v = self.values if rows is None else self.values[:rows]
        return v[:, verts] @ lam


def build_interpolator(parameters, coefficients) -> TriangulationInterpolator:
    return TriangulationInterpolator(parameters, coefficients)


@dataclass(frozen=True, eq=False)
class ReducedSolution:
    coefficients: np.ndarray
    mu: tuple
    n_modes: int
    predict_time: float = 0.0


@dataclass(frozen=True, eq=False)
class RomModel:
    basis: PodBasis
    coefficients: np.ndarray
    interpolator: TriangulationInterpolator

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes

    def predict(self, mu, n_modes: int | None = None) -> ReducedSolution:
        return predict(self, mu, n_modes)


def build_rom(db: SnapshotDatabase, n_modes: int | None = None, method: str = "svd") -> RomModel:
    basis = compute_pod(db, n_modes, method)
    c = modal_coefficients(basis, db)
    return RomModel(basis, c, build_interpolator(db.parameters, c))


def predict(model: RomModel, mu, n_modes: int | None = None) -> ReducedSolution:
    start = time.perf_counter()
    n = model.n_modes if n_modes is None else int(n_modes)
    if not 1 <= n <= model.n_modes:
        raise ValueError(f"mode count {n} outside 1..{model.n_modes}")
    c = model.interpolator(mu, rows=n)
    u = model.basis.modes[:, :n] @ c
    elapsed = time.perf_counter() - start
    return ReducedSolution(u, tuple(np.asarray(mu, dtype=float).tolist()), n, elapsed)


def pointwise_error(full, reduced, surface, resolution=101):
    """Absolute difference of the two fields on a uniform parametric grid.

    Returns the :class:`~igarom.solver.FieldGrid` of ``|u_full - u_reduced|``
    and its maximum.
    """
    from .solver import sample_field_grid

    a = np.asarray(getattr(full, "coefficients", full), dtype=float)
    b = np.asarray(getattr(reduced, "coefficients", reduced), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"mesh mismatch: {a.shape} vs {b.shape}")
    grid = sample_field_grid(a - b, surface, resolution)
    err = type(grid)(grid.xi, grid.eta, grid.points, np.abs(grid.values))
    return err, float(err.values.max())


def relative_l2_error(full, reduced) -> float:
    """Discrete relative error ``||u_full - u_reduced||_2 / ||u_full||_2`` of the coefficients."""
    a = np.asarray(getattr(full, "coefficients", full), dtype=float)
    b = np.asarray(getattr(reduced, "coefficients", reduced), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"mesh mismatch: {a.shape} vs {b.shape}")
    norm = np.linalg.norm(a)
    if norm == 0:
        raise ValueError("reference solution has zero norm")
    return float(np.linalg.norm(a - b) / norm)
