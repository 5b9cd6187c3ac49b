"""Free-form deformation of planar points with a Bernstein lattice.

The map sends a physical point into the unit square of the embedding box,
adds the Bernstein-blended lattice displacements there, and maps back.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .splines import NurbsSurface

#: Parameter domain sampled by the offline campaign.
PARAM_BOUNDS = (-0.3, 0.3)


class ParameterRangeWarning(UserWarning):
    """Raised (as a warning) for parameters outside the sampled domain."""


@dataclass(frozen=True, eq=False)
class FfdLattice:
    """Embedding box plus an ``(l + 1) x (m + 1)`` grid of displacements.

    ``displacements[i, j]`` is the physical displacement of the lattice point
    with index ``i`` along ``x`` and ``j`` along ``y``.
    """

    origin: np.ndarray
    side_lengths: np.ndarray
    displacements: np.ndarray = field(default_factory=lambda: np.zeros((2, 2, 2)))

    def __post_init__(self):
        origin = np.array(self.origin, dtype=float).reshape(2)
        sides = np.array(self.side_lengths, dtype=float).reshape(2)
        disp = np.array(self.displacements, dtype=float)
        if np.any(~(sides > 0)):
            raise ValueError("lattice side lengths must be positive")
        if disp.ndim != 3 or disp.shape[2] != 2 or min(disp.shape[:2]) < 1:
            raise ValueError("displacements must have shape (l + 1, m + 1, 2)")
        for a in (origin, sides, disp):
            a.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "side_lengths", sides)
        object.__setattr__(self, "displacements", disp)

    @property
    def degrees(self) -> tuple[int, int]:
        return self.displacements.shape[0] - 1, self.displacements.shape[1] - 1

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        s = psi(self, points)
        return np.all((s >= -tol) & (s <= 1 + tol), axis=-1)


def psi(lattice: FfdLattice, points) -> np.ndarray:
    """Affine map from the embedding box onto the unit square."""
    return (np.asarray(points, dtype=float) - lattice.origin) / lattice.side_lengths


def psi_inverse(lattice: FfdLattice, coords) -> np.ndarray:
    return lattice.origin + np.asarray(coords, dtype=float) * lattice.side_lengths


def bernstein(i: int, n: int, t):
    """Bernstein polynomial ``C(n, i) t^i (1 - t)^(n - i)``."""
    if not 0 <= i <= n:
        raise IndexError(f"Bernstein index {i} out of range for degree {n}")
    t = np.asarray(t, dtype=float)
    return comb(n, i) * t**i * (1.0 - t) ** (n - i)


def _bernstein_all(n: int, t: np.ndarray) -> np.ndarray:
    return np.stack([bernstein(i, n, t) for i in range(n + 1)], axis=-1)


def ffd_displacement(lattice: FfdLattice, points) -> np.ndarray:
    """Bernstein-blended lattice displacement at points inside the box (zero outside)."""
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 2)
    st = psi(lattice, flat)
    l, m = lattice.degrees
    bs = _bernstein_all(l, st[:, 0])
    bt = _bernstein_all(m, st[:, 1])
    shift = np.einsum("qi,qj,ijd->qd", bs, bt, lattice.displacements)
    shift[~lattice.contains(flat)] = 0.0
    return shift.reshape(pts.shape)


def ffd_map(lattice: FfdLattice, points) -> np.ndarray:
    """Deform points lying in the lattice box.

    Points outside the box are returned unchanged. The deformed field is
    only continuous across the box boundary where the adjacent lattice
    displacements vanish.
    """
    # psi^-1(psi(x) + shift / sides) == x + shift, without the round trip
    return np.asarray(points, dtype=float) + ffd_displacement(lattice, points)


def in_parameter_domain(mu, bounds=PARAM_BOUNDS) -> bool:
    mu = np.asarray(mu, dtype=float)
    return bool(np.all((mu >= bounds[0]) & (mu <= bounds[1])))


def lattice_from_mu(mu, origin=(0.0, 0.0), side=3.0) -> FfdLattice:
    """Two-parameter 2x2 lattice: ``mu`` moves the max-x column along ``x``.

    ``mu[0]`` displaces the bottom-right lattice point, ``mu[1]`` the
    top-right one.
    """
    mu = np.asarray(mu, dtype=float).reshape(2)
    if not in_parameter_domain(mu):
        warnings.warn(f"mu={tuple(mu.tolist())} lies outside {PARAM_BOUNDS}^2", ParameterRangeWarning, stacklevel=2)
    disp = np.zeros((2, 2, 2))
    disp[1, 0, 0] = mu[0]
    disp[1, 1, 0] = mu[1]
    return FfdLattice(origin, (side, side), disp)


def deform_surface(lattice: FfdLattice, surface: NurbsSurface) -> NurbsSurface:
    """Apply the FFD to the control net; knots and weights are kept."""
    pts = surface.control_points
    if not np.all(lattice.contains(pts)):
        raise ValueError("control net is not fully embedded in the FFD lattice box")
    return surface.with_control_points(ffd_map(lattice, pts))
