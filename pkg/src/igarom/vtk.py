"""Legacy ASCII VTK structured-grid output for sampled scalar fields."""

from __future__ import annotations

import numpy as np


def write_structured_grid(path, grid, name: str = "temperature"):
    """Write a :class:`~igarom.solver.FieldGrid` (points at ``z = 0``)."""
    values = np.asarray(grid.values, dtype=float)
    points = np.asarray(grid.points, dtype=float)
    n_v, n_u = values.shape
    n = n_u * n_v
    lines = [
        "# vtk DataFile Version 3.0",
        f"{name} field",
        "ASCII",
        "DATASET STRUCTURED_GRID",
        f"DIMENSIONS {n_u} {n_v} 1",
        f"POINTS {n} double",
    ]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in points.reshape(-1, 2)]
    lines += [f"POINT_DATA {n}", f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
    lines += [f"{v:.17g}" for v in values.ravel()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_structured_grid(path):
    """Parse a file produced by :func:`write_structured_grid`.

    Returns ``(points, values)`` with shapes ``(n_v, n_u, 3)`` and ``(n_v, n_u)``.
    """
    with open(path) as fh:
        tokens = fh.read().split("\n")
    if not tokens[0].startswith("# vtk DataFile"):
        raise ValueError(f"{path} is not a legacy VTK file")
    if tokens[2].strip() != "ASCII" or tokens[3].split() != ["DATASET", "STRUCTURED_GRID"]:
        raise ValueError("only ASCII structured grids are supported")
    dims = [int(t) for t in tokens[4].split()[1:]]
    n = int(tokens[5].split()[1])
    body = " ".join(tokens[6:]).split()
    points = np.array(body[: 3 * n], dtype=float).reshape(dims[1], dims[0], 3)
    rest = body[3 * n :]
    start = rest.index("default") + 1
    values = np.array(rest[start : start + n], dtype=float).reshape(dims[1], dims[0])
    return points, values
