"""Offline/online orchestration for the collector-pipe problem."""

from __future__ import annotations

import json
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import database, ffd, rom, solver, vtk
from .splines import KnotVector, NurbsSurface, refine_uniform

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the pipeline; the defaults give the 100-snapshot, 400-DOF study."""

    inner_radius: float = 1.0
    outer_radius: float = 2.0
    dofs: tuple[int, int] = (20, 20)
    ffd_origin: tuple[float, float] = (0.0, 0.0)
    ffd_side: float = 3.0
    param_bounds: tuple[float, float] = ffd.PARAM_BOUNDS
    grid: tuple[int, int] = (10, 10)
    quad_order: int | None = None
    flux: float = 1.0
    n_modes: int | None = None
    test_samples: int = 20
    seed: int = 42
    jobs: int = 1

    def __post_init__(self):
        for name in ("dofs", "ffd_origin", "param_bounds", "grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not 0 < self.inner_radius < self.outer_radius:
            raise ValueError("radii must satisfy 0 < inner_radius < outer_radius")
        if min(self.grid) < 2:
            raise ValueError("parameter grid needs at least 2 points per axis")
        lo, hi = self.param_bounds
        if not lo < hi:
            raise ValueError("empty parameter domain")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> "PipelineConfig":
        return PipelineConfig.from_dict({**self.to_dict(), **changes})


def reference_pipe_geometry(config: PipelineConfig = PipelineConfig()) -> NurbsSurface:
    """Quarter annulus: linear across the wall, exact quadratic arcs along it."""
    r_in, r_out = config.inner_radius, config.outer_radius
    if not 0 < r_in < r_out:
        raise ValueError("radii must satisfy 0 < inner_radius < outer_radius")
    net = np.array(
        [
            [[r_in, 0.0], [r_in, r_in], [0.0, r_in]],
            [[r_out, 0.0], [r_out, r_out], [0.0, r_out]],
        ]
    )
    c = math.sqrt(2.0) / 2.0
    weights = np.array([[1.0, c, 1.0], [1.0, c, 1.0]])
    return NurbsSurface.from_net(KnotVector([0, 0, 1, 1], 1), KnotVector([0, 0, 0, 1, 1, 1], 2), net, weights)


def parameter_grid(config: PipelineConfig) -> np.ndarray:
    """Tensor grid over the parameter domain, first parameter varying fastest."""
    lo, hi = config.param_bounds
    a = np.linspace(lo, hi, config.grid[0])
    b = np.linspace(lo, hi, config.grid[1])
    bb, aa = np.meshgrid(b, a, indexing="ij")
    return np.column_stack([aa.ravel(), bb.ravel()])


def deformed_geometry(config: PipelineConfig, mu) -> NurbsSurface:
    lattice = ffd.lattice_from_mu(mu, config.ffd_origin, config.ffd_side)
    surface = ffd.deform_surface(lattice, reference_pipe_geometry(config))
    return refine_uniform(surface, *config.dofs)


def solve_full_order(config: PipelineConfig, mu) -> solver.FullOrderSolution:
    """Deform, refine and solve at one parameter; ``solve_time`` covers all three."""
    start = time.perf_counter()
    surface = deformed_geometry(config, mu)
    boundary = solver.BoundarySpec.pipe(config.flux)
    space = solver.DiscreteSpace.build(surface, boundary, mu=mu, quad_order=config.quad_order)
    sol = solver.solve(space, boundary)
    return solver.FullOrderSolution(sol.coefficients, surface, sol.mu, time.perf_counter() - start)


def _snapshot(args):
    config, mu = args
    return solve_full_order(config, mu).coefficients


def offline(config: PipelineConfig = PipelineConfig(), out_dir=None) -> rom.SnapshotDatabase:
    """Run the snapshot campaign; optionally persist it to ``out_dir``."""
    params = parameter_grid(config)
    tasks = [(config, mu) for mu in params]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            columns = list(pool.map(_snapshot, tasks))
    else:
        columns = [_snapshot(t) for t in tasks]
    mesh = solver.mesh_metadata(deformed_geometry(config, params[0]))
    # worker count does not affect the result, so it stays out of the manifest
    stored = {k: v for k, v in config.to_dict().items() if k != "jobs"}
    db = rom.SnapshotDatabase(params, np.column_stack(columns), mesh, stored)
    log.info("offline: %d snapshots of %d dofs", db.n_train, db.n_dofs)
    if out_dir is not None:
        database.save(db, out_dir)
    return db


def db_config(db: rom.SnapshotDatabase) -> PipelineConfig:
    return PipelineConfig.from_dict(db.config) if db.config else PipelineConfig()


def online(db, mu, n_modes=None, vtk_path=None, csv_path=None, resolution=41, model=None):
    """Predict the field at ``mu``; optionally export it sampled on a grid.

    Returns the reduced solution, the deformed surface it lives on and the
    sampled field grid.
    """
    model = model or rom.build_rom(db)
    reduced = rom.predict(model, mu, n_modes)
    surface = deformed_geometry(db_config(db), mu)
    grid = solver.sample_field_grid(reduced, surface, resolution)
    if vtk_path is not None:
        vtk.write_structured_grid(vtk_path, grid)
    if csv_path is not None:
        write_field_csv(csv_path, grid)
    return reduced, surface, grid


def write_field_csv(path, grid: solver.FieldGrid):
    xx, ee = np.meshgrid(grid.xi, grid.eta)
    table = np.column_stack(
        [xx.ravel(), ee.ravel(), grid.points[..., 0].ravel(), grid.points[..., 1].ravel(), grid.values.ravel()]
    )
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header="xi,eta,x,y,temperature", comments="")


@dataclass
class StudyReport:
    """Collected outputs of the error, spectrum and timing studies."""

    test_parameters: np.ndarray | None = None
    errors_by_size: list = field(default_factory=list)  # (snapshots, modes, mean error)
    errors_by_modes: list = field(default_factory=list)  # (modes, mean error)
    per_mu_errors: np.ndarray | None = None  # (n_test, n_modes) at the full database
    singular_values: np.ndarray | None = None
    timings: dict = field(default_factory=dict)
    speedup: float | None = None

    def error_rows(self):
        rows = [("snapshots", n, m, e) for n, m, e in self.errors_by_size]
        rows += [("modes", None, m, e) for m, e in self.errors_by_modes]
        return rows

    def write_error_csv(self, path):
        with open(path, "w") as fh:
            fh.write("study,snapshots,modes,mean_relative_error\n")
            for study, n, m, e in self.error_rows():
                fh.write(f"{study},{'' if n is None else n},{m},{e:.17g}\n")


def sample_test_parameters(config: PipelineConfig, n: int | None = None, seed: int | None = None) -> np.ndarray:
    """Uniform samples in the parameter domain from numpy's PCG64 generator."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    lo, hi = config.param_bounds
    return rng.uniform(lo, hi, size=(config.test_samples if n is None else n, 2))


def nested_order(parameters: np.ndarray) -> np.ndarray:
    """Ordering whose prefixes are spread over the parameter box.

    The extreme corners come first so every prefix of four or more points
    spans the whole box; the rest follow by greedy farthest-point selection
    with ties going to the lower index.
    """
    p = np.asarray(parameters, dtype=float)
    span = np.ptp(p, axis=0)
    span[span == 0] = 1.0
    q = (p - p.min(axis=0)) / span
    chosen: list[int] = []
    for corner in ((0, 0), (1, 0), (0, 1), (1, 1)):
        d = np.linalg.norm(q - np.asarray(corner, dtype=float), axis=1)
        for i in np.argsort(d, kind="stable"):
            if int(i) not in chosen:
                chosen.append(int(i))
                break
    dist = np.min(np.linalg.norm(q[:, None, :] - q[None, chosen, :], axis=2), axis=1)
    while len(chosen) < len(p):
        dist[chosen] = -1.0
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(q - q[nxt], axis=1))
    return np.array(chosen)


def database_sizes(n_train: int, step: int = 5) -> list[int]:
    sizes = [s for s in range(step, n_train + 1, step) if s >= 4]
    if not sizes or sizes[-1] != n_train:
        sizes.append(n_train)
    return sizes


def error_study(db, test_samples=None, seed=None, max_modes=20, sizes=None, truths=None) -> StudyReport:
    """Average relative error against fresh truth solves.

    Errors are reported (a) against the number of snapshots, using nested
    prefixes from :func:`nested_order` with every available mode, and
    (b) against the number of modes on the full database.
    """
    config = db_config(db)
    mus = sample_test_parameters(config, test_samples, seed)
    if truths is None:
        truths = [solve_full_order(config, mu).coefficients for mu in mus]
    report = StudyReport(test_parameters=mus)

    model = rom.build_rom(db)
    top = min(max_modes, model.n_modes)
    per = np.array(
        [[rom.relative_l2_error(t, model.predict(mu, n)) for n in range(1, top + 1)] for mu, t in zip(mus, truths)]
    )
    report.per_mu_errors = per
    report.errors_by_modes = [(n, float(per[:, n - 1].mean())) for n in range(1, top + 1)]
    report.singular_values = model.basis.singular_values

    order = nested_order(db.parameters)
    for size in sizes or database_sizes(db.n_train):
        sub = rom.build_rom(db.subset(order[:size]))
        errs = [rom.relative_l2_error(t, sub.predict(mu)) for mu, t in zip(mus, truths)]
        report.errors_by_size.append((int(size), sub.n_modes, float(np.mean(errs))))
    return report


def singular_value_report(db, csv_path=None) -> dict:
    sigma = rom.compute_pod(db).singular_values
    normalized = sigma / sigma[0]
    energy = rom.energy_profile(sigma)
    if csv_path is not None:
        table = np.column_stack([np.arange(1, sigma.size + 1), sigma, normalized, energy])
        np.savetxt(
            csv_path, table, fmt=["%d", "%.17g", "%.17g", "%.17g"], delimiter=",",
            header="index,sigma,sigma_normalized,energy_fraction", comments="",
        )
    return {
        "singular_values": sigma,
        "normalized": normalized,
        "energy": energy,
        "first_mode_energy": float(energy[0]),
        "rank": rom.numerical_rank(sigma, db.snapshots.shape),
    }


def speedup(db, mu, repeats: int = 10, n_modes=None, model=None) -> StudyReport:
    """Time full-order solves against ROM predictions at the same ``mu``.

    Model construction is offline work and is not timed. One untimed warm-up
    call of each precedes the measurements. ``speedup`` is the ratio of the
    mean times; the median of the paired ratios is kept in ``timings``.
    """
    config = db_config(db)
    model = model or rom.build_rom(db)
    solve_full_order(config, mu)
    rom.predict(model, mu, n_modes)
    t_full, t_rom = [], []
    for _ in range(repeats):
        start = time.perf_counter()
        solve_full_order(config, mu)
        t_full.append(time.perf_counter() - start)
    # separate loop: interleaving with full solves would time a cold cache
    for _ in range(repeats):
        start = time.perf_counter()
        rom.predict(model, mu, n_modes)
        t_rom.append(time.perf_counter() - start)
    ratios = [a / b for a, b in zip(t_full, t_rom)]
    timings = {
        "full_mean": statistics.fmean(t_full),
        "full_median": statistics.median(t_full),
        "rom_mean": statistics.fmean(t_rom),
        "rom_median": statistics.median(t_rom),
        "speedup_median": statistics.median(ratios),
    }
    sp = timings["full_mean"] / timings["rom_mean"]
    return StudyReport(timings=timings, speedup=sp)
