"""Randomized invariants across modules."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_open_knots
from igarom import pipeline
from igarom.ffd import ffd_displacement, ffd_map, lattice_from_mu, psi, psi_inverse, FfdLattice
from igarom.rom import SnapshotDatabase, build_interpolator, compute_pod, modal_coefficients
from igarom.splines import basis_rows, insert_knot_surface, refine_uniform

seeds = st.integers(0, 2**32 - 1)
unit = st.floats(0, 1)
half_mu = st.floats(-0.15, 0.15)


@settings(max_examples=80, deadline=None)
@given(seeds, st.lists(unit, min_size=1, max_size=20))
def test_basis_rows_partition_and_sign(seed, ts):
    kv = random_open_knots(np.random.default_rng(seed))
    xs = kv.lower + np.asarray(ts) * (kv.upper - kv.lower)
    first, vals = basis_rows(kv, xs, 0)
    assert np.all(vals >= 0)
    np.testing.assert_allclose(vals[:, 0].sum(axis=1), 1.0, atol=1e-12)
    # active block sits inside the knot span that contains x
    assert np.all(kv.knots[first + kv.degree] <= xs)
    assert np.all(first + kv.degree < kv.n)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([0, 1]), st.floats(0.01, 0.99), unit, unit)
def test_knot_insertion_preserves_surface(direction, knot, xi, eta):
    pipe = pipeline.reference_pipe_geometry()
    refined = insert_knot_surface(pipe, direction, knot)
    np.testing.assert_allclose(refined.points([xi], [eta]), pipe.points([xi], [eta]), atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(3, 12), unit, unit)
def test_refinement_keeps_circle_exact(nu, nv, xi, eta):
    s = refine_uniform(pipeline.reference_pipe_geometry(), nu, nv)
    assert s.basis.shape == (nu, nv)
    r = np.linalg.norm(s.points([xi], [eta]))
    assert r == pytest.approx(1 + xi, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.5, 4), st.floats(0.5, 4), unit, unit)
def test_psi_round_trip(ox, oy, a, b, s, t):
    lattice = FfdLattice((ox, oy), (a, b))
    coords = np.array([[s, t]])
    np.testing.assert_allclose(psi(lattice, psi_inverse(lattice, coords)), coords, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(half_mu, half_mu, half_mu, half_mu, st.floats(0, 3), st.floats(0, 3))
def test_ffd_displacement_linear_in_mu(a1, a2, b1, b2, x, y):
    pt = np.array([[x, y]])
    da = ffd_displacement(lattice_from_mu((a1, a2)), pt)
    db = ffd_displacement(lattice_from_mu((b1, b2)), pt)
    dab = ffd_displacement(lattice_from_mu((a1 + b1, a2 + b2)), pt)
    np.testing.assert_allclose(dab, da + db, atol=1e-14)
    # lattice moves are horizontal
    assert np.all(da[:, 1] == 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 3), st.floats(0, 3))
def test_ffd_identity_at_zero(x, y):
    pt = np.array([[x, y]])
    assert np.array_equal(ffd_map(lattice_from_mu((0.0, 0.0)), pt), pt)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 8), st.integers(2, 8))
def test_pod_reconstructs_and_is_orthonormal(seed, cols, rank):
    rng = np.random.default_rng(seed)
    rank = min(rank, cols)
    s = rng.standard_normal((30, rank)) @ rng.standard_normal((rank, cols))
    db = SnapshotDatabase(rng.random((cols, 2)), s)
    basis = compute_pod(db)
    z = basis.modes
    np.testing.assert_allclose(z.T @ z, np.eye(z.shape[1]), atol=1e-12)
    np.testing.assert_allclose(z @ modal_coefficients(basis, db), s, atol=1e-10 * np.abs(s).max())
    assert np.all(np.diff(basis.singular_values) <= 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_interpolation_reproduces_affine_data(c0, c1, c2, x, y):
    params = pipeline.parameter_grid(pipeline.PipelineConfig(grid=(4, 4)))
    values = (c0 + c1 * params[:, 0] + c2 * params[:, 1])[None, :]
    got = build_interpolator(params, values)((x, y))[0]
    assert got == pytest.approx(c0 + c1 * x + c2 * y, abs=1e-12)
