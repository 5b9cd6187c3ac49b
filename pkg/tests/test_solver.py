import math

import numpy as np
import pytest

from igarom import pipeline
from igarom.solver import (
    BoundarySpec,
    DiscreteSpace,
    GeometryError,
    assemble_flux_rhs,
    assemble_stiffness,
    boundary_load,
    edge_functions,
    evaluate_field,
    gauss_rule,
    l2_error,
    sample_field_grid,
    solve,
    stiffness_matrix,
)
from igarom.splines import refine_uniform

PIPE_BC = BoundarySpec.pipe()
ANNULUS_BC = BoundarySpec(dirichlet={"inner": 0.0, "outer": 1.0}, neumann={})


def log_profile(x, y):
    return np.log(np.hypot(x, y)) / math.log(2.0)


@pytest.fixture
def fine_pipe(pipe):
    return refine_uniform(pipe, 20, 20)


class TestGauss:
    def test_low_orders(self):
        x, w = gauss_rule(1)
        assert list(x) == [0.0] and list(w) == [2.0]
        x, w = gauss_rule(2)
        assert x == pytest.approx([-1 / math.sqrt(3), 1 / math.sqrt(3)]) and w == pytest.approx([1, 1])

    def test_exactness(self):
        x, w = gauss_rule(3)
        assert np.dot(w, x**4) == pytest.approx(0.4, abs=1e-14)
        for order in range(1, 11):
            x, w = gauss_rule(order)
            assert w.sum() == pytest.approx(2.0, abs=1e-14)
            deg = 2 * order - 1
            exact = 2.0 / (deg + 1) if deg % 2 == 0 else 0.0
            assert np.dot(w, x**deg) == pytest.approx(exact, abs=1e-13)

    @pytest.mark.parametrize("order", [0, 11, 2.5])
    def test_unsupported(self, order):
        with pytest.raises(ValueError):
            gauss_rule(order)


class TestBoundarySpec:
    def test_defaults(self):
        assert dict(PIPE_BC.dirichlet) == {"inner": 0.0, "outer": 0.0, "outlet": 0.0}
        assert dict(PIPE_BC.neumann) == {"inlet": 1.0}

    def test_invalid(self):
        with pytest.raises(ValueError):
            BoundarySpec(dirichlet={"inlet": 0.0}, neumann={"inlet": 1.0})
        with pytest.raises(ValueError):
            BoundarySpec(dirichlet={"top": 0.0})
        with pytest.raises(ValueError):
            BoundarySpec(dirichlet={}, neumann={"inlet": 1.0})


class TestSpace:
    def test_constrained_edges(self, fine_pipe):
        space = DiscreteSpace.build(fine_pipe, PIPE_BC)
        expected = set()
        for edge in ("inner", "outer", "outlet"):
            expected |= set(edge_functions(fine_pipe, edge).tolist())
        assert set(space.constrained.tolist()) == expected
        assert space.free.size + space.constrained.size == 400
        # 20 x 20 net minus two radial columns and one angular row
        assert space.free.size == 18 * 19


class TestStiffness:
    def test_hand_assembled_bilinear(self, unit_square):
        surface = refine_uniform(unit_square, 3, 3)
        bc = BoundarySpec(dirichlet={"inner": 0.0})
        got = stiffness_matrix(DiscreteSpace.build(surface, bc)).toarray()

        k1 = np.array([[1.0, -1.0], [-1.0, 1.0]])
        m1 = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        ke = np.kron(m1, k1) + np.kron(k1, m1)  # local order (0,0),(1,0),(0,1),(1,1)
        expected = np.zeros((9, 9))
        for ex in range(2):
            for ey in range(2):
                nodes = [ex + 3 * ey, ex + 1 + 3 * ey, ex + 3 * (ey + 1), ex + 1 + 3 * (ey + 1)]
                expected[np.ix_(nodes, nodes)] += ke
        assert expected[4, 4] == pytest.approx(8 / 3)
        assert got == pytest.approx(expected, abs=1e-14)

    def test_symmetry_and_kernel(self, fine_pipe):
        space = DiscreteSpace.build(fine_pipe, PIPE_BC)
        a = stiffness_matrix(space)
        assert np.abs(a - a.T).max() < 1e-12
        assert np.abs(a.sum(axis=1)).max() < 1e-10
        aff = assemble_stiffness(space)
        x = np.random.default_rng(0).standard_normal((aff.shape[0], 10))
        assert np.all(np.einsum("ik,ik->k", x, aff @ x) > 0)

    def test_invalid_geometry_names_mu(self, pipe):
        flipped = pipe.with_control_points(pipe.control_points * [-1, 1])
        space = DiscreteSpace.build(flipped, PIPE_BC, mu=(0.1, 0.2))
        with pytest.raises(GeometryError, match=r"mu=\(0.1, 0.2\)"):
            stiffness_matrix(space)

    def test_deterministic(self, fine_pipe):
        space = DiscreteSpace.build(fine_pipe, PIPE_BC)
        a, b = stiffness_matrix(space), stiffness_matrix(space)
        assert np.array_equal(a.data, b.data) and np.array_equal(a.indices, b.indices)


class TestLoad:
    def test_zero_flux(self, fine_pipe):
        bc = BoundarySpec.pipe(0.0)
        assert not assemble_flux_rhs(DiscreteSpace.build(fine_pipe, bc), bc).any()

    def test_unit_edge_linear(self, unit_square):
        b = boundary_load(unit_square, BoundarySpec(dirichlet={"outlet": 0.0}, neumann={"inlet": 1.0}))
        assert b == pytest.approx([0.5, 0.5, 0.0, 0.0], abs=1e-15)

    def test_total_equals_inlet_length(self, fine_pipe):
        b = boundary_load(fine_pipe, PIPE_BC)
        assert b.sum() == pytest.approx(1.0, abs=1e-13)
        off_edge = np.setdiff1d(np.arange(400), edge_functions(fine_pipe, "inlet"))
        assert not b[off_edge].any()

    def test_curved_edge_length(self, fine_pipe):
        # a quarter arc of radius 2 has length pi
        b = boundary_load(fine_pipe, BoundarySpec(dirichlet={"inner": 0.0}, neumann={"outer": 1.0}), orders=(6, 6))
        assert b.sum() == pytest.approx(math.pi, abs=1e-10)


class TestSolve:
    def test_zero_flux_gives_zero(self, fine_pipe):
        bc = BoundarySpec.pipe(0.0)
        sol = solve(DiscreteSpace.build(fine_pipe, bc), bc)
        assert not sol.coefficients.any()

    def test_log_profile(self, pipe):
        errors = []
        for n in (10, 20, 40):
            s = refine_uniform(pipe, n, n)
            sol = solve(DiscreteSpace.build(s, ANNULUS_BC), ANNULUS_BC)
            errors.append(l2_error(sol, s, log_profile)[1])
        assert errors[1] < 1e-3
        assert errors[0] / errors[1] >= 3 and errors[1] / errors[2] >= 3

    def test_self_convergence(self, pipe):
        fields = []
        for n in (20, 40):
            s = refine_uniform(pipe, n, n)
            fields.append(sample_field_grid(solve(DiscreteSpace.build(s, PIPE_BC), PIPE_BC), s, 81).values)
        assert np.linalg.norm(fields[0] - fields[1]) / np.linalg.norm(fields[1]) < 1e-2

    def test_energy_identity_and_constraints(self, fine_pipe):
        space = DiscreteSpace.build(fine_pipe, PIPE_BC)
        sol = solve(space, PIPE_BC)
        u = sol.coefficients
        assert not u[space.constrained].any()
        a = stiffness_matrix(space)
        b = boundary_load(fine_pipe, PIPE_BC)
        assert u @ (a @ u) == pytest.approx(b @ u, rel=1e-10)
        assert sol.solve_time > 0

    def test_linearity_in_flux(self, fine_pipe):
        u1 = solve(DiscreteSpace.build(fine_pipe, PIPE_BC), PIPE_BC).coefficients
        bc2 = BoundarySpec.pipe(2.0)
        u2 = solve(DiscreteSpace.build(fine_pipe, bc2), bc2).coefficients
        assert np.abs(u2 - 2 * u1).max() <= 1e-12 * np.abs(u1).max()


class TestFields:
    def test_evaluate(self, fine_pipe):
        assert evaluate_field(np.zeros(400), fine_pipe, 0.3, 0.4) == 0.0
        assert evaluate_field(np.ones(400), fine_pipe, 0.3, 0.4) == pytest.approx(1.0, abs=1e-14)
        with pytest.raises(ValueError):
            evaluate_field(np.ones(10), fine_pipe, 0.3, 0.4)

    def test_dirichlet_edges_vanish(self, fine_pipe):
        sol = solve(DiscreteSpace.build(fine_pipe, PIPE_BC), PIPE_BC)
        t = np.linspace(0, 1, 17)
        for xi, eta in [(0 * t, t), (0 * t + 1, t), (t, 0 * t + 1)]:
            assert np.abs(evaluate_field(sol, fine_pipe, xi, eta)).max() < 1e-12

    def test_grid(self, fine_pipe):
        sol = solve(DiscreteSpace.build(fine_pipe, PIPE_BC), PIPE_BC)
        corners = sample_field_grid(sol, fine_pipe, 2)
        assert corners.points.reshape(-1, 2) == pytest.approx(np.array([[1, 0], [2, 0], [0, 1], [0, 2]], float), abs=1e-15)
        grid = sample_field_grid(sol, fine_pipe, 41)
        assert not grid.values[:, 0].any()  # inner wall
        assert grid.values.min() >= -1e-12
        j, i = np.unravel_index(np.argmax(grid.values), grid.shape)
        assert j == 0  # hottest point sits on the inlet
        with pytest.raises(ValueError):
            sample_field_grid(sol, fine_pipe, 1)


def test_deformed_solve_from_pipeline():
    sol = pipeline.solve_full_order(pipeline.PipelineConfig(), (0.3, -0.3))
    assert sol.coefficients.shape == (400,) and sol.mu == (0.3, -0.3)
    assert sol.mesh["shape"] == [20, 20]
