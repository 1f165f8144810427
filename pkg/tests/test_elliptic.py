import math

import numpy as np
import pytest

from dopinv.elliptic import (
    EllipticProblem,
    EllipticSolveError,
    NewtonError,
    assemble,
    equilibrium_dirichlet,
    flux_gamma0,
    flux_gamma1,
    newton_equilibrium,
    solve_spd,
)
from dopinv.grid import (
    GAMMA0,
    GAMMA1,
    ScalarField,
    Trace,
    constant_field,
    constant_trace,
    field_from_function,
    make_grid,
)


def unit_problem(grid, g_bottom=0.0, g_top=0.0, source=None, coeff=None):
    return EllipticProblem(
        grid,
        coeff if coeff is not None else constant_field(grid, 1.0),
        constant_trace(grid, GAMMA0, g_bottom),
        constant_trace(grid, GAMMA1, g_top),
        source,
    )


def two_layer_field(grid, low, high, y_split=0.5):
    _, y = grid.cell_mesh()
    return ScalarField(grid, np.where(y > y_split, high, low))


class TestAssembleAndSolve:
    def test_zero_data_zero_solution(self):
        g = make_grid(8)
        w = solve_spd(assemble(unit_problem(g)))
        assert np.max(np.abs(w.values)) < 1e-12

    def test_linear_solution_exact(self):
        g = make_grid(8)
        w = solve_spd(assemble(unit_problem(g, g_bottom=-1.0, g_top=0.0)), rtol=1e-12)
        _, y = g.cell_mesh()
        assert np.max(np.abs(w.values - (y - 1.0))) < 1e-10

    def test_matrix_symmetric_with_positive_diagonal(self):
        g = make_grid(6)
        coeff = field_from_function(g, lambda x, y: 1.0 + x + 2 * y * y)
        a, _ = assemble(unit_problem(g, coeff=coeff)).to_dense()
        assert np.max(np.abs(a - a.T)) <= 1e-14 * np.max(np.abs(a))
        assert np.all(np.diag(a) > 0)

    def test_rejects_nonpositive_coefficient(self):
        g = make_grid(6)
        with pytest.raises(ValueError, match="positive"):
            unit_problem(g, coeff=constant_field(g, 0.0))

    def test_dense_oracle_8x8(self):
        # Gaussian elimination on the dense matrix as the independent solver
        g = make_grid(8)
        coeff = field_from_function(g, lambda x, y: 1.0 + 0.5 * np.sin(3 * x) * y)
        source = field_from_function(g, lambda x, y: x - y)
        problem = EllipticProblem(
            g, coeff,
            Trace(g, GAMMA0, np.sin(2 * g.cell_x)),
            Trace(g, GAMMA1, np.cos(g.cell_x)),
            source,
        )
        system = assemble(problem)
        a, b = system.to_dense()
        exact = np.linalg.solve(a, b).reshape((8, 8))
        w = solve_spd(system, rtol=1e-12)
        assert np.max(np.abs(w.values - exact)) <= 1e-8

    def test_budget_exhaustion_reports_residual(self):
        g = make_grid(16)
        system = assemble(unit_problem(g, g_bottom=1.0))
        with pytest.raises(EllipticSolveError, match="residual"):
            solve_spd(system, rtol=1e-10, max_iter=3)

    def test_rtol_domain(self):
        g = make_grid(8)
        with pytest.raises(ValueError):
            solve_spd(assemble(unit_problem(g)), rtol=1e-3)

    def test_conservation_for_zero_source(self):
        g = make_grid(16)
        coeff = field_from_function(g, lambda x, y: 1.0 + y + 0.3 * np.cos(2 * x))
        gb = Trace(g, GAMMA0, 0.5 + 0.2 * np.sin(3 * g.cell_x))
        gt = constant_trace(g, GAMMA1, -0.25)
        problem = EllipticProblem(g, coeff, gb, gt)
        w = solve_spd(assemble(problem), rtol=1e-12)
        out_top = g.h * np.sum(flux_gamma1(w, coeff, g, gt).values)
        out_bottom = g.h * np.sum(flux_gamma0(w, coeff, g, gb).values)
        scale = abs(out_top) + abs(out_bottom)
        assert abs(out_top + out_bottom) <= 1e-10 * scale

    def test_manufactured_solution_order(self):
        # w = cos(pi x) cos(pi y / 2): insulated sides exactly, mixed contacts
        def run(n):
            g = make_grid(n)
            w_exact = field_from_function(g, lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y / 2))
            source = field_from_function(
                g, lambda x, y: -(5 * np.pi ** 2 / 4) * np.cos(np.pi * x) * np.cos(np.pi * y / 2)
            )
            problem = EllipticProblem(
                g, constant_field(g, 1.0),
                Trace(g, GAMMA0, np.cos(np.pi * g.cell_x)),
                constant_trace(g, GAMMA1, 0.0),
                source,
            )
            w = solve_spd(assemble(problem), rtol=1e-12)
            return np.max(np.abs(w.values - w_exact.values))

        e16, e32 = run(16), run(32)
        assert math.log2(e16 / e32) >= 1.8


def independent_newton_residual(grid, v, c, lambda_sq):
    """Loop-based re-evaluation of the discrete equilibrium operator."""
    n, h = grid.n, grid.h
    cb = 1.5 * c[0, :] - 0.5 * c[1, :]
    ct = 1.5 * c[-1, :] - 0.5 * c[-2, :]
    gb, gt = np.arcsinh(cb / 2.0), np.arcsinh(ct / 2.0)
    res = np.empty((n, n))
    for j in range(n):
        for i in range(n):
            lap = 0.0
            lap += (v[j, i - 1] if i > 0 else v[j, i]) - v[j, i]
            lap += (v[j, i + 1] if i < n - 1 else v[j, i]) - v[j, i]
            lap += (v[j - 1, i] - v[j, i]) if j > 0 else 2.0 * (gb[i] - v[j, i])
            lap += (v[j + 1, i] - v[j, i]) if j < n - 1 else 2.0 * (gt[i] - v[j, i])
            res[j, i] = lambda_sq * lap / h ** 2 - (
                math.exp(v[j, i]) - math.exp(-v[j, i]) - c[j, i]
            )
    return res


class TestNewtonEquilibrium:
    def test_intrinsic_gives_zero(self):
        g = make_grid(16)
        v = newton_equilibrium(g, constant_field(g, 0.0), 1e-3)
        assert np.max(np.abs(v.values)) < 1e-12

    def test_constant_doping_exact(self):
        g = make_grid(32)
        v = newton_equilibrium(g, constant_field(g, 2.0 * math.sinh(1.0)), 1e-3)
        assert np.max(np.abs(v.values - 1.0)) <= 1e-9

    def test_step_doping_converges_with_small_residual(self):
        g = make_grid(32)
        _, y = g.cell_mesh()
        c = ScalarField(g, np.where(y > 0.5, 5.0, -5.0))
        v = newton_equilibrium(g, c, 1e-2, tol=1e-10)
        res = independent_newton_residual(g, v.values, c.values, 1e-2)
        assert np.max(np.abs(res)) <= 1e-10
        # discrete maximum principle: potential stays between the contact levels
        assert v.values.min() >= math.asinh(-2.5) - 1e-12
        assert v.values.max() <= math.asinh(2.5) + 1e-12

    def test_boundary_trace_from_adjacent_doping(self):
        g = make_grid(8)
        c = field_from_function(g, lambda x, y: 3.0 * y)
        gb, gt = equilibrium_dirichlet(g, c)
        assert gb.segment == GAMMA0 and gt.segment == GAMMA1
        # second-order extrapolation hits the exact linear boundary values
        assert np.allclose(gt.values, np.arcsinh(3.0 / 2.0), rtol=1e-13)
        assert np.allclose(gb.values, np.arcsinh(0.0), atol=1e-13)

    def test_iteration_budget_reports_residual(self):
        # constant doping converges instantly, so use a genuine junction
        g = make_grid(8)
        _, y = g.cell_mesh()
        c = ScalarField(g, np.where(y > 0.5, 5.0, -5.0))
        with pytest.raises(NewtonError, match="residual"):
            newton_equilibrium(g, c, 1e-2, tol=1e-12, max_iter=1)


class TestFluxGamma1:
    def test_linear_profile_unit_flux(self):
        g = make_grid(16)
        w = solve_spd(assemble(unit_problem(g, g_bottom=-1.0, g_top=0.0)), rtol=1e-12)
        flux = flux_gamma1(w, constant_field(g, 1.0), g)
        assert np.max(np.abs(flux.values - 1.0)) < 1e-10

    def test_constant_solution_zero_flux(self):
        g = make_grid(8)
        w = solve_spd(assemble(unit_problem(g, g_bottom=2.0, g_top=2.0)), rtol=1e-12)
        flux = flux_gamma1(w, constant_field(g, 1.0), g, constant_trace(g, GAMMA1, 2.0))
        assert np.max(np.abs(flux.values)) < 1e-9

    def test_two_layer_flux_is_harmonic_mean(self):
        g = make_grid(16)
        coeff = two_layer_field(g, 1.0, 4.0)
        w = solve_spd(assemble(unit_problem(g, g_bottom=-1.0, g_top=0.0, coeff=coeff)), rtol=1e-12)
        flux = flux_gamma1(w, coeff, g)
        assert np.max(np.abs(flux.values - 1.6)) < 1e-9
