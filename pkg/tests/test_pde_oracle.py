"""Direct space-time solver: schemes, conservation, mode extraction."""

import math

import numpy as np
import pytest

from conftest import (
    AUDIT_COST,
    AUDIT_INITIAL,
    AUDIT_TERMINAL,
    DRIFT_COST,
    DRIFT_INITIAL,
    DRIFT_TERMINAL,
)
from mfglab import (
    BoundaryMaximum,
    DegenerateDiffusion,
    Grid1D,
    MassLeak,
    NoStrictMax,
    QuadraticCost,
    QuadraticTerminal,
    extract_mode,
    gaussian_grid,
    halfline_grid,
    solve_fpk_forward,
    solve_hjb_backward,
    solve_pde,
    verify_pde_gaussian,
    verify_pde_halfline,
)
from mfglab.gaussian_mfg import value_on_grid
from mfglab.pde_oracle import extract_mode_curve, gaussian_r2_curve


def _normalized_m0(initial, grid):
    m0 = initial.density(grid.xs)
    return m0 / np.trapezoid(m0, grid.xs)


class TestGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            Grid1D(1.0, 0.0)
        with pytest.raises(ValueError):
            Grid1D(0.0, 1.0, nx=32)
        grid = Grid1D(-1.0, 1.0, nx=101, nt=64)
        assert grid.dx == pytest.approx(0.02)
        assert grid.times(2.0)[-1] == 2.0

    def test_domain_rule_covers_density(self, audit_solution):
        grid = gaussian_grid(audit_solution)
        # initial spread 0.5 around 0.2: eight widths on each side
        assert grid.x_min <= 0.2 - 8.0 * 0.5 + 1e-9
        assert grid.x_max >= 0.2 + 8.0 * 0.5 - 1e-9


class TestValueSolve:
    def test_null_data_gives_null_surface(self):
        cost = QuadraticCost(a=0.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        grid = Grid1D(-2.0, 2.0, nx=128, nt=64)
        phi = solve_hjb_backward(cost, np.zeros(128), grid)
        assert np.max(np.abs(phi)) == 0.0

    def test_terminal_slice_exact(self, audit_backward):
        grid = Grid1D(-3.8, 4.2, nx=128, nt=64)
        k_vals = AUDIT_TERMINAL.k(grid.xs)
        phi = solve_hjb_backward(AUDIT_COST, k_vals, grid)
        assert np.array_equal(phi[-1], k_vals)

    def test_matches_quadratic_surface(self, audit_backward):
        grid = Grid1D(-3.8, 4.2, nx=512, nt=512)
        phi = solve_hjb_backward(AUDIT_COST, AUDIT_TERMINAL.k(grid.xs), grid)
        ref = value_on_grid(audit_backward, grid.times(AUDIT_COST.horizon), grid.xs)
        assert np.max(np.abs(phi - ref)) < 1e-3

    def test_refinement_reduces_error(self, audit_backward):
        def sup_error(n):
            grid = Grid1D(-3.8, 4.2, nx=n, nt=n)
            phi = solve_hjb_backward(AUDIT_COST, AUDIT_TERMINAL.k(grid.xs), grid)
            ref = value_on_grid(audit_backward, grid.times(AUDIT_COST.horizon), grid.xs)
            return float(np.max(np.abs(phi - ref)))

        assert sup_error(256) / sup_error(512) >= 3.0

    def test_exponential_transform_scheme_agrees_in_core(self, audit_backward):
        # the transform variant resolves exp(Phi/delta^2), so its accuracy
        # decays toward the far field; the density-carrying core agrees
        grid = Grid1D(-3.8, 4.2, nx=512, nt=512)
        phi = solve_hjb_backward(
            AUDIT_COST, AUDIT_TERMINAL.k(grid.xs), grid, scheme="hopf-cole"
        )
        ref = value_on_grid(audit_backward, grid.times(AUDIT_COST.horizon), grid.xs)
        core = np.abs(grid.xs - 0.2) <= 1.0
        assert np.max(np.abs(phi[:, core] - ref[:, core])) < 0.05
        with pytest.raises(ValueError):
            solve_hjb_backward(AUDIT_COST, AUDIT_TERMINAL.k(grid.xs), grid, scheme="x")

    def test_degenerate_diffusion_guard(self):
        cost = QuadraticCost(a=-1.0, b=0.0, c=0.0, delta=5e-4, horizon=1.0)
        grid = Grid1D(-2.0, 2.0, nx=128, nt=64)
        with pytest.raises(DegenerateDiffusion):
            solve_hjb_backward(cost, np.zeros(128), grid)


class TestDensitySolve:
    def test_pure_diffusion_variance_growth(self):
        # zero drift: the spread grows linearly, d var / dt = delta^2
        cost = QuadraticCost(a=0.0, b=0.0, c=0.0, delta=0.3, horizon=1.0)
        grid = Grid1D(-5.0, 5.0, nx=512, nt=256)
        phi = np.zeros((grid.nt, grid.nx))
        from mfglab import GaussianInitial

        init = GaussianInitial(x0=0.0, lam=0.5)
        m, clipped = solve_fpk_forward(phi, _normalized_m0(init, grid), cost, grid)
        xs = grid.xs
        var = np.trapezoid(m * xs**2, xs, axis=1) - np.trapezoid(m * xs, xs, axis=1) ** 2
        expected = init.variance + cost.delta**2 * grid.times(1.0)
        assert np.max(np.abs(var - expected)) < 1e-4
        assert clipped < 1e-12

    def test_interior_mass_conservation(self, audit_solution):
        agree = verify_pde_gaussian(audit_solution, nx=384, nt=384)
        mass = agree.pde.mass_curve
        # per-step change telescopes to boundary fluxes, which the domain
        # rule keeps at round-off scale
        assert np.max(np.abs(np.diff(mass))) < 1e-10

    def test_initial_mass_precondition(self):
        cost = QuadraticCost(a=0.0, b=0.0, c=0.0, delta=0.3, horizon=1.0)
        grid = Grid1D(-5.0, 5.0, nx=128, nt=64)
        phi = np.zeros((grid.nt, grid.nx))
        bad = np.exp(-grid.xs**2)  # mass sqrt(pi), far from 1
        with pytest.raises(ValueError):
            solve_fpk_forward(phi, bad, cost, grid)
        with pytest.raises(ValueError):
            solve_fpk_forward(phi, -bad, cost, grid)

    def test_mass_leak_detection(self, audit_solution):
        # deliberately tiny domain: probability pours over the edges
        grid = Grid1D(-0.4, 0.8, nx=128, nt=128)
        with pytest.raises(MassLeak):
            solve_pde(
                AUDIT_COST,
                AUDIT_TERMINAL,
                _normalized_m0(AUDIT_INITIAL, grid),
                grid,
            )


class TestModeExtraction:
    def test_node_centered_peak_is_exact(self):
        # exactly mirror-symmetric samples (linspace endpoints are not)
        xs = (np.arange(41) - 20) * 0.1
        m = np.exp(-(xs**2))
        assert extract_mode(m, xs) == 0.0

    def test_off_node_peak(self):
        xs = np.linspace(-2.0, 2.0, 401)
        center = 0.3 * (xs[1] - xs[0]) + xs[200]
        m = np.exp(-((xs - center) ** 2))
        assert abs(extract_mode(m, xs) - center) < 1e-3 * (xs[1] - xs[0])

    def test_boundary_maximum(self):
        xs = np.linspace(0.0, 1.0, 11)
        with pytest.raises(BoundaryMaximum):
            extract_mode(xs.copy(), xs)
        with pytest.raises(BoundaryMaximum):
            extract_mode(np.ones_like(xs), xs)  # flat: argmax lands on the edge

    def test_plateau_interpolates_midway(self):
        # a two-node plateau has no strict single-node peak; the parabola
        # puts the vertex halfway between the tied samples
        xs = np.linspace(0.0, 1.0, 11)
        plateau = np.array([0.0, 0.0, 0.5, 1.0, 1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0])
        assert extract_mode(plateau, xs) == pytest.approx(0.35)

    def test_r2_of_log_quadratic_density(self):
        grid = Grid1D(-4.0, 4.0, nx=256, nt=64)
        m = np.exp(-((grid.xs - 0.2) ** 2))[None, :].repeat(3, axis=0)
        r2 = gaussian_r2_curve(m, grid)
        assert np.all(r2 > 1.0 - 1e-12)


class TestAgreement:
    def test_audit_scenario(self, audit_solution):
        agree = verify_pde_gaussian(audit_solution, nx=384, nt=384)
        assert agree.passed
        assert agree.mode_deviation <= agree.mode_tolerance
        assert agree.min_r2 >= 0.999

    def test_drift_scenario(self, drift_solution):
        # asymmetric cost: the mode actually travels
        agree = verify_pde_gaussian(drift_solution, nx=384, nt=384)
        assert agree.passed
        span = np.max(agree.mode_reference) - np.min(agree.mode_reference)
        assert span > 0.2

    def test_refinement_tightens_mode(self, drift_solution):
        coarse = verify_pde_gaussian(drift_solution, nx=192, nt=192)
        fine = verify_pde_gaussian(drift_solution, nx=384, nt=384)
        assert coarse.mode_deviation / fine.mode_deviation >= 3.0

    def test_halfline_agreement(self, half_solution):
        agree = verify_pde_halfline(half_solution, nx=384, nt=384)
        assert agree.passed
        assert agree.mode_deviation <= agree.mode_tolerance
        # raw mass tracks the analytic survival, not 1
        assert agree.pde.mass_curve[-1] < 0.01

    def test_halfline_grid_rule(self, half_solution):
        grid = halfline_grid(half_solution)
        assert grid.x_min == 0.0
        assert grid.x_max >= 11.0 / math.sqrt(4.0) - 1e-9
