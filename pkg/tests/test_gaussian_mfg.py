"""Full-line solver: backward/forward systems, closed forms, audits."""

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
    central_residual,
)
from mfglab import (
    AuditVerdict,
    DegenerateDensity,
    FormulaId,
    FormulaPole,
    GaussianInitial,
    NonGlobalValue,
    OutsideExistenceInterval,
    PaperFormulaAudit,
    QuadraticCost,
    QuadraticTerminal,
    RegimeKind,
    closed_form_A,
    closed_form_Q,
    existence_horizon,
    mass_curve,
    mode_closed_form,
    mode_curve,
    mode_from_density,
    mode_ode,
    solve_backward,
    solve_forward,
    solve_gaussian,
    variance_curve,
)
from mfglab.gaussian_mfg import (
    audit_formula_A,
    audit_formula_Q,
    printed_closed_form_A,
    printed_closed_form_Q,
)


class TestSolveBackward:
    def test_equilibrium_terminal_data_stays_put(self):
        # A = -k is a fixed point of the quadratic flow
        cost = QuadraticCost(a=-2.0, b=0.0, c=0.0, delta=0.2, horizon=3.0)
        back = solve_backward(cost, QuadraticTerminal(-1.0, 0.0, 0.0))
        assert np.max(np.abs(back.A + 1.0)) < 1e-10

    def test_critical_backward_value(self):
        # A' = -2 A^2 has the analytic solution A(t) = 1/(2t + 2)
        cost = QuadraticCost(a=0.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        back = solve_backward(cost, QuadraticTerminal(0.25, 0.0, 0.0))
        assert back.A[0] == pytest.approx(0.5, abs=1e-10)
        assert np.allclose(back.A, 1.0 / (2.0 * back.times + 2.0), atol=1e-9)

    def test_long_horizon_slope_plateau(self):
        # stable point: A -> -k, B -> -b/(2 A) = 2 for a = -2, b = 4
        cost = QuadraticCost(a=-2.0, b=4.0, c=0.0, delta=0.2, horizon=12.0)
        back = solve_backward(cost, QuadraticTerminal(-1.0, 0.0, 0.0))
        assert back.B_of(0.5) == pytest.approx(2.0, abs=1e-6)

    def test_terminal_values_hit_exactly(self, drift_backward):
        assert drift_backward.A[-1] == pytest.approx(0.1, abs=1e-12)
        assert drift_backward.B[-1] == pytest.approx(-0.2, abs=1e-12)
        assert drift_backward.C[-1] == pytest.approx(0.3, abs=1e-12)

    def test_blow_up_returns_partial_path(self):
        cost = QuadraticCost(a=2.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        back = solve_backward(cost, QuadraticTerminal(0.0, 0.0, 0.0))
        assert not back.existence.is_global
        t_star = back.existence.blowup_time
        assert t_star == pytest.approx(1.0 - math.pi / 4.0, abs=1e-6)
        assert back.times[0] > t_star
        assert back.times[-1] == pytest.approx(1.0)

    def test_offset_only_changes_C(self):
        shifted = QuadraticCost(
            a=DRIFT_COST.a,
            b=DRIFT_COST.b,
            c=DRIFT_COST.c + 5.0,
            delta=DRIFT_COST.delta,
            horizon=DRIFT_COST.horizon,
        )
        base = solve_gaussian(DRIFT_COST, DRIFT_TERMINAL, DRIFT_INITIAL)
        moved = solve_gaussian(shifted, DRIFT_TERMINAL, DRIFT_INITIAL)
        # A, B and the density coefficients are bitwise untouched: C is
        # integrated separately, so the offset cannot perturb step sizes
        assert np.array_equal(base.path.A, moved.path.A)
        assert np.array_equal(base.path.B, moved.path.B)
        assert np.array_equal(base.path.K2, moved.path.K2)
        assert np.array_equal(base.path.K1, moved.path.K1)
        assert np.max(np.abs(moved.path.C - base.path.C)) > 1.0

    def test_residuals_on_grid(self):
        # the check itself carries an O(h^2 y''') term, so it needs a grid
        # fine enough to resolve the K-system's fast relaxation
        back = solve_backward(DRIFT_COST, DRIFT_TERMINAL, n_grid=16001)
        ts = back.times
        a_res = central_residual(ts, back.A, -2.0 * back.A**2 - DRIFT_COST.a)
        b_res = central_residual(ts, back.B, -2.0 * back.A * back.B - DRIFT_COST.b)
        c_res = central_residual(
            ts, back.C, -DRIFT_COST.c - DRIFT_COST.delta**2 * back.A - 0.5 * back.B**2
        )
        assert a_res < 1e-6
        assert b_res < 1e-6
        assert c_res < 1e-6


class TestSolveForward:
    def test_initial_coefficients(self, audit_solution):
        path = audit_solution.path
        assert path.K2[0] == pytest.approx(-2.0, abs=1e-12)
        assert path.K1[0] == pytest.approx(0.8, abs=1e-12)
        expected_k0 = -0.2**2 / 0.5 + math.log(AUDIT_INITIAL.norm)
        assert path.K0[0] == pytest.approx(expected_k0, abs=1e-12)

    def test_zero_fields_freeze_coefficients(self):
        # with A = B = 0 and negligible noise, nothing moves
        cost = QuadraticCost(a=0.0, b=0.0, c=0.0, delta=1e-8, horizon=1.0)
        back = solve_backward(cost, QuadraticTerminal(0.0, 0.0, 0.0))
        fwd = solve_forward(cost, back, GaussianInitial(x0=0.0, lam=0.5))
        assert np.max(np.abs(fwd.K2 + 2.0)) < 1e-12
        assert np.max(np.abs(fwd.K1)) < 1e-12
        assert np.max(np.abs(fwd.K0 - fwd.K0[0])) < 1e-12

    def test_mass_conserved(self, audit_solution, drift_solution):
        for sol in (audit_solution, drift_solution):
            assert np.max(np.abs(mass_curve(sol.path) - 1.0)) < 1e-8

    def test_density_stays_concentrated(self, drift_solution):
        assert np.all(drift_solution.path.K2 < 0.0)
        var = variance_curve(drift_solution.path)
        assert np.all(var > 0.0)
        # continuity: no jumps between neighbouring samples
        assert np.max(np.abs(np.diff(var))) < 5e-3

    def test_requires_global_value(self):
        cost = QuadraticCost(a=2.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        back = solve_backward(cost, QuadraticTerminal(0.0, 0.0, 0.0))
        with pytest.raises(NonGlobalValue):
            solve_forward(cost, back, GaussianInitial(x0=0.0, lam=0.5))

    def test_forward_residuals(self):
        back = solve_backward(DRIFT_COST, DRIFT_TERMINAL, n_grid=16001)
        fwd = solve_forward(DRIFT_COST, back, DRIFT_INITIAL, n_grid=16001)
        d2 = DRIFT_COST.delta**2
        ts = back.times
        k2_res = central_residual(
            ts, fwd.K2, -4.0 * back.A * fwd.K2 + 2.0 * d2 * fwd.K2**2
        )
        k1_res = central_residual(
            ts,
            fwd.K1,
            -2.0 * back.A * fwd.K1
            + 2.0 * d2 * fwd.K1 * fwd.K2
            - 2.0 * back.B * fwd.K2,
        )
        k0_res = central_residual(
            ts,
            fwd.K0,
            -2.0 * back.A - back.B * fwd.K1 + 0.5 * d2 * (fwd.K1**2 + 2.0 * fwd.K2),
        )
        assert k2_res < 1e-6
        assert k1_res < 1e-6
        assert k0_res < 1e-6


class TestMode:
    def test_mode_from_density_values(self):
        assert mode_from_density(0.8, -2.0) == pytest.approx(0.2)
        assert mode_from_density(0.0, -1.0) == 0.0
        with pytest.raises(DegenerateDensity):
            mode_from_density(1.0, 0.0)
        with pytest.raises(DegenerateDensity):
            mode_from_density(1.0, 0.5)

    def test_symmetric_scenario_stays_centered(self):
        cost = QuadraticCost(a=-1.0, b=0.0, c=0.0, delta=0.3, horizon=2.0)
        back = solve_backward(cost, QuadraticTerminal(0.0, 0.0, 0.0))
        traj = mode_ode(back, 0.0)
        assert np.max(np.abs(traj.states)) < 1e-12

    def test_mode_equivalence(self, audit_solution, audit_backward,
                              drift_solution, drift_backward):
        for sol, back in ((audit_solution, audit_backward),
                          (drift_solution, drift_backward)):
            q_density = mode_curve(sol.path)
            q_ode = mode_ode(back, sol.initial.x0, grid=sol.path.times).states[:, 0]
            assert np.max(np.abs(q_density - q_ode)) < 1e-6

    def test_mode_ode_needs_global_value(self):
        cost = QuadraticCost(a=2.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        back = solve_backward(cost, QuadraticTerminal(0.0, 0.0, 0.0))
        with pytest.raises(NonGlobalValue):
            mode_ode(back, 0.2)

    def test_long_horizon_plateau(self):
        cost = QuadraticCost(a=-2.0, b=4.0, c=0.0, delta=0.2, horizon=14.0)
        back = solve_backward(cost, QuadraticTerminal(0.0, 0.0, 0.0))
        q_of = mode_ode(back, 0.0).component(0)
        assert q_of(7.0) == pytest.approx(1.0, abs=1e-6)  # -b/(2a)

    def test_oscillation_frequency(self):
        # distance between consecutive maxima of the mode equals 2 pi / sqrt(2a)
        cost = QuadraticCost(a=0.3471074380165289, b=0.1, c=0.0, delta=0.2, horizon=40.0)
        term = QuadraticTerminal(0.0, 0.0, 0.0)
        ts = np.linspace(0.0, 40.0, 4001)
        q = mode_closed_form(cost, term, 0.2, ts)
        inner = (q[1:-1] > q[:-2]) & (q[1:-1] > q[2:])
        peaks = ts[1:-1][inner]
        spacing = float(np.mean(np.diff(peaks)))
        expected = 2.0 * math.pi / math.sqrt(2.0 * cost.a)
        assert spacing == pytest.approx(expected, rel=0.01)

    def test_second_order_law_refines_quadratically(self, drift_backward):
        # central-difference Q'' + 2 a Q + b -> 0 at rate O(h^2)
        def sup_residual(n):
            ts = np.linspace(0.0, DRIFT_COST.horizon, n)
            q = mode_ode(drift_backward, DRIFT_INITIAL.x0, grid=ts).states[:, 0]
            h = ts[1] - ts[0]
            second = (q[2:] - 2.0 * q[1:-1] + q[:-2]) / h**2
            return np.max(np.abs(second + 2.0 * DRIFT_COST.a * q[1:-1] + DRIFT_COST.b))

        coarse = sup_residual(201)
        fine = sup_residual(401)
        assert coarse / fine > 3.0


class TestExistenceHorizon:
    def test_supercritical_blow_up_time(self):
        cost = QuadraticCost(a=2.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        report = existence_horizon(cost, 0.0)
        assert not report.is_global
        assert report.blowup_time == pytest.approx(1.0 - math.pi / 4.0, rel=1e-12)

    def test_subcritical_always_global_below_threshold(self):
        for horizon in (1.0, 10.0, 50.0):
            cost = QuadraticCost(a=-2.0, b=0.0, c=0.0, delta=0.2, horizon=horizon)
            assert existence_horizon(cost, 0.0).is_global

    def test_critical_cases(self):
        cost = QuadraticCost(a=0.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        report = existence_horizon(cost, 1.0)
        assert report.blowup_time == pytest.approx(0.5, rel=1e-12)
        assert existence_horizon(cost, -1.0).is_global
        assert existence_horizon(cost, 0.4).is_global  # 2 a_t T < 1

    def test_subcritical_above_threshold(self):
        cost = QuadraticCost(a=-2.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        report = existence_horizon(cost, 2.0)
        expected = 1.0 - math.log(3.0) / 4.0
        assert report.blowup_time == pytest.approx(expected, rel=1e-12)
        # same terminal slope but a short horizon: the pole lies before t = 0
        short = QuadraticCost(a=-2.0, b=0.0, c=0.0, delta=0.2, horizon=0.2)
        assert existence_horizon(short, 2.0).is_global

    @pytest.mark.parametrize(
        "a,a_t,horizon",
        [(-2.0, 2.0, 1.0), (0.0, 1.0, 1.0), (2.0, 0.0, 1.0), (3.0, -0.4, 1.0)],
    )
    def test_branches_match_guard(self, a, a_t, horizon):
        cost = QuadraticCost(a=a, b=0.0, c=0.0, delta=0.2, horizon=horizon)
        report = existence_horizon(cost, a_t)
        back = solve_backward(cost, QuadraticTerminal(a_t, 0.0, 0.0))
        assert not report.is_global
        assert not back.existence.is_global
        assert back.existence.blowup_time == pytest.approx(
            report.blowup_time, abs=1e-3
        )


class TestClosedForms:
    def test_equilibrium_value(self):
        cost = QuadraticCost(a=-2.0, b=0.0, c=0.0, delta=0.2, horizon=2.0)
        ts = np.linspace(0.0, 2.0, 7)
        assert np.allclose(closed_form_A(cost, -1.0, ts), -1.0, atol=1e-14)

    def test_critical_value(self):
        cost = QuadraticCost(a=0.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        assert closed_form_A(cost, 0.25, 0.0) == pytest.approx(0.5, rel=1e-14)

    @pytest.mark.parametrize(
        "cost,a_t",
        [
            (QuadraticCost(a=-2.0, b=0.0, c=0.0, delta=0.2, horizon=2.0), 0.0),
            (QuadraticCost(a=0.0, b=0.5, c=0.0, delta=0.2, horizon=1.5), 0.2),
            (QuadraticCost(a=1.0, b=0.5, c=0.0, delta=0.2, horizon=0.6), 0.1),
        ],
    )
    def test_matches_backward_solve(self, cost, a_t):
        back = solve_backward(cost, QuadraticTerminal(a_t, 0.0, 0.0))
        assert back.existence.is_global
        vals = closed_form_A(cost, a_t, back.times)
        assert np.max(np.abs(vals - back.A)) < 1e-8

    def test_outside_existence_interval(self):
        cost = QuadraticCost(a=2.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        with pytest.raises(OutsideExistenceInterval):
            closed_form_A(cost, 0.0, 0.1)

    @pytest.mark.parametrize(
        "cost,terminal,q0",
        [
            (
                QuadraticCost(a=-2.0, b=4.0, c=0.0, delta=0.2, horizon=3.0),
                QuadraticTerminal(0.3, -0.5, 0.0),
                0.4,
            ),
            (
                QuadraticCost(a=0.0, b=1.5, c=0.0, delta=0.2, horizon=1.0),
                QuadraticTerminal(0.25, 0.5, 0.0),
                0.3,
            ),
            (
                QuadraticCost(a=0.5, b=1.0, c=0.0, delta=0.2, horizon=0.9),
                QuadraticTerminal(0.2, 0.4, 0.0),
                0.3,
            ),
        ],
    )
    def test_mode_closed_form_matches_ode(self, cost, terminal, q0):
        back = solve_backward(cost, terminal)
        assert back.existence.is_global
        q_ode = mode_ode(back, q0, grid=back.times).states[:, 0]
        q_cf = mode_closed_form(cost, terminal, q0, back.times)
        assert np.max(np.abs(q_cf - q_ode)) < 1e-6

    def test_mode_closed_form_pole(self):
        cost = QuadraticCost(a=0.0, b=1.0, c=0.0, delta=0.2, horizon=1.0)
        with pytest.raises(FormulaPole):
            mode_closed_form(cost, QuadraticTerminal(0.5, 0.0, 0.0), 0.2, 0.3)

    def test_trivial_symmetry(self):
        for a in (-2.0, 0.0, 0.5):
            cost = QuadraticCost(a=a, b=0.0, c=0.0, delta=0.2, horizon=1.0)
            val = mode_closed_form(cost, QuadraticTerminal(0.1, 0.0, 0.0), 0.0, 0.7)
            assert val == pytest.approx(0.0, abs=1e-14)

    def test_canonical_q_with_blown_up_value(self):
        # the mode keeps oscillating after the value surface stops existing
        cost = QuadraticCost(a=0.3471074380165289, b=0.1, c=0.0, delta=0.2, horizon=40.0)
        term = QuadraticTerminal(0.3471074380165289, -0.07, 0.0)
        val, audit = closed_form_Q(cost, term, 0.2, 20.0)
        assert math.isfinite(val)
        assert audit.formula_id is FormulaId.Q_SUPERCRITICAL


class TestFormulaAudits:
    def test_audit_type_consistency(self):
        with pytest.raises(ValueError):
            PaperFormulaAudit(FormulaId.A_SUBCRITICAL, 1.0, AuditVerdict.MATCHES)
        audit = PaperFormulaAudit.from_deviations(FormulaId.A_SUBCRITICAL, 1e-9, None)
        assert audit.verdict is AuditVerdict.MATCHES

    def test_subcritical_value_formula_matches(self):
        cost = QuadraticCost(a=-2.0, b=4.0, c=0.0, delta=0.2, horizon=3.0)
        audit = audit_formula_A(cost, QuadraticTerminal(0.0, 0.0, 0.0))
        assert audit.formula_id is FormulaId.A_SUBCRITICAL
        assert audit.verdict is AuditVerdict.MATCHES

    def test_critical_value_formula_needs_correction(self):
        cost = QuadraticCost(a=0.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        audit = audit_formula_A(cost, QuadraticTerminal(0.25, 0.0, 0.0))
        assert audit.formula_id is FormulaId.A_CRITICAL
        assert audit.verdict is AuditVerdict.MATCHES_AFTER_CORRECTION
        # the circulating expression solves A' = -A^2 instead of A' = -2 A^2,
        # so its deviation is far above tolerance while the re-derivation is
        # at integrator precision
        assert audit.max_abs_deviation > 1e-3
        assert audit.corrected_max_abs_deviation < 1e-9

    def test_supercritical_value_formula_needs_correction(self):
        cost = QuadraticCost(a=1.0, b=0.0, c=0.0, delta=0.2, horizon=0.6)
        audit = audit_formula_A(cost, QuadraticTerminal(0.2, 0.0, 0.0))
        assert audit.formula_id is FormulaId.A_SUPERCRITICAL
        assert audit.verdict is AuditVerdict.MATCHES_AFTER_CORRECTION

    def test_mode_formula_verdicts(self):
        critical = audit_formula_Q(
            QuadraticCost(a=0.0, b=1.5, c=0.0, delta=0.2, horizon=1.0),
            QuadraticTerminal(0.25, 0.5, 0.0),
            0.3,
        )
        assert critical.verdict is AuditVerdict.MATCHES
        subcritical = audit_formula_Q(
            QuadraticCost(a=-2.0, b=4.0, c=0.0, delta=0.2, horizon=3.0),
            QuadraticTerminal(0.0, 0.0, 0.0),
            0.0,
        )
        assert subcritical.verdict is AuditVerdict.MATCHES_AFTER_CORRECTION
        supercritical = audit_formula_Q(
            QuadraticCost(a=0.5, b=1.0, c=0.0, delta=0.2, horizon=0.9),
            QuadraticTerminal(0.2, 0.4, 0.0),
            0.3,
        )
        assert supercritical.verdict is AuditVerdict.MATCHES_AFTER_CORRECTION

    def test_printed_forms_evaluate(self):
        # terminal anchor: every printed variant reproduces the data at t = T
        cost = QuadraticCost(a=-2.0, b=1.0, c=0.0, delta=0.2, horizon=2.0)
        assert printed_closed_form_A(cost, 0.3, 2.0)[0] == pytest.approx(0.3, abs=1e-12)
        crit = QuadraticCost(a=0.0, b=1.0, c=0.0, delta=0.2, horizon=2.0)
        assert printed_closed_form_A(crit, 0.1, 2.0)[0] == pytest.approx(0.1, abs=1e-12)
        sup = QuadraticCost(a=0.5, b=1.0, c=0.0, delta=0.2, horizon=0.5)
        # the printed supercritical form misreproduces its own terminal datum
        # unless a_t happens to satisfy k tan(atan(k a_t)) = a_t
        assert printed_closed_form_Q(crit, QuadraticTerminal(0.1, 0.0, 0.0), 0.4, 0.0)[
            0
        ] == pytest.approx(0.4, abs=1e-12)
        assert math.isfinite(printed_closed_form_A(sup, 0.2, 0.2)[0])


class TestGaussianSolution:
    def test_assembled_solution_probes(self, audit_solution):
        sol = audit_solution
        assert sol.mode(0.0) == pytest.approx(0.2, abs=1e-10)
        assert sol.std(0.0) == pytest.approx(0.5, abs=1e-10)
        xs = np.linspace(-3.0, 3.5, 301)
        assert np.trapezoid(sol.density(0.0, xs), xs) == pytest.approx(1.0, abs=1e-6)
        assert sol.phi(2.0, 1.3) == pytest.approx(0.0, abs=1e-12)

    def test_non_global_scenario_raises(self):
        cost = QuadraticCost(a=2.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        with pytest.raises(NonGlobalValue):
            solve_gaussian(cost, QuadraticTerminal(0.0, 0.0, 0.0),
                           GaussianInitial(x0=0.0, lam=0.5))
