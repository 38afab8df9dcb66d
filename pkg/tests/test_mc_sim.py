"""Ensemble oracle: determinism, agreement, kernel density mode."""

import math

import numpy as np
import pytest

from conftest import AUDIT_COST, AUDIT_INITIAL, AUDIT_TERMINAL
from mfglab import (
    GaussianInitial,
    HalfLineInitial,
    NonGlobalValue,
    QuadraticCost,
    QuadraticTerminal,
    TooFewSamples,
    kde_mode,
    mode_ode,
    simulate_ensemble,
    simulate_halfline_ensemble,
    solve_backward,
)
from mfglab.mc_sim import EnsembleStats, kde_bandwidth

N_SMALL = 20_000


def _frozen_backward(horizon=1.0, delta=1e-12):
    cost = QuadraticCost(a=0.0, b=0.0, c=0.0, delta=delta, horizon=horizon)
    return solve_backward(cost, QuadraticTerminal(0.0, 0.0, 0.0))


class TestKdeMode:
    def test_point_mass(self):
        assert kde_mode(np.full(2000, 3.25)) == 3.25

    def test_standard_normal_seeded(self):
        rng = np.random.Generator(np.random.Philox(key=np.array([9, 0], dtype=np.uint64)))
        z = rng.standard_normal(100_000)
        assert abs(kde_mode(z)) <= 0.05

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            kde_mode(np.zeros(999))

    def test_bandwidth_normal_reference(self):
        rng = np.random.default_rng(3)
        z = 2.0 * rng.standard_normal(10_000)
        h = kde_bandwidth(z)
        expected = (4.0 / (3.0 * z.size)) ** 0.2 * np.std(z, ddof=1)
        assert h == pytest.approx(expected, rel=1e-12)


class TestSimulateEnsemble:
    def test_frozen_dynamics(self):
        back = _frozen_backward()
        init = GaussianInitial(x0=0.2, lam=0.5)
        stats = simulate_ensemble(back, init, N_SMALL, 1.0 / 200, seed=5)
        # no drift, vanishing noise: every per-time curve equals its t=0 value
        assert np.max(np.abs(stats.mean - stats.mean[0])) < 1e-9
        assert np.max(np.abs(stats.variance - stats.variance[0])) < 1e-9
        assert abs(stats.mean[0] - 0.2) <= 3.0 * stats.stderr_mean[0]
        assert stats.variance[0] == pytest.approx(init.variance, rel=0.05)

    def test_agreement_with_density(self, audit_backward, audit_solution):
        stats = simulate_ensemble(audit_backward, AUDIT_INITIAL, N_SMALL, 0.002, seed=2024)
        q_of = mode_ode(audit_backward, 0.2).component(0)
        q_ref = np.asarray(q_of(stats.times))
        assert np.max(np.abs(stats.mean - q_ref) / stats.stderr_mean) <= 3.0
        var_ref = -1.0 / (2.0 * np.asarray(audit_solution.path.K2_of(stats.times)))
        assert np.max(np.abs(stats.variance - var_ref) / var_ref) <= 0.05

    def test_bitwise_determinism(self, audit_backward):
        a = simulate_ensemble(audit_backward, AUDIT_INITIAL, N_SMALL, 0.002, seed=77)
        b = simulate_ensemble(audit_backward, AUDIT_INITIAL, N_SMALL, 0.002, seed=77)
        for field in ("times", "mean", "variance", "stderr_mean", "mode_kde"):
            assert np.array_equal(getattr(a, field), getattr(b, field))
        c = simulate_ensemble(audit_backward, AUDIT_INITIAL, N_SMALL, 0.002, seed=78)
        assert not np.array_equal(a.mean, c.mean)

    def test_gaussian_closure_skewness(self, audit_backward):
        stats = simulate_ensemble(
            audit_backward, AUDIT_INITIAL, N_SMALL, 0.002, seed=11, keep_samples=True
        )
        bound = 4.0 * math.sqrt(6.0 / stats.n_agents)
        for row in stats.samples[:: len(stats.samples) // 7]:
            centered = row - row.mean()
            skew = np.mean(centered**3) / np.std(row) ** 3
            assert abs(skew) <= bound

    def test_mean_mode_coincide(self, audit_backward):
        stats = simulate_ensemble(audit_backward, AUDIT_INITIAL, N_SMALL, 0.002, seed=2024)
        h = (4.0 / (3.0 * stats.n_agents)) ** 0.2 * np.sqrt(stats.variance)
        assert np.max(np.abs(stats.mean - stats.mode_kde) / h) <= 3.0

    def test_parameter_validation(self, audit_backward):
        with pytest.raises(ValueError):
            simulate_ensemble(audit_backward, AUDIT_INITIAL, 999, 0.002, seed=1)
        with pytest.raises(ValueError):
            simulate_ensemble(audit_backward, AUDIT_INITIAL, N_SMALL, 0.5, seed=1)

    def test_needs_global_value(self):
        cost = QuadraticCost(a=2.0, b=0.0, c=0.0, delta=0.2, horizon=1.0)
        back = solve_backward(cost, QuadraticTerminal(0.0, 0.0, 0.0))
        with pytest.raises(NonGlobalValue):
            simulate_ensemble(back, AUDIT_INITIAL, N_SMALL, 0.002, seed=1)

    def test_stats_invariants(self, audit_backward):
        stats = simulate_ensemble(audit_backward, AUDIT_INITIAL, N_SMALL, 0.002, seed=4)
        assert np.all(stats.variance >= 0.0)
        assert np.array_equal(
            stats.stderr_mean, np.sqrt(stats.variance / stats.n_agents)
        )
        with pytest.raises(ValueError):
            EnsembleStats(
                times=stats.times,
                mean=stats.mean,
                variance=stats.variance,
                stderr_mean=stats.stderr_mean * 2.0,
                mode_kde=stats.mode_kde,
                n_agents=stats.n_agents,
                seed=stats.seed,
                dt=stats.dt,
            )


class TestHalflineEnsemble:
    def test_folded_paths_stay_positive(self, half_backward):
        init = HalfLineInitial(kappa=4.0)
        stats = simulate_halfline_ensemble(
            half_backward, init, N_SMALL, 4.0 / 1000, seed=6, keep_samples=True
        )
        assert np.all(stats.samples >= 0.0)
        # initial cross-section follows the half-line density: mean of the
        # Rayleigh-type law is sqrt(pi / (2 kappa))
        expected0 = math.sqrt(math.pi / (2.0 * 4.0))
        assert stats.mean[0] == pytest.approx(expected0, rel=0.02)

    def test_even_cost_required(self, audit_backward):
        cost = QuadraticCost(a=-2.0, b=1.0, c=0.0, delta=0.5, horizon=4.0)
        back = solve_backward(cost, QuadraticTerminal(0.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            simulate_halfline_ensemble(back, HalfLineInitial(kappa=4.0), N_SMALL, 0.004, seed=1)
