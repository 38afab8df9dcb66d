"""Shared fixtures and numerical helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from mfglab import (
    GaussianInitial,
    HalfLineInitial,
    QuadraticCost,
    QuadraticTerminal,
    solve_backward,
    solve_gaussian,
    solve_halfline,
)

# the cross-oracle audit scenario used throughout: settling full-line
# instance with zero terminal data and an off-center initial density
AUDIT_COST = QuadraticCost(a=-2.0, b=0.0, c=0.0, delta=0.2, horizon=2.0)
AUDIT_TERMINAL = QuadraticTerminal(0.0, 0.0, 0.0)
AUDIT_INITIAL = GaussianInitial(x0=0.2, lam=0.5)

# a drift-laden variant: asymmetric cost and terminal data move the mode
DRIFT_COST = QuadraticCost(a=-1.5, b=1.2, c=0.4, delta=0.3, horizon=1.5)
DRIFT_TERMINAL = QuadraticTerminal(0.1, -0.2, 0.3)
DRIFT_INITIAL = GaussianInitial(x0=-0.3, lam=0.8)

HALF_COST = QuadraticCost(a=-2.0, b=0.0, c=0.0, delta=0.5, horizon=4.0)
HALF_TERMINAL = QuadraticTerminal(0.0, 0.0, 0.0)
HALF_INITIAL = HalfLineInitial(kappa=4.0)


def central_residual(times: np.ndarray, values: np.ndarray, rhs: np.ndarray) -> float:
    """Sup-norm of (dy/dt - rhs) with dy/dt by central differences."""
    h = times[1] - times[0]
    deriv = (values[2:] - values[:-2]) / (2.0 * h)
    return float(np.max(np.abs(deriv - rhs[1:-1])))


@pytest.fixture(scope="session")
def audit_solution():
    return solve_gaussian(AUDIT_COST, AUDIT_TERMINAL, AUDIT_INITIAL)


@pytest.fixture(scope="session")
def audit_backward():
    return solve_backward(AUDIT_COST, AUDIT_TERMINAL)


@pytest.fixture(scope="session")
def drift_solution():
    return solve_gaussian(DRIFT_COST, DRIFT_TERMINAL, DRIFT_INITIAL)


@pytest.fixture(scope="session")
def drift_backward():
    return solve_backward(DRIFT_COST, DRIFT_TERMINAL)


@pytest.fixture(scope="session")
def half_solution():
    return solve_halfline(HALF_COST, HALF_TERMINAL, HALF_INITIAL)


@pytest.fixture(scope="session")
def half_backward():
    return solve_backward(HALF_COST, HALF_TERMINAL)
