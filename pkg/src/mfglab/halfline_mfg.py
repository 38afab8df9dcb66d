"""Half-line variant: even cost, density m = x exp(-K2 x^2 / 2 + K0) on [0, inf).

Evenness of the cost (b = 0, B_T = 0) makes the value surface Phi = A x^2 + C
symmetric, which enforces the boundary behaviour d_x Phi(0) = m(0) = 0.  The
reduced system is

    A' + 2 A^2 = -a                    (backward, A(T) = A_T)
    C' + delta^2 A = -c                (backward, C(T) = C_T)
    K2' + 4 A K2 + delta^2 K2^2 = 0    (forward,  K2(0) = kappa)

with density mode Q = K2^(-1/2) obeying the Bernoulli law
Q' = 2 A Q + delta^2 / (2 Q) and the conserved quantity
(a + 2 A^2) Q^2 + delta^2 A.

The m(0) = 0 boundary absorbs probability: the raw density loses mass at
rate delta^2 K2 / 2.  The stored K0 is therefore the survival-normalized
log-offset (K0' + 4 A + delta^2 K2 = 0), which keeps the half-line mass
exp(K0)/K2 identically 1; the absorbed fraction is tracked separately in
``survival``.  Normalization shifts ln m by a constant per time, so modes,
K2 and the Bernoulli dynamics are untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .gaussian_mfg import BackwardSolution, closed_form_A, existence_horizon, solve_backward
from .scenario_core import (
    DEFAULT_GRID_POINTS,
    CoefficientPath,
    DegenerateDenominator,
    DegenerateDensity,
    ExistenceReport,
    HalfLineInitial,
    NonGlobalValue,
    OdeTrajectory,
    QuadraticCost,
    QuadraticTerminal,
    RegimeKind,
    Tolerance,
    classify_regime,
    integrate_ode,
    uniform_grid,
)

__all__ = [
    "HalfLineSolution",
    "EquilibriumAudit",
    "solve_halfline",
    "mode_bernoulli",
    "mode_first_integral",
    "first_integral_curve",
    "halfline_mass_curve",
    "closed_form_A_continued",
    "equilibrium_audit",
]

_MASS_TOLERANCE = 1e-8


@dataclass(frozen=True)
class HalfLineSolution:
    """Assembled half-line solution with survival diagnostics.

    ``path`` carries A, C, K2, K0 (B and K1 absent); ``survival`` is the
    probability not yet absorbed at x = 0, starting at 1 and decaying at
    rate delta^2 K2 / 2.
    """

    cost: QuadraticCost
    terminal: QuadraticTerminal
    initial: HalfLineInitial
    path: CoefficientPath
    existence: ExistenceReport
    survival: np.ndarray
    survival_of: Callable

    def __post_init__(self):
        kap = self.initial.kappa
        checks = (
            (self.path.K2[0], kap),
            (self.path.K0[0], math.log(kap)),
            (self.path.A[-1], self.terminal.a_t),
            (self.path.C[-1], self.terminal.c_t),
        )
        for got, want in checks:
            if abs(got - want) > 1e-8 * max(1.0, abs(want)):
                raise ValueError(
                    f"path end conditions inconsistent: got {got!r}, want {want!r}"
                )

    def mode(self, t):
        return 1.0 / np.sqrt(self.path.K2_of(t))

    def density(self, t, x):
        """Survival-normalized density at (t, x); integrates to 1 over [0, inf)."""
        x = np.asarray(x, dtype=float)
        k2 = self.path.K2_of(t)
        k0 = self.path.K0_of(t)
        return x * np.exp(-0.5 * k2 * x * x + k0)


def _require_even(cost: QuadraticCost, terminal: QuadraticTerminal) -> None:
    if cost.b != 0.0 or terminal.b_t != 0.0:
        raise ValueError("half-line problems need an even cost: b = 0 and b_t = 0")


def solve_halfline(
    cost: QuadraticCost,
    terminal: QuadraticTerminal,
    initial: HalfLineInitial,
    *,
    grid=None,
    n_grid: int = DEFAULT_GRID_POINTS,
    tol: Tolerance = Tolerance(),
) -> HalfLineSolution:
    """Solve the half-line system and assemble the coefficient path.

    Raises :class:`NonGlobalValue` when the backward coefficients blow up
    inside [0, T); the mode is still computable there through
    :func:`mode_first_integral` with the continued A branch.
    """
    _require_even(cost, terminal)
    back = solve_backward(cost, terminal, grid=grid, n_grid=n_grid, tol=tol)
    if not back.existence.is_global:
        raise NonGlobalValue(
            f"value coefficients blow up at t* = {back.existence.blowup_time:.6g}"
        )
    T = cost.horizon
    if grid is None:
        grid = uniform_grid(T, n_grid)
    grid = np.asarray(grid, dtype=float)

    d2 = cost.delta**2
    A_of = back.A_of
    kap = initial.kappa

    # state: (K2, K0, ln survival); K0 is the survival-normalized offset
    def field(t, y):
        k2 = y[0]
        A = A_of(t)
        return np.array(
            [
                -4.0 * A * k2 - d2 * k2 * k2,
                -4.0 * A - d2 * k2,
                -0.5 * d2 * k2,
            ]
        )

    traj = integrate_ode(field, [kap, math.log(kap), 0.0], 0.0, T, tol, grid=grid)
    K2 = traj.states[:, 0].copy()
    K0 = traj.states[:, 1].copy()
    logS = traj.states[:, 2]
    if np.any(K2 <= 0.0):
        raise DegenerateDensity("half-line K2 left the positive half-line")
    mass = np.exp(K0) / K2
    worst = float(np.max(np.abs(mass - 1.0)))
    if worst > _MASS_TOLERANCE:
        raise NonGlobalValue(f"half-line mass drifted by {worst:.3e}")

    K2_of = traj.component(0)
    K0_of = traj.component(1)
    logS_of = traj.component(2)

    def survival_of(t):
        return np.exp(logS_of(t))

    path = CoefficientPath(
        times=traj.times.copy(),
        A=np.asarray(back.A_of(traj.times), dtype=float),
        C=np.asarray(back.C_of(traj.times), dtype=float),
        K2=K2,
        K0=K0,
        domain="halfline",
        A_of=back.A_of,
        C_of=back.C_of,
        K2_of=K2_of,
        K0_of=K0_of,
    )
    return HalfLineSolution(
        cost=cost,
        terminal=terminal,
        initial=initial,
        path=path,
        existence=back.existence,
        survival=np.exp(logS),
        survival_of=survival_of,
    )


def halfline_mass_curve(sol: HalfLineSolution) -> np.ndarray:
    """Normalized half-line mass exp(K0)/K2 at every sample (identically 1)."""
    return np.exp(sol.path.K0) / sol.path.K2


def mode_bernoulli(
    cost: QuadraticCost,
    a_of: Callable,
    q0: float,
    *,
    grid=None,
    n_grid: int = DEFAULT_GRID_POINTS,
    tol: Tolerance = Tolerance(),
) -> OdeTrajectory:
    """Integrate the mode law Q' = 2 A Q + delta^2 / (2 Q) from Q(0) = q0 > 0."""
    if q0 <= 0.0:
        raise ValueError("half-line mode must start positive")
    T = cost.horizon
    if grid is None:
        grid = uniform_grid(T, n_grid)
    d2 = cost.delta**2

    def field(t, y):
        q = y[0]
        return np.array([2.0 * a_of(t) * q + 0.5 * d2 / q])

    return integrate_ode(field, [q0], 0.0, T, tol, grid=np.asarray(grid, dtype=float))


def first_integral_curve(cost: QuadraticCost, a_vals, q_vals) -> np.ndarray:
    """(a + 2 A^2) Q^2 + delta^2 A along sampled trajectories."""
    a_vals = np.asarray(a_vals, dtype=float)
    q_vals = np.asarray(q_vals, dtype=float)
    return (cost.a + 2.0 * a_vals**2) * q_vals**2 + cost.delta**2 * a_vals


def mode_first_integral(
    cost: QuadraticCost,
    a_of: Callable,
    q0: float,
    t,
) -> Union[float, np.ndarray]:
    """Invert the conserved quantity for Q(t) given Q(0) = q0.

    Stays finite where A diverges (Q tends to zero there), but degenerates
    where a + 2 A(t)^2 vanishes, i.e. at the subcritical equilibrium
    A = -k; that case is reported, not extrapolated.
    """
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    a0 = np.asarray(a_of(0.0), dtype=float).item()
    const = (cost.a + 2.0 * a0 * a0) * q0 * q0 + cost.delta**2 * a0
    a_t = np.asarray(a_of(t_arr), dtype=float)
    den = cost.a + 2.0 * a_t * a_t
    # near the subcritical equilibrium A = -k the denominator vanishes and
    # the inversion amplifies any error in A by 1/den; refuse well before
    # that swamps the 1e-6 agreement with the direct mode integration
    scale = np.maximum(np.abs(cost.a), 2.0 * a_t * a_t)
    bad = np.abs(den) <= 1e-4 * np.maximum(scale, 1.0)
    if np.any(bad):
        raise DegenerateDenominator(
            "a + 2 A(t)^2 vanishes at the queried time; the conserved quantity "
            "cannot be inverted there"
        )
    q_sq = (const - cost.delta**2 * a_t) / den
    floor = -1e-10 * max(q0 * q0, 1.0)
    if np.any(q_sq < floor):
        raise DegenerateDensity("mode ansatz does not extend past the value blow-up")
    out = np.sqrt(np.maximum(q_sq, 0.0))
    return float(out[0]) if scalar else out


def closed_form_A_continued(cost: QuadraticCost, a_t: float, t) -> np.ndarray:
    """Closed-form A evaluated without existence clipping.

    Past a blow-up time the expression continues analytically onto the other
    branch; the half-line mode inherits a finite limit (zero) through the
    conserved quantity even though the value surface does not exist there.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    T = cost.horizon
    regime = classify_regime(cost)
    if regime.kind is RegimeKind.SUBCRITICAL:
        k = regime.k_minus
        p = a_t - k
        s = a_t + k
        decay = np.exp(-4.0 * k * (T - t_arr))
        with np.errstate(divide="ignore"):
            return -k * (p + s * decay) / (p - s * decay)
    if regime.kind is RegimeKind.CRITICAL:
        with np.errstate(divide="ignore"):
            return a_t / (1.0 + 2.0 * a_t * (t_arr - T))
    k = regime.k_plus
    psi = np.arctan(a_t / k) + math.sqrt(2.0 * cost.a) * (T - t_arr)
    return k * np.tan(psi)


# ---------------------------------------------------------------------------
# equilibrium constant audit


@dataclass(frozen=True)
class EquilibriumAudit:
    """Long-horizon plateau of the half-line mode versus candidate constants.

    Three mutually inconsistent printed constants circulate for the
    subcritical equilibrium; the stationary point of the mode law gives
    delta / (2 sqrt(k)).  ``winner`` names every candidate matching the
    measured plateau within ``tolerance`` (coinciding candidates are all
    listed).
    """

    measured: float
    candidates: dict
    winner: tuple
    tolerance: float = 1e-3

    def summary_lines(self) -> list:
        lines = [f"halfline_equilibrium_measured={self.measured!r}"]
        for label, value in self.candidates.items():
            mark = "matches" if label in self.winner else "conflicts"
            lines.append(f"halfline_equilibrium_candidate[{label}]={value!r} ({mark})")
        lines.append("halfline_equilibrium_winner=" + (",".join(self.winner) or "none"))
        return lines


def equilibrium_audit(
    cost: QuadraticCost,
    terminal: QuadraticTerminal,
    initial: HalfLineInitial,
    *,
    tol: Tolerance = Tolerance(),
    tolerance: float = 1e-3,
) -> EquilibriumAudit:
    """Measure the long-time mode plateau and rank the candidate constants.

    Needs a subcritical cost (a < 0) with a horizon long enough for the
    boundary layers to clear; the plateau is read at t = T/2.
    """
    regime = classify_regime(cost)
    if regime.kind is not RegimeKind.SUBCRITICAL:
        raise ValueError("equilibrium audit needs a < 0")
    _require_even(cost, terminal)
    report = existence_horizon(cost, terminal.a_t)
    if not report.is_global:
        raise NonGlobalValue("equilibrium audit needs a globally solvable scenario")
    k = regime.k_minus
    back = solve_backward(cost, terminal, tol=tol)
    q = mode_bernoulli(cost, back.A_of, initial.mode, tol=tol)
    measured = float(q.component(0)(0.5 * cost.horizon))
    candidates = {
        "stationary delta/(2*sqrt(k))": cost.delta / (2.0 * math.sqrt(k)),
        "printed delta/(4*sqrt(k))": cost.delta / (4.0 * math.sqrt(k)),
        "printed delta/sqrt(-8a)": cost.delta / math.sqrt(-8.0 * cost.a),
    }
    winner = tuple(
        label for label, v in candidates.items() if abs(v - measured) <= tolerance
    )
    return EquilibriumAudit(
        measured=measured,
        candidates=candidates,
        winner=winner,
        tolerance=tolerance,
    )
