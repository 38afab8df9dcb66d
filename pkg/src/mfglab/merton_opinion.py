"""Investor-opinion scenarios mapped onto the quadratic solver stack.

A crowd of investors each runs the classic risky/risk-free portfolio
problem under HARA utility v^q / q (log utility as the q -> 0 limit) with
privately believed asset parameters.  Their believed drift (full line) or
believed inverse volatility xi = 1/sigma (half line) diffuses under a
reward for capital growth (weight beta) and a penalty for straying from
the true parameter (weight gamma).  Both problems reduce exactly to
quadratic-cost instances of the solvers in this package:

    drift opinion:  a = beta R - gamma, b = 2 (gamma mu_bar - beta R r),
                    c = beta r + beta R r^2 - gamma mu_bar^2,
                    terminal A_T = R, B_T = -2 R r, C_T = r + R r^2
    vol opinion:    a = beta P - gamma, c = beta r,
                    terminal A_T = P, C_T = r, kappa = 1 / xi0^2

with risk coefficients R = (1 - 2q) / (2 sigma^2 (q-1)^2) and
P = (1 - 2q) (mu - r)^2 / (2 (q-1)^2).

Qualitatively: a < 0 means the population mode settles (an opinion forms),
a > 0 means it oscillates forever at angular frequency sqrt(2a), and the
value function may stop existing at a finite horizon even while the mode
stays computable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .gaussian_mfg import existence_horizon, mode_ode, solve_backward
from .scenario_core import (
    GaussianInitial,
    HalfLineInitial,
    QuadraticCost,
    QuadraticTerminal,
    RegimeKind,
    SolverError,
    Tolerance,
    classify_regime,
)

__all__ = [
    "NotConvergent",
    "InvestorParams",
    "DriftOpinionScenario",
    "VolOpinionScenario",
    "OutcomeKind",
    "OutcomeReport",
    "optimal_fraction",
    "growth_rate",
    "risk_coefficient_R",
    "risk_coefficient_P",
    "build_drift_problem",
    "build_vol_problem",
    "drift_opinion_limit",
    "vol_opinion_limit",
    "classify_outcome",
]


class NotConvergent(SolverError):
    """The opinion mode has no long-horizon limit for these weights."""


def _check_q(q: float) -> None:
    if not (q < 1.0):
        raise ValueError(f"HARA exponent must satisfy q < 1, got {q!r}")


@dataclass(frozen=True)
class InvestorParams:
    """One investor's believed asset parameters and risk attitude.

    ``q`` is the HARA exponent; q = 0 is accepted and flagged as the
    logarithmic-utility limit (every formula below is continuous there).
    """

    mu: float
    sigma: float
    r: float
    q: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        _check_q(self.q)

    @property
    def log_utility(self) -> bool:
        return self.q == 0.0


@dataclass(frozen=True)
class DriftOpinionScenario:
    """Population forming an opinion about the drift of the risky asset."""

    mu_bar: float
    sigma: float
    r: float
    q: float
    beta: float
    gamma: float
    delta: float
    horizon: float
    mu0: float
    lam: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        _check_q(self.q)
        if self.beta < 0.0 or self.gamma < 0.0:
            raise ValueError("beta and gamma must be non-negative")
        if self.delta <= 0.0 or self.horizon <= 0.0 or self.lam <= 0.0:
            raise ValueError("delta, horizon and lam must be positive")


@dataclass(frozen=True)
class VolOpinionScenario:
    """Population forming an opinion about xi = 1/sigma of the risky asset."""

    mu: float
    r: float
    q: float
    beta: float
    gamma: float
    delta: float
    horizon: float
    xi0: float

    def __post_init__(self):
        _check_q(self.q)
        if self.beta < 0.0 or self.gamma < 0.0:
            raise ValueError("beta and gamma must be non-negative")
        if self.delta <= 0.0 or self.horizon <= 0.0 or self.xi0 <= 0.0:
            raise ValueError("delta, horizon and xi0 must be positive")

    @property
    def kappa(self) -> float:
        return 1.0 / (self.xi0 * self.xi0)


class OutcomeKind(str, Enum):
    OPINION_FORMS = "opinion_forms"
    OSCILLATES = "oscillates"
    DRIFTS = "drifts"
    NO_GLOBAL_VALUE = "no_global_value"


@dataclass(frozen=True)
class OutcomeReport:
    """Qualitative fate of the opinion mode plus value-function existence.

    ``kind`` is ``no_global_value`` when the backward value coefficients
    blow up inside the horizon; the mode payload (limit or frequency and
    center) is still filled in, since the mode outlives the value surface.
    ``drifts`` covers the borderline a = 0 case, where the mode deviates
    without bound instead of settling or oscillating.
    """

    kind: OutcomeKind
    limit: Optional[float] = None
    angular_frequency: Optional[float] = None
    center: Optional[float] = None
    blowup_time: Optional[float] = None
    audited_limit: Optional[float] = None

    def __post_init__(self):
        if self.kind is OutcomeKind.OSCILLATES and self.angular_frequency is None:
            raise ValueError("oscillating outcome needs its angular frequency")
        if self.kind is OutcomeKind.OPINION_FORMS and self.limit is None:
            raise ValueError("opinion-forming outcome needs its limit")
        if self.kind is OutcomeKind.NO_GLOBAL_VALUE and self.blowup_time is None:
            raise ValueError("no-global-value outcome needs the blow-up time")


# ---------------------------------------------------------------------------
# individual-strategy formulas


def optimal_fraction(p: InvestorParams) -> float:
    """Optimal share of wealth in the risky asset, (mu - r) / (sigma^2 (1 - q))."""
    return (p.mu - p.r) / (p.sigma**2 * (1.0 - p.q))


def growth_rate(p: InvestorParams) -> float:
    """Expected log-capital growth rate under the optimal fraction.

    Equals r + R (mu - r)^2; strictly below r whenever q > 1/2 and mu != r,
    i.e. very risk-prone strategies cost expected growth.
    """
    return p.r + risk_coefficient_R(p.sigma, p.q) * (p.mu - p.r) ** 2


def risk_coefficient_R(sigma: float, q: float) -> float:
    """(1 - 2q) / (2 sigma^2 (q - 1)^2); same sign as 1 - 2q, vanishes as sigma grows."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    _check_q(q)
    return (1.0 - 2.0 * q) / (2.0 * sigma**2 * (q - 1.0) ** 2)


def risk_coefficient_P(mu: float, r: float, q: float) -> float:
    """(1 - 2q) (mu - r)^2 / (2 (q - 1)^2); same sign as 1 - 2q."""
    _check_q(q)
    return (1.0 - 2.0 * q) * (mu - r) ** 2 / (2.0 * (q - 1.0) ** 2)


# ---------------------------------------------------------------------------
# scenario builders


def build_drift_problem(
    s: DriftOpinionScenario,
) -> tuple[QuadraticCost, QuadraticTerminal, GaussianInitial]:
    """Map a drift-opinion scenario onto a full-line quadratic instance."""
    R = risk_coefficient_R(s.sigma, s.q)
    cost = QuadraticCost(
        a=s.beta * R - s.gamma,
        b=2.0 * (s.gamma * s.mu_bar - s.beta * R * s.r),
        c=s.beta * s.r + s.beta * R * s.r**2 - s.gamma * s.mu_bar**2,
        delta=s.delta,
        horizon=s.horizon,
    )
    terminal = QuadraticTerminal(a_t=R, b_t=-2.0 * R * s.r, c_t=s.r + R * s.r**2)
    initial = GaussianInitial(x0=s.mu0, lam=s.lam)
    return cost, terminal, initial


def build_vol_problem(
    s: VolOpinionScenario,
) -> tuple[QuadraticCost, QuadraticTerminal, HalfLineInitial]:
    """Map a volatility-opinion scenario onto a half-line quadratic instance."""
    P = risk_coefficient_P(s.mu, s.r, s.q)
    cost = QuadraticCost(
        a=s.beta * P - s.gamma,
        b=0.0,
        c=s.beta * s.r,
        delta=s.delta,
        horizon=s.horizon,
    )
    terminal = QuadraticTerminal(a_t=P, b_t=0.0, c_t=s.r)
    initial = HalfLineInitial(kappa=s.kappa)
    return cost, terminal, initial


def drift_opinion_limit(s: DriftOpinionScenario) -> float:
    """Long-horizon limit (r beta R - gamma mu_bar) / (beta R - gamma).

    Only defined in the settling regime beta R - gamma < 0; collapses to r
    when gamma = 0 and to mu_bar when beta = 0.
    """
    R = risk_coefficient_R(s.sigma, s.q)
    a = s.beta * R - s.gamma
    if a >= 0.0:
        raise NotConvergent(f"mode does not settle: beta*R - gamma = {a!r} >= 0")
    return (s.r * s.beta * R - s.gamma * s.mu_bar) / a


def vol_opinion_limit(s: VolOpinionScenario) -> float:
    """Long-horizon limit of the inverse-volatility mode, delta / (2 sqrt(k)).

    ``k`` is the subcritical rate sqrt(-a/2); this is the audited
    stationary value of the half-line mode law (circulating printed
    constants disagree, see :func:`mfglab.halfline_mfg.equilibrium_audit`).
    """
    P = risk_coefficient_P(s.mu, s.r, s.q)
    a = s.beta * P - s.gamma
    if a >= 0.0:
        raise NotConvergent(f"mode does not settle: beta*P - gamma = {a!r} >= 0")
    k = math.sqrt(-a / 2.0)
    return s.delta / (2.0 * math.sqrt(k))


def classify_outcome(
    cost: QuadraticCost,
    terminal: QuadraticTerminal,
    horizon: Optional[float] = None,
    *,
    halfline: bool = False,
    audit_limit: bool = False,
    tol: Tolerance = Tolerance(),
) -> OutcomeReport:
    """Classify the long-run fate of the opinion mode for one instance.

    ``horizon`` overrides the one carried by ``cost``.  With
    ``audit_limit`` set, a settling (full-line, global) scenario is
    re-solved on a long horizon and the measured plateau stored in
    ``audited_limit``.
    """
    if horizon is not None:
        cost = replace(cost, horizon=float(horizon))
    regime = classify_regime(cost)
    existence = existence_horizon(cost, terminal.a_t)

    limit = None
    frequency = None
    center = None
    if regime.kind is RegimeKind.SUBCRITICAL:
        if halfline:
            limit = cost.delta / (2.0 * math.sqrt(regime.k_minus))
        else:
            limit = -cost.b / (2.0 * cost.a)
    elif regime.kind is RegimeKind.SUPERCRITICAL:
        frequency = math.sqrt(2.0 * cost.a)
        center = -cost.b / (2.0 * cost.a)

    audited = None
    if audit_limit and limit is not None and not halfline and existence.is_global:
        k = regime.k_minus
        # horizon long enough that both boundary layers decay below 1e-6
        T_long = max(cost.horizon, 14.0 / k)
        long_cost = replace(cost, horizon=T_long)
        back = solve_backward(long_cost, terminal, tol=tol)
        q = mode_ode(back, limit * 0.5, tol=tol)  # any start; plateau forgets it
        audited = float(q.component(0)(0.5 * T_long))

    if not existence.is_global:
        return OutcomeReport(
            kind=OutcomeKind.NO_GLOBAL_VALUE,
            limit=limit,
            angular_frequency=frequency,
            center=center,
            blowup_time=existence.blowup_time,
            audited_limit=audited,
        )
    if regime.kind is RegimeKind.SUBCRITICAL:
        return OutcomeReport(
            kind=OutcomeKind.OPINION_FORMS, limit=limit, audited_limit=audited
        )
    if regime.kind is RegimeKind.SUPERCRITICAL:
        return OutcomeReport(
            kind=OutcomeKind.OSCILLATES, angular_frequency=frequency, center=center
        )
    return OutcomeReport(kind=OutcomeKind.DRIFTS)
