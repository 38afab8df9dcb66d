"""Shared scenario data model and the guarded ODE integration backbone.

Every solver in this package reduces its work to backward/forward
integration of small quadratically nonlinear ODE systems.  This module
holds the immutable problem-description types plus one adaptive explicit
Runge-Kutta wrapper providing dense output, backward-time integration and
finite-time blow-up detection.  Blow-up of the backward value coefficients
is a genuine feature of these systems, so the guard reports it as data
instead of crashing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "SolverError",
    "BlowUpDetected",
    "StepUnderflow",
    "NonGlobalValue",
    "DegenerateDensity",
    "OutsideExistenceInterval",
    "FormulaPole",
    "DegenerateDenominator",
    "Tolerance",
    "OdeTrajectory",
    "integrate_ode",
    "QuadraticCost",
    "QuadraticTerminal",
    "GaussianInitial",
    "HalfLineInitial",
    "RegimeKind",
    "Regime",
    "classify_regime",
    "ExistenceReport",
    "CoefficientPath",
    "uniform_grid",
    "DEFAULT_GUARD",
    "DEFAULT_GRID_POINTS",
]

DEFAULT_GUARD = 1.0e8
DEFAULT_GRID_POINTS = 1001


# ---------------------------------------------------------------------------
# errors


class SolverError(Exception):
    """Base class for numerical failures raised by this package."""


class BlowUpDetected(SolverError):
    """State norm crossed the guard threshold at finite time ``t_star``.

    Carries the partial trajectory covering the integrated subinterval, so
    callers can keep the maximal solution instead of discarding the run.
    """

    def __init__(self, t_star: float, trajectory: "OdeTrajectory | None" = None):
        super().__init__(f"state norm crossed guard threshold at t = {t_star:.9g}")
        self.t_star = float(t_star)
        self.trajectory = trajectory


class StepUnderflow(SolverError):
    """The adaptive step collapsed below the resolvable fraction of the span."""


class NonGlobalValue(SolverError):
    """An operation needing coefficients on all of [0, T] got a partial path."""


class DegenerateDensity(SolverError):
    """Density curvature coefficient has the wrong sign; no interior maximum."""


class OutsideExistenceInterval(SolverError):
    """Closed-form coefficient queried outside its interval of existence."""


class FormulaPole(SolverError):
    """A closed-form expression has a vanishing denominator at this argument."""


class DegenerateDenominator(SolverError):
    """First-integral inversion attempted where its denominator vanishes."""


# ---------------------------------------------------------------------------
# problem-description types


def _require_finite(obj, *names: str) -> None:
    for name in names:
        v = getattr(obj, name)
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class QuadraticCost:
    """Running cost g(x) = a x^2 + b x + c with noise amplitude and horizon.

    ``a`` is the curvature deciding the qualitative regime, ``delta`` the
    diffusion amplitude of the controlled state, ``horizon`` the terminal
    time of the planning interval.
    """

    a: float
    b: float
    c: float
    delta: float
    horizon: float

    def __post_init__(self):
        _require_finite(self, "a", "b", "c", "delta", "horizon")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        if self.horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")

    def g(self, x):
        """Evaluate the running cost (vectorized)."""
        x = np.asarray(x, dtype=float)
        return self.a * x * x + self.b * x + self.c


@dataclass(frozen=True)
class QuadraticTerminal:
    """Terminal value K(x) = a_t x^2 + b_t x + c_t."""

    a_t: float
    b_t: float
    c_t: float

    def __post_init__(self):
        _require_finite(self, "a_t", "b_t", "c_t")

    def k(self, x):
        x = np.asarray(x, dtype=float)
        return self.a_t * x * x + self.b_t * x + self.c_t


@dataclass(frozen=True)
class GaussianInitial:
    """Initial density M exp(-(x - x0)^2 / lam) on the full line.

    The normalization M = 1/sqrt(pi*lam) makes the initial mass exactly 1;
    it is derived when not supplied and cross-checked when it is.
    """

    x0: float
    lam: float
    norm: Optional[float] = None

    def __post_init__(self):
        _require_finite(self, "x0", "lam")
        if self.lam <= 0.0:
            raise ValueError(f"lam must be positive, got {self.lam!r}")
        m = 1.0 / math.sqrt(math.pi * self.lam)
        if self.norm is None:
            object.__setattr__(self, "norm", m)
        elif not math.isclose(self.norm, m, rel_tol=1e-12, abs_tol=0.0):
            raise ValueError(f"norm must equal 1/sqrt(pi*lam) = {m!r}, got {self.norm!r}")

    @property
    def variance(self) -> float:
        return self.lam / 2.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return self.norm * np.exp(-((x - self.x0) ** 2) / self.lam)

    def log_coefficients(self) -> tuple[float, float, float]:
        """(K2, K1, K0) of ln m0 = K2 x^2 + K1 x + K0.

        Expanding -(x - x0)^2 / lam gives K1 = +2 x0 / lam, so the density
        mode -K1/(2 K2) starts exactly at x0.
        """
        k2 = -1.0 / self.lam
        k1 = 2.0 * self.x0 / self.lam
        k0 = -self.x0 * self.x0 / self.lam + math.log(self.norm)
        return k2, k1, k0


@dataclass(frozen=True)
class HalfLineInitial:
    """Initial density M x exp(-kappa x^2 / 2) on [0, inf); M = kappa gives unit mass."""

    kappa: float

    def __post_init__(self):
        _require_finite(self, "kappa")
        if self.kappa <= 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")

    @property
    def norm(self) -> float:
        return self.kappa

    @property
    def mode(self) -> float:
        return 1.0 / math.sqrt(self.kappa)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return self.kappa * x * np.exp(-0.5 * self.kappa * x * x)


class RegimeKind(str, Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class Regime:
    """Sign trichotomy of the cost curvature with the matching decay/oscillation rate."""

    kind: RegimeKind
    k_minus: Optional[float] = None
    k_plus: Optional[float] = None

    def __post_init__(self):
        if self.kind is RegimeKind.SUBCRITICAL:
            ok = self.k_minus is not None and self.k_minus > 0.0 and self.k_plus is None
        elif self.kind is RegimeKind.SUPERCRITICAL:
            ok = self.k_plus is not None and self.k_plus > 0.0 and self.k_minus is None
        else:
            ok = self.k_minus is None and self.k_plus is None
        if not ok:
            raise ValueError(f"rate fields inconsistent with regime kind {self.kind}")


def classify_regime(cost: QuadraticCost) -> Regime:
    """Exact sign trichotomy on the curvature ``a`` of the running cost."""
    a = cost.a
    if a < 0.0:
        return Regime(RegimeKind.SUBCRITICAL, k_minus=math.sqrt(-a / 2.0))
    if a > 0.0:
        return Regime(RegimeKind.SUPERCRITICAL, k_plus=math.sqrt(a / 2.0))
    return Regime(RegimeKind.CRITICAL)


@dataclass(frozen=True)
class ExistenceReport:
    """Whether the backward value coefficients extend over all of [0, T]."""

    regime: Regime
    is_global: bool
    blowup_time: Optional[float] = None

    def __post_init__(self):
        if self.is_global != (self.blowup_time is None):
            raise ValueError("is_global must hold exactly when blowup_time is absent")
        if self.blowup_time is not None and self.blowup_time < 0.0:
            raise ValueError("blowup_time must lie in [0, T)")


@dataclass(frozen=True)
class CoefficientPath:
    """Sampled value coefficients (A, B, C) and log-density coefficients (K2, K1, K0).

    ``B`` and ``K1`` are ``None`` for half-line solutions, where the linear
    terms are absent by evenness.  The ``*_of`` callables evaluate the
    underlying dense interpolants at arbitrary times in [0, T]; on the half
    line the density convention is m = x exp(-K2 x^2 / 2 + K0) with K2 > 0,
    on the full line m = exp(K2 x^2 + K1 x + K0) with K2 < 0.
    """

    times: np.ndarray
    A: np.ndarray
    C: np.ndarray
    K2: np.ndarray
    K0: np.ndarray
    B: Optional[np.ndarray] = None
    K1: Optional[np.ndarray] = None
    domain: str = "line"
    A_of: Optional[Callable] = field(default=None, repr=False)
    B_of: Optional[Callable] = field(default=None, repr=False)
    C_of: Optional[Callable] = field(default=None, repr=False)
    K2_of: Optional[Callable] = field(default=None, repr=False)
    K1_of: Optional[Callable] = field(default=None, repr=False)
    K0_of: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("times must be a 1-D grid with at least two samples")
        if not np.all(np.diff(t) > 0.0):
            raise ValueError("times must be strictly increasing")
        if abs(t[0]) > 1e-12:
            raise ValueError("times must start at 0")
        if self.domain not in ("line", "halfline"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.domain == "line":
            if np.any(np.asarray(self.K2) >= 0.0):
                raise ValueError("full-line K2 must stay negative at every sample")
        else:
            if np.any(np.asarray(self.K2) <= 0.0):
                raise ValueError("half-line K2 must stay positive at every sample")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])


def uniform_grid(horizon: float, n: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Uniform output grid on [0, horizon] with ``n`` samples."""
    if n < 2:
        raise ValueError("grid needs at least two points")
    return np.linspace(0.0, float(horizon), int(n))


# ---------------------------------------------------------------------------
# guarded adaptive integration


@dataclass(frozen=True)
class Tolerance:
    """Local-error control; each accepted step keeps the error below rtol*|y| + atol."""

    rtol: float = 1e-11
    atol: float = 1e-13

    def __post_init__(self):
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise ValueError("tolerances must be positive")

    def scaled(self, factor: float) -> "Tolerance":
        return Tolerance(self.rtol * factor, self.atol * factor)


@dataclass(frozen=True)
class OdeTrajectory:
    """Result of one guarded integration run.

    ``times``/``states`` hold the requested output samples that the run
    covered (in integration order); calling the trajectory evaluates the
    dense interpolant at arbitrary times inside [t_lo, t_hi].
    """

    times: np.ndarray
    states: np.ndarray
    t_start: float
    t_reached: float
    dense: Callable = field(repr=False)

    @property
    def t_lo(self) -> float:
        return min(self.t_start, self.t_reached)

    @property
    def t_hi(self) -> float:
        return max(self.t_start, self.t_reached)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.dense(t)
        return np.asarray(out).T if t.ndim else np.asarray(out)

    def component(self, i: int) -> Callable:
        """Scalar accessor for one state component, vectorized over time."""

        def accessor(t):
            t_arr = np.asarray(t, dtype=float)
            vals = np.asarray(self.dense(t_arr))
            return vals[i] if t_arr.ndim else float(vals[i])

        return accessor


def _guard_event(guard: float) -> Callable:
    def crossed(t, y):
        return float(np.max(np.abs(y)) - guard)

    crossed.terminal = True
    crossed.direction = 1.0
    return crossed


def integrate_ode(
    field_fn: Callable,
    y0,
    t_start: float,
    t_end: float,
    tol: Tolerance = Tolerance(),
    *,
    grid=None,
    n_grid: int = DEFAULT_GRID_POINTS,
    guard: float = DEFAULT_GUARD,
) -> OdeTrajectory:
    """Integrate ``y' = field_fn(t, y)`` from ``t_start`` to ``t_end``.

    Either time direction is allowed (``t_start > t_end`` integrates
    backward).  The stepper is an adaptive explicit Runge-Kutta 5(4) pair
    with quartic dense output; results are additionally sampled on ``grid``
    (default: uniform with ``n_grid`` points spanning the requested range).

    Raises
    ------
    BlowUpDetected
        When ``max|y|`` crosses ``guard``.  The crossing time is localized
        by root refinement on the dense output (well below 1e-6 absolute
        error) and the exception carries the partial trajectory on the
        covered subinterval.
    StepUnderflow
        When the required step falls beneath the floating-point spacing of
        the time variable, i.e. the field cannot be resolved.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    t_start = float(t_start)
    t_end = float(t_end)
    if t_start == t_end:
        raise ValueError("t_start and t_end must differ")
    if np.max(np.abs(y0)) >= guard:
        raise BlowUpDetected(t_start, None)
    if grid is None:
        grid = np.linspace(t_start, t_end, int(n_grid))
    grid = np.asarray(grid, dtype=float)

    res = solve_ivp(
        field_fn,
        (t_start, t_end),
        y0,
        method="RK45",
        rtol=tol.rtol,
        atol=tol.atol,
        dense_output=True,
        t_eval=grid,
        events=_guard_event(guard),
    )
    if res.status == -1:
        raise StepUnderflow(res.message)
    if res.status == 1:
        t_star = float(res.t_events[0][0])
        partial = OdeTrajectory(res.t, res.y.T, t_start, t_star, res.sol)
        raise BlowUpDetected(t_star, partial)
    return OdeTrajectory(res.t, res.y.T, t_start, t_end, res.sol)
