"""Solver laboratory for linear-quadratic mean-field games.

Quadratic running costs and terminal data reduce the coupled backward
value / forward density system to small Riccati-type ODE systems.  This
package solves them, audits the circulating closed-form expressions
against the ODE path, verifies everything against two independent oracles
(a direct space-time solver and a seeded agent ensemble), and maps the
investor-opinion-formation scenarios onto the same machinery.
"""

__version__ = "0.1.0"

from .scenario_core import (  # noqa: F401
    BlowUpDetected,
    CoefficientPath,
    DegenerateDenominator,
    DegenerateDensity,
    ExistenceReport,
    FormulaPole,
    GaussianInitial,
    HalfLineInitial,
    NonGlobalValue,
    OdeTrajectory,
    OutsideExistenceInterval,
    QuadraticCost,
    QuadraticTerminal,
    Regime,
    RegimeKind,
    SolverError,
    StepUnderflow,
    Tolerance,
    classify_regime,
    integrate_ode,
    uniform_grid,
)

from .gaussian_mfg import (  # noqa: F401
    AuditVerdict,
    BackwardSolution,
    FormulaId,
    ForwardSolution,
    GaussianSolution,
    PaperFormulaAudit,
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

from .halfline_mfg import (  # noqa: F401
    EquilibriumAudit,
    HalfLineSolution,
    equilibrium_audit,
    halfline_mass_curve,
    mode_bernoulli,
    mode_first_integral,
    solve_halfline,
)

from .pde_oracle import (  # noqa: F401
    BoundaryMaximum,
    DegenerateDiffusion,
    Grid1D,
    MassLeak,
    NoStrictMax,
    PdeSolution,
    extract_mode,
    solve_fpk_forward,
    solve_hjb_backward,
    solve_pde,
)

from .mc_sim import (  # noqa: F401
    EnsembleStats,
    TooFewSamples,
    kde_mode,
    simulate_ensemble,
    simulate_halfline_ensemble,
)

from .merton_opinion import (  # noqa: F401
    DriftOpinionScenario,
    InvestorParams,
    NotConvergent,
    OutcomeKind,
    OutcomeReport,
    VolOpinionScenario,
    build_drift_problem,
    build_vol_problem,
    classify_outcome,
    drift_opinion_limit,
    growth_rate,
    optimal_fraction,
    risk_coefficient_P,
    risk_coefficient_R,
    vol_opinion_limit,
)

from .audit import run_formula_audits  # noqa: F401
from .verify import (  # noqa: F401
    McAgreement,
    PdeAgreement,
    gaussian_grid,
    halfline_grid,
    verify_mc_gaussian,
    verify_pde_gaussian,
    verify_pde_halfline,
)
