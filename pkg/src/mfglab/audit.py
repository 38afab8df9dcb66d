"""Randomized scenario suite driving the closed-form audits.

Draws globally solvable scenarios from documented parameter ranges, one
batch per curvature regime, and aggregates the per-scenario deviations of
every printed closed form into one verdict per formula.  The same draws
back the ODE-residual acceptance checks, so the ranges are deliberately
mild: they keep third derivatives of the coefficient paths small enough
for central differences on a fine grid to resolve below the residual
tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .gaussian_mfg import (
    FormulaId,
    PaperFormulaAudit,
    audit_formula_A,
    audit_formula_Q,
    existence_horizon,
)
from .scenario_core import QuadraticCost, QuadraticTerminal, RegimeKind

__all__ = ["ScenarioDraw", "draw_scenarios", "run_formula_audits", "PARAMETER_RANGES"]

# documented draw ranges per regime: (low, high) for each parameter
PARAMETER_RANGES = {
    "subcritical": {
        "a": (-2.5, -0.5),
        "b": (-2.0, 2.0),
        "c": (-1.0, 1.0),
        "delta": (0.25, 0.5),
        "horizon": (1.0, 2.5),
        "a_t_rel": (-0.8, 0.85),  # relative to k = sqrt(-a/2)
        "b_t": (-1.0, 1.0),
        "q0": (-1.0, 1.0),
    },
    "critical": {
        "b": (-2.0, 2.0),
        "c": (-1.0, 1.0),
        "delta": (0.2, 0.5),
        "horizon": (1.0, 2.0),
        "a_t_scaled": (-1.0, 0.4),  # 2 a_t T drawn in this range, pole at 1
        "b_t": (-1.0, 1.0),
        "q0": (-1.0, 1.0),
    },
    "supercritical": {
        "a": (0.3, 2.0),
        "b": (-2.0, 2.0),
        "c": (-1.0, 1.0),
        "delta": (0.2, 0.5),
        "a_t": (-0.5, 0.5),
        "b_t": (-1.0, 1.0),
        "q0": (-1.0, 1.0),
        "horizon_rel": (0.3, 0.75),  # relative to the blow-up horizon
    },
}


@dataclass(frozen=True)
class ScenarioDraw:
    cost: QuadraticCost
    terminal: QuadraticTerminal
    q0: float


def _uniform(rng: np.random.Generator, bounds) -> float:
    lo, hi = bounds
    return float(rng.uniform(lo, hi))


def draw_scenarios(regime: str, n: int, seed: int) -> List[ScenarioDraw]:
    """Draw ``n`` globally solvable scenarios of the requested regime."""
    ranges = PARAMETER_RANGES[regime]
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    out: List[ScenarioDraw] = []
    while len(out) < n:
        if regime == "subcritical":
            a = _uniform(rng, ranges["a"])
            k = math.sqrt(-a / 2.0)
            cost = QuadraticCost(
                a=a,
                b=_uniform(rng, ranges["b"]),
                c=_uniform(rng, ranges["c"]),
                delta=_uniform(rng, ranges["delta"]),
                horizon=_uniform(rng, ranges["horizon"]),
            )
            terminal = QuadraticTerminal(
                a_t=k * _uniform(rng, ranges["a_t_rel"]),
                b_t=_uniform(rng, ranges["b_t"]),
                c_t=0.0,
            )
        elif regime == "critical":
            horizon = _uniform(rng, ranges["horizon"])
            cost = QuadraticCost(
                a=0.0,
                b=_uniform(rng, ranges["b"]),
                c=_uniform(rng, ranges["c"]),
                delta=_uniform(rng, ranges["delta"]),
                horizon=horizon,
            )
            terminal = QuadraticTerminal(
                a_t=_uniform(rng, ranges["a_t_scaled"]) / (2.0 * horizon),
                b_t=_uniform(rng, ranges["b_t"]),
                c_t=0.0,
            )
        elif regime == "supercritical":
            a = _uniform(rng, ranges["a"])
            a_t = _uniform(rng, ranges["a_t"])
            k = math.sqrt(a / 2.0)
            t_max = (0.5 * math.pi - math.atan(a_t / k)) / math.sqrt(2.0 * a)
            cost = QuadraticCost(
                a=a,
                b=_uniform(rng, ranges["b"]),
                c=_uniform(rng, ranges["c"]),
                delta=_uniform(rng, ranges["delta"]),
                horizon=t_max * _uniform(rng, ranges["horizon_rel"]),
            )
            terminal = QuadraticTerminal(a_t=a_t, b_t=_uniform(rng, ranges["b_t"]), c_t=0.0)
        else:
            raise ValueError(f"unknown regime {regime!r}")
        if not existence_horizon(cost, terminal.a_t).is_global:
            continue
        out.append(ScenarioDraw(cost, terminal, q0=_uniform(rng, ranges["q0"])))
    return out


def run_formula_audits(
    seed: int = 20240, n_per_regime: int = 5
) -> Dict[FormulaId, PaperFormulaAudit]:
    """Audit every printed closed form over the randomized scenario suite.

    Deviations are aggregated as the worst case across the batch, so one
    verdict is recorded per formula identifier.
    """
    out: Dict[FormulaId, PaperFormulaAudit] = {}
    for offset, regime in enumerate(("subcritical", "critical", "supercritical")):
        draws = draw_scenarios(regime, n_per_regime, seed + offset)
        a_printed = a_corrected = 0.0
        q_printed = q_corrected = 0.0
        a_id = q_id = None
        for d in draws:
            audit_a = audit_formula_A(d.cost, d.terminal)
            audit_q = audit_formula_Q(d.cost, d.terminal, d.q0)
            a_id = audit_a.formula_id
            q_id = audit_q.formula_id
            a_printed = max(a_printed, audit_a.max_abs_deviation)
            a_corrected = max(a_corrected, audit_a.corrected_max_abs_deviation)
            q_printed = max(q_printed, audit_q.max_abs_deviation)
            q_corrected = max(q_corrected, audit_q.corrected_max_abs_deviation)
        out[a_id] = PaperFormulaAudit.from_deviations(a_id, a_printed, a_corrected)
        out[q_id] = PaperFormulaAudit.from_deviations(q_id, q_printed, q_corrected)
    return out
