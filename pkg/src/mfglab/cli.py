"""Command-line front end: solve scenarios, run oracles, emit artifacts.

Subcommands
-----------
``gaussian`` / ``halfline`` / ``merton-drift`` / ``merton-vol``
    Solve one configured scenario and emit coefficient/mode curves as CSV
    (plus SVG plots with ``--svg``).
``verify``
    Re-solve the scenario with the direct space-time solver and/or the
    agent ensemble and emit an agreement report.
``audit-formulas``
    Evaluate every printed closed form against the ODE path on the
    randomized scenario suite and emit the verdict table.
``figure1``
    Run the bundled three-curve drift-opinion comparison and emit the
    overlaid mode plot.

Exit codes: 0 success; 1 invalid configuration; 2 solver failure where a
global solution is required; 3 oracle failure or disagreement beyond
tolerance.  All numbers are written with 17 significant digits, so parsing
a CSV back reproduces the in-memory values bit for bit; identical
configuration and seed give byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .audit import run_formula_audits
from .config import ConfigError, ScenarioConfig, load_config
from .gaussian_mfg import (
    BackwardSolution,
    GaussianSolution,
    audit_formula_A,
    audit_formula_Q,
    existence_horizon,
    mass_curve,
    mode_closed_form,
    mode_curve,
    mode_ode,
    solve_backward,
    solve_gaussian,
)
from .halfline_mfg import (
    closed_form_A_continued,
    equilibrium_audit,
    mode_first_integral,
    solve_halfline,
)
from .merton_opinion import (
    OutcomeKind,
    build_drift_problem,
    build_vol_problem,
    classify_outcome,
    risk_coefficient_P,
    risk_coefficient_R,
)
from .pde_oracle import Grid1D
from .presets import figure1_fixture_names, load_fixture
from .scenario_core import (
    NonGlobalValue,
    RegimeKind,
    SolverError,
    classify_regime,
    uniform_grid,
)
from .svgplot import render_line_plot
from .verify import (
    gaussian_grid,
    halfline_grid,
    verify_mc_gaussian,
    verify_mc_halfline,
    verify_pde_gaussian,
    verify_pde_halfline,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_ORACLE = 3


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _write_csv(path: Path, header, columns) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_summary(out_dir: Path, lines) -> None:
    tmp = out_dir / "summary.txt.tmp"
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    os.replace(tmp, out_dir / "summary.txt")


def _out_dir(cfg: Optional[ScenarioConfig], flag: Optional[str], default: str) -> Path:
    out = flag or (cfg.out if cfg is not None else None) or default
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _existence_lines(existence) -> list:
    regime = existence.regime
    lines = [f"regime={regime.kind.value}"]
    if regime.k_minus is not None:
        lines.append(f"k_minus={_fmt(regime.k_minus)}")
    if regime.k_plus is not None:
        lines.append(f"k_plus={_fmt(regime.k_plus)}")
    lines.append(f"global={'true' if existence.is_global else 'false'}")
    if existence.blowup_time is not None:
        lines.append(f"blowup_time={_fmt(existence.blowup_time)}")
    return lines


def _mode_target_lines(cost) -> list:
    regime = classify_regime(cost)
    if regime.kind is RegimeKind.SUBCRITICAL:
        return [f"q_star={_fmt(-cost.b / (2.0 * cost.a))}"]
    if regime.kind is RegimeKind.SUPERCRITICAL:
        return [
            f"oscillation_frequency={_fmt(np.sqrt(2.0 * cost.a))}",
            f"oscillation_center={_fmt(-cost.b / (2.0 * cost.a))}",
        ]
    return []


def _scenario_audit_lines(cost, terminal, q0) -> list:
    aud_a = audit_formula_A(cost, terminal)
    aud_q = audit_formula_Q(cost, terminal, q0)
    return [
        f"audit_{aud.formula_id.value}={aud.verdict.value}" for aud in (aud_a, aud_q)
    ] + [
        f"audit_{aud.formula_id.value}_printed_deviation={_fmt(aud.max_abs_deviation)}"
        for aud in (aud_a, aud_q)
    ]


# ---------------------------------------------------------------------------
# scenario solve commands


def _cmd_gaussian(cfg: ScenarioConfig, out_flag, svg: bool) -> int:
    cost, terminal, initial = cfg.gaussian_problem()
    out = _out_dir(cfg, out_flag, "out_gaussian")
    back = solve_backward(cost, terminal, n_grid=cfg.n_grid)
    lines = ["kind=gaussian"] + _existence_lines(back.existence)
    lines += _mode_target_lines(cost)
    if not back.existence.is_global:
        _write_summary(out, lines)
        print(f"value coefficients blow up at t* = {back.existence.blowup_time:.6g}; "
              f"summary in {out}/summary.txt")
        return EXIT_SOLVER
    sol = solve_gaussian(cost, terminal, initial, n_grid=cfg.n_grid)
    q = mode_ode(back, initial.x0, grid=sol.path.times).states[:, 0]
    path = sol.path
    _write_csv(
        out / "curves.csv",
        ["t", "A", "B", "C", "K2", "K1", "K0", "Q"],
        [path.times, path.A, path.B, path.C, path.K2, path.K1, path.K0, q],
    )
    lines.append(f"q0={_fmt(initial.x0)}")
    lines.append(f"mass_deviation={_fmt(np.max(np.abs(mass_curve(path) - 1.0)))}")
    lines += _scenario_audit_lines(cost, terminal, initial.x0)
    _write_summary(out, lines)
    if svg:
        render_line_plot(
            out / "mode.svg",
            [("Q", path.times, q)],
            title="density mode",
            xlabel="t",
            ylabel="Q",
        )
        render_line_plot(
            out / "coefficients.svg",
            [("A", path.times, path.A), ("B", path.times, path.B)],
            title="value coefficients",
            xlabel="t",
            ylabel="value",
        )
    print(f"wrote {out}/curves.csv and {out}/summary.txt")
    return EXIT_OK


def _halfline_audit_lines(cost, terminal, initial) -> list:
    regime = classify_regime(cost)
    if regime.kind is not RegimeKind.SUBCRITICAL:
        return []
    if regime.k_minus * cost.horizon < 10.0:
        return ["halfline_equilibrium=skipped (horizon too short for a plateau)"]
    return equilibrium_audit(cost, terminal, initial).summary_lines()


def _cmd_halfline(cfg: ScenarioConfig, out_flag, svg: bool) -> int:
    cost, terminal, initial = cfg.halfline_problem()
    out = _out_dir(cfg, out_flag, "out_halfline")
    back = solve_backward(cost, terminal, n_grid=cfg.n_grid)
    lines = ["kind=halfline"] + _existence_lines(back.existence)
    if not back.existence.is_global:
        _write_summary(out, lines)
        print(f"value coefficients blow up at t* = {back.existence.blowup_time:.6g}; "
              f"summary in {out}/summary.txt")
        return EXIT_SOLVER
    sol = solve_halfline(cost, terminal, initial, n_grid=cfg.n_grid)
    path = sol.path
    q = 1.0 / np.sqrt(path.K2)
    _write_csv(
        out / "curves.csv",
        ["t", "A", "C", "K2", "K0", "Q", "survival"],
        [path.times, path.A, path.C, path.K2, path.K0, q, sol.survival],
    )
    if classify_regime(cost).kind is RegimeKind.SUBCRITICAL:
        k = classify_regime(cost).k_minus
        lines.append(f"q_star={_fmt(cost.delta / (2.0 * np.sqrt(k)))}")
    lines.append(f"q0={_fmt(initial.mode)}")
    lines.append(
        f"mass_deviation={_fmt(np.max(np.abs(np.exp(path.K0) / path.K2 - 1.0)))}"
    )
    lines += _halfline_audit_lines(cost, terminal, initial)
    _write_summary(out, lines)
    if svg:
        render_line_plot(
            out / "mode.svg",
            [("Q", path.times, q)],
            title="half-line density mode",
            xlabel="t",
            ylabel="Q",
        )
    print(f"wrote {out}/curves.csv and {out}/summary.txt")
    return EXIT_OK


def _cmd_merton_drift(cfg: ScenarioConfig, out_flag, svg: bool) -> int:
    scenario = cfg.drift_scenario()
    cost, terminal, initial = build_drift_problem(scenario)
    out = _out_dir(cfg, out_flag, "out_merton_drift")
    outcome = classify_outcome(cost, terminal)
    existence = existence_horizon(cost, terminal.a_t)
    lines = ["kind=merton-drift"] + _existence_lines(existence)
    lines.append(f"risk_coefficient_R={_fmt(risk_coefficient_R(scenario.sigma, scenario.q))}")
    lines.append(f"outcome={outcome.kind.value}")
    if outcome.limit is not None:
        lines.append(f"q_star={_fmt(outcome.limit)}")
    if outcome.angular_frequency is not None:
        lines.append(f"oscillation_frequency={_fmt(outcome.angular_frequency)}")
        lines.append(f"oscillation_center={_fmt(outcome.center)}")

    grid = uniform_grid(cost.horizon, cfg.n_grid)
    if existence.is_global:
        back = solve_backward(cost, terminal, grid=grid)
        sol = solve_gaussian(cost, terminal, initial, grid=grid)
        q = mode_ode(back, initial.x0, grid=grid).states[:, 0]
        path = sol.path
        _write_csv(
            out / "curves.csv",
            ["t", "A", "B", "C", "K2", "K1", "K0", "Q"],
            [path.times, path.A, path.B, path.C, path.K2, path.K1, path.K0, q],
        )
        lines += _scenario_audit_lines(cost, terminal, initial.x0)
    else:
        # the mode outlives the value surface: emit it from the anchored
        # closed form and note that the coefficient curves do not exist
        q = np.atleast_1d(mode_closed_form(cost, terminal, initial.x0, grid))
        _write_csv(out / "curves.csv", ["t", "Q"], [grid, q])
        lines.append("coefficient_curves=absent (value blow-up inside horizon)")
    _write_summary(out, lines)
    if svg:
        render_line_plot(
            out / "mode.svg",
            [("Q", grid, q)],
            title="believed-drift mode",
            xlabel="t",
            ylabel="Q",
        )
    print(f"wrote {out}/curves.csv and {out}/summary.txt ({outcome.kind.value})")
    return EXIT_OK


def _cmd_merton_vol(cfg: ScenarioConfig, out_flag, svg: bool) -> int:
    scenario = cfg.vol_scenario()
    cost, terminal, initial = build_vol_problem(scenario)
    out = _out_dir(cfg, out_flag, "out_merton_vol")
    outcome = classify_outcome(cost, terminal, halfline=True)
    existence = existence_horizon(cost, terminal.a_t)
    lines = ["kind=merton-vol"] + _existence_lines(existence)
    lines.append(f"risk_coefficient_P={_fmt(risk_coefficient_P(scenario.mu, scenario.r, scenario.q))}")
    lines.append(f"outcome={outcome.kind.value}")
    if outcome.limit is not None:
        lines.append(f"q_star={_fmt(outcome.limit)}")
    if outcome.angular_frequency is not None:
        lines.append(f"oscillation_frequency={_fmt(outcome.angular_frequency)}")

    if existence.is_global:
        sol = solve_halfline(cost, terminal, initial, n_grid=cfg.n_grid)
        path = sol.path
        q = 1.0 / np.sqrt(path.K2)
        _write_csv(
            out / "curves.csv",
            ["t", "A", "C", "K2", "K0", "Q", "survival"],
            [path.times, path.A, path.C, path.K2, path.K0, q, sol.survival],
        )
        lines += _halfline_audit_lines(cost, terminal, initial)
        ts = path.times
    else:
        # evaluate the conserved-quantity inversion along the continued
        # branch of A; the mode reaches zero at the blow-up time
        t_star = existence.blowup_time
        ts = uniform_grid(cost.horizon, cfg.n_grid)
        ts = ts[ts < t_star]
        a_of = lambda t: closed_form_A_continued(cost, terminal.a_t, t)  # noqa: E731
        q = np.atleast_1d(mode_first_integral(cost, a_of, initial.mode, ts))
        _write_csv(out / "curves.csv", ["t", "Q"], [ts, q])
        lines.append("coefficient_curves=absent (value blow-up inside horizon)")
    _write_summary(out, lines)
    if svg:
        render_line_plot(
            out / "mode.svg",
            [("Q", ts, q)],
            title="believed-inverse-volatility mode",
            xlabel="t",
            ylabel="Q",
        )
    print(f"wrote {out}/curves.csv and {out}/summary.txt ({outcome.kind.value})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification command


def _grid_for(cfg: ScenarioConfig, sol, halfline: bool) -> Grid1D:
    override = cfg.grid_override()
    if override is not None:
        return Grid1D(override[0], override[1], nx=cfg.nx, nt=cfg.nt)
    if halfline:
        return halfline_grid(sol, cfg.nx, cfg.nt)
    return gaussian_grid(sol, cfg.nx, cfg.nt)


def _dump_fields(out: Path, pde) -> None:
    times = pde.times
    xs = pde.grid.xs
    with open(out / "fields.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,x,phi,m\n")
        for k, t in enumerate(times):
            ts = _fmt(t)
            for j, x in enumerate(xs):
                fh.write(f"{ts},{_fmt(x)},{_fmt(pde.phi[k, j])},{_fmt(pde.m[k, j])}\n")


def _dump_samples(out: Path, stats) -> None:
    if stats.samples is None:
        return
    with open(out / "samples.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,agent_id,x\n")
        for k, t in enumerate(stats.times):
            ts = _fmt(t)
            row = stats.samples[k]
            for agent, value in enumerate(row):
                fh.write(f"{ts},{agent},{_fmt(value)}\n")


def _cmd_verify(cfg: ScenarioConfig, args) -> int:
    use_pde = args.pde or (not args.pde and not args.mc and cfg.pde)
    use_mc = args.mc or (not args.pde and not args.mc and cfg.mc)
    if not use_pde and not use_mc:
        raise ConfigError("verify needs at least one oracle (pde/mc flags or config keys)")
    out = _out_dir(cfg, args.out, "out_verify")

    if cfg.kind in ("gaussian", "merton-drift"):
        if cfg.kind == "gaussian":
            cost, terminal, initial = cfg.gaussian_problem()
        else:
            cost, terminal, initial = build_drift_problem(cfg.drift_scenario())
        halfline = False
    else:
        if cfg.kind == "halfline":
            cost, terminal, initial = cfg.halfline_problem()
        else:
            cost, terminal, initial = build_vol_problem(cfg.vol_scenario())
        halfline = True

    back = solve_backward(cost, terminal, n_grid=cfg.n_grid)
    lines = [f"kind={cfg.kind}", "command=verify"] + _existence_lines(back.existence)
    lines += _mode_target_lines(cost)
    if not back.existence.is_global:
        _write_summary(out, lines)
        print("scenario is not globally solvable; oracles need a global solution")
        return EXIT_SOLVER

    ok = True
    try:
        if halfline:
            sol = solve_halfline(cost, terminal, initial, n_grid=cfg.n_grid)
            if use_pde:
                agree = verify_pde_halfline(sol, grid=_grid_for(cfg, sol, True))
                lines += agree.summary_lines()
                _write_csv(
                    out / "pde_agreement.csv",
                    ["t", "mode_pde", "mode_riccati", "mass", "survival_riccati"],
                    [
                        agree.pde.times,
                        agree.pde.mode_curve,
                        agree.mode_reference,
                        agree.pde.mass_curve,
                        np.asarray(sol.survival_of(agree.pde.times)),
                    ],
                )
                if args.dump_fields:
                    _dump_fields(out, agree.pde)
                if args.svg:
                    render_line_plot(
                        out / "oracle_overlay.svg",
                        [
                            ("mode (direct solve)", agree.pde.times, agree.pde.mode_curve),
                            ("mode (reduced)", agree.pde.times, agree.mode_reference),
                        ],
                        title="half-line oracle overlay",
                        xlabel="t",
                        ylabel="Q",
                    )
                ok = ok and agree.passed
                print(
                    f"pde: mode deviation {agree.mode_deviation:.3e} "
                    f"(tolerance {agree.mode_tolerance:.3e}), "
                    f"runtime {agree.runtime_seconds:.2f}s"
                )
            if use_mc:
                stats = verify_mc_halfline(
                    sol, back, cfg.n_agents, cfg.dt, cfg.seed
                )
                q_ref = 1.0 / np.sqrt(np.asarray(sol.path.K2_of(stats.times)))
                _write_csv(
                    out / "mc_agreement.csv",
                    ["t", "mean", "variance", "stderr_mean", "mode_kde", "mode_riccati"],
                    [stats.times, stats.mean, stats.variance, stats.stderr_mean,
                     stats.mode_kde, q_ref],
                )
                lines.append("mc_halfline=informational (folded paths vs absorbed density)")
                print("mc: folded half-line ensemble written (informational)")
        else:
            sol = solve_gaussian(cost, terminal, initial, n_grid=cfg.n_grid)
            if use_pde:
                agree = verify_pde_gaussian(
                    sol, grid=_grid_for(cfg, sol, False), scheme=args.scheme
                )
                lines += agree.summary_lines()
                _write_csv(
                    out / "pde_agreement.csv",
                    ["t", "mode_pde", "mode_riccati", "mass", "gaussian_r2"],
                    [
                        agree.pde.times,
                        agree.pde.mode_curve,
                        agree.mode_reference,
                        agree.pde.mass_curve,
                        agree.pde.gaussian_r2,
                    ],
                )
                if args.dump_fields:
                    _dump_fields(out, agree.pde)
                if args.svg:
                    render_line_plot(
                        out / "oracle_overlay.svg",
                        [
                            ("mode (direct solve)", agree.pde.times, agree.pde.mode_curve),
                            ("mode (reduced)", agree.pde.times, agree.mode_reference),
                        ],
                        title="oracle overlay",
                        xlabel="t",
                        ylabel="Q",
                    )
                ok = ok and agree.passed
                print(
                    f"pde: mode deviation {agree.mode_deviation:.3e} "
                    f"(tolerance {agree.mode_tolerance:.3e}), min r2 {agree.min_r2:.5f}, "
                    f"runtime {agree.runtime_seconds:.2f}s"
                )
            if use_mc:
                agree = verify_mc_gaussian(
                    sol,
                    back,
                    cfg.n_agents,
                    cfg.dt,
                    cfg.seed,
                    keep_samples=args.dump_samples,
                )
                lines += agree.summary_lines()
                stats = agree.stats
                _write_csv(
                    out / "mc_agreement.csv",
                    ["t", "mean", "variance", "stderr_mean", "mode_kde", "mode_riccati"],
                    [stats.times, stats.mean, stats.variance, stats.stderr_mean,
                     stats.mode_kde, agree.mode_reference],
                )
                if args.dump_samples:
                    _dump_samples(out, stats)
                ok = ok and agree.passed
                print(
                    f"mc: max |mean - Q|/stderr = {agree.max_mean_z:.2f}, "
                    f"max variance mismatch {agree.max_variance_rel * 100:.2f}%"
                )
    except SolverError as exc:
        lines.append(f"oracle_error={exc}")
        _write_summary(out, lines)
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE

    _write_summary(out, lines)
    print(f"wrote {out}/summary.txt")
    return EXIT_OK if ok else EXIT_ORACLE


# ---------------------------------------------------------------------------
# audit and figure commands


def _cmd_audit_formulas(args) -> int:
    out = _out_dir(None, args.out, "out_audit")
    audits = run_formula_audits(seed=args.seed, n_per_regime=args.per_regime)
    order = ["Eq10", "Eq11", "Eq12", "QZeroA", "QPosA", "QNegA"]
    rows = sorted(audits.values(), key=lambda a: order.index(a.formula_id.value))
    with open(out / "audit.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("formula_id,printed_deviation,corrected_deviation,tolerance,verdict\n")
        for a in rows:
            fh.write(
                f"{a.formula_id.value},{_fmt(a.max_abs_deviation)},"
                f"{_fmt(a.corrected_max_abs_deviation)},{_fmt(a.tolerance)},{a.verdict.value}\n"
            )
    lines = [f"audit_seed={args.seed}", f"audit_scenarios_per_regime={args.per_regime}"]
    for a in rows:
        lines.append(f"audit_{a.formula_id.value}={a.verdict.value}")
    _write_summary(out, lines)
    width = max(len(r.formula_id.value) for r in rows)
    print(f"{'formula':<{width}}  {'printed dev':>12}  {'corrected':>12}  verdict")
    for a in rows:
        print(
            f"{a.formula_id.value:<{width}}  {a.max_abs_deviation:>12.3e}  "
            f"{a.corrected_max_abs_deviation:>12.3e}  {a.verdict.value}"
        )
    print(f"wrote {out}/audit.csv")
    return EXIT_OK


def _figure1_curve(cfg: ScenarioConfig, n_grid: int = 2001):
    scenario = cfg.drift_scenario()
    cost, terminal, initial = build_drift_problem(scenario)
    grid = uniform_grid(cost.horizon, n_grid)
    existence = existence_horizon(cost, terminal.a_t)
    if existence.is_global:
        back = solve_backward(cost, terminal, grid=grid)
        q = mode_ode(back, initial.x0, grid=grid).states[:, 0]
    else:
        q = np.atleast_1d(mode_closed_form(cost, terminal, initial.x0, grid))
    return scenario, cost, terminal, existence, grid, q


def _peak_spacing(ts: np.ndarray, q: np.ndarray) -> float:
    interior = (q[1:-1] > q[:-2]) & (q[1:-1] > q[2:])
    peaks = ts[1:-1][interior]
    if peaks.size < 2:
        return float("nan")
    return float(np.mean(np.diff(peaks)))


def _cmd_figure1(args) -> int:
    out = _out_dir(None, args.out, "out_figure1")
    lines = ["kind=figure1"]
    series = []
    for name in figure1_fixture_names():
        cfg = load_fixture(name)
        scenario, cost, terminal, existence, grid, q = _figure1_curve(cfg)
        gamma = scenario.gamma
        tag = f"gamma{gamma:g}"
        _write_csv(out / f"figure1_{tag}.csv", ["t", "Q"], [grid, q])
        series.append((f"gamma = {gamma:g}", grid, q))
        outcome = classify_outcome(cost, terminal)
        lines.append(f"{tag}_a={_fmt(cost.a)}")
        lines.append(f"{tag}_outcome={outcome.kind.value}")
        lines += [f"{tag}_{ln}" for ln in _existence_lines(existence)]
        if cost.a < 0.0:
            mid = float(q[grid.size // 2])
            lines.append(f"{tag}_q_star={_fmt(-cost.b / (2.0 * cost.a))}")
            lines.append(f"{tag}_plateau={_fmt(mid)}")
        else:
            spacing = _peak_spacing(grid, q)
            lines.append(f"{tag}_peak_spacing={_fmt(spacing)}")
            lines.append(
                f"{tag}_expected_spacing={_fmt(2.0 * np.pi / np.sqrt(2.0 * cost.a))}"
            )
    lines.append(f"mu_bar={_fmt(0.5)}")
    _write_summary(out, lines)
    render_line_plot(
        out / "figure1.svg",
        series,
        title="believed-drift mode for three penalty weights",
        xlabel="t",
        ylabel="Q",
    )
    print(f"wrote {out}/figure1.svg and per-curve CSVs")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfglab",
        description="Quadratic mean-field-game solver laboratory",
    )
    parser.add_argument("--version", action="version", version=f"mfglab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for kind in ("gaussian", "halfline", "merton-drift", "merton-vol"):
        p = sub.add_parser(kind, help=f"solve one {kind} scenario and emit curves")
        p.add_argument("config", help="scenario configuration file")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--svg", action="store_true", help="emit SVG plots")

    p = sub.add_parser("verify", help="run the PDE and/or ensemble oracles")
    p.add_argument("config", help="scenario configuration file")
    p.add_argument("--pde", action="store_true", help="run the direct space-time solver")
    p.add_argument("--mc", action="store_true", help="run the agent ensemble")
    p.add_argument(
        "--scheme",
        default="linearized",
        choices=("linearized", "hopf-cole"),
        help="value-solve scheme for the PDE oracle",
    )
    p.add_argument("--dump-fields", action="store_true", help="write fields.csv (t,x,phi,m)")
    p.add_argument("--dump-samples", action="store_true", help="write samples.csv (t,agent_id,x)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--svg", action="store_true", help="emit oracle overlay plots")

    p = sub.add_parser("audit-formulas", help="audit printed closed forms on random scenarios")
    p.add_argument("--seed", type=int, default=20240)
    p.add_argument("--per-regime", type=int, default=5)
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("figure1", help="run the bundled three-curve drift-opinion figure")
    p.add_argument("--out", help="output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "audit-formulas":
            return _cmd_audit_formulas(args)
        if args.command == "figure1":
            return _cmd_figure1(args)
        cfg = load_config(args.config)
        if args.command == "verify":
            return _cmd_verify(cfg, args)
        expected = args.command
        if cfg.kind != expected:
            raise ConfigError(
                f"config kind {cfg.kind!r} does not match subcommand {expected!r}"
            )
        handler = {
            "gaussian": _cmd_gaussian,
            "halfline": _cmd_halfline,
            "merton-drift": _cmd_merton_drift,
            "merton-vol": _cmd_merton_vol,
        }[expected]
        return handler(cfg, args.out, args.svg)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonGlobalValue as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
