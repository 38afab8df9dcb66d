"""Flat ``key = value`` scenario configuration files.

One ``kind`` selector chooses the scenario family; the remaining keys must
match that family's schema exactly (unknown keys are rejected, booleans
are the literals ``true`` and ``false``, ``#`` starts a comment).  The
format is deliberately flat and diff-friendly so fixtures stay trivially
parseable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

from .merton_opinion import DriftOpinionScenario, VolOpinionScenario
from .scenario_core import (
    GaussianInitial,
    HalfLineInitial,
    QuadraticCost,
    QuadraticTerminal,
)

__all__ = ["ConfigError", "ScenarioConfig", "parse_config_text", "load_config"]

KINDS = ("gaussian", "halfline", "merton-drift", "merton-vol")

_REQUIRED: Dict[str, tuple] = {
    "gaussian": ("a", "b", "c", "delta", "horizon", "a_t", "b_t", "c_t", "lambda", "x0"),
    "halfline": ("a", "c", "delta", "horizon", "a_t", "c_t", "kappa"),
    "merton-drift": (
        "mu_bar",
        "sigma",
        "r",
        "q",
        "beta",
        "gamma",
        "delta",
        "horizon",
        "mu0",
        "lambda",
    ),
    "merton-vol": ("mu", "r", "q", "beta", "gamma", "delta", "horizon", "xi0"),
}

_OPTIONAL_FLOAT = ("x_min", "x_max", "dt")
_OPTIONAL_INT = ("nx", "nt", "n_grid", "n_agents", "seed")
_OPTIONAL_BOOL = ("pde", "mc", "svg")
_OPTIONAL_STR = ("out",)


class ConfigError(Exception):
    """Malformed or inconsistent scenario configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    """One validated scenario configuration."""

    kind: str
    params: Dict[str, float]
    pde: bool = False
    mc: bool = False
    svg: bool = False
    nx: int = 512
    nt: int = 512
    x_min: Optional[float] = None
    x_max: Optional[float] = None
    n_grid: int = 1001
    n_agents: int = 100_000
    dt: Optional[float] = None
    seed: int = 2024
    out: Optional[str] = None

    def grid_override(self) -> Optional[tuple]:
        if (self.x_min is None) != (self.x_max is None):
            raise ConfigError("x_min and x_max must be given together")
        if self.x_min is None:
            return None
        return (self.x_min, self.x_max)

    # -- scenario materialization ------------------------------------------

    def gaussian_problem(self) -> tuple:
        p = self.params
        cost = QuadraticCost(p["a"], p["b"], p["c"], p["delta"], p["horizon"])
        terminal = QuadraticTerminal(p["a_t"], p["b_t"], p["c_t"])
        initial = GaussianInitial(x0=p["x0"], lam=p["lambda"])
        return cost, terminal, initial

    def halfline_problem(self) -> tuple:
        p = self.params
        cost = QuadraticCost(p["a"], 0.0, p["c"], p["delta"], p["horizon"])
        terminal = QuadraticTerminal(p["a_t"], 0.0, p["c_t"])
        initial = HalfLineInitial(kappa=p["kappa"])
        return cost, terminal, initial

    def drift_scenario(self) -> DriftOpinionScenario:
        p = self.params
        return DriftOpinionScenario(
            mu_bar=p["mu_bar"],
            sigma=p["sigma"],
            r=p["r"],
            q=p["q"],
            beta=p["beta"],
            gamma=p["gamma"],
            delta=p["delta"],
            horizon=p["horizon"],
            mu0=p["mu0"],
            lam=p["lambda"],
        )

    def vol_scenario(self) -> VolOpinionScenario:
        p = self.params
        return VolOpinionScenario(
            mu=p["mu"],
            r=p["r"],
            q=p["q"],
            beta=p["beta"],
            gamma=p["gamma"],
            delta=p["delta"],
            horizon=p["horizon"],
            xi0=p["xi0"],
        )


def parse_config_text(text: str) -> Dict[str, str]:
    """Split ``key = value`` lines into a string map; comments start with #."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _parse_bool(key: str, value: str) -> bool:
    if value == "true":
        return True
    if value == "false":
        return False
    raise ConfigError(f"{key}: booleans are 'true' or 'false', got {value!r}")


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from exc


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc


def config_from_map(raw: Dict[str, str]) -> ScenarioConfig:
    if "kind" not in raw:
        raise ConfigError("missing the 'kind' selector")
    kind = raw.pop("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {KINDS}")

    params: Dict[str, float] = {}
    for key in _REQUIRED[kind]:
        if key not in raw:
            raise ConfigError(f"{kind}: missing required key {key!r}")
        params[key] = _parse_float(key, raw.pop(key))

    extras: Dict[str, object] = {}
    for key in list(raw):
        value = raw.pop(key)
        if key in _OPTIONAL_BOOL:
            extras[key] = _parse_bool(key, value)
        elif key in _OPTIONAL_FLOAT:
            extras[key] = _parse_float(key, value)
        elif key in _OPTIONAL_INT:
            extras[key] = _parse_int(key, value)
        elif key in _OPTIONAL_STR:
            extras[key] = value
        else:
            raise ConfigError(f"{kind}: unknown key {key!r}")
    try:
        return ScenarioConfig(kind=kind, params=params, **extras)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    text = Path(path).read_text(encoding="utf-8")
    return config_from_map(parse_config_text(text))
