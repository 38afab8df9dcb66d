"""Access to the bundled scenario fixtures."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .config import ScenarioConfig, config_from_map, parse_config_text

__all__ = ["fixture_names", "fixture_text", "load_fixture", "figure1_fixture_names"]


def fixture_names() -> list:
    root = resources.files("mfglab") / "fixtures"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def fixture_text(name: str) -> str:
    return (resources.files("mfglab") / "fixtures" / name).read_text(encoding="utf-8")


def load_fixture(name: str) -> ScenarioConfig:
    if not name.endswith(".cfg"):
        name += ".cfg"
    return config_from_map(parse_config_text(fixture_text(name)))


def figure1_fixture_names() -> list:
    return [f"figure1_gamma{g}.cfg" for g in (0, 1, 2)]


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled fixture (for passing to the CLI)."""
    if not name.endswith(".cfg"):
        name += ".cfg"
    return Path(str(resources.files("mfglab") / "fixtures" / name))
