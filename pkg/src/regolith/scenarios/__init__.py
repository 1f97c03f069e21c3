"""Bundled reference scenarios (JSON configs plus behaviour-tree files)."""

from __future__ import annotations

from pathlib import Path

SCENARIO_DIR = Path(__file__).parent

REFERENCE_SCENARIOS = ("scenario1_flat", "scenario1_sloped",
                       "scenario2_habitat", "scenario2_smoke")


def scenario_path(name: str) -> Path:
    path = SCENARIO_DIR / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(
            f"no bundled scenario {name!r}; choose from "
            f"{', '.join(REFERENCE_SCENARIOS)}")
    return path
