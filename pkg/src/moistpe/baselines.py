"""Checked-in regression constants, keyed by scenario name.

The analytic constants behind the monitored inequalities are not computable,
so the suite compares against values recorded from a validated run instead.
``scripts/record_baselines.py`` regenerates the file.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import Config
from .operators import norms
from .scenarios import scenario_config
from .stepper import Model, initial_state, integrate

BASELINE_PATH = Path(__file__).with_name("baselines.json")

REGRESSION_STEPS = 200


def load_baselines(path: str | Path | None = None) -> dict:
    path = Path(path) if path is not None else BASELINE_PATH
    if not path.exists():
        return {}
    return json.loads(path.read_text())


def save_baselines(data: dict, path: str | Path | None = None) -> None:
    path = Path(path) if path is not None else BASELINE_PATH
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def regression_config(overrides: dict[str, str] | None = None) -> Config:
    merged = {"grid.nx": "32", "grid.ny": "32", "grid.np": "16", "initial.seed": "0"}
    merged.update(overrides or {})
    return scenario_config("warm_bubble", overrides=merged)


def regression_value(cfg: Config | None = None, steps: int = REGRESSION_STEPS) -> float:
    """Final |v|_H1 of the frozen-seed warm-bubble run."""
    cfg = cfg or regression_config()
    model = Model.build(cfg)
    state = integrate(model, initial_state(model), steps)
    n1, n2 = norms(state.v1, model.grid), norms(state.v2, model.grid)
    return float(np.hypot(n1["H1_full"], n2["H1_full"]))


def check_regression(value: float, baselines: dict | None = None) -> dict:
    baselines = load_baselines() if baselines is None else baselines
    rec = baselines.get("warm_bubble", {}).get("regression")
    if rec is None:
        return {"passed": False, "value": value, "expected": None, "detail": "no baseline"}
    expected = float.fromhex(rec["v_H1"])
    return {"passed": value == expected, "value": value, "expected": expected,
            "difference": value - expected}
