"""Named scenario presets used by the verification subcommands and tests."""
from __future__ import annotations

from pathlib import Path

from .config import Config, ConfigError, load_config

SCENARIOS: dict[str, dict[str, str]] = {
    "rest": {"initial.kind": "rest"},
    "warm_bubble": {"initial.kind": "warm_bubble"},
    "saturated_blob": {"initial.kind": "saturated_blob"},
    # pure momentum decay: no temperature, no moisture, no microphysics
    "decay": {
        "initial.kind": "decay",
        "physics.sources": "false",
        "boundary.T_star": "0", "boundary.T_bl": "0",
        "boundary.qv_star": "0", "boundary.qv_bl": "0",
    },
    # weaker damping so perturbations can grow transiently
    "uniqueness": {"initial.kind": "saturated_blob", "initial.amplitude": "0.5",
                   "grid.nx": "16", "grid.ny": "16", "grid.np": "8",
                   "physics.mu_v": "0.01", "physics.mu_T": "0.01", "physics.mu_q": "0.01"},
}

BOUND_SCENARIOS = ("rest", "warm_bubble", "saturated_blob")


def scenario_config(name: str, path: str | Path | None = None,
                    overrides: dict[str, str] | None = None) -> Config:
    """Preset on top of an optional config file; ``overrides`` win over both."""
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    merged = dict(SCENARIOS[name])
    merged.update(overrides or {})
    return load_config(path, merged)
