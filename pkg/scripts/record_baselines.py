"""Regenerate src/moistpe/baselines.json from validated runs.

Run only after the acceptance suite passes; the recorded numbers become the
regression targets for later runs.
"""
from __future__ import annotations

import argparse

import numpy as np

from moistpe.analysis.energy import estimate_budget_constant
from moistpe.analysis.uniqueness import uniqueness_experiment
from moistpe.baselines import REGRESSION_STEPS, load_baselines, regression_value, save_baselines
from moistpe.operators import trilinear_ratio_check
from moistpe.runner import run
from moistpe.scenarios import scenario_config

BOUND_STEPS = 500
SAFETY = 2.0


def energy_constants(out: str) -> dict[str, float]:
    found = {}
    for name in ("rest", "warm_bubble", "saturated_blob", "decay"):
        cfg = scenario_config(name, overrides={"output.snapshots": "false", "output.figures": "false"})
        _, records, _ = run(cfg, f"{out}/{name}", overwrite=True, nsteps=BOUND_STEPS, quiet=True)
        found[name] = SAFETY * estimate_budget_constant(records, cfg.phys.mu_v)
        print(f"{name}: C_hat = {found[name]:.6g}")
    return found


def a7_constant(steps: int, amplitudes) -> float:
    cfg = scenario_config("uniqueness")
    est = 0.0
    for kind in ("velocity", "qv"):
        for m in uniqueness_experiment(cfg, amplitudes, steps, perturb=kind):
            est = max(est, m.a7_constant())
    return SAFETY * est


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="/tmp/moistpe-baselines")
    ap.add_argument("--steps", type=int, default=100, help="uniqueness experiment length")
    args = ap.parse_args()

    data = load_baselines()
    v = regression_value()
    data.setdefault("warm_bubble", {})["regression"] = {
        "steps": REGRESSION_STEPS, "grid": [32, 32, 16], "seed": 0, "v_H1": v.hex(), "v_H1_decimal": v}
    for name, c in energy_constants(args.out).items():
        data.setdefault(name, {})["C_hat"] = c
    amps = [1e-4, 1e-5, 1e-6]
    data.setdefault("uniqueness", {}).update(
        {"a7": a7_constant(args.steps, amps), "steps": args.steps, "amplitudes": amps})
    ops = {}
    for kind in ("HHP", "CLT"):
        r = trilinear_ratio_check(kind, 32)["max_ratio"]
        ops[kind] = {"max_ratio": r.hex(), "bound": float(np.nextafter(SAFETY * r, np.inf)),
                     "samples": 32}
    data["operators"] = ops
    save_baselines(data)
    print(data)


if __name__ == "__main__":
    main()
