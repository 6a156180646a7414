"""Continuous-dependence experiment on paired runs.

The difference of two solutions is measured in the transformed variables
``Q = qv + qc`` and ``H = T + (L / c_p) qv`` through

    Psi = delta^2 (|qr^|^2 + |qv^|^2 + |H^|^2 + |Q^|^2) + |v^|^2,

and its growth is compared with ``C * shape(t)``, where ``shape`` collects
norms of the reference run's velocity.
"""
from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np
from scipy import integrate

from ..config import Config
from ..grid import ModelState
from ..operators import ddp, inner, norms
from ..stepper import Model, initial_state, perturb_field, perturb_velocity, stable_dt, step

DELTA = 0.1


def psi_terms(a: ModelState, b: ModelState, model: Model, delta: float = DELTA) -> dict[str, float]:
    g, phys = model.grid, model.phys
    lc = phys.L / phys.c_p
    d = {
        "v": (a.v1 - b.v1, a.v2 - b.v2),
        "qv": a.qv - b.qv,
        "qr": a.qr - b.qr,
        "Q": (a.qv + a.qc) - (b.qv + b.qc),
        "H": (a.T + lc * a.qv) - (b.T + lc * b.qv),
    }
    out = {"v": inner(d["v"][0], d["v"][0], g) + inner(d["v"][1], d["v"][1], g)}
    for name in ("qv", "qr", "Q", "H"):
        out[name] = inner(d[name], d[name], g)
    out["psi"] = delta**2 * (out["qr"] + out["qv"] + out["H"] + out["Q"]) + out["v"]
    return out


def _grad_sq(f: np.ndarray, g) -> float:
    gx = np.gradient(f, g.dx, axis=0, edge_order=2)
    gy = np.gradient(f, g.dy, axis=1, edge_order=2)
    return float(np.sum(gx * gx + gy * gy) * g.cell_volume)


def a7_shape(state: ModelState, model: Model) -> float:
    """Norm combination multiplying the unknown constant in the growth bound."""
    g = model.grid
    h1 = norms(state.v1, g)["H1_full"] ** 2 + norms(state.v2, g)["H1_full"] ** 2
    grad_v = _grad_sq(state.v1, g) + _grad_sq(state.v2, g)
    dp1, dp2 = ddp(state.v1, g), ddp(state.v2, g)
    dpv = inner(dp1, dp1, g) + inner(dp2, dp2, g)
    grad_dpv = _grad_sq(dp1, g) + _grad_sq(dp2, g)
    return (1.0 + h1**2 + grad_v + 2 * grad_dpv + 2 * dpv + dpv**2 + dpv * grad_dpv)


@dataclasses.dataclass
class UniquenessMetrics:
    amplitude: float
    t: np.ndarray
    v_hat_sq: np.ndarray
    qv_hat_sq: np.ndarray
    qr_hat_sq: np.ndarray
    Q_hat_sq: np.ndarray
    H_hat_sq: np.ndarray
    psi: np.ndarray
    shape: np.ndarray

    @property
    def rate(self) -> np.ndarray:
        """Empirical growth rate d(log Psi)/dt per interval (0 where Psi vanishes)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.diff(np.log(self.psi)) / np.diff(self.t)
        return np.where(np.isfinite(r), r, 0.0)

    def a7_constant(self) -> float:
        """Smallest C with rate <= C * shape on every interval."""
        mid = 0.5 * (self.shape[1:] + self.shape[:-1])
        return float(max(np.max(np.maximum(self.rate, 0.0) / mid), 0.0))

    def envelope(self, C: float) -> np.ndarray:
        acc = np.concatenate([[0.0], integrate.cumulative_trapezoid(self.shape, self.t)])
        return self.psi[0] * np.exp(C * acc)

    def within_envelope(self, C: float, rtol: float = 1e-9) -> bool:
        return bool(np.all(self.psi <= self.envelope(C) * (1 + rtol)))

    def summary(self, C: float | None = None) -> dict:
        out = {"amplitude": self.amplitude, "psi0": float(self.psi[0]),
               "psi_final": float(self.psi[-1]), "a7_estimate": self.a7_constant()}
        if C is not None:
            out["a7_constant"] = C
            out["within_envelope"] = self.within_envelope(C)
        return out


def uniqueness_experiment(cfg: Config, amplitudes: Sequence[float], steps: int = 100,
                          perturb: str = "velocity", delta: float = DELTA,
                          dt: float | None = None) -> list[UniquenessMetrics]:
    """Run one reference and one perturbed run per amplitude in lockstep.

    ``perturb`` is ``"velocity"`` (projected smooth bump) or the name of a
    scalar that receives a nonnegative bump.
    """
    if not cfg.phys.use_F_plus:
        raise ValueError("the continuous-dependence experiment needs use_F_plus = true")
    model = Model.build(cfg)
    ref = initial_state(model)
    for name in ("T", "qv", "qc", "qr"):
        if np.min(getattr(ref, name)) < 0:
            raise ValueError(f"initial {name} must be nonnegative")
    h = dt if dt is not None else stable_dt(ref, model)
    runs = []
    for a in amplitudes:
        if perturb == "velocity":
            runs.append(perturb_velocity(ref, model, a))
        else:
            runs.append(perturb_field(ref, model, perturb, a))
    series = [[] for _ in amplitudes]
    shapes = [a7_shape(ref, model)]
    times = [ref.time]
    for i, s in enumerate(runs):
        series[i].append(psi_terms(s, ref, model, delta))
    for _ in range(steps):
        ref = step(ref, h, model)
        runs = [step(s, h, model) for s in runs]
        times.append(ref.time)
        shapes.append(a7_shape(ref, model))
        for i, s in enumerate(runs):
            series[i].append(psi_terms(s, ref, model, delta))
    t = np.array(times)
    shape = np.array(shapes)
    out = []
    for a, rows in zip(amplitudes, series):
        col = {k: np.array([r[k] for r in rows]) for k in rows[0]}
        out.append(UniquenessMetrics(a, t, col["v"], col["qv"], col["qr"], col["Q"], col["H"],
                                     col["psi"], shape))
    return out


def scaling_check(metrics: Sequence[UniquenessMetrics], factor: float = 3.0) -> dict:
    """Final Psi / amplitude^2 must agree across amplitudes within ``factor``."""
    ratios = [m.psi[-1] / m.amplitude**2 for m in metrics if m.amplitude > 0]
    spread = max(ratios) / min(ratios) if ratios and min(ratios) > 0 else float("inf")
    return {"ratios": ratios, "spread": spread, "passed": bool(spread <= factor)}
