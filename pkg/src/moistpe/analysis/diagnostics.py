"""Per-step diagnostics and the maximum-principle bound monitor."""
from __future__ import annotations

import dataclasses

import numpy as np

from ..diagnostic import column_divergence, continuity_residual, velocity_scale
from ..grid import MOISTURE, ModelState
from ..operators import ddp, gradient_inner, norms, weighted_norm_w
from ..stepper import apply_boundaries

SCALARS = ("T",) + MOISTURE
BOUNDED = ("qv", "qc", "qr", "T")
NEG_TOL = 1e-12
UPPER_TOL = 1e-8


@dataclasses.dataclass(frozen=True)
class Violation:
    field: str
    kind: str  # "upper" or "lower"
    step: int
    index: tuple[int, int, int]
    value: float
    bound: float

    @property
    def magnitude(self) -> float:
        return abs(self.value - self.bound)


def max_principle_bounds(state: ModelState, bdata) -> dict[str, float]:
    """Upper bounds ``max(|f0|_inf, |surface target|_inf, |lateral target|_inf)``."""
    out = {}
    for name in BOUNDED:
        vals = [np.max(np.abs(getattr(state, name))),
                np.max(np.abs(np.asarray(bdata.surface(name), dtype=float))),
                np.max(np.abs(np.asarray(bdata.lateral(name), dtype=float)))]
        out[name] = float(max(vals))
    return out


def check_bounds(state: ModelState, bounds: dict[str, float], upper_tol: float = UPPER_TOL,
                 neg_tol: float = NEG_TOL) -> list[Violation]:
    """Worst upper and lower violation of each bounded field, if any."""
    found = []
    for name in BOUNDED:
        f = getattr(state, name)
        imax = np.unravel_index(np.argmax(f), f.shape)
        if f[imax] > bounds[name] + upper_tol:
            found.append(Violation(name, "upper", state.step, tuple(int(i) for i in imax),
                                   float(f[imax]), bounds[name]))
        imin = np.unravel_index(np.argmin(f), f.shape)
        if f[imin] < -neg_tol:
            found.append(Violation(name, "lower", state.step, tuple(int(i) for i in imin),
                                   float(f[imin]), 0.0))
    return found


@dataclasses.dataclass
class DiagnosticsRecord:
    step: int = 0
    time: float = 0.0
    dt: float = 0.0
    v_L2: float = 0.0
    v_H1: float = 0.0
    T_L2: float = 0.0
    T_H1: float = 0.0
    qv_L2: float = 0.0
    qv_H1: float = 0.0
    qc_L2: float = 0.0
    qc_H1: float = 0.0
    qr_L2: float = 0.0
    qr_H1: float = 0.0
    v_dp_w: float = 0.0
    T_dp_w: float = 0.0
    qv_dp_w: float = 0.0
    qc_dp_w: float = 0.0
    qr_dp_w: float = 0.0
    grad_v_sq: float = 0.0
    grad_T_sq: float = 0.0
    grad_qv_sq: float = 0.0
    grad_qc_sq: float = 0.0
    grad_qr_sq: float = 0.0
    T_min: float = 0.0
    T_max: float = 0.0
    qv_min: float = 0.0
    qv_max: float = 0.0
    qc_min: float = 0.0
    qc_max: float = 0.0
    qr_min: float = 0.0
    qr_max: float = 0.0
    vmax: float = 0.0
    flag_qv: bool = False
    flag_qc: bool = False
    flag_qr: bool = False
    flag_T: bool = False
    flag_negative: bool = False
    continuity_residual: float = 0.0
    projection_residual: float = 0.0
    top_divergence: float = 0.0
    wall_normal_dv: float = 0.0

    @classmethod
    def fields(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def as_row(self) -> list:
        return [getattr(self, name) for name in self.fields()]

    @classmethod
    def from_row(cls, row: dict[str, str]) -> "DiagnosticsRecord":
        kwargs = {}
        for f in dataclasses.fields(cls):
            text = row[f.name]
            if f.type in ("bool", bool):
                kwargs[f.name] = text in ("True", "true", "1")
            elif f.type in ("int", int):
                kwargs[f.name] = int(text)
            else:
                kwargs[f.name] = float(text)
        return cls(**kwargs)


def _grad_sq(fp: np.ndarray, grid) -> float:
    return gradient_inner(fp, fp, grid)


def record_diagnostics(state: ModelState, model, bounds: dict[str, float] | None = None,
                       dt: float = 0.0) -> tuple[DiagnosticsRecord, list[Violation]]:
    """Norms, dissipation integrals, extrema, bound flags and constraint residuals."""
    g, phys, prof = model.grid, model.phys, model.cfg.profiles
    rec = DiagnosticsRecord(step=state.step, time=state.time, dt=dt)
    n1, n2 = norms(state.v1, g), norms(state.v2, g)
    rec.v_L2 = float(np.hypot(n1["L2"], n2["L2"]))
    rec.v_H1 = float(np.hypot(n1["H1_full"], n2["H1_full"]))
    pads = apply_boundaries(state, model)
    rec.grad_v_sq = _grad_sq(pads["v1"], g) + _grad_sq(pads["v2"], g)
    rec.v_dp_w = float(np.hypot(weighted_norm_w(ddp(state.v1, g), g, phys.g, phys.R, prof.theta_bar_at),
                                weighted_norm_w(ddp(state.v2, g), g, phys.g, phys.R, prof.theta_bar_at)))
    for name in SCALARS:
        f = getattr(state, name)
        n = norms(f, g)
        setattr(rec, f"{name}_L2", n["L2"])
        setattr(rec, f"{name}_H1", n["H1_full"])
        setattr(rec, f"grad_{name}_sq", _grad_sq(pads[name], g))
        setattr(rec, f"{name}_dp_w", weighted_norm_w(ddp(f, g), g, phys.g, phys.R, prof.theta_bar_at))
        setattr(rec, f"{name}_min", float(f.min()))
        setattr(rec, f"{name}_max", float(f.max()))
    scale = velocity_scale(state.v1, state.v2)
    rec.vmax = scale
    rec.continuity_residual = float(np.max(np.abs(continuity_residual(state.v1, state.v2, state.w, g))))
    rec.projection_residual = float(np.max(np.abs(column_divergence(state.v1, state.v2, model.ws))))
    # diagnostics for conditions the scheme does not impose pointwise
    div_top = continuity_residual(state.v1, state.v2, np.zeros_like(state.w), g)[:, :, 0]
    rec.top_divergence = float(np.max(np.abs(div_top)))
    rec.wall_normal_dv = _wall_normal_derivative(state, g)
    violations = []
    if bounds is not None:
        violations = check_bounds(state, bounds)
        for v in violations:
            if v.kind == "lower":
                rec.flag_negative = True
            else:
                setattr(rec, f"flag_{v.field}", True)
    return rec, violations


def _wall_normal_derivative(state: ModelState, g) -> float:
    """max |d_n v| on the lateral walls, one-sided from the zero wall value."""
    vals = []
    for f in (state.v1, state.v2):
        vals += [np.abs(f[0]) / (0.5 * g.dx), np.abs(f[-1]) / (0.5 * g.dx),
                 np.abs(f[:, 0]) / (0.5 * g.dy), np.abs(f[:, -1]) / (0.5 * g.dy)]
    return float(max(v.max() for v in vals))
