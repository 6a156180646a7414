"""IMEX time stepping of the regularized moist primitive equations (T form).

One step of the default scheme:

1. two forward-Euler stages (Heun) of the explicit part: advection,
   Coriolis, pressure gradient, horizontal diffusion and microphysics, with
   conversion sinks taken at the new level; each stage ends with the
   barotropic projection and a fresh ``w`` and ``Phi``;
2. backward-Euler vertical diffusion per column for T and moisture, and for
   v when ``eps1 > 0``;
3. projection, ``w`` and ``Phi`` again.
"""
from __future__ import annotations

import dataclasses
import logging
import warnings

import numpy as np

from .config import Config
from .diagnostic import (ProjectionWorkspace, barotropic_project, diagnose_w,
                         hydrostatic_phi)
from .grid import MOISTURE, Grid, ModelState, make_grid, pad
from .microphysics import (conversion_rates, sedimentation, w_center)
from .operators import (DiffusionSpec, advect, dirichlet_pad, grad_h, implicit_vertical,
                        laplace_h, neumann_pad)

log = logging.getLogger(__name__)

SCALARS = ("T",) + MOISTURE


class NumericalFault(FloatingPointError):
    def __init__(self, field: str, step: int):
        super().__init__(f"non-finite values in {field} at step {step}")
        self.field = field
        self.step = step


class StabilityWarning(UserWarning):
    pass


@dataclasses.dataclass
class Model:
    """Configuration plus everything precomputed from it."""

    cfg: Config
    grid: Grid
    ws: ProjectionWorkspace
    f_T: np.ndarray
    vdiff: dict[str, DiffusionSpec]
    compat_tol: float = 1e-8

    @classmethod
    def build(cls, cfg: Config) -> "Model":
        grid = make_grid(cfg.run, cfg.phys)
        phys, prof = cfg.phys, cfg.profiles
        ws = ProjectionWorkspace(grid, solver=cfg.run.projection_solver)

        def c_T(p):
            return phys.g * p / (phys.R * prof.T_bar_at(p))

        def c_theta(p):
            return phys.g * p / (phys.R * prof.theta_bar_at(p))

        vdiff = {"T": DiffusionSpec(phys.nu_T, c_T), "v": DiffusionSpec(phys.eps1, c_theta)}
        for name in MOISTURE:
            vdiff[name] = DiffusionSpec(phys.nu_q, c_T)
        return cls(cfg, grid, ws, thermal_forcing(cfg, grid), vdiff)

    @property
    def phys(self):
        return self.cfg.phys

    def mu(self, name: str) -> float:
        if name in ("v1", "v2"):
            return self.phys.mu_v
        return self.phys.mu_T if name == "T" else self.phys.mu_q


def thermal_forcing(cfg: Config, grid: Grid) -> np.ndarray:
    run = cfg.run
    if run.forcing == "zero":
        return grid.zeros()
    if run.forcing == "constant":
        return np.full(grid.shape, run.forcing_amplitude)
    cx, cy, cp = run.forcing_center_xyz
    X, Y, P = grid.mesh()
    r2 = ((X / grid.Lx - cx) ** 2 + (Y / grid.Ly - cy) ** 2
          + ((P - grid.p0) / (grid.p1 - grid.p0) - cp) ** 2)
    return run.forcing_amplitude * np.exp(-r2 / run.forcing_width**2)


# --- boundaries --------------------------------------------------------------


def scalar_bc(model: Model, name: str) -> dict:
    """Ghost-fill closures of one scalar: Robin laterally and at the bottom."""
    bd = model.cfg.bdata
    return {"lateral": ("robin", bd.lateral(name)), "top": "neumann",
            "bottom": ("robin", bd.surface(name))}


def apply_boundaries(state: ModelState, model: Model) -> dict[str, np.ndarray]:
    """Ghost-padded copies of every prognostic field."""
    g = model.grid
    out = {"v1": dirichlet_pad(state.v1, g), "v2": dirichlet_pad(state.v2, g)}
    for name in SCALARS:
        out[name] = pad(getattr(state, name), g, **scalar_bc(model, name))
    return out


# --- time step control -------------------------------------------------------


def dt_limits(state: ModelState, model: Model) -> dict[str, float]:
    g, phys = model.grid, model.phys
    rate = (np.abs(state.v1) / g.dx + np.abs(state.v2) / g.dy
            + np.maximum(np.abs(state.w[..., :-1]), np.abs(state.w[..., 1:])) / g.dp)
    amax = float(rate.max())
    mu = max(phys.mu_v, phys.mu_T, phys.mu_q)
    c = g.p_levels / (phys.R * model.cfg.profiles.theta_bar_at(g.p_levels))
    inf = float("inf")
    return {
        "advection": 1.0 / amax if amax > 0 else inf,
        "diffusion": 1.0 / (2 * mu * (1 / g.dx**2 + 1 / g.dy**2)) if mu > 0 else inf,
        "sedimentation": g.dp / (phys.V_t * c.max()) if phys.V_t > 0 else inf,
    }


def stable_dt(state: ModelState, model: Model, safety: float | None = None,
              floor: float = 1e-6) -> float:
    safety = model.cfg.run.cfl_safety if safety is None else safety
    limit = min(dt_limits(state, model).values())
    if not np.isfinite(limit):
        warnings.warn("no active stability limit; using floor time step", StabilityWarning)
        return floor
    return safety * limit


def cfl_number(state: ModelState, model: Model, dt: float) -> float:
    adv = dt_limits(state, model)["advection"]
    return dt / adv if np.isfinite(adv) else 0.0


# --- explicit part -------------------------------------------------------------


def _diagnose(state: ModelState, model: Model) -> None:
    """Recompute w and Phi in place (velocity must already be projected)."""
    state.w = diagnose_w(state.v1, state.v2, model.grid, model.compat_tol)
    state.Phi = hydrostatic_phi(state.T, state.Phi_s, model.grid, model.phys.R)


def _project(state: ModelState, model: Model) -> np.ndarray:
    state.v1, state.v2, psi = barotropic_project(state.v1, state.v2, model.ws)
    return psi


def explicit_tendencies(state: ModelState, model: Model) -> dict[str, np.ndarray]:
    """Transport, Coriolis, pressure force and horizontal diffusion."""
    g, phys, run = model.grid, model.phys, model.cfg.run
    pads = apply_boundaries(state, model)
    v1p, v2p, w = pads["v1"], pads["v2"], state.w
    # pressure force from the baroclinic part; Phi_s enters through the projection
    phi_b = hydrostatic_phi(state.T, np.zeros_like(state.Phi_s), g, phys.R)
    gx, gy = grad_h(neumann_pad(phi_b, g), g)
    out = {
        "v1": advect(v1p, v1p, v2p, w, g, run.momentum_advection)
        + phys.mu_v * laplace_h(v1p, g) + phys.f0 * state.v2 - gx,
        "v2": advect(v2p, v1p, v2p, w, g, run.momentum_advection)
        + phys.mu_v * laplace_h(v2p, g) - phys.f0 * state.v1 - gy,
        "T": advect(pads["T"], v1p, v2p, w, g, "centered")
        + phys.mu_T * laplace_h(pads["T"], g) + model.f_T,
    }
    for name in MOISTURE:
        out[name] = (advect(pads[name], v1p, v2p, w, g, run.moisture_advection)
                     + phys.mu_q * laplace_h(pads[name], g))
    return out


def euler_stage(state: ModelState, dt: float, model: Model) -> tuple[ModelState, np.ndarray]:
    """Forward-Euler stage with semi-implicit conversion sinks.

    Condensation is taken implicit in q_v, autoconversion and collection in
    q_c, evaporation in q_r; each converted amount is added to the receiving
    species unchanged, so total water is exchanged exactly.
    """
    g, phys = model.grid, model.phys
    X = explicit_tendencies(state, model)
    new = state.copy()
    new.v1 = state.v1 + dt * X["v1"]
    new.v2 = state.v2 + dt * X["v2"]
    T, qv, qc, qr = state.T, state.qv, state.qc, state.qr
    if phys.sources:
        r = conversion_rates(T, qv, qc, qr, state.w, g, phys)
        X["qr"] = X["qr"] + sedimentation(qr, g, phys, model.cfg.profiles)
        X["T"] = X["T"] + phys.R * T * w_center(state.w) / (phys.c_p * g.p_levels)
        if phys.use_F_plus:
            qv_tmp = (qv + dt * X["qv"]) / (1 + dt * r.s_cond)
            cond = r.s_cond * qv_tmp
        else:
            # F may be negative; keep condensation explicit
            qv_tmp = qv + dt * (X["qv"] - r.cond)
            cond = r.cond
        new.qc = (qc + dt * X["qc"] + dt * cond) / (1 + dt * (r.s_auto + r.s_coll))
        ak = (r.s_auto + r.s_coll) * new.qc
        new.qr = (qr + dt * X["qr"] + dt * ak) / (1 + dt * r.s_evap)
        evap = r.s_evap * new.qr
        new.qv = qv_tmp + dt * evap
        new.T = T + dt * (X["T"] + phys.L / phys.c_p * (cond - evap))
    else:
        X["T"] = X["T"] + phys.R * T * w_center(state.w) / (phys.c_p * g.p_levels)
        for name in SCALARS:
            setattr(new, name, getattr(state, name) + dt * X[name])
    psi = _project(new, model)
    _diagnose(new, model)
    return new, psi


def implicit_part(state: ModelState, dt: float, model: Model) -> None:
    g = model.grid
    for name in SCALARS:
        spec = model.vdiff[name]
        if spec.nu > 0:
            bottom = ("robin", _surface_target(model, name))
            setattr(state, name, implicit_vertical(getattr(state, name), dt, spec, g, bottom))
    spec = model.vdiff["v"]
    if spec.nu > 0:
        state.v1 = implicit_vertical(state.v1, dt, spec, g)
        state.v2 = implicit_vertical(state.v2, dt, spec, g)


def _surface_target(model: Model, name: str):
    return np.asarray(model.cfg.bdata.surface(name), dtype=float)


def step(state: ModelState, dt: float, model: Model) -> ModelState:
    if dt <= 0:
        raise ValueError("dt must be > 0")
    scheme = model.cfg.run.scheme
    s1, psi1 = euler_stage(state, dt, model)
    if scheme == "rk2":
        s2, psi2 = euler_stage(s1, dt, model)
        new = s2
        for name in ("v1", "v2") + SCALARS:
            setattr(new, name, 0.5 * (getattr(state, name) + getattr(s2, name)))
        psi = 0.5 * (psi1 + psi2)
    else:
        new, psi = s1, psi1
    implicit_part(new, dt, model)
    psi = psi + _project(new, model)
    new.Phi_s = psi / dt
    _diagnose(new, model)
    new.time = state.time + dt
    new.step = state.step + 1
    bad = new.is_finite()
    if bad is not None:
        raise NumericalFault(bad, new.step)
    return new


# --- initial conditions ------------------------------------------------------


def _bump(grid: Grid, center=(0.5, 0.5, 0.6), radius: float = 0.2) -> np.ndarray:
    X, Y, P = grid.mesh()
    r2 = ((X / grid.Lx - center[0]) ** 2 + (Y / grid.Ly - center[1]) ** 2
          + ((P - grid.p0) / (grid.p1 - grid.p0) - center[2]) ** 2)
    return np.exp(-r2 / radius**2)


def _smooth_velocity(grid: Grid, rng: np.random.Generator, modes: int = 3):
    """Random smooth velocity vanishing on the lateral walls."""
    X, Y, P = grid.mesh()
    xs, ys = X / grid.Lx, Y / grid.Ly
    ps = (P - grid.p0) / (grid.p1 - grid.p0)
    out = []
    for _ in range(2):
        f = np.zeros(grid.shape)
        for m in range(1, modes + 1):
            for n in range(1, modes + 1):
                a = rng.standard_normal(2) / (m * n)
                f += (np.sin(m * np.pi * xs) * np.sin(n * np.pi * ys)
                      * (a[0] + a[1] * np.cos(np.pi * ps)))
        out.append(f)
    return out


def initial_state(model: Model) -> ModelState:
    """Initial fields for the configured scenario, projected and diagnosed."""
    cfg, g = model.cfg, model.grid
    run, bd = cfg.run, cfg.bdata
    rng = np.random.default_rng(run.seed)
    s = ModelState.zeros(g)
    radius = run.radius / max(g.Lx, g.Ly) if cfg.phys.mode == "physical" else run.radius
    bump = _bump(g, radius=radius)
    T_ref = float(np.mean(bd.T_star))
    s.T[:] = T_ref
    s.qv[:] = float(np.mean(bd.qv_star))
    kind = run.initial
    if kind == "warm_bubble":
        s.T += run.amplitude * T_ref * bump
        u, v = _smooth_velocity(g, rng)
        s.v1, s.v2 = run.noise * u, run.noise * v
    elif kind == "saturated_blob":
        qvs = cfg.phys.q_vs
        s.qv = s.qv + (run.qv_peak - s.qv) * bump
        # pre-existing cloud and rain inside the blob
        s.qc = 0.1 * qvs * bump
        s.qr = 0.05 * qvs * bump
        s.T += run.amplitude * T_ref * bump
        u, v = _smooth_velocity(g, rng)
        s.v1, s.v2 = run.noise * u, run.noise * v
    elif kind == "decay":
        s.T[:] = 0.0
        s.qv[:] = 0.0
        u, v = _smooth_velocity(g, rng)
        s.v1, s.v2 = run.amplitude * u, run.amplitude * v
    _project(s, model)
    _diagnose(s, model)
    return s


def perturb_velocity(state: ModelState, model: Model, amplitude: float,
                     seed: int = 1) -> ModelState:
    """Copy of ``state`` plus a projected smooth velocity bump of max size ``amplitude``."""
    out = state.copy()
    if amplitude == 0.0:
        return out
    g = model.grid
    bump = _bump(g, center=(0.4, 0.6, 0.5), radius=0.25)
    X, Y, _ = g.mesh()
    wall = np.sin(np.pi * X / g.Lx) * np.sin(np.pi * Y / g.Ly)
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(2)
    out.v1 = state.v1 + amplitude * a[0] * wall * bump
    out.v2 = state.v2 + amplitude * a[1] * wall * bump
    _project(out, model)
    _diagnose(out, model)
    return out


def perturb_field(state: ModelState, model: Model, name: str, amplitude: float) -> ModelState:
    """Copy of ``state`` with a nonnegative bump added to scalar ``name``."""
    out = state.copy()
    bump = _bump(model.grid, center=(0.5, 0.5, 0.6), radius=0.2)
    setattr(out, name, getattr(state, name) + amplitude * bump)
    _diagnose(out, model)
    return out


def n_steps(model: Model, state: ModelState) -> int:
    run = model.cfg.run
    if run.steps > 0:
        return run.steps
    if run.t_end == 0:
        return 0
    dt = run.dt if run.dt > 0 else stable_dt(state, model)
    return int(np.ceil(run.t_end / dt - 1e-9))


def integrate(model: Model, state: ModelState, nsteps: int, dt: float | None = None,
              callback=None) -> ModelState:
    """Advance ``nsteps`` steps; ``dt`` None means the configured/adaptive step."""
    run = model.cfg.run
    for _ in range(nsteps):
        h = dt if dt is not None else (run.dt if run.dt > 0 else stable_dt(state, model))
        state = step(state, h, model)
        if callback is not None:
            callback(state, h)
    return state
