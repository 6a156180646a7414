"""Warm-rain source terms in temperature form.

Sign conventions: pressure increases downward, so ``w < 0`` is ascent and
``w_minus = max(-w, 0)`` gates condensation to rising air. ``V_t`` is the
(positive) fall speed; rain moves toward larger p and leaves through the
bottom face.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .config import PhysParams, ReferenceProfiles
from .grid import Grid


def phi_cutoff(T, params: PhysParams):
    """Temperature cutoff used inside F.

    ``max(T_*/2, T)`` up to ``T*``, then a linear ramp from ``T*`` down to
    zero at ``2 T*``, and zero beyond.
    """
    T = np.asarray(T, dtype=float)
    lo, hi = params.T_star_lo, params.T_star_hi
    core = np.maximum(0.5 * lo, T)
    ramp = hi * np.clip((2 * hi - T) / hi, 0.0, 1.0)
    return np.where(T <= hi, core, ramp)


def saturation_rate_F(T, p, params: PhysParams):
    phi = phi_cutoff(T, params)
    p = np.asarray(p, dtype=float)
    num = params.q_vs * phi / p * (params.L * params.R - params.c_p * params.R_v * phi)
    den = params.c_p * params.R_v * phi**2 + params.q_vs * params.L**2
    F = num / den
    return np.maximum(F, 0.0) if params.use_F_plus else F


def tau_clamp(qr):
    return np.clip(np.asarray(qr, dtype=float), 0.0, 1.0)


def regularized_heaviside(r, eps2: float):
    if eps2 <= 0:
        raise ValueError("eps2 must be > 0")
    return np.clip(np.asarray(r, dtype=float) / eps2, 0.0, 1.0)


def w_minus(w_face: np.ndarray) -> np.ndarray:
    """Face average to cell centres, then the negative part."""
    wc = 0.5 * (w_face[..., :-1] + w_face[..., 1:])
    return np.maximum(-wc, 0.0)


def w_center(w_face: np.ndarray) -> np.ndarray:
    return 0.5 * (w_face[..., :-1] + w_face[..., 1:])


def sedimentation_flux(qr: np.ndarray, grid: Grid, params: PhysParams,
                       profiles: ReferenceProfiles) -> np.ndarray:
    """Downward rain flux ``V_t p q_r / (R theta_bar)`` on the nlev+1 faces.

    Donor cell is the level above each face; nothing enters through p0 and
    the last entry is the outflow through the bottom face.
    """
    p = grid.p_levels
    c = p / (params.R * profiles.theta_bar_at(p))
    flux = np.zeros(qr.shape[:2] + (grid.nlev + 1,))
    flux[:, :, 1:] = params.V_t * c * qr
    return flux


def sedimentation(qr: np.ndarray, grid: Grid, params: PhysParams,
                  profiles: ReferenceProfiles) -> np.ndarray:
    """Tendency of q_r from falling rain (flux divergence in p)."""
    return -np.diff(sedimentation_flux(qr, grid, params, profiles), axis=2) / grid.dp


@dataclasses.dataclass
class SourceTendencies:
    dT: np.ndarray
    dqv: np.ndarray
    dqc: np.ndarray
    dqr: np.ndarray
    sed: np.ndarray


@dataclasses.dataclass
class Rates:
    """Conversion rates written as ``sink = s * owner`` where possible.

    ``cond`` is C = w^- F H(q_v - q_vs), ``evap`` is E, ``auto`` is A and
    ``coll`` is K; the ``s_*`` arrays are the same terms divided by the
    species they deplete (zero where that species vanishes).
    """

    cond: np.ndarray
    evap: np.ndarray
    auto: np.ndarray
    coll: np.ndarray
    s_cond: np.ndarray
    s_evap: np.ndarray
    s_auto: np.ndarray
    s_coll: np.ndarray


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def conversion_rates(T, qv, qc, qr, w_face, grid: Grid, params: PhysParams) -> Rates:
    p = grid.p_levels[None, None, :]
    F = saturation_rate_F(T, p, params)
    cond = w_minus(w_face) * F * regularized_heaviside(qv - params.q_vs, params.eps2)
    tau = tau_clamp(qr)
    evap = params.k3 * tau * np.maximum(params.q_vs - qv, 0.0)
    auto = params.k1 * np.maximum(qc - params.q_crit, 0.0)
    coll = params.k2 * qc * tau
    return Rates(cond, evap, auto, coll,
                 _safe_ratio(cond, qv), _safe_ratio(evap, qr),
                 _safe_ratio(auto, qc), params.k2 * tau)


def check_finite(**fields) -> None:
    for name, arr in fields.items():
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite values in {name}")


def assemble_sources(T, qv, qc, qr, w_face, grid: Grid, params: PhysParams,
                     profiles: ReferenceProfiles, f_T=0.0) -> SourceTendencies:
    """Explicit right-hand sides of the T and moisture equations."""
    check_finite(T=T, qv=qv, qc=qc, qr=qr, w=w_face)
    r = conversion_rates(T, qv, qc, qr, w_face, grid, params)
    p = grid.p_levels[None, None, :]
    sed = sedimentation(qr, grid, params, profiles)
    heat = params.R * T * w_center(w_face) / (params.c_p * p)
    dT = heat + params.L / params.c_p * (r.cond - r.evap) + f_T
    return SourceTendencies(
        dT=dT,
        dqv=r.evap - r.cond,
        dqc=r.cond - r.auto - r.coll,
        dqr=r.auto + r.coll - r.evap + sed,
        sed=sed,
    )
