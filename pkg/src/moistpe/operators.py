"""Finite-difference operators on the collocated grid.

Horizontal operators take ghost-padded input (see :func:`moistpe.grid.pad`)
and return interior-shaped output. Vertical diffusion works in conservative
flux form with the boundary closure passed explicitly, so the explicit
operator and the implicit tridiagonal solve share one set of coefficients.
"""
from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

from .grid import Grid, pad


def inner(f: np.ndarray, g: np.ndarray, grid: Grid) -> float:
    """Midpoint-rule L2 inner product over the domain."""
    return float(np.sum(f * g) * grid.cell_volume)


def grad_h(fp: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Centered horizontal gradient of a padded field."""
    gx = (fp[2:, 1:-1, 1:-1] - fp[:-2, 1:-1, 1:-1]) / (2 * grid.dx)
    gy = (fp[1:-1, 2:, 1:-1] - fp[1:-1, :-2, 1:-1]) / (2 * grid.dy)
    return gx, gy


def div_h(up: np.ndarray, vp: np.ndarray, grid: Grid) -> np.ndarray:
    """Centered horizontal divergence of a padded vector field.

    Equal to the difference of face-averaged normal velocities, so with the
    mirror (no-slip) ghost fill the wall fluxes vanish exactly.
    """
    return ((up[2:, 1:-1, 1:-1] - up[:-2, 1:-1, 1:-1]) / (2 * grid.dx)
            + (vp[1:-1, 2:, 1:-1] - vp[1:-1, :-2, 1:-1]) / (2 * grid.dy))


def laplace_h(fp: np.ndarray, grid: Grid) -> np.ndarray:
    """Five-point horizontal Laplacian of a padded field."""
    c = fp[1:-1, 1:-1, 1:-1]
    return ((fp[2:, 1:-1, 1:-1] - 2 * c + fp[:-2, 1:-1, 1:-1]) / grid.dx**2
            + (fp[1:-1, 2:, 1:-1] - 2 * c + fp[1:-1, :-2, 1:-1]) / grid.dy**2)


def face_gradients(fp: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """One-sided differences on every x face (nx+1) and y face (ny+1)."""
    gx = (fp[1:, 1:-1, 1:-1] - fp[:-1, 1:-1, 1:-1]) / grid.dx
    gy = (fp[1:-1, 1:, 1:-1] - fp[1:-1, :-1, 1:-1]) / grid.dy
    return gx, gy


def gradient_inner(fp: np.ndarray, gp: np.ndarray, grid: Grid) -> float:
    """Face-quadrature <grad f, grad g> matching :func:`laplace_h`.

    Boundary faces get half weight (trapezoid rule across the wall), which
    makes ``<laplace_h f, g> = -gradient_inner(f, g)`` exact when both fields
    carry the mirror Dirichlet fill.
    """
    total = 0.0
    for a, b, axis in zip(face_gradients(fp, grid), face_gradients(gp, grid), (0, 1)):
        prod = a * b
        wts = np.ones(prod.shape[axis])
        wts[0] = wts[-1] = 0.5
        shape = [1, 1, 1]
        shape[axis] = -1
        total += float(np.sum(prod * wts.reshape(shape)))
    return total * grid.cell_volume


def ddp(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Pressure derivative: centered inside, second-order one-sided at the ends."""
    return np.gradient(f, grid.dp, axis=2, edge_order=2)


def ddp_faces(f: np.ndarray, grid: Grid) -> np.ndarray:
    """(f[k+1] - f[k]) / dp on the nlev-1 interior pressure faces."""
    return np.diff(f, axis=2) / grid.dp


# --- vertical diffusion ----------------------------------------------------


@dataclasses.dataclass(frozen=True)
class DiffusionSpec:
    """``nu * m d/dp (c(p)^2 d/dp (m f))`` with ``m = (p0/p)**exponent``.

    ``weight`` maps pressure to c(p), e.g. ``g p / (R T_bar(p))``.
    """

    nu: float
    weight: Callable[[np.ndarray], np.ndarray]
    exponent: float = 0.0

    def face_coeff(self, grid: Grid) -> np.ndarray:
        return self.nu * self.weight(grid.p_faces) ** 2

    def conjugation(self, grid: Grid) -> np.ndarray:
        return (grid.p0 / grid.p_levels) ** self.exponent


def _robin_factor(grid: Grid) -> float:
    # flux through a Robin face: c^2 (target - f_edge) / (1 + dp/2)
    return 1.0 / (1.0 + 0.5 * grid.dp)


def _boundary_flux(bc, edge: np.ndarray, coeff: float, grid: Grid, outward: float):
    if bc == "neumann":
        return np.zeros_like(edge)
    kind, target = bc
    if kind != "robin":
        raise ValueError(f"vertical closure must be neumann or robin, got {bc!r}")
    # d_p f on the face; outward = +1 on the bottom face, -1 on the top face
    return outward * coeff * (np.asarray(target, dtype=float) - edge) * _robin_factor(grid)


def vertical_diffusion(f: np.ndarray, spec: DiffusionSpec, grid: Grid,
                       top="neumann", bottom="neumann") -> np.ndarray:
    """Explicit application of the flux-form vertical diffusion operator."""
    m = spec.conjugation(grid)
    u = f * m
    coeff = spec.face_coeff(grid)
    flux = np.empty(f.shape[:2] + (grid.nlev + 1,))
    flux[:, :, 1:-1] = coeff[1:-1] * np.diff(u, axis=2) / grid.dp
    flux[:, :, 0] = _boundary_flux(top, u[:, :, 0], coeff[0], grid, -1.0)
    flux[:, :, -1] = _boundary_flux(bottom, u[:, :, -1], coeff[-1], grid, 1.0)
    return m * np.diff(flux, axis=2) / grid.dp


def solve_tridiagonal(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
                      rhs: np.ndarray) -> np.ndarray:
    """Thomas algorithm along the last axis, vectorised over leading axes.

    ``lower[..., 0]`` and ``upper[..., -1]`` are ignored. Intended for the
    diagonally dominant systems produced by implicit diffusion.
    """
    n = rhs.shape[-1]
    cp = np.empty_like(rhs)
    dp = np.empty_like(rhs)
    lower = np.broadcast_to(lower, rhs.shape)
    diag = np.broadcast_to(diag, rhs.shape)
    upper = np.broadcast_to(upper, rhs.shape)
    cp[..., 0] = upper[..., 0] / diag[..., 0]
    dp[..., 0] = rhs[..., 0] / diag[..., 0]
    for k in range(1, n):
        denom = diag[..., k] - lower[..., k] * cp[..., k - 1]
        cp[..., k] = upper[..., k] / denom
        dp[..., k] = (rhs[..., k] - lower[..., k] * dp[..., k - 1]) / denom
    x = np.empty_like(rhs)
    x[..., -1] = dp[..., -1]
    for k in range(n - 2, -1, -1):
        x[..., k] = dp[..., k] - cp[..., k] * x[..., k + 1]
    return x


def implicit_vertical(f: np.ndarray, dt: float, spec: DiffusionSpec, grid: Grid,
                      bottom="neumann") -> np.ndarray:
    """Backward-Euler vertical diffusion: solve (I - dt A) x = f per column.

    Top closure is always zero flux; ``bottom`` is ``"neumann"`` or
    ``("robin", target)``. Only the unconjugated operator is supported.
    """
    if spec.exponent != 0.0:
        raise ValueError("implicit solve supports exponent 0 only")
    n = grid.nlev
    coeff = spec.face_coeff(grid) / grid.dp**2
    lower = np.zeros(n)
    upper = np.zeros(n)
    lower[1:] = -dt * coeff[1:-1]
    upper[:-1] = -dt * coeff[1:-1]
    diag = 1.0 - lower - upper
    rhs = f.copy()
    if bottom != "neumann":
        kind, target = bottom
        if kind != "robin":
            raise ValueError(f"bottom closure must be neumann or robin, got {bottom!r}")
        r = dt * spec.face_coeff(grid)[-1] * _robin_factor(grid) / grid.dp
        diag = np.broadcast_to(diag, f.shape).copy()
        diag[..., -1] += r
        rhs[..., -1] += r * np.asarray(target, dtype=float)
    return solve_tridiagonal(lower, diag, upper, rhs)


# --- advection -------------------------------------------------------------


def face_velocities(v1p: np.ndarray, v2p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Face-averaged normal velocities: (nx+1, ny, nlev) and (nx, ny+1, nlev)."""
    u = 0.5 * (v1p[1:, 1:-1, 1:-1] + v1p[:-1, 1:-1, 1:-1])
    v = 0.5 * (v2p[1:-1, 1:, 1:-1] + v2p[1:-1, :-1, 1:-1])
    return u, v


def velocity_divergence(v1p, v2p, w, grid: Grid) -> np.ndarray:
    """Discrete divergence of the face velocity field (horizontal + vertical)."""
    u, v = face_velocities(v1p, v2p)
    return (np.diff(u, axis=0) / grid.dx + np.diff(v, axis=1) / grid.dy
            + np.diff(w, axis=2) / grid.dp)


def advect(fp: np.ndarray, v1p: np.ndarray, v2p: np.ndarray, w: np.ndarray, grid: Grid,
           scheme: str = "centered") -> np.ndarray:
    """Advective tendency -(v . grad f + w d_p f).

    ``centered`` is the skew-symmetric split of the flux form (energy
    neutral for any face velocity with zero wall normal component);
    ``upwind`` is first-order donor cell written in advective form, which is
    monotone under the CFL limit whatever the divergence.
    """
    u, v = face_velocities(v1p, v2p)
    f = fp[1:-1, 1:-1, 1:-1]
    # neighbours across each face
    fxl, fxr = fp[:-1, 1:-1, 1:-1], fp[1:, 1:-1, 1:-1]
    fyl, fyr = fp[1:-1, :-1, 1:-1], fp[1:-1, 1:, 1:-1]
    fzl, fzr = fp[1:-1, 1:-1, :-1], fp[1:-1, 1:-1, 1:]
    div = (np.diff(u, axis=0) / grid.dx + np.diff(v, axis=1) / grid.dy
           + np.diff(w, axis=2) / grid.dp)
    if scheme == "centered":
        fx = u * 0.5 * (fxl + fxr)
        fy = v * 0.5 * (fyl + fyr)
        fz = w * 0.5 * (fzl + fzr)
        flux_div = np.diff(fx, axis=0) / grid.dx + np.diff(fy, axis=1) / grid.dy \
            + np.diff(fz, axis=2) / grid.dp
        return -flux_div + 0.5 * f * div
    if scheme == "upwind":
        fx = np.maximum(u, 0) * fxl + np.minimum(u, 0) * fxr
        fy = np.maximum(v, 0) * fyl + np.minimum(v, 0) * fyr
        fz = np.maximum(w, 0) * fzl + np.minimum(w, 0) * fzr
        flux_div = np.diff(fx, axis=0) / grid.dx + np.diff(fy, axis=1) / grid.dy \
            + np.diff(fz, axis=2) / grid.dp
        return -flux_div + f * div
    raise ValueError(f"unknown advection scheme {scheme!r}")


# --- norms -----------------------------------------------------------------


def pressure_weight(grid: Grid, g: float, R: float, theta_bar) -> np.ndarray:
    """g p / (R theta_bar(p)) at cell centres, shaped to broadcast over fields."""
    p = grid.p_levels
    return (g * p / (R * theta_bar(p)))[None, None, :]


def weighted_norm_w(f: np.ndarray, grid: Grid, g: float, R: float, theta_bar) -> float:
    """|| (g p / (R theta_bar)) f ||_L2 by the midpoint rule."""
    wf = pressure_weight(grid, g, R, theta_bar) * f
    return float(np.sqrt(np.sum(wf * wf) * grid.cell_volume))


def norms(f: np.ndarray, grid: Grid) -> dict[str, float]:
    """L2, horizontal/full H1 and sup norms of a cell-centred field."""
    vol = grid.cell_volume
    l2sq = float(np.sum(f * f) * vol)
    gx = np.gradient(f, grid.dx, axis=0, edge_order=2)
    gy = np.gradient(f, grid.dy, axis=1, edge_order=2)
    gp = ddp(f, grid)
    gh = float(np.sum(gx * gx + gy * gy) * vol)
    gv = float(np.sum(gp * gp) * vol)
    return {
        "L2": np.sqrt(l2sq),
        "H1_horizontal": np.sqrt(l2sq + gh),
        "H1_full": np.sqrt(l2sq + gh + gv),
        "Linf": float(np.max(np.abs(f))) if f.size else 0.0,
    }


# --- empirical trilinear-estimate ratios ------------------------------------


def _band_limited(rng: np.random.Generator, grid: Grid, kind: str, modes: int = 4) -> np.ndarray:
    X, Y, P = grid.mesh()
    xs, ys = X / grid.Lx, Y / grid.Ly
    ps = (P - grid.p0) / (grid.p1 - grid.p0)
    out = np.zeros(grid.shape)
    for m in range(1, modes + 1):
        for n in range(1, modes + 1):
            amp = rng.standard_normal(3) / (m * n)
            if kind == "dirichlet":  # vanishes on the lateral walls
                horiz = np.sin(m * np.pi * xs) * np.sin(n * np.pi * ys)
            else:
                horiz = np.cos((m - 1) * np.pi * xs) * np.cos((n - 1) * np.pi * ys)
            vert = amp[1] + amp[2] * np.cos(np.pi * (m + n - 1) * ps)
            out += amp[0] * horiz * vert
    return out


def _ratio_hhp(f, g, h, grid: Grid) -> float:
    vol = grid.cell_volume
    lhs = float(np.sum(np.abs(f * g * h)) * vol)
    nf, ng, nh = norms(f, grid), norms(g, grid), norms(h, grid)

    def grad(n):
        return np.sqrt(max(n["H1_horizontal"] ** 2 - n["L2"] ** 2, 0.0))

    dph = float(np.sqrt(np.sum(ddp(h, grid) ** 2) * vol))
    rhs = (np.sqrt(grad(nf) * nf["L2"]) * np.sqrt(grad(ng) * ng["L2"])
           * (np.sqrt(nh["L2"] * dph) + nh["L2"]))
    return 0.0 if lhs == 0.0 else lhs / rhs


def _ratio_clt(f, g, h, grid: Grid) -> float:
    dp = grid.dp
    col_f = np.sum(np.abs(f), axis=2) * dp
    col_gh = np.sum(np.abs(g * h), axis=2) * dp
    lhs = float(np.sum(col_f * col_gh) * grid.dx * grid.dy)
    if lhs == 0.0:
        return 0.0
    nf, ng, nh = norms(f, grid), norms(g, grid), norms(h, grid)

    def half(n):
        grad = np.sqrt(max(n["H1_horizontal"] ** 2 - n["L2"] ** 2, 0.0))
        return np.sqrt(n["L2"]) * (np.sqrt(n["L2"]) + np.sqrt(grad))

    rhs = min(half(nf) * ng["L2"] * half(nh), nf["L2"] * half(ng) * half(nh))
    return lhs / rhs


def trilinear_ratio_check(kind: str, samples: int, grid: Grid | None = None,
                          seed: int = 0) -> dict:
    """Largest LHS/RHS ratio (constant 1) over seeded band-limited triples.

    ``kind`` is ``"HHP"`` (pointwise product bound with horizontal
    gradients) or ``"CLT"`` (column-integral bound).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    grid = grid or Grid(16, 16, 16, 1.0, 1.0, 0.1, 1.0)
    ratio = {"HHP": _ratio_hhp, "CLT": _ratio_clt}[kind]
    ratios = []
    for s in range(samples):
        rng = np.random.default_rng(seed + s)
        fkind = "dirichlet" if kind == "HHP" else "neumann"
        f = _band_limited(rng, grid, fkind)
        g = _band_limited(rng, grid, fkind)
        h = _band_limited(rng, grid, "neumann")
        ratios.append(ratio(f, g, h, grid))
    return {"kind": kind, "samples": samples, "max_ratio": max(ratios), "ratios": ratios}


def trilinear_ratio(kind: str, f, g, h, grid: Grid) -> float:
    return {"HHP": _ratio_hhp, "CLT": _ratio_clt}[kind](f, g, h, grid)


def dirichlet_pad(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Mirror fill used for velocity: zero on the walls, zero d_p at top/bottom."""
    return pad(f, grid, lateral="dirichlet", top="neumann", bottom="neumann")


def neumann_pad(f: np.ndarray, grid: Grid) -> np.ndarray:
    return pad(f, grid, lateral="neumann", top="neumann", bottom="neumann")
