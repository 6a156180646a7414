"""Diagnosed fields: geopotential, vertical velocity and the barotropic projection."""
from __future__ import annotations

import dataclasses
import functools

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid
from .operators import dirichlet_pad, div_h


class CompatibilityError(RuntimeError):
    """Column-integrated divergence does not vanish: projection missing or failed."""


class NonConvergence(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(f"projection solve stalled after {iterations} iterations "
                         f"(relative residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


def hydrostatic_phi(T: np.ndarray, Phi_s: np.ndarray, grid: Grid, R: float) -> np.ndarray:
    """Integrate d_p Phi = -R T / p upward from the bottom face.

    Trapezoid rule in ln p; T on the bottom face is extrapolated linearly in
    ln p from the two lowest levels, so T constant or linear in ln p is
    integrated exactly.
    """
    s = np.log(grid.p_levels)
    sb = np.log(grid.p1)
    if grid.nlev > 1:
        slope = (T[:, :, -1] - T[:, :, -2]) / (s[-1] - s[-2])
        Tb = T[:, :, -1] + slope * (sb - s[-1])
    else:
        Tb = T[:, :, -1]
    incr = np.empty_like(T)
    incr[:, :, -1] = 0.5 * (Tb + T[:, :, -1]) * (sb - s[-1])
    incr[:, :, :-1] = 0.5 * (T[:, :, 1:] + T[:, :, :-1]) * np.diff(s)
    # cumulative sum from the bottom up
    return Phi_s[:, :, None] + R * np.cumsum(incr[:, :, ::-1], axis=2)[:, :, ::-1]


def horizontal_divergence(v1: np.ndarray, v2: np.ndarray, grid: Grid) -> np.ndarray:
    """Divergence with the no-slip mirror fill (zero normal flux on the walls)."""
    return div_h(dirichlet_pad(v1, grid), dirichlet_pad(v2, grid), grid)


def velocity_scale(v1: np.ndarray, v2: np.ndarray) -> float:
    return float(max(np.max(np.abs(v1)), np.max(np.abs(v2)))) if v1.size else 0.0


def diagnose_w(v1: np.ndarray, v2: np.ndarray, grid: Grid, compat_tol: float = 1e-8,
               return_top: bool = False):
    """Vertical velocity on pressure faces from the continuity equation.

    ``w(p) = int_p^p1 div v dp'`` accumulated cell by cell, so ``w = 0`` on
    the bottom face exactly and the discrete continuity relation telescopes.
    The top value is the column-integrated divergence; it must be below
    ``compat_tol * max|v|`` and is then pinned to zero.
    """
    div = horizontal_divergence(v1, v2, grid)
    w = np.zeros(grid.shape[:2] + (grid.nlev + 1,))
    w[:, :, :-1] = np.cumsum(div[:, :, ::-1], axis=2)[:, :, ::-1] * grid.dp
    top = float(np.max(np.abs(w[:, :, 0])))
    if top > compat_tol * velocity_scale(v1, v2):
        raise CompatibilityError(
            f"|w(p0)| = {top:.3e} exceeds {compat_tol:g} x velocity scale; "
            "velocity was not barotropically projected")
    w[:, :, 0] = 0.0
    return (w, top) if return_top else w


def continuity_residual(v1, v2, w, grid: Grid) -> np.ndarray:
    """div v + d_p w per cell."""
    return horizontal_divergence(v1, v2, grid) + np.diff(w, axis=2) / grid.dp


# --- barotropic projection -------------------------------------------------


def _centered_1d(n: int, h: float, ghost_sign: float) -> sp.csr_matrix:
    """Centered difference with ghost = ghost_sign * boundary value."""
    d = sp.lil_matrix((n, n))
    for i in range(n):
        if i + 1 < n:
            d[i, i + 1] += 1.0
        else:
            d[i, i] += ghost_sign
        if i - 1 >= 0:
            d[i, i - 1] -= 1.0
        else:
            d[i, i] -= ghost_sign
    return (d / (2 * h)).tocsr()


@functools.lru_cache(maxsize=16)
def _operators(nx: int, ny: int, dx: float, dy: float):
    Dx = _centered_1d(nx, dx, -1.0)  # velocity: mirror (no-slip) fill
    Dy = _centered_1d(ny, dy, -1.0)
    Gx = _centered_1d(nx, dx, 1.0)   # potential: Neumann fill
    Gy = _centered_1d(ny, dy, 1.0)
    Ix, Iy = sp.identity(nx), sp.identity(ny)
    # flattened index i * ny + j (C order of an (nx, ny) array)
    D = (sp.kron(Dx, Iy), sp.kron(Ix, Dy))
    G = (sp.kron(Gx, Iy), sp.kron(Ix, Gy))
    lap = (D[0] @ G[0] + D[1] @ G[1]).tocsr()
    neg = (-lap)[1:, 1:].tocsc()  # pin psi[0, 0] = 0 to remove the constant null mode
    return D, G, lap, spla.factorized(neg)


@dataclasses.dataclass
class ProjectionWorkspace:
    """Cached elliptic operator for one grid plus solver settings.

    The Poisson operator is the composition of the discrete divergence and
    gradient actually applied to the velocity, so the projected field is
    divergence free to round-off and the removed part is orthogonal to it.
    """

    grid: Grid
    solver: str = "direct"
    tol: float = 1e-12
    max_iter: int = 20000
    last_iterations: int = 0
    last_residual: float = 0.0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be > 0")
        g = self.grid
        self._D, self._G, self._lap, self._solve = _operators(g.nx, g.ny, g.dx, g.dy)

    def divergence2d(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        shape = u.shape
        return (self._D[0] @ u.ravel() + self._D[1] @ v.ravel()).reshape(shape)

    def gradient2d(self, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        shape = psi.shape
        return (self._G[0] @ psi.ravel()).reshape(shape), (self._G[1] @ psi.ravel()).reshape(shape)

    def solve_poisson(self, rhs: np.ndarray) -> np.ndarray:
        """Solve lap psi = rhs with psi[0, 0] = 0 (rhs must have zero sum)."""
        b = rhs.ravel()
        if self.solver == "direct":
            psi = np.zeros_like(b)
            psi[1:] = self._solve(-b[1:])
            self.last_iterations = 1
        else:
            psi = self._cg(b)
        res = self._lap @ psi - b
        scale = max(float(np.max(np.abs(b))), 1e-300)
        self.last_residual = float(np.max(np.abs(res))) / scale
        return psi.reshape(rhs.shape)

    def _cg(self, b: np.ndarray) -> np.ndarray:
        """Jacobi-preconditioned CG on -lap restricted to zero-mean vectors."""
        A = -self._lap
        rhs = -(b - b.mean())
        dinv = 1.0 / A.diagonal()
        x = np.zeros_like(rhs)
        r = rhs.copy()
        z = dinv * r
        z -= z.mean()
        d = z.copy()
        rz = r @ z
        bnorm = max(np.linalg.norm(rhs), 1e-300)
        for it in range(1, self.max_iter + 1):
            Ad = A @ d
            alpha = rz / (d @ Ad)
            x += alpha * d
            r -= alpha * Ad
            rel = np.linalg.norm(r) / bnorm
            if rel <= self.tol:
                self.last_iterations = it
                return x - x.flat[0]
            z = dinv * r
            z -= z.mean()
            rz_new = r @ z
            d = z + (rz_new / rz) * d
            rz = rz_new
        raise NonConvergence(self.max_iter, float(rel))


def barotropic_project(v1: np.ndarray, v2: np.ndarray, ws: ProjectionWorkspace):
    """Remove the divergent part of the vertical mean velocity.

    Returns ``(v1, v2, psi)``; the correction ``grad psi`` is uniform in p.
    """
    grid = ws.grid
    depth = grid.p1 - grid.p0
    ubar = v1.sum(axis=2) * grid.dp / depth
    vbar = v2.sum(axis=2) * grid.dp / depth
    rhs = ws.divergence2d(ubar, vbar)
    psi = ws.solve_poisson(rhs)
    gx, gy = ws.gradient2d(psi)
    return v1 - gx[:, :, None], v2 - gy[:, :, None], psi


def column_divergence(v1: np.ndarray, v2: np.ndarray, ws: ProjectionWorkspace) -> np.ndarray:
    """div of the vertically integrated velocity (zero on the constraint space)."""
    dp = ws.grid.dp
    return ws.divergence2d(v1.sum(axis=2) * dp, v2.sum(axis=2) * dp)
