"""Discrete domain M' x (p0, p1), ghost-layer fills and the model state.

Fields are stored as ``(nx, ny, nlev)`` arrays indexed ``[i, j, k]``: ``i``
along x, ``j`` along y and ``k`` along increasing pressure, so ``k = 0`` is the
level next to the top face (p = p0, Gamma_u) and ``k = nlev - 1`` sits on the
bottom face (p = p1, Gamma_i). The vertical velocity ``w`` lives on the
``nlev + 1`` pressure faces. Padded arrays carry one ghost cell on every side,
shape ``(nx + 2, ny + 2, nlev + 2)``.
"""
from __future__ import annotations

import dataclasses
from enum import Enum
from typing import Any, Mapping

import numpy as np

from .config import PhysParams, RunConfig


@dataclasses.dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    nlev: int
    Lx: float
    Ly: float
    p0: float
    p1: float

    def __post_init__(self):
        if min(self.nx, self.ny, self.nlev) < 1:
            raise ValueError("grid dimensions must be positive")
        if not (0 < self.p0 < self.p1):
            raise ValueError("p0 < p1 violated")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nlev)

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def dp(self) -> float:
        return (self.p1 - self.p0) / self.nlev

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.dp

    @property
    def volume(self) -> float:
        return self.Lx * self.Ly * (self.p1 - self.p0)

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    @property
    def p_faces(self) -> np.ndarray:
        faces = self.p0 + np.arange(self.nlev + 1) * self.dp
        faces[-1] = self.p1
        return faces

    @property
    def p_levels(self) -> np.ndarray:
        f = self.p_faces
        return 0.5 * (f[:-1] + f[1:])

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cell-center coordinates broadcast to the field shape."""
        return np.meshgrid(self.x, self.y, self.p_levels, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def zeros_faces(self) -> np.ndarray:
        return np.zeros((self.nx, self.ny, self.nlev + 1))


def make_grid(run: RunConfig, phys: PhysParams) -> Grid:
    """Uniform grid in x, y and p from a validated configuration."""
    return Grid(run.nx, run.ny, run.nlev, run.Lx, run.Ly, phys.p0, phys.p1)


class Region(str, Enum):
    INTERIOR = "Interior"
    GAMMA_I = "Gamma_i"
    GAMMA_U = "Gamma_u"
    GAMMA_L = "Gamma_l"


def boundary_region(grid: Grid, i: int, j: int, k: int) -> Region:
    """Tag of the boundary a cell touches; lateral walls win at shared edges."""
    if not (0 <= i < grid.nx and 0 <= j < grid.ny and 0 <= k < grid.nlev):
        raise IndexError(f"cell ({i}, {j}, {k}) outside {grid.shape}")
    if i in (0, grid.nx - 1) or j in (0, grid.ny - 1):
        return Region.GAMMA_L
    if k == grid.nlev - 1:
        return Region.GAMMA_I
    if k == 0:
        return Region.GAMMA_U
    return Region.INTERIOR


def boundary_faces(grid: Grid) -> dict[Region, np.ndarray]:
    """All boundary faces as ``(axis, i, j, k)`` rows keyed by region.

    Face index ``i`` on axis 0 runs over ``0..nx`` (likewise for the other
    axes); only the outermost faces are listed.
    """
    nx, ny, nz = grid.shape
    jj, kk = np.meshgrid(np.arange(ny), np.arange(nz), indexing="ij")
    ii, kk2 = np.meshgrid(np.arange(nx), np.arange(nz), indexing="ij")
    ii3, jj3 = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    lateral = []
    for face in (0, nx):
        lateral.append(np.column_stack([np.zeros(jj.size, int), np.full(jj.size, face),
                                        jj.ravel(), kk.ravel()]))
    for face in (0, ny):
        lateral.append(np.column_stack([np.ones(ii.size, int), ii.ravel(),
                                        np.full(ii.size, face), kk2.ravel()]))

    def horiz(k_face):
        return np.column_stack([np.full(ii3.size, 2), ii3.ravel(), jj3.ravel(),
                                np.full(ii3.size, k_face)])

    return {Region.GAMMA_I: horiz(nz), Region.GAMMA_U: horiz(0),
            Region.GAMMA_L: np.vstack(lateral)}


# --- ghost fills -----------------------------------------------------------
#
# A boundary condition is one of
#   "neumann"            ghost = interior           (zero normal derivative)
#   "dirichlet"          ghost = -interior          (zero value on the face)
#   ("robin", target)    d_n f = target - f on the face, coefficient 1
#   ("ghost", values)    ghost values given directly (tests, exact data)
# Lateral targets may also be a mapping with keys west/east/south/north.

_SIDES = {"west": (0, 0), "east": (0, -1), "south": (1, 0), "north": (1, -1)}


def _fill(interior: np.ndarray, bc: Any, h: float, side: str) -> np.ndarray:
    if bc == "neumann":
        return interior.copy()
    if bc == "dirichlet":
        return -interior
    kind, data = bc
    if isinstance(data, Mapping):
        data = data[side]
    if kind == "robin":
        a = 1.0 / h
        return (np.asarray(data, dtype=float) + interior * (a - 0.5)) / (a + 0.5)
    if kind == "ghost":
        return np.broadcast_to(np.asarray(data, dtype=float), interior.shape).copy()
    raise ValueError(f"unknown boundary condition {bc!r}")


def pad(f: np.ndarray, grid: Grid, lateral: Any = "neumann", top: Any = "neumann",
        bottom: Any = "neumann") -> np.ndarray:
    """Copy ``f`` into a ghost-padded array and fill the ghosts.

    Top/bottom ghosts are filled first, then x walls, then y walls, so cells
    shared with the lateral boundary carry the lateral condition.
    """
    nx, ny, nz = f.shape
    out = np.empty((nx + 2, ny + 2, nz + 2))
    out[1:-1, 1:-1, 1:-1] = f
    out[1:-1, 1:-1, 0] = _fill(f[:, :, 0], top, grid.dp, "top")
    out[1:-1, 1:-1, -1] = _fill(f[:, :, -1], bottom, grid.dp, "bottom")
    for side in ("west", "east"):
        idx = 1 if side == "west" else -2
        ghost = 0 if side == "west" else -1
        out[ghost, 1:-1, :] = _fill(out[idx, 1:-1, :], lateral, grid.dx, side)
    for side in ("south", "north"):
        idx = 1 if side == "south" else -2
        ghost = 0 if side == "south" else -1
        out[:, ghost, :] = _fill(out[:, idx, :], lateral, grid.dy, side)
    return out


def pad_with(f: np.ndarray, func, grid: Grid) -> np.ndarray:
    """Pad using exact ghost values ``func(x, y, p)`` evaluated at ghost centers."""
    xs = (np.arange(-1, grid.nx + 1) + 0.5) * grid.dx
    ys = (np.arange(-1, grid.ny + 1) + 0.5) * grid.dy
    ps = grid.p0 + (np.arange(-1, grid.nlev + 1) + 0.5) * grid.dp
    X, Y, P = np.meshgrid(xs, ys, ps, indexing="ij")
    out = np.asarray(func(X, Y, P), dtype=float) * np.ones(X.shape)
    out[1:-1, 1:-1, 1:-1] = f
    return out


# --- state -----------------------------------------------------------------

PROGNOSTIC = ("v1", "v2", "T", "qv", "qc", "qr")
MOISTURE = ("qv", "qc", "qr")


@dataclasses.dataclass
class ModelState:
    """Prognostic fields plus the diagnosed w (faces), Phi and Phi_s."""

    v1: np.ndarray
    v2: np.ndarray
    T: np.ndarray
    qv: np.ndarray
    qc: np.ndarray
    qr: np.ndarray
    w: np.ndarray
    Phi: np.ndarray
    Phi_s: np.ndarray
    time: float = 0.0
    step: int = 0

    @classmethod
    def zeros(cls, grid: Grid) -> "ModelState":
        z = grid.zeros
        return cls(z(), z(), z(), z(), z(), z(), grid.zeros_faces(), z(),
                   np.zeros((grid.nx, grid.ny)))

    def copy(self) -> "ModelState":
        return dataclasses.replace(
            self, **{f.name: getattr(self, f.name).copy()
                     for f in dataclasses.fields(self) if f.name not in ("time", "step")})

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)
                if f.name not in ("time", "step")}

    def is_finite(self) -> str | None:
        """Name of the first non-finite field, or None."""
        for name, arr in self.arrays().items():
            if not np.all(np.isfinite(arr)):
                return name
        return None
