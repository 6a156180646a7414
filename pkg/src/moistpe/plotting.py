"""Report figures. Everything renders off-screen to files."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 110,
    "savefig.bbox": "tight",
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_timeseries(records: Sequence, path: str | Path) -> Path:
    """Norms, dissipation and moisture extrema against time."""
    t = np.array([r.time for r in records])
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(8, 5.5), sharex=True)
        ax = axes[0, 0]
        for name in ("v", "T", "qv", "qc", "qr"):
            ax.plot(t, [getattr(r, f"{name}_L2") for r in records], label=name)
        ax.set_yscale("log")
        ax.set_ylabel("L2 norm")
        ax.legend(ncol=3, fontsize=7, frameon=False)
        ax = axes[0, 1]
        ax.plot(t, [r.grad_v_sq for r in records], color="k")
        ax.set_ylabel(r"$\|\nabla v\|^2$")
        ax = axes[1, 0]
        for name in ("qv", "qc", "qr"):
            ax.plot(t, [getattr(r, f"{name}_min") for r in records], label=f"min {name}")
        ax.axhline(0.0, color="0.6", lw=0.8)
        ax.set_ylabel("minimum")
        ax.set_xlabel("t")
        ax.legend(fontsize=7, frameon=False)
        ax = axes[1, 1]
        ax.semilogy(t, np.maximum([r.continuity_residual for r in records], 1e-300), label="continuity")
        ax.semilogy(t, np.maximum([r.projection_residual for r in records], 1e-300), label="column div")
        ax.set_ylabel("residual")
        ax.set_xlabel("t")
        ax.legend(fontsize=7, frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_sections(state, grid, path: str | Path) -> Path:
    """x-p cross sections through the domain centre plus a mid-level map of T."""
    j = grid.ny // 2
    k = grid.nlev // 2
    fields = [("T", state.T), ("qv", state.qv), ("qc", state.qc), ("v1", state.v1)]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(fields) + 1, figsize=(14, 3))
        for ax, (name, f) in zip(axes, fields):
            im = ax.pcolormesh(grid.x, grid.p_levels, f[:, j, :].T, shading="auto", cmap="viridis")
            ax.invert_yaxis()
            ax.set_title(name)
            ax.set_xlabel("x")
            fig.colorbar(im, ax=ax, fraction=0.046)
        axes[0].set_ylabel("p")
        ax = axes[-1]
        im = ax.pcolormesh(grid.x, grid.y, state.T[:, :, k].T, shading="auto", cmap="magma")
        ax.set_title(f"T at p = {grid.p_levels[k]:.3g}")
        ax.set_aspect("equal")
        fig.colorbar(im, ax=ax, fraction=0.046)
        fig.tight_layout()
        return _save(fig, path)


def plot_convergence(h: Sequence[float], errors: Sequence[float], path: str | Path,
                     label: str = "", order: float | None = None) -> Path:
    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 3.2))
        ax.loglog(h, errors, "o-", label=label or "error")
        if order is not None:
            ax.loglog(h, errors[-1] * (h / h[-1]) ** order, "--", color="0.5", label=f"slope {order:g}")
        ax.set_xlabel("h")
        ax.set_ylabel("L2 error")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_psi(metrics: Sequence, path: str | Path, C: float | None = None) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.4))
        for m in metrics:
            if m.amplitude == 0:
                continue
            line, = ax.semilogy(m.t, m.psi / m.amplitude**2, label=f"a = {m.amplitude:g}")
            if C is not None:
                ax.semilogy(m.t, m.envelope(C) / m.amplitude**2, ":", color=line.get_color())
        ax.set_xlabel("t")
        ax.set_ylabel(r"$\Psi / a^2$")
        ax.legend(frameon=False, fontsize=7)
        return _save(fig, path)


def plot_bars(labels: Sequence[str], values: Sequence[float], path: str | Path,
              ylabel: str = "", log: bool = True) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.bar(range(len(values)), values, color="0.4")
        ax.set_xticks(range(len(values)), labels)
        if log and all(v > 0 for v in values):
            ax.set_yscale("log")
        ax.set_ylabel(ylabel)
        return _save(fig, path)
