"""Driver for a single simulation run with output on disk."""
from __future__ import annotations

import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis.diagnostics import (DiagnosticsRecord, Violation, max_principle_bounds,
                                   record_diagnostics)
from .config import Config, to_mapping
from .grid import ModelState
from .io import RunManifest, append_timeseries, write_json, write_snapshot
from .stepper import Model, cfl_number, initial_state, n_steps, stable_dt, step

log = logging.getLogger(__name__)


def _prepare(out: Path, overwrite: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    series = out / "diagnostics.csv"
    if series.exists():
        if not overwrite:
            raise FileExistsError(f"{series} exists; pass --overwrite to replace it")
        series.unlink()


def _progress(state: ModelState, rec: DiagnosticsRecord, dt: float, cfl: float, stream) -> None:
    qmin = min(rec.qv_min, rec.qc_min, rec.qr_min)
    print(f"step {state.step:6d}  t={state.time:.5e}  dt={dt:.3e}  cfl={cfl:.3g}  "
          f"max|v|={rec.vmax:.4e}  min q={qmin:+.3e}  energy={rec.v_L2**2:.6e}", file=stream)


def run(cfg: Config, out_dir: str | Path | None = None, overwrite: bool = False,
        nsteps: int | None = None, quiet: bool = False, stream=None,
        state: ModelState | None = None):
    """Integrate ``cfg`` and write series, snapshots, manifest and figures.

    Returns ``(final_state, records, violations)``. The manifest is
    finalized as incomplete, with the error text, if the loop raises.
    """
    stream = stream or sys.stdout
    out = Path(out_dir if out_dir is not None else cfg.run.out_dir)
    _prepare(out, overwrite)
    model = Model.build(cfg)
    if state is None:
        state = initial_state(model)
    bounds = max_principle_bounds(state, cfg.bdata) if cfg.run.monitor_bounds else None
    total = n_steps(model, state) if nsteps is None else nsteps
    series = out / "diagnostics.csv"
    manifest = RunManifest(out / "manifest.json", to_mapping(cfg), __version__)
    manifest.save()

    records: list[DiagnosticsRecord] = []
    violations: list[Violation] = []

    def snapshot(s: ModelState) -> None:
        if not cfg.run.snapshots:
            return
        tag = f"step{s.step:06d}"
        files = write_snapshot(s, out, tag, overwrite=overwrite)
        manifest.add_snapshot(tag, s.time, files)

    def observe(s: ModelState, dt: float) -> None:
        rec, bad = record_diagnostics(s, model, bounds, dt)
        records.append(rec)
        violations.extend(bad)
        append_timeseries(rec, series)
        if s.step % cfg.run.every == 0 or s.step == total:
            if not quiet:
                _progress(s, rec, dt, cfl_number(s, model, dt) if dt > 0 else 0.0, stream)

    try:
        observe(state, 0.0)
        snapshot(state)
        for _ in range(total):
            dt = cfg.run.dt if cfg.run.dt > 0 else stable_dt(state, model)
            state = step(state, dt, model)
            observe(state, dt)
            if state.step % cfg.run.every == 0 or state.step == total:
                snapshot(state)
    except BaseException as exc:
        manifest.finalize(False, f"{type(exc).__name__}: {exc}")
        raise
    manifest.finalize(True)
    summary = run_summary(records, violations, bounds)
    write_json(out / "run_summary.json", summary)
    if cfg.run.figures:
        from .plotting import plot_sections, plot_timeseries
        plot_timeseries(records, out / "timeseries.png")
        plot_sections(state, model.grid, out / "sections.png")
    return state, records, violations


def run_summary(records, violations, bounds) -> dict:
    last = records[-1]
    worst = max(violations, key=lambda v: v.magnitude) if violations else None
    return {
        "steps": last.step,
        "time": last.time,
        "bounds": bounds,
        "violations": len(violations),
        "worst_violation": None if worst is None else dataclasses.asdict(worst),
        "final": {k: getattr(last, k) for k in ("v_L2", "v_H1", "T_L2", "qv_L2", "qc_L2", "qr_L2")},
        "min_moisture": float(np.min([[r.qv_min, r.qc_min, r.qr_min] for r in records])),
        "max_continuity_residual": max(r.continuity_residual for r in records),
    }
