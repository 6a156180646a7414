"""Snapshot files, diagnostics CSV and the run manifest.

Snapshot layout (one file per field)::

    MPE1 <name> <nx> <ny> <np> <time>\\n
    <nx*ny*np little-endian float64 values, k slowest, then j, then i fastest>

Face fields (w) are written with ``np = nlev + 1`` and 2D fields (Phi_s)
with ``np = 1``.
"""
from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import json
import os
import re
from pathlib import Path
from typing import Iterable

import numpy as np

from .grid import ModelState

MAGIC = "MPE1"
SNAPSHOT_FIELDS = ("v1", "v2", "T", "qv", "qc", "qr", "w", "Phi", "Phi_s")


def snapshot_path(directory: str | Path, tag: str, name: str) -> Path:
    return Path(directory) / f"{tag}.{name}.mpe"


def write_field(path: str | Path, name: str, arr: np.ndarray, time: float) -> None:
    a = np.asarray(arr, dtype="<f8")
    if a.ndim == 2:
        a = a[:, :, None]
    nx, ny, nz = a.shape
    header = f"{MAGIC} {name} {nx} {ny} {nz} {float(time)!r}\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(a.transpose(2, 1, 0)).tobytes())
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc.strerror}") from exc


def read_field(path: str | Path) -> tuple[str, np.ndarray, float]:
    """Return ``(name, array[i, j, k], time)``."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read snapshot {path}: {exc.strerror}") from exc
    end = raw.index(b"\n")
    parts = raw[:end].decode("ascii").split()
    if len(parts) != 6 or parts[0] != MAGIC:
        raise ValueError(f"{path}: not an {MAGIC} snapshot")
    name, nx, ny, nz, time = parts[1], int(parts[2]), int(parts[3]), int(parts[4]), float(parts[5])
    data = np.frombuffer(raw[end + 1:], dtype="<f8")
    if data.size != nx * ny * nz:
        raise ValueError(f"{path}: expected {nx * ny * nz} values, found {data.size}")
    return name, data.reshape(nz, ny, nx).transpose(2, 1, 0).astype(float), time


def write_snapshot(state: ModelState, directory: str | Path, tag: str,
                   overwrite: bool = False) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [snapshot_path(directory, tag, name) for name in SNAPSHOT_FIELDS]
    if not overwrite:
        taken = [p for p in paths if p.exists()]
        if taken:
            raise FileExistsError(f"snapshot {tag!r} already exists in {directory} "
                                  "(use --overwrite to replace it)")
    for name, path in zip(SNAPSHOT_FIELDS, paths):
        write_field(path, name, getattr(state, name), state.time)
    return paths


def read_snapshot(directory: str | Path, tag: str) -> ModelState:
    fields = {}
    time = 0.0
    for name in SNAPSHOT_FIELDS:
        _, arr, time = read_field(snapshot_path(directory, tag, name))
        fields[name] = arr[:, :, 0] if name == "Phi_s" else arr
    # the step count is not in the field header; runner tags carry it
    m = re.fullmatch(r"step(\d+)", tag)
    return ModelState(**fields, time=time, step=int(m.group(1)) if m else 0)


# --- time series -------------------------------------------------------------


def _fmt(val) -> str:
    if isinstance(val, (bool, np.bool_)):
        return "true" if val else "false"
    if isinstance(val, (int, np.integer)):
        return str(int(val))
    return format(float(val), ".17g")


def append_timeseries(record, path: str | Path) -> None:
    """Append one record as a CSV row, writing the header into an empty file."""
    path = Path(path)
    fresh = not path.exists() or path.stat().st_size == 0
    names = record.fields()
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(names)
        writer.writerow([_fmt(v) for v in record.as_row()])
        fh.flush()
        os.fsync(fh.fileno())


def read_timeseries(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- manifest ------------------------------------------------------------------


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclasses.dataclass
class RunManifest:
    path: Path
    config: dict
    version: str
    start: str = dataclasses.field(default_factory=_now)
    end: str | None = None
    snapshots: list[dict] = dataclasses.field(default_factory=list)
    complete: bool = False
    baselines: list[str] = dataclasses.field(default_factory=list)
    error: str | None = None

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("path")
        return d

    def save(self) -> None:
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.as_dict(), indent=2, default=str))
        tmp.replace(self.path)

    def add_snapshot(self, tag: str, time: float, files: Iterable[Path]) -> None:
        self.snapshots.append({"tag": tag, "time": time, "files": [str(Path(f).name) for f in files]})
        self.save()

    def finalize(self, complete: bool, error: str | None = None) -> None:
        directory = self.path.parent
        missing = [f for s in self.snapshots for f in s["files"] if not (directory / f).exists()]
        if missing:
            raise FileNotFoundError(f"manifest lists missing files: {missing[:3]}")
        self.end = _now()
        self.complete = complete
        self.error = error
        self.save()


def load_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
