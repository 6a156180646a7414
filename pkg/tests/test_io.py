import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from moistpe.analysis.diagnostics import DiagnosticsRecord
from moistpe.grid import Grid, ModelState
from moistpe.io import (RunManifest, append_timeseries, load_manifest, read_field, read_snapshot,
                        read_timeseries, write_field, write_json, write_snapshot)


def random_state(grid, rng):
    s = ModelState.zeros(grid)
    for name, arr in s.arrays().items():
        arr[...] = rng.standard_normal(arr.shape)
    s.time = 0.125
    return s


def test_snapshot_roundtrip_bit_exact(tmp_path, small_grid, rng):
    s = random_state(small_grid, rng)
    files = write_snapshot(s, tmp_path, "t0")
    assert len(files) == 9
    back = read_snapshot(tmp_path, "t0")
    for name, arr in s.arrays().items():
        assert np.array_equal(getattr(back, name), arr)
    assert back.time == 0.125


def test_snapshot_collision(tmp_path, small_grid, rng):
    s = random_state(small_grid, rng)
    write_snapshot(s, tmp_path, "t0")
    with pytest.raises(FileExistsError):
        write_snapshot(s, tmp_path, "t0")
    write_snapshot(s, tmp_path, "t0", overwrite=True)


def test_field_header(tmp_path):
    a = np.arange(24, dtype=float).reshape(2, 3, 4)
    write_field(tmp_path / "a.mpe", "T", a, 1.5)
    raw = (tmp_path / "a.mpe").read_bytes()
    assert raw.startswith(b"MPE1 T 2 3 4 1.5\n")
    # x varies fastest in the payload
    payload = np.frombuffer(raw[raw.index(b"\n") + 1:], dtype="<f8")
    assert payload[:2].tolist() == [a[0, 0, 0], a[1, 0, 0]]
    name, back, t = read_field(tmp_path / "a.mpe")
    assert name == "T" and t == 1.5 and np.array_equal(back, a)


def test_truncated_field_rejected(tmp_path):
    write_field(tmp_path / "a.mpe", "T", np.ones((2, 2, 2)), 0.0)
    raw = (tmp_path / "a.mpe").read_bytes()
    (tmp_path / "a.mpe").write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="a.mpe"):
        read_field(tmp_path / "a.mpe")


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(arrays(np.float64, (3, 2, 4), elements=st.floats(allow_nan=False, width=64)))
def test_field_roundtrip_property(tmp_path, a):
    write_field(tmp_path / "p.mpe", "qv", a, 0.0)
    assert np.array_equal(read_field(tmp_path / "p.mpe")[1], a)


def test_timeseries_header_and_rows(tmp_path):
    path = tmp_path / "d.csv"
    for i in range(100):
        append_timeseries(DiagnosticsRecord(step=i, time=i / 3), path)
    lines = path.read_text().splitlines()
    assert len(lines) == 101
    assert lines[0].split(",") == DiagnosticsRecord.fields()


@settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(x=st.floats(allow_nan=False, allow_infinity=False), flag=st.booleans())
def test_timeseries_value_exact(tmp_path, x, flag):
    path = tmp_path / "v.csv"
    path.unlink(missing_ok=True)
    append_timeseries(DiagnosticsRecord(step=1, time=x, v_L2=x, flag_qc=flag), path)
    back = DiagnosticsRecord.from_row(read_timeseries(path)[0])
    assert back.time == x and back.v_L2 == x and back.flag_qc is flag


def test_manifest_flags(tmp_path, small_grid, rng):
    man = RunManifest(tmp_path / "manifest.json", {"grid": {"nx": 8}}, "0.1.0")
    man.save()
    assert load_manifest(tmp_path / "manifest.json")["complete"] is False
    files = write_snapshot(random_state(small_grid, rng), tmp_path, "s")
    man.add_snapshot("s", 0.0, files)
    man.finalize(True)
    data = load_manifest(tmp_path / "manifest.json")
    assert data["complete"] is True and data["end"] is not None
    assert len(data["snapshots"][0]["files"]) == 9


def test_manifest_missing_file(tmp_path, small_grid, rng):
    man = RunManifest(tmp_path / "manifest.json", {}, "0.1.0")
    files = write_snapshot(random_state(small_grid, rng), tmp_path, "s")
    man.add_snapshot("s", 0.0, files)
    files[0].unlink()
    with pytest.raises(FileNotFoundError):
        man.finalize(True)


def test_write_json_numpy(tmp_path):
    write_json(tmp_path / "x.json", {"a": np.float64(1.5), "b": np.arange(3), "c": np.bool_(True)})
    assert json.loads((tmp_path / "x.json").read_text()) == {"a": 1.5, "b": [0, 1, 2], "c": True}
