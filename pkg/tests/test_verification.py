import math

import numpy as np
import pytest

from moistpe import plotting
from moistpe.baselines import load_baselines
from moistpe.verification import (Check, check_F_lipschitz, check_skew_symmetry, check_trilinear,
                                  check_upwind_monotone, format_table)


def test_check_margin_and_dict():
    c = Check("x", 0.25, 1.0, True, "note")
    assert c.margin == 0.75
    assert c.as_dict()["margin"] == 0.75 and c.as_dict()["detail"] == "note"


def test_format_table_has_one_row_per_check():
    text = format_table([Check("a", 1.0, 2.0, True), Check("longer name", 3.0, 2.0, False)])
    lines = text.splitlines()
    assert len(lines) == 3 and lines[1].endswith("PASS") and lines[2].endswith("FAIL")


def test_skew_and_upwind_pass():
    assert check_skew_symmetry(samples=3).passed
    assert check_upwind_monotone(samples=5).passed


def test_trilinear_needs_baseline():
    checks = check_trilinear(None, samples=4)
    assert all(not c.passed and math.isnan(c.tol) for c in checks)


def test_trilinear_matches_recorded():
    base = load_baselines()["operators"]
    checks = check_trilinear(base, samples=base["HHP"]["samples"])
    assert all(c.passed for c in checks), format_table(checks)


def test_F_lipschitz_stable():
    assert check_F_lipschitz().passed


@pytest.mark.parametrize("log", [False, True])
def test_plot_bars(tmp_path, log):
    path = tmp_path / "bars.png"
    plotting.plot_bars(["a", "b"], [1.0, 1e-3], path, ylabel="v", log=log)
    assert path.stat().st_size > 0


def test_plot_convergence(tmp_path):
    h = np.array([1 / 16, 1 / 32, 1 / 64])
    path = tmp_path / "conv.png"
    plotting.plot_convergence(h, h**2, path, label="centered", order=2.0)
    assert path.stat().st_size > 0
