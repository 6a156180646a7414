import numpy as np
import pytest

from moistpe.config import load_config
from moistpe.grid import Grid
from moistpe.scenarios import scenario_config
from moistpe.stepper import Model


@pytest.fixture
def grid():
    return Grid(16, 16, 16, 1.0, 1.0, 0.1, 1.0)


@pytest.fixture
def small_grid():
    return Grid(8, 8, 4, 1.0, 1.0, 0.1, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_model():
    def build(scenario=None, **overrides):
        over = {k.replace("__", "."): str(v) for k, v in overrides.items()}
        cfg = scenario_config(scenario, overrides=over) if scenario else load_config(None, over)
        return Model.build(cfg)
    return build


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        if n in mod.RESULTS:
            passed, detail = mod.RESULTS[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: NOT RUN")
