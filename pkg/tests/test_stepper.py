import warnings

import numpy as np
import pytest

from moistpe.grid import ModelState
from moistpe.operators import norms
from moistpe.stepper import (Model, NumericalFault, StabilityWarning, apply_boundaries, dt_limits,
                             initial_state, integrate, perturb_field, perturb_velocity, stable_dt,
                             step)


def small(make_model, scenario=None, **kw):
    base = {"grid__nx": 8, "grid__ny": 8, "grid__np": 4}
    base.update(kw)
    return make_model(scenario, **base)


def test_robin_equilibrium_ghost(make_model):
    m = small(make_model)
    s = ModelState.zeros(m.grid)
    s.T[:] = m.cfg.bdata.T_star
    pads = apply_boundaries(s, m)
    np.testing.assert_allclose(pads["T"][1:-1, 1:-1, -1], pads["T"][1:-1, 1:-1, -2], rtol=1e-14)


def test_velocity_mirror_ghost(make_model, rng):
    m = small(make_model)
    s = ModelState.zeros(m.grid)
    s.v1 = rng.standard_normal(m.grid.shape)
    pads = apply_boundaries(s, m)
    np.testing.assert_array_equal(pads["v1"][0, 1:-1, 1:-1], -s.v1[0])
    np.testing.assert_array_equal(pads["v1"][1:-1, -1, 1:-1], -s.v1[:, -1])


def test_lateral_robin_for_zero_target(make_model, rng):
    m = small(make_model, boundary__qv_bl=0)
    s = ModelState.zeros(m.grid)
    s.qv = rng.uniform(0, 0.02, m.grid.shape)
    q = apply_boundaries(s, m)["qv"]
    ghost, edge = q[-1, 1:-1, 1:-1], s.qv[-1]
    dn = (ghost - edge) / m.grid.dx
    np.testing.assert_allclose(dn, -0.5 * (ghost + edge), rtol=1e-12)


def test_stable_dt_diffusion_limit(make_model):
    m = make_model(grid__nx=10, grid__ny=10, grid__np=4, time__cfl_safety=0.5)
    s = ModelState.zeros(m.grid)
    assert m.grid.dx == pytest.approx(0.1)
    assert stable_dt(s, m) == pytest.approx(1.25e-3)


def test_stable_dt_advective_limit(make_model):
    m = make_model(grid__nx=4, grid__ny=4, grid__np=4, grid__Lx=4, grid__Ly=4, time__cfl_safety=0.5,
                   physics__mu_v=0, physics__mu_T=0, physics__mu_q=0, physics__V_t=0)
    s = ModelState.zeros(m.grid)
    s.v1[:] = 10.0
    assert stable_dt(s, m) == pytest.approx(0.05)


def test_stable_dt_mixed_is_min(make_model, rng):
    m = small(make_model, time__cfl_safety=0.3)
    s = initial_state(m)
    s.v1 = s.v1 + 5 * rng.standard_normal(m.grid.shape)
    g, p = m.grid, m.phys
    wmax = np.maximum(np.abs(s.w[..., :-1]), np.abs(s.w[..., 1:]))
    adv = 1 / np.max(np.abs(s.v1) / g.dx + np.abs(s.v2) / g.dy + wmax / g.dp)
    dif = 1 / (2 * max(p.mu_v, p.mu_T, p.mu_q) * (1 / g.dx**2 + 1 / g.dy**2))
    sed = g.dp / (p.V_t * g.p_levels.max())
    assert stable_dt(s, m) == pytest.approx(0.3 * min(adv, dif, sed), rel=1e-12)
    assert set(dt_limits(s, m)) == {"advection", "diffusion", "sedimentation"}


def test_stable_dt_without_limits_warns(make_model):
    m = small(make_model, physics__mu_v=0, physics__mu_T=0, physics__mu_q=0, physics__V_t=0)
    with pytest.warns(StabilityWarning):
        assert stable_dt(ModelState.zeros(m.grid), m) == 1e-6


def test_rest_state_is_steady(make_model):
    m = small(make_model, "rest")
    s = initial_state(m)
    dt = stable_dt(s, m)
    for _ in range(5):
        new = step(s, dt, m)
        for name in ("v1", "v2", "T", "qv", "qc", "qr"):
            assert np.max(np.abs(getattr(new, name) - getattr(s, name))) <= 1e-12
        s = new
    assert s.step == 5


def test_rain_decays_without_flow(make_model):
    # no evaporation, so rain is a passive tracer and the fluid stays at rest
    m = small(make_model, "rest", physics__k3=0)
    s = initial_state(m)
    X, Y, P = m.grid.mesh()
    s.qr = 0.01 * np.exp(-((X - 0.5) ** 2 + (Y - 0.5) ** 2 + (P - 0.5) ** 2) / 0.05)
    dt = stable_dt(s, m)
    prev = norms(s.qr, m.grid)["L2"]
    for _ in range(20):
        s = step(s, dt, m)
        cur = norms(s.qr, m.grid)["L2"]
        assert cur < prev
        prev = cur
    assert np.max(np.abs(s.v1)) < 1e-14


def test_step_keeps_constraints(make_model):
    m = small(make_model, "saturated_blob")
    s = integrate(m, initial_state(m), 5)
    assert np.all(s.w[:, :, 0] == 0) and np.all(s.w[:, :, -1] == 0)
    assert s.is_finite() is None
    assert min(s.qv.min(), s.qc.min(), s.qr.min()) >= -1e-12


def test_euler_scheme_runs(make_model):
    m = small(make_model, "warm_bubble", time__scheme="euler")
    s = integrate(m, initial_state(m), 3)
    assert s.step == 3


def test_nan_raises_numerical_fault(make_model):
    m = small(make_model, "warm_bubble")
    s = initial_state(m)
    s.T[2, 2, 2] = np.nan
    with pytest.raises((NumericalFault, FloatingPointError)):
        step(s, 1e-4, m)


def test_bad_dt(make_model):
    m = small(make_model)
    with pytest.raises(ValueError):
        step(initial_state(m), 0.0, m)


def test_initial_kinds(make_model):
    for kind in ("rest", "warm_bubble", "saturated_blob", "decay"):
        m = small(make_model, kind)
        s = initial_state(m)
        assert s.is_finite() is None
        assert min(s.qv.min(), s.qc.min(), s.qr.min()) >= 0


def test_perturbations(make_model):
    m = small(make_model, "saturated_blob")
    s = initial_state(m)
    same = perturb_velocity(s, m, 0.0)
    assert np.array_equal(same.v1, s.v1)
    p = perturb_velocity(s, m, 1e-3)
    assert 0 < np.max(np.abs(p.v1 - s.v1)) <= 2e-3
    q = perturb_field(s, m, "qv", 1e-3)
    assert np.all(q.qv >= s.qv)


def test_determinism(make_model):
    m = small(make_model, "saturated_blob")
    a = integrate(m, initial_state(m), 4)
    b = integrate(Model.build(m.cfg), initial_state(m), 4)
    for name in ("v1", "v2", "T", "qv", "qc", "qr", "w", "Phi", "Phi_s"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
