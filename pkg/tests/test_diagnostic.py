import numpy as np
import pytest

from moistpe.diagnostic import (CompatibilityError, NonConvergence, ProjectionWorkspace,
                                barotropic_project, column_divergence, continuity_residual,
                                diagnose_w, hydrostatic_phi, velocity_scale)
from moistpe.grid import Grid


@pytest.fixture
def g():
    return Grid(32, 32, 16, 1.0, 1.0, 0.1, 1.0)


def test_phi_zero_temperature(g, rng):
    Phi_s = rng.standard_normal((g.nx, g.ny))
    Phi = hydrostatic_phi(np.zeros(g.shape), Phi_s, g, 287.0)
    np.testing.assert_array_equal(Phi, np.broadcast_to(Phi_s[:, :, None], g.shape))


def test_phi_isothermal(g):
    Phi = hydrostatic_phi(np.full(g.shape, 300.0), np.zeros((g.nx, g.ny)), g, 287.0)
    exact = 287.0 * 300.0 * np.log(g.p1 / g.p_levels)
    np.testing.assert_allclose(Phi, np.broadcast_to(exact, g.shape), rtol=1e-10)


def test_phi_linear_in_log_p(g):
    a, b, R = 250.0, 20.0, 287.0
    T = np.broadcast_to(a + b * np.log(g.p_levels), g.shape).copy()
    Phi = hydrostatic_phi(T, np.zeros((g.nx, g.ny)), g, R)
    s, s1 = np.log(g.p_levels), np.log(g.p1)
    exact = R * (a * (s1 - s) + 0.5 * b * (s1**2 - s**2))
    np.testing.assert_allclose(Phi[0, 0], exact, rtol=1e-12)


def test_w_vanishes_for_solenoidal_interior(g):
    X, Y, _ = g.mesh()
    v1, v2 = 0.7 * Y, -0.4 * X
    # the no-slip mirror fill makes the wall cells divergent, so only
    # interior columns are solenoidal here
    w = diagnose_w(v1, v2, g, compat_tol=np.inf)
    np.testing.assert_allclose(w[1:-1, 1:-1], 0.0, atol=1e-13)


def test_w_for_zero_mean_profile(g):
    X, _, P = g.mesh()
    phat = (P - g.p0) / (g.p1 - g.p0)
    v1 = np.sin(2 * np.pi * X) * np.cos(np.pi * phat)
    w = diagnose_w(v1, np.zeros(g.shape), g)
    assert np.all(w[:, :, 0] == 0) and np.all(w[:, :, -1] == 0)
    assert np.max(np.abs(w[:, :, g.nlev // 2])) > 0.1 * g.dp
    assert np.max(np.abs(continuity_residual(v1, np.zeros(g.shape), w, g))) < 1e-12


def test_w_rejects_unprojected(g):
    X, _, _ = g.mesh()
    with pytest.raises(CompatibilityError):
        diagnose_w(X, np.zeros(g.shape), g)


def test_projection_idempotent(g, rng):
    ws = ProjectionWorkspace(g)
    u, v, _ = barotropic_project(rng.standard_normal(g.shape), rng.standard_normal(g.shape), ws)
    u2, v2, psi = barotropic_project(u, v, ws)
    assert np.max(np.abs(u2 - u)) <= 1e-12
    assert np.max(np.abs(v2 - v)) <= 1e-12


def test_projection_removes_gradient_field(g):
    ws = ProjectionWorkspace(g)
    X, Y, _ = g.mesh()
    u = -np.pi * np.sin(np.pi * X) * np.cos(np.pi * Y)
    v = -np.pi * np.cos(np.pi * X) * np.sin(np.pi * Y)
    out_u, out_v, _ = barotropic_project(u, v, ws)
    assert np.max(np.abs(out_u)) < 0.02 * np.max(np.abs(u))
    assert np.max(np.abs(out_v)) < 0.02 * np.max(np.abs(v))


def test_projection_random_fields_compatible(g, rng):
    ws = ProjectionWorkspace(g)
    for _ in range(20):
        u, v, _ = barotropic_project(rng.standard_normal(g.shape), rng.standard_normal(g.shape), ws)
        _, top = diagnose_w(u, v, g, return_top=True)
        assert top <= 1e-8 * velocity_scale(u, v)
        assert np.max(np.abs(column_divergence(u, v, ws))) < 1e-10


def test_cg_matches_direct(rng):
    g = Grid(12, 10, 4, 1.0, 1.3, 0.1, 1.0)
    u, v = rng.standard_normal((2,) + g.shape)
    a = barotropic_project(u, v, ProjectionWorkspace(g))
    b = barotropic_project(u, v, ProjectionWorkspace(g, solver="cg", tol=1e-13))
    np.testing.assert_allclose(a[0], b[0], atol=1e-9)


def test_cg_reports_nonconvergence(rng):
    g = Grid(16, 16, 4, 1.0, 1.0, 0.1, 1.0)
    ws = ProjectionWorkspace(g, solver="cg", tol=1e-14, max_iter=2)
    with pytest.raises(NonConvergence):
        barotropic_project(*rng.standard_normal((2,) + g.shape), ws)
