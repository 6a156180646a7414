import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moistpe.config import PhysParams, ReferenceProfiles
from moistpe.grid import Grid
from moistpe.microphysics import (assemble_sources, conversion_rates, phi_cutoff,
                                  regularized_heaviside, saturation_rate_F, sedimentation,
                                  sedimentation_flux, tau_clamp, w_minus)

SI = PhysParams(mode="physical", R=287.0, R_v=461.5, c_p=1004.0, L=2.5e6, q_vs=0.02,
                T_star_lo=150.0, T_star_hi=340.0, p0=2e4, p1=1e5)

# evaluated by hand from the closed form before the implementation existed
F_280_85000 = 2.400303669075989e-07


def test_phi_examples():
    assert phi_cutoff(280.0, SI) == 280.0
    assert phi_cutoff(100.0, SI) >= 75.0
    assert phi_cutoff(2 * SI.T_star_hi + 1, SI) == 0.0


def test_phi_monotone_up_to_upper_threshold():
    T = np.linspace(SI.T_star_lo, SI.T_star_hi, 500)
    assert np.all(np.diff(phi_cutoff(T, SI)) > 0)


def test_F_regression_value():
    assert saturation_rate_F(280.0, 8.5e4, SI) == pytest.approx(F_280_85000, rel=1e-12)


def test_F_zero_when_cutoff_vanishes():
    assert saturation_rate_F(2 * SI.T_star_hi + 5, 5e4, SI) == 0.0


def test_F_envelope():
    T = np.linspace(100.0, 400.0, 3001)
    F = np.abs(saturation_rate_F(T, SI.p0, SI))
    env = SI.q_vs * (SI.L * SI.R) / (SI.p0 * SI.q_vs * SI.L**2) * phi_cutoff(T, SI).max()
    assert F.max() <= env


def test_F_plus_clips_negative():
    T = np.linspace(100.0, 600.0, 200)
    assert np.min(saturation_rate_F(T, 5e4, SI)) >= 0


@pytest.mark.parametrize("q, out", [(-0.5, 0.0), (0.3, 0.3), (2.0, 1.0)])
def test_tau(q, out):
    assert tau_clamp(q) == out


@pytest.mark.parametrize("r, out", [(-0.3, 0.0), (0.05, 0.5), (0.2, 1.0)])
def test_heaviside(r, out):
    assert regularized_heaviside(r, 0.1) == pytest.approx(out)


def test_heaviside_needs_positive_eps():
    with pytest.raises(ValueError):
        regularized_heaviside(0.1, 0.0)


@pytest.mark.parametrize("w, out", [(0.0, 0.0), (-2.0, 2.0), (3.0, 0.0)])
def test_w_minus(w, out):
    assert np.all(w_minus(np.full((2, 2, 5), w)) == out)


@pytest.fixture
def g():
    return Grid(4, 4, 10, 1.0, 1.0, 0.1, 1.0)


def test_sedimentation_examples(g):
    phys, prof = PhysParams(), ReferenceProfiles(theta_bar=1.3)
    assert np.all(sedimentation(np.zeros(g.shape), g, phys, prof) == 0)
    tend = sedimentation(np.full(g.shape, 0.01), g, phys, prof)
    # constant q_r: the flux grows linearly with p, so each interior cell loses V_t q_r/(R theta)
    np.testing.assert_allclose(tend[:, :, 1:], -phys.V_t * 0.01 / (phys.R * 1.3), rtol=1e-12)


def test_sedimentation_column_budget(g, rng):
    phys, prof = PhysParams(), ReferenceProfiles()
    qr = rng.uniform(0, 0.02, g.shape)
    col = sedimentation(qr, g, phys, prof).sum(axis=2) * g.dp
    out = sedimentation_flux(qr, g, phys, prof)[:, :, -1]
    np.testing.assert_allclose(col, -out, rtol=1e-12)


def test_sources_switched_off(g):
    phys, prof = PhysParams(), ReferenceProfiles()
    T = np.full(g.shape, 1.1)
    qv = np.full(g.shape, phys.q_vs - 2 * phys.eps2)
    z = np.zeros(g.shape)
    w = np.linspace(-1, 1, g.nlev + 1) * np.ones((g.nx, g.ny, 1))
    src = assemble_sources(T, qv, z, z, w, g, phys, prof, f_T=0.25)
    r = conversion_rates(T, qv, z, z, w, g, phys)
    for rate in (r.cond, r.evap, r.auto, r.coll):
        assert np.all(rate == 0)
    wc = 0.5 * (w[..., 1:] + w[..., :-1])
    expect = phys.R * T * wc / (phys.c_p * g.p_levels) + 0.25
    np.testing.assert_allclose(src.dT, expect, rtol=1e-14)
    assert np.all(src.dqv == 0) and np.all(src.dqc == 0) and np.all(src.dqr == 0)


def test_evaporation_of_rain(g):
    phys, prof = PhysParams(V_t=0.0), ReferenceProfiles()
    qv = np.full(g.shape, 0.5 * phys.q_vs)
    qr = np.full(g.shape, 0.1)
    z = np.zeros(g.shape)
    src = assemble_sources(np.ones(g.shape), qv, z, qr, g.zeros_faces(), g, phys, prof)
    E = phys.k3 * 0.1 * 0.5 * phys.q_vs
    np.testing.assert_allclose(src.dqv, E, rtol=1e-14)
    np.testing.assert_allclose(src.dqr, -E, rtol=1e-14)
    np.testing.assert_allclose(src.dT, -phys.L / phys.c_p * E, rtol=1e-14)


def test_condensation_pairs(g, rng):
    phys, prof = PhysParams(), ReferenceProfiles()
    T = rng.uniform(0.5, 1.5, g.shape)
    qv = rng.uniform(0, 0.05, g.shape)
    w = -np.abs(rng.standard_normal((g.nx, g.ny, g.nlev + 1)))
    z = np.zeros(g.shape)
    src = assemble_sources(T, qv, z, z, w, g, phys, prof)
    np.testing.assert_allclose(src.dqv, -src.dqc, rtol=1e-14)
    assert np.any(src.dqc > 0)


def test_non_finite_rejected(g):
    phys, prof = PhysParams(), ReferenceProfiles()
    T = np.ones(g.shape)
    T[0, 0, 0] = np.nan
    z = np.zeros(g.shape)
    with pytest.raises(FloatingPointError, match="T"):
        assemble_sources(T, z, z, z, g.zeros_faces(), g, phys, prof)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_total_water_cancels(seed):
    g = Grid(4, 4, 6, 1.0, 1.0, 0.1, 1.0)
    phys, prof = PhysParams(), ReferenceProfiles()
    r = np.random.default_rng(seed)
    T = r.uniform(0, 3, g.shape)
    qv, qc, qr = r.uniform(0, 0.05, (3,) + g.shape)
    w = r.standard_normal((g.nx, g.ny, g.nlev + 1))
    s = assemble_sources(T, qv, qc, qr, w, g, phys, prof)
    assert np.max(np.abs(s.dqv + s.dqc + s.dqr - s.sed)) <= 1e-14


@settings(max_examples=200, deadline=None)
@given(r1=st.floats(-1, 1), r2=st.floats(-1, 1), eps=st.floats(1e-4, 1))
def test_heaviside_lipschitz(r1, r2, eps):
    d = abs(regularized_heaviside(r1, eps) - regularized_heaviside(r2, eps))
    assert d <= abs(r1 - r2) / eps * (1 + 1e-12) + 1e-15


@given(st.floats(-1e3, 1e3))
def test_tau_range(q):
    assert 0.0 <= tau_clamp(q) <= 1.0
