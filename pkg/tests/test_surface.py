import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import expected
import oracles
from chmc import AmbientMetric, DiscretizationError, Surface, UndefinedCurvatureError
from chmc.surface import (area_and_volume, band_membership, best_fit_sphere, gauss_codazzi_residual,
                          geometry, harmonic_mean_curvature, make_coordinate_sphere,
                          make_profile_surface, second_fundamental_gradients,
                          traceless_gradient_norms)


def test_unit_sphere_flat(flat3):
    g = geometry(Surface(3, np.ones(128)), flat3)
    assert np.allclose(g.lam_t, 1.0, atol=1e-8)
    assert np.allclose(g.lam_p, 1.0, atol=1e-12)
    assert np.allclose(g.H, 2.0, atol=1e-8)
    assert np.allclose(g.F, 0.5, atol=1e-8)


def test_coordinate_sphere_construction():
    s = make_coordinate_sphere(3, 20.0, N=64)
    assert np.all(s.profile == 20.0) and s.N == 64
    t = make_coordinate_sphere(3, 20.0, center_offset=3.0, N=64)
    assert np.allclose(t.positions() - s.positions(), [3.0, 0.0, 0.0])
    assert best_fit_sphere(s) == pytest.approx((0.0, 20.0), abs=1e-10)
    with pytest.raises(ValueError):
        make_coordinate_sphere(3, 2.0)


def test_profile_must_stay_outside_ball():
    with pytest.raises(ValueError):
        Surface(3, np.full(64, 0.9))


def test_schwarzschild_sphere_conformal_oracle(schw3):
    lam = oracles.conformal_sphere_curvature(10.0, 3, 2.0)
    assert lam == pytest.approx(expected.LAMBDA_N3_M2_R10, abs=5e-9)
    g = geometry(make_coordinate_sphere(3, 10.0, N=512), schw3)
    assert np.allclose(g.lam_t, expected.LAMBDA_N3_M2_R10, atol=1e-8)
    assert np.allclose(g.lam_p, expected.LAMBDA_N3_M2_R10, atol=1e-8)
    assert np.allclose(g.H, expected.H_N3_M2_R10, atol=2e-8)
    assert np.allclose(g.F, expected.F_N3_M2_R10, atol=1e-8)
    assert np.max(g.ringA_norm) < 1e-8


def test_n4_sphere_two_ways(schw4):
    lam = oracles.conformal_sphere_curvature(10.0, 4, 2.0)
    g = geometry(make_coordinate_sphere(4, 10.0, N=256), schw4)
    assert np.max(np.abs(g.lam_t - lam)) / lam < 1e-4
    assert np.max(np.abs(g.lam_p - lam)) / lam < 1e-4


def test_harmonic_mean_examples():
    assert harmonic_mean_curvature([1.0, 1.0]) == expected.F_OF_1_1
    assert harmonic_mean_curvature([1.0, 2.0]) == pytest.approx(expected.F_OF_1_2, rel=1e-15)
    with pytest.raises(UndefinedCurvatureError):
        harmonic_mean_curvature([1.0, -2.0])
    with pytest.raises(UndefinedCurvatureError):
        harmonic_mean_curvature([0.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=6), st.floats(1e-2, 1e2))
def test_harmonic_mean_homogeneous(lams, c):
    lams = np.array(lams)
    assert harmonic_mean_curvature(c * lams) == pytest.approx(c * harmonic_mean_curvature(lams),
                                                              rel=1e-12)
    # bounded by the smallest curvature and by the arithmetic mean / (n-1)
    F = harmonic_mean_curvature(lams)
    assert F <= lams.min() * (1 + 1e-12)
    assert F <= lams.sum() / len(lams) ** 2 * (1 + 1e-12)


def test_ellipsoid_matches_revolution_oracle(flat3):
    rho, d1, d2 = oracles.ellipsoid_profile(20.0)
    s = make_profile_surface(3, rho, N=256)
    g = geometry(s, flat3)
    th = s.theta
    km, kp = oracles.revolution_curvatures(th, rho(th), d1(th), d2(th))
    assert np.max(np.abs(g.lam_t - km)) < 1e-9
    assert np.max(np.abs(g.lam_p - kp)) < 1e-9
    ringA, _ = traceless_gradient_norms(g)
    assert np.allclose(ringA, np.sqrt(0.5) * np.abs(km - kp), atol=1e-9)


def test_ringA_scales_inversely(flat3):
    vals = []
    for scale in (1.0, 3.0):
        rho, _, _ = oracles.ellipsoid_profile(20.0 * scale)
        vals.append(np.max(geometry(make_profile_surface(3, rho, N=128), flat3).ringA_norm))
    assert vals[0] / vals[1] == pytest.approx(3.0, rel=1e-6)


def test_gradient_of_ringA_vanishes_on_sphere(schw3):
    g = geometry(make_coordinate_sphere(3, 20.0, N=256), schw3)
    assert np.max(g.gradringA_norm) < 1e-9


def test_band_membership(schw3):
    # the realized margins are grid noise that falls ~8x per refinement
    s = make_coordinate_sphere(3, 20.0, N=128)
    rep = band_membership(s, schw3, 20.0, 1e-3, 1e-3, 1e-3)
    assert rep.B1_margin == pytest.approx(0.0, abs=1e-13) and rep.in_band
    big = Surface(3, np.full(64, 20.0 + 2 * 0.5))
    rep = band_membership(big, schw3, 20.0, 0.5, 10.0, 10.0)
    assert rep.B1_margin == pytest.approx(1.0) and not rep.in_band


def test_area_and_volume_flat(flat3):
    area, _ = area_and_volume(Surface(3, np.ones(2048)), flat3)
    assert area == pytest.approx(4 * np.pi, rel=1e-6)
    _, vol = area_and_volume(Surface(3, np.full(256, 2.0)), flat3)
    assert vol == pytest.approx(4 * np.pi / 3 * (2**3 - 1), rel=1e-4)


def test_schwarzschild_area_law(schw3):
    area, _ = area_and_volume(make_coordinate_sphere(3, 10.0, N=512), schw3)
    assert area == pytest.approx(oracles.conformal_sphere_area(10.0, 3, 2.0), rel=1e-5)


def test_gauss_codazzi_flat(flat3):
    rho, _, _ = oracles.ellipsoid_profile(20.0)
    gres, cres = gauss_codazzi_residual(make_profile_surface(3, rho, N=256), flat3)
    assert gres < 1e-6 and cres < 1e-6


@pytest.mark.parametrize("n", [3, 4])
def test_gauss_codazzi_schwarzschild_converges(n):
    amb = AmbientMetric(n=n, m=2.0)
    res = []
    for N in (64, 128):
        s = Surface(n, np.full(N, 10.0), center_offset=3.0)
        g = geometry(s, amb, with_curvature=True)
        scale = np.max(g.A_norm2)
        r = gauss_codazzi_residual(s, amb, g)
        assert max(r) <= 5e-4 * scale
        res.append(r)
    assert res[0][0] / res[1][0] > 3.5
    assert res[0][1] / res[1][1] > 3.5


def _test_surfaces(n):
    rho, _, _ = oracles.ellipsoid_profile(20.0)
    return [make_profile_surface(n, rho, N=128),
            make_profile_surface(n, lambda t: 15.0 * (1 + 0.02 * np.cos(t) ** 3 + 0.01 * np.cos(t)),
                                 N=128),
            Surface(n, np.full(128, 12.0), center_offset=2.0)]


@pytest.mark.parametrize("n", [3, 4])
def test_euler_homogeneity_and_mean_bound(n, perturbed3):
    amb = AmbientMetric(n=n, m=2.0)
    for s in _test_surfaces(n):
        g = geometry(s, amb)
        assert np.allclose(g.F_t * g.lam_t + (n - 2) * g.F_p * g.lam_p, g.F, rtol=1e-12, atol=0)
        assert np.all(g.F <= g.H / (n - 1) ** 2 + 1e-12)
        assert np.all(g.F <= g.H / (n - 1) + 1e-12)
        assert np.allclose(g.H, g.lam_t + (n - 2) * g.lam_p)
    g = geometry(make_coordinate_sphere(n, 20.0, N=128), amb)
    assert np.allclose(g.F, g.H / (n - 1) ** 2, rtol=1e-7)


@pytest.mark.parametrize("n", [3, 4])
def test_gradient_inequality(n):
    eta = 0.1
    amb = AmbientMetric(n=n, m=2.0)
    for s in _test_surfaces(n):
        g = geometry(s, amb, with_curvature=True)
        gA2, gH2 = second_fundamental_gradients(g)
        rhs = ((3 / (n + 1) - eta) * gH2
               - 2 / (n + 1) * (2 / ((n + 1) * eta) - (n - 1) / (n - 2)) * g.w**2)
        assert np.all(gA2 >= rhs - 1e-14 * np.max(gA2))


def test_normal_is_unit_and_orthogonal(schw3):
    s = make_profile_surface(3, lambda t: 15.0 * (1 + 0.02 * np.cos(t) ** 2), N=64)
    g = geometry(s, schw3, with_curvature=True)
    G = g.extras["curvature"].metric
    ip = lambda a, b: np.einsum("kab,ka,kb->k", G, a, b)
    assert np.allclose(ip(g.nu, g.nu), 1.0, atol=1e-13)
    assert np.max(np.abs(ip(g.nu, g.e_theta))) < 1e-12
    assert np.max(np.abs(ip(g.nu, g.e_phi))) < 1e-12


def test_conformal_invariance_of_difference(flat3, schw3):
    rho, _, _ = oracles.ellipsoid_profile(20.0)
    s = make_profile_surface(3, rho, N=256)
    ge, gs = geometry(s, flat3), geometry(s, schw3)
    psi = np.sqrt(schw3.conformal_factor(gs.y))
    de, ds = ge.lam_t - ge.lam_p, gs.lam_t - gs.lam_p
    assert np.max(np.abs(ds - de / psi)) <= 1e-6 * np.max(np.abs(de))


@pytest.mark.parametrize("n", [3, 4])
def test_expansion_through_first_order(n):
    m = 2.0
    radii = np.array([20.0, 40.0, 80.0, 160.0])
    amb = AmbientMetric(n=n, m=m)
    res, coef = [], []
    for r0 in radii:
        g = geometry(make_coordinate_sphere(n, r0, N=512), amb)
        lead = 1 / r0 - (n - 1) * m / (n - 2) * r0 ** (1 - n)
        res.append(np.max(np.abs(np.concatenate([g.lam_t, g.lam_p]) - lead)))
        coef.append((oracles.conformal_sphere_curvature(r0, n, m) - lead) * r0 ** (2 * n - 3))
    slope = np.polyfit(np.log(radii), np.log(res), 1)[0]
    assert slope <= -n + 0.3
    # measured m^2 coefficient: (2n-3) n m^2 / (4 (n-2)^2) at leading order
    assert coef[-1] == pytest.approx((2 * n - 3) * n * m**2 / (4 * (n - 2) ** 2), rel=0.05)


def test_json_round_trip():
    s = make_profile_surface(3, lambda t: 10 + np.cos(t) ** 2, N=64, center_offset=0.5)
    t = Surface.from_json(json.dumps(s.to_json()))
    assert np.array_equal(s.profile, t.profile) and t.center_offset == 0.5 and t.n == 3
    bad = s.to_json()
    bad["theta_nodes_count"] = 10
    with pytest.raises(ValueError):
        Surface.from_json(bad)


def test_geometry_csv_columns(schw3):
    g = geometry(make_coordinate_sphere(3, 20.0, N=64), schw3, with_curvature=True)
    cols, data = g.csv_rows()
    assert data.shape == (64, len(cols))
    assert {"theta", "lam_t", "lam_p", "F", "ringA_norm", "w"} <= set(cols)


def test_degenerate_tangent_raises(flat3, monkeypatch):
    from chmc import stencil
    monkeypatch.setattr(stencil, "d1", lambda fp, dth, g=2: np.zeros((fp.shape[0] - 2 * g, 2)))
    with pytest.raises(DiscretizationError):
        geometry(Surface(3, np.full(64, 5.0)), flat3)


def test_non_convex_profile_flags_nodes(flat3):
    s = make_profile_surface(3, lambda t: 10 * (1 + 0.6 * np.cos(t) ** 8), N=128)
    g = geometry(s, flat3)
    assert np.any(g.undefined)
    assert np.all(np.isnan(g.F[g.undefined]))
