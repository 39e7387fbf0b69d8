"""Acceptance criteria 1-10 at their stated tolerances.

Each test records one PASS/FAIL line (see ``acceptance_log``); the lines are
repeated in the pytest terminal summary.  Run this file directly to see only
the criterion lines.
"""

import numpy as np
import pytest

import oracles
from acceptance_log import record
from chmc import AmbientMetric, PerturbationSpec, make_coordinate_sphere
from chmc.ambient import curvature_at, ricci_closed_form
from chmc.flow import (FlowConfig, default_tol_l2, displacement_from_tol, run_to_convergence,
                       tail_monotone, tol_for_displacement, uniqueness_probe)
from chmc.foliation import (FoliationLadder, LadderEntry, build_ladder, center_of_mass_adm,
                            center_of_mass_chm, check_foliation)
from chmc.spectral import assemble_L, assemble_S, eigen_report
from chmc.surface import euclidean_centroid, geometry, make_profile_surface

M = 2.0


def schwarzschild(n=3, **kw):
    return AmbientMetric(n=n, m=M, **kw)


def perturbed():
    pert = PerturbationSpec(epsilon=2.0, cosine_coeffs=(0.5, 0.0, 1.0), cutoff_radius=2.0)
    return AmbientMetric(n=3, m=M, delta=0.5, perturbation=pert)


# -- criterion helpers --------------------------------------------------------

def sphere_curvature_error(n, r0, N):
    exact = oracles.conformal_sphere_curvature(r0, n, M)
    g = geometry(make_coordinate_sphere(n, r0, N=N), schwarzschild(n))
    return max(np.max(np.abs(g.lam_t / exact - 1)), np.max(np.abs(g.lam_p / exact - 1)))


def check_sphere_oracle(n):
    """Criterion 2 at dimension ``n``.

    On exact spheres the error reaches the finite-difference floor of the
    ambient derivatives (about 1e-10) by N = 512, so the refinement factor
    is measured on the coarsest pair where the grid error still dominates.
    """
    floor = 1e-9
    lines, ok = [], True
    for r0 in (10.0, 20.0, 40.0):
        e512, e1024 = sphere_curvature_error(n, r0, 512), sphere_curvature_error(n, r0, 1024)
        if e512 > floor:
            fall = e512 / e1024
        else:
            coarse = [sphere_curvature_error(n, r0, N) for N in (128, 256)]
            fall = coarse[0] / coarse[1]
            ok &= e1024 <= 2 * e512
        ok &= e512 <= 1e-4 and fall >= 3.5
        lines.append(f"r0={r0:g}: err512={e512:.2e} err1024={e1024:.2e} fall={fall:.1f}")
    return ok, "; ".join(lines)


def check_expansion(n):
    r0s = np.array([20.0, 40.0, 80.0, 160.0])
    amb = schwarzschild(n)
    res = []
    for r0 in r0s:
        lam = np.mean(geometry(make_coordinate_sphere(n, r0, N=512), amb).lam_t)
        res.append(abs(lam - (1 / r0 - (n - 1) * M / (n - 2) * r0 ** (1 - n))))
    slope = np.polyfit(np.log(r0s), np.log(res), 1)[0]
    return slope <= -n + 0.3, f"slope={slope:.3f} (need <= {-n + 0.3:.1f})"


def check_stationarity(n, sigma=20.0, N=64):
    amb = schwarzschild(n)
    cfg = FlowConfig(dt_safety=1.0, tol_l2=1e-300, max_steps=1000, record_every=100)
    res = run_to_convergence(make_coordinate_sphere(n, sigma, N=N), amb, cfg)
    moved = float(np.max(np.abs(res.state.surface.profile - sigma)))
    grid_tol = displacement_from_tol(default_tol_l2(n, sigma, res.state.area), n, M, sigma,
                                     res.state.area)
    ok = res.state.steps == 1000 and moved <= 10 * grid_tol and abs(res.volume_drift) <= 1e-4
    return ok, (f"steps={res.state.steps} moved={moved:.2e} (10x grid tol {10 * grid_tol:.2e}) "
                f"volume drift={res.volume_drift:.1e}")


# -- criteria -----------------------------------------------------------------

def test_criterion_01_curvature_oracle():
    amb = schwarzschild()
    ricci_err = scalar = weyl = 0.0
    for r in (5.0, 10.0, 50.0):
        for th in np.linspace(0.1, np.pi - 0.1, 7):
            y = np.array([[r * np.cos(th), r * np.sin(th) * 0.6, r * np.sin(th) * 0.8]])
            curv = curvature_at(amb, y)
            exact = ricci_closed_form(amb, y)[0]
            ricci_err = max(ricci_err, np.max(np.abs(curv.ricci[0] - exact)) / np.max(np.abs(exact)))
            scalar = max(scalar, abs(curv.scalar[0]) * r**3)
            weyl = max(weyl, np.max(np.abs(curv.weyl[0])) / np.max(np.abs(curv.ricci[0])))
    ok = ricci_err <= 1e-4 and scalar <= 1e-4 and weyl <= 1e-6
    assert record(1, ok, f"ricci rel err={ricci_err:.1e}, |R| r^3={scalar:.1e}, weyl/ricci={weyl:.1e}")


def test_criterion_02_sphere_curvature_oracle():
    ok, detail = check_sphere_oracle(3)
    assert record(2, ok, detail)


def test_criterion_03_expansion_scaling():
    ok, detail = check_expansion(3)
    assert record(3, ok, detail)


def test_criterion_04_stationarity():
    ok, detail = check_stationarity(3)
    assert record(4, ok, detail)


def test_criterion_05_exponential_convergence():
    amb = schwarzschild()
    parts, ok = [], True
    for sigma in (20.0, 40.0):
        start = make_profile_surface(3, lambda t, s=sigma: s * (1 + 0.01 * np.cos(t) ** 2), N=64)
        res = run_to_convergence(start, amb, FlowConfig(dt_safety=1.0, record_every=10))
        fit = res.fit
        mono = tail_monotone(res.series)
        good = res.converged and fit.available and 0.75 <= fit.ratio <= 1.25 and mono
        ok &= good
        parts.append(f"sigma={sigma:g}: rate={fit.fitted_rate:.3e} pred={fit.predicted_rate:.3e} "
                     f"ratio={fit.ratio:.2f} monotone={mono}")
    assert record(5, ok, "; ".join(parts))


def test_criterion_06_spectral_bounds():
    amb = schwarzschild()
    sigmas = np.array([20.0, 40.0, 80.0])
    reps = []
    for sigma in sigmas:
        res = run_to_convergence(make_coordinate_sphere(3, sigma, N=64), amb,
                                 FlowConfig(dt_safety=1.0))
        assert res.converged and res.chmc
        reps.append(eigen_report(assemble_S(assemble_L(res.state.surface, amb)), sigma=sigma,
                                 ambient=amb))
    r20 = reps[0]
    mu_ratio = r20.mu0 / r20.mu0_pred
    eta_ratio = r20.eta0 / r20.eta0_pred
    slope = np.polyfit(np.log(sigmas), np.log([r.mu0 for r in reps]), 1)[0]
    smin = [r.smin * r.sigma**3 / M for r in reps]
    checks = {"mu0": 0.8 <= mu_ratio <= 1.2, "eta0": abs(eta_ratio - 1) <= 0.1,
              "exponent": abs(slope + 3) <= 0.2, "smin": min(smin) >= 0.5}
    detail = (f"mu0/pred={mu_ratio:.3f}, eta0/pred={eta_ratio:.3f}, exponent={slope:.2f}, "
              f"smin*s^3/m={min(smin):.2f}; failing: "
              f"{[k for k, v in checks.items() if not v] or 'none'}")
    assert record(6, all(checks.values()), detail)


def test_criterion_07_foliation():
    sigmas = [20.0, 24.0, 28.0, 32.0, 36.0, 40.0]
    ladder = build_ladder(sigmas, perturbed(), FlowConfig(dt_safety=1.0, record_every=100))
    rep = check_foliation(ladder)
    ok = rep.all_positive and rep.F_decreasing and all(e.flow["chmc"] for e in ladder.entries)
    assert record(7, ok, f"min gap={rep.min_gap:.4f}, F decreasing={rep.F_decreasing}, "
                         f"all gaps positive={rep.all_positive}")


def test_criterion_08_centers_of_mass():
    a = 3.0
    moved = schwarzschild(center=a)
    sigmas = [20.0, 30.0, 40.0]
    entries = []
    for sigma in sigmas:
        area = 4 * np.pi * sigma**2
        cfg = FlowConfig(dt_safety=1.0, record_every=100,
                         tol_l2=tol_for_displacement(1e-3, 3, M, sigma, area))
        res = run_to_convergence(make_coordinate_sphere(3, sigma, N=64), moved, cfg)
        entries.append(LadderEntry(sigma, res.state.f, res.state.surface))
    chm = center_of_mass_chm(FoliationLadder(entries))
    per_sigma = all(abs(c - a) <= 1e-3 * s for c, s in zip(chm.c_hm, sigmas))
    radii = [100.0, 200.0, 400.0, 800.0]
    dipole = center_of_mass_adm(schwarzschild(dipole=3.0), radii).c_adm_limit
    adm_moved = center_of_mass_adm(moved, radii).c_adm_limit
    diff = abs(chm.c_hm_limit - adm_moved)
    ok = per_sigma and abs(dipole / 3.0 - 1) <= 0.02 and diff <= 0.05 * a
    cents = ", ".join(f"{c:.4f}" for c in chm.c_hm)
    assert record(8, ok, f"centroids=[{cents}], dipole ADM={dipole:.4f}, "
                         f"|c_hm - c_adm|={diff:.2e} (limit {0.05 * a:.2f})")


def test_criterion_09_uniqueness():
    shapes = [lambda t: np.cos(t) ** 2, lambda t: np.cos(t) ** 4]
    probe = uniqueness_probe(perturbed(), 20.0, shapes, 0.01,
                             FlowConfig(dt_safety=1.0, record_every=100), 64)
    ok = probe["passed"] and all(probe["converged"])
    assert record(9, ok, f"max profile diff={probe['max_profile_diff']:.2e}, "
                         f"10x tol displacement={10 * probe['tol_displacement']:.2e}")


def test_criterion_10_dimension_four():
    results = [check_sphere_oracle(4), check_expansion(4), check_stationarity(4)]
    ok = all(r[0] for r in results)
    detail = " | ".join(f"[{k}] {'ok' if r[0] else 'FAIL'}: {r[1]}"
                        for k, r in zip((2, 3, 4), results))
    assert record(10, ok, detail)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
