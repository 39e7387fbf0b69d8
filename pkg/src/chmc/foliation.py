"""Ladders of CHMC surfaces, the foliation check and the two centers of mass."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi

from .ambient import metric_derivatives, sphere_area
from .errors import CHMCError, LadderError
from .flow import FlowConfig, run_to_convergence
from .spectral import assemble_L, assemble_S, eigen_report
from .surface import Surface, euclidean_centroid, make_coordinate_sphere

__all__ = [
    "LadderEntry",
    "FoliationLadder",
    "FoliationReport",
    "CenterReport",
    "build_ladder",
    "check_foliation",
    "regraph",
    "center_of_mass_chm",
    "center_of_mass_adm",
    "adm_flux",
]

log = logging.getLogger(__name__)


@dataclass
class LadderEntry:
    sigma: float
    F_value: float
    surface: Surface
    spectral: object = None
    flow: dict = field(default_factory=dict)


@dataclass
class FoliationLadder:
    entries: list = field(default_factory=list)

    @property
    def sigmas(self):
        return np.array([e.sigma for e in self.entries])

    @property
    def F_values(self):
        return np.array([e.F_value for e in self.entries])

    def __len__(self):
        return len(self.entries)


def _run_entry(args):
    sigma, ambient, config, N, start_center, with_spectral = args
    start = make_coordinate_sphere(ambient.n, sigma, start_center, N)
    res = run_to_convergence(start, ambient, config)
    report = None
    if with_spectral:
        mats = assemble_S(assemble_L(res.state.surface, ambient))
        report = eigen_report(mats, sigma=sigma, ambient=ambient)
    return LadderEntry(float(sigma), res.state.f, res.state.surface, report, res.summary())


def build_ladder(sigmas, ambient, flow_config=FlowConfig(), N=64, start_center=0.0,
                 with_spectral=False, jobs=1):
    """Flow the coordinate sphere of each radius to its CHMC limit.

    Entries run in parallel processes when ``jobs > 1``.  On failure a
    :class:`LadderError` is raised carrying the entries that completed.
    """
    sigmas = [float(s) for s in sigmas]
    if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise ValueError("sigmas must be strictly increasing")
    tasks = [(s, ambient, flow_config, N, start_center, with_spectral) for s in sigmas]
    ladder = FoliationLadder()
    if jobs <= 1:
        for task in tasks:
            try:
                ladder.entries.append(_run_entry(task))
            except CHMCError as exc:
                raise LadderError(f"flow failed at sigma={task[0]}: {exc}", ladder, exc) from exc
        return ladder
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_entry, t) for t in tasks]
        failure = None
        for task, fut in zip(tasks, futures):
            try:
                ladder.entries.append(fut.result())
            except CHMCError as exc:
                failure = failure or (task[0], exc)
    if failure:
        raise LadderError(f"flow failed at sigma={failure[0]}: {failure[1]}", ladder, failure[1])
    return ladder


def regraph(surface, center):
    """Re-express ``surface`` as a radial graph about the axis point ``center``."""
    if center == surface.center_offset:
        return surface
    mer = surface.meridian()
    x, s = mer[:, 0] - center, mer[:, 1]
    ang = np.arctan2(s, x)
    rad = np.hypot(x, s)
    # close the curve through both poles by reflection
    ang_ext = np.concatenate([-ang[::-1], ang, 2 * np.pi - ang[::-1]])
    rad_ext = np.concatenate([rad[::-1], rad, rad[::-1]])
    if np.any(np.diff(ang_ext) <= 0):
        raise ValueError("surface is not a radial graph about the requested center")
    th = surface.theta
    return Surface(surface.n, np.interp(th, ang_ext, rad_ext), center)


@dataclass
class FoliationReport:
    pairs: list
    all_positive: bool
    F_decreasing: bool

    @property
    def min_gap(self):
        return min(p["min_gap"] for p in self.pairs)

    def to_json(self):
        return {"pairs": self.pairs, "all_positive": self.all_positive,
                "F_decreasing": self.F_decreasing, "min_gap": self.min_gap}


def check_foliation(ladder):
    """Pairwise radial gaps ``rho_next - rho_prev`` on a common axis point."""
    if len(ladder) < 2:
        raise ValueError("need at least two ladder entries")
    pairs = []
    for lo, hi in zip(ladder.entries, ladder.entries[1:]):
        a, b = lo.surface, hi.surface
        center = a.center_offset
        if b.center_offset != a.center_offset:
            center = 0.5 * (a.center_offset + b.center_offset)
        ra, rb = regraph(a, center), regraph(b, center)
        if ra.N != rb.N:
            raise ValueError("ladder entries use different grids")
        gap = rb.profile - ra.profile
        k = int(np.argmin(gap))
        if abs(b.center_offset - a.center_offset) > gap[k]:
            log.warning("center offsets differ by more than the gap at sigma=%g", hi.sigma)
        pairs.append({"sigma_lo": lo.sigma, "sigma_hi": hi.sigma, "min_gap": float(gap[k]),
                      "theta_at_min": float(ra.theta[k]), "positive": bool(np.all(gap > 0))})
    F = ladder.F_values
    return FoliationReport(pairs, all(p["positive"] for p in pairs), bool(np.all(np.diff(F) < 0)))


@dataclass
class CenterReport:
    sigmas: list = None
    c_hm: list = None
    c_hm_limit: float = None
    c_hm_fit_residual: float = None
    radii: list = None
    c_adm: list = None
    c_adm_limit: float = None
    c_adm_fit_residual: float = None
    b_term: float = None

    def to_json(self):
        return {k: v for k, v in self.__dict__.items()}


def _fit_limit(x, c):
    """Least-squares ``c = c_inf + b x``; returns ``(c_inf, max residual)``."""
    x, c = np.asarray(x, float), np.asarray(c, float)
    if x.size == 1:
        return float(c[0]), 0.0
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, c, rcond=None)
    return float(coef[0]), float(np.max(np.abs(A @ coef - c)))


def center_of_mass_chm(ladder):
    """Euclidean-area centroids of the leaves, extrapolated as ``c_inf + b sigma^-1/2``."""
    if not len(ladder):
        raise ValueError("ladder is empty")
    sig = ladder.sigmas
    c = [euclidean_centroid(e.surface) for e in ladder.entries]
    lim, res = _fit_limit(sig**-0.5, c)
    return CenterReport(sigmas=sig.tolist(), c_hm=c, c_hm_limit=lim, c_hm_fit_residual=res)


def adm_flux(ambient, R, nodes=48):
    """Axial ADM center integral on the coordinate sphere ``|y| = R``."""
    n = ambient.n
    alpha = (n - 3) / 2.0
    t, wq = roots_jacobi(nodes, alpha, alpha)
    y = np.zeros((nodes, n))
    y[:, 0] = R * t
    y[:, 1] = R * np.sqrt(1 - t**2)
    nu = y / R
    dg = metric_derivatives(ambient, y)               # d_a g_bc
    g = ambient.conformal_excess(y)[:, None, None] * np.eye(n)
    div = np.einsum("kiij->kj", dg) - np.einsum("kjii->kj", dg)
    first = y[:, 0] * np.einsum("kj,kj->k", div, nu)
    second = np.einsum("ki,ki->k", g[:, :, 0], nu) - np.trace(g, axis1=1, axis2=2) * nu[:, 0]
    integrand = first - second
    total = sphere_area(n - 2) * R ** (n - 1) * np.sum(wq * integrand)
    return total / (2 * ambient.m * (n - 1) * sphere_area(n - 1))


def center_of_mass_adm(ambient, radii, nodes=48):
    """ADM center at each radius plus the limit of a fit linear in ``1/R``."""
    if ambient.m <= 0:
        raise ValueError("the ADM center needs positive mass")
    radii = np.asarray(radii, dtype=float)
    if ambient.perturbation.epsilon and np.any(radii < 2 * ambient.perturbation.cutoff_radius
                                               + abs(ambient.center)):
        raise ValueError("radii must lie where the perturbation cutoff is identically one")
    c = [adm_flux(ambient, R, nodes) for R in radii]
    lim, res = _fit_limit(1 / radii, c)
    b_term = 2 * ambient.dipole / ((ambient.n - 2) * ambient.m) if ambient.dipole else None
    return CenterReport(radii=radii.tolist(), c_adm=c, c_adm_limit=lim, c_adm_fit_residual=res,
                        b_term=b_term)
