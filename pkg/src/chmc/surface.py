r"""Axisymmetric radial-graph hypersurfaces and their extrinsic geometry.

A surface is stored as a meridian profile: the point at polar angle
``theta`` is ``c e_1 + rho(theta) (cos theta e_1 + sin theta e_2)``.  The
remaining ``n - 2`` directions come from rotations about the ``x^1`` axis,
so every geometric quantity can be evaluated on a single meridian with 1D
stencils.  At the representative point the azimuthal tangent is
``s e_3`` where ``s = rho sin theta`` is the distance to the axis.

Conventions: ``h_ij = -<nabla_{e_i} e_j, nu>`` with the outward normal, so
round spheres have positive principal curvatures.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import stencil
from .ambient import christoffel_at, curvature_at, metric_at, sphere_area
from .errors import DiscretizationError, UndefinedCurvatureError

__all__ = [
    "Surface",
    "GeometryField",
    "BandReport",
    "make_coordinate_sphere",
    "make_profile_surface",
    "geometry",
    "harmonic_mean_curvature",
    "traceless_gradient_norms",
    "band_membership",
    "area_and_volume",
    "gauss_codazzi_residual",
    "best_fit_sphere",
    "euclidean_centroid",
    "volume_weights",
]


@dataclass
class Surface:
    n: int
    profile: np.ndarray
    center_offset: float = 0.0

    def __post_init__(self):
        self.profile = np.asarray(self.profile, dtype=float)
        if self.profile.ndim != 1 or self.profile.size < 8:
            raise ValueError("profile must be a 1D array with at least 8 nodes")
        if not np.all(self.profile >= 1.0):
            raise ValueError("profile must stay outside the unit ball (rho >= 1)")

    @property
    def N(self):
        return self.profile.size

    @property
    def dtheta(self):
        return np.pi / self.N

    @property
    def theta(self):
        return stencil.theta_nodes(self.N)

    def with_profile(self, profile):
        return Surface(self.n, profile, self.center_offset)

    def meridian(self, padded=False):
        """``(x1, s)`` coordinates of the meridian, optionally with ghost cells."""
        if padded:
            th = stencil.theta_padded(self.N)
            rho = stencil.pad(self.profile, 1)
        else:
            th, rho = self.theta, self.profile
        return np.stack([self.center_offset + rho * np.cos(th), rho * np.sin(th)], axis=-1)

    def positions(self):
        """Representative points in R^n, shape ``(N, n)``."""
        y = np.zeros((self.N, self.n))
        y[:, :2] = self.meridian()
        return y

    def to_json(self):
        return {"n": self.n, "center_offset": float(self.center_offset),
                "theta_nodes_count": int(self.N), "profile": self.profile.tolist()}

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        surf = cls(int(data["n"]), np.asarray(data["profile"], dtype=float),
                   float(data.get("center_offset", 0.0)))
        if surf.N != int(data.get("theta_nodes_count", surf.N)):
            raise ValueError("theta_nodes_count does not match profile length")
        return surf


def make_coordinate_sphere(n, sigma, center_offset=0.0, N=128):
    if sigma <= 2:
        raise ValueError("sigma must exceed 2")
    return Surface(n, np.full(N, float(sigma)), center_offset)


def make_profile_surface(n, fun, N=128, center_offset=0.0):
    """Surface whose profile is ``fun(theta)`` evaluated at the nodes."""
    th = stencil.theta_nodes(N)
    return Surface(n, np.asarray(fun(th), dtype=float), center_offset)


def harmonic_mean_curvature(lambdas, axis=-1):
    """``1 / sum(1 / lambda_i)``; every curvature must be positive."""
    lam = np.asarray(lambdas, dtype=float)
    if np.any(~(lam > 0)):
        raise UndefinedCurvatureError("harmonic mean curvature needs positive principal curvatures")
    return 1.0 / np.sum(1.0 / lam, axis=axis)


@dataclass
class GeometryField:
    """Per-node extrinsic data on one meridian.

    Quantities indexed ``_t`` refer to the meridional principal direction,
    ``_p`` to any of the ``n - 2`` azimuthal ones.  ``F_t`` and ``F_p`` are
    the derivatives ``dF / d lambda_i`` (``F^{ii}`` in the principal frame).
    Ambient-curvature entries are ``None`` unless requested.
    """

    n: int
    theta: np.ndarray
    dtheta: float
    y: np.ndarray
    e_theta: np.ndarray
    e_phi: np.ndarray
    nu: np.ndarray
    g_tt: np.ndarray
    g_pp: np.ndarray
    h_tt: np.ndarray
    h_pp: np.ndarray
    lam_t: np.ndarray
    lam_p: np.ndarray
    H: np.ndarray
    F: np.ndarray
    F_t: np.ndarray
    F_p: np.ndarray
    undefined: np.ndarray
    ringA_norm: np.ndarray
    gradringA_norm: np.ndarray
    area_weights: np.ndarray
    radial_normal: np.ndarray
    kappa: np.ndarray
    ell: np.ndarray
    q: np.ndarray
    # ambient contractions (standard sectional-curvature sign)
    sec_nu_t: np.ndarray = None
    sec_nu_p: np.ndarray = None
    ric_nu_nu: np.ndarray = None
    w: np.ndarray = None
    sec_t_p: np.ndarray = None
    sec_p_p: np.ndarray = None
    codazzi_ambient: np.ndarray = None
    extras: dict = field(default_factory=dict)

    @property
    def A_norm2(self):
        return self.lam_t**2 + (self.n - 2) * self.lam_p**2

    @property
    def potential(self):
        """``F^ij h_ik h_jk + F^ij Rbar(e_i, nu, e_j, nu)`` (zeroth-order term of L)."""
        if self.sec_nu_t is None:
            raise ValueError("geometry was computed without ambient curvature")
        return (self.F_t * (self.lam_t**2 + self.sec_nu_t)
                + (self.n - 2) * self.F_p * (self.lam_p**2 + self.sec_nu_p))

    def csv_rows(self):
        cols = ["theta", "x1", "x2", "g_tt", "g_pp", "h_tt", "h_pp", "lam_t", "lam_p",
                "H", "F", "ringA_norm", "gradringA_norm", "area_weight"]
        data = [self.theta, self.y[:, 0], self.y[:, 1], self.g_tt, self.g_pp, self.h_tt,
                self.h_pp, self.lam_t, self.lam_p, self.H, self.F, self.ringA_norm,
                self.gradringA_norm, self.area_weights]
        if self.sec_nu_t is not None:
            cols += ["sec_nu_t", "sec_nu_p", "ric_nu_nu", "w"]
            data += [self.sec_nu_t, self.sec_nu_p, self.ric_nu_nu, self.w]
        return cols, np.column_stack(data)


def _embed(v2, n):
    out = np.zeros(v2.shape[:-1] + (n,))
    out[..., :2] = v2
    return out


def geometry(surface, ambient, with_curvature=False):
    """Extrinsic geometry of ``surface`` in ``ambient``.

    Tangents come from fourth-order differences of the meridian, the
    meridional second derivative from a fourth-order stencil, and the
    azimuthal direction from the rotation field.  Nodes with a non-positive
    principal curvature are flagged in ``undefined`` and get ``F = nan``.
    """
    n = surface.n
    if ambient.n != n:
        raise ValueError("surface and ambient dimensions differ")
    dth = surface.dtheta
    mer = surface.meridian(padded=True)
    t2 = stencil.d1(mer, dth)
    a2 = stencil.d2_4(mer, dth)
    tnorm = np.linalg.norm(t2, axis=-1)
    if np.any(tnorm < 1e-12 * np.max(surface.profile)):
        raise DiscretizationError("degenerate meridian tangent")

    y = surface.positions()
    s = y[:, 1]
    e_t = _embed(t2, n)
    acc_t = _embed(a2, n)
    e_p = np.zeros_like(y)
    e_p[:, 2] = s
    acc_p = np.zeros_like(y)
    acc_p[:, 1] = -s

    g = metric_at(ambient, y)
    ginv = np.linalg.inv(g)
    G = christoffel_at(ambient, y)

    # covector annihilating e_theta and all azimuthal directions, outward
    omega = np.zeros_like(y)
    omega[:, 0] = t2[:, 1]
    omega[:, 1] = -t2[:, 0]
    nu_up = np.einsum("kab,kb->ka", ginv, omega)
    nrm = np.sqrt(np.einsum("ka,ka->k", omega, nu_up))
    nu = nu_up / nrm[:, None]

    def gnu(X):
        # gbar(X, nu) = X . omega / |omega|
        return np.einsum("ka,ka->k", X, omega) / nrm

    g_tt = np.einsum("kab,ka,kb->k", g, e_t, e_t)
    g_pp = np.einsum("kab,ka,kb->k", g, e_p, e_p)
    h_tt = -gnu(acc_t + np.einsum("kcab,ka,kb->kc", G, e_t, e_t))
    h_pp = -gnu(acc_p + np.einsum("kcab,ka,kb->kc", G, e_p, e_p))
    lam_t = h_tt / g_tt
    lam_p = h_pp / g_pp

    radial = np.zeros_like(y)
    radial[:, 0] = np.cos(surface.theta)
    radial[:, 1] = np.sin(surface.theta)
    radial_normal = gnu(radial)

    H = lam_t + (n - 2) * lam_p
    undefined = ~((lam_t > 0) & (lam_p > 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        F = 1.0 / (1.0 / lam_t + (n - 2) / lam_p)
        F_t = F**2 / lam_t**2
        F_p = F**2 / lam_p**2
    F = np.where(undefined, np.nan, F)

    ell = np.sqrt(g_tt)
    q = np.sqrt(g_pp)
    dq = stencil.deriv(q, dth, parity=-1)
    kappa = dq / (ell * q)
    area_w = sphere_area(n - 2) * ell * q ** (n - 2) * dth

    D = lam_t - lam_p
    ringA = np.sqrt((n - 2) / (n - 1)) * np.abs(D)
    dD = stencil.deriv(D, dth, parity=1)
    gradringA = np.sqrt((n - 2) / (n - 1) * (dD / ell) ** 2 + 2 * (n - 2) * kappa**2 * D**2)

    geo = GeometryField(
        n=n, theta=surface.theta, dtheta=dth, y=y, e_theta=e_t, e_phi=e_p, nu=nu,
        g_tt=g_tt, g_pp=g_pp, h_tt=h_tt, h_pp=h_pp, lam_t=lam_t, lam_p=lam_p, H=H, F=F,
        F_t=F_t, F_p=F_p, undefined=undefined, ringA_norm=ringA, gradringA_norm=gradringA,
        area_weights=area_w, radial_normal=radial_normal, kappa=kappa, ell=ell, q=q)
    if with_curvature:
        _attach_curvature(geo, ambient)
    return geo


def _attach_curvature(geo, ambient):
    n = geo.n
    curv = curvature_at(ambient, geo.y)
    Et = geo.e_theta / geo.ell[:, None]
    Ep = geo.e_phi / geo.q[:, None]
    nu = geo.nu
    geo.sec_nu_t = curv.sectional(nu, Et)
    geo.sec_nu_p = curv.sectional(nu, Ep)
    geo.ric_nu_nu = np.einsum("kab,ka,kb->k", curv.ricci, nu, nu)
    geo.w = np.einsum("kab,ka,kb->k", curv.ricci, nu, Et)
    geo.sec_t_p = curv.sectional(Et, Ep)
    if n >= 4:
        Ep2 = np.zeros_like(Ep)
        Ep2[:, 3] = 1.0 / np.sqrt(curv.metric[:, 3, 3])
        geo.sec_p_p = curv.sectional(Ep, Ep2)
    # Rm(E_phi, nu, E_phi, E_theta) enters the Codazzi equation
    geo.codazzi_ambient = np.einsum("kabcd,ka,kb,kc,kd->k", curv.riemann, Ep, nu, Ep, Et)
    geo.extras["curvature"] = curv


def traceless_gradient_norms(geo):
    """``(|A°|, |grad A°|)`` per node."""
    return geo.ringA_norm, geo.gradringA_norm


def second_fundamental_gradients(geo):
    """``(|grad A|^2, |grad H|^2)`` from the axisymmetric connection formulas."""
    n, dth = geo.n, geo.dtheta
    dlt = stencil.deriv(geo.lam_t, dth)
    dlp = stencil.deriv(geo.lam_p, dth)
    grad_A2 = ((dlt**2 + (n - 2) * dlp**2) / geo.ell**2
               + 2 * (n - 2) * geo.kappa**2 * (geo.lam_t - geo.lam_p) ** 2)
    grad_H2 = (dlt + (n - 2) * dlp) ** 2 / geo.ell**2
    return grad_A2, grad_H2


@dataclass
class BandReport:
    sigma: float
    B1_margin: float
    B2_margin: float
    B3_margin: float
    B: tuple
    in_band: bool

    def to_json(self):
        return {"sigma": self.sigma, "B1_margin": self.B1_margin, "B2_margin": self.B2_margin,
                "B3_margin": self.B3_margin, "B": list(self.B), "in_band": self.in_band}


def band_membership(surface, ambient, sigma, B1, B2, B3, geo=None):
    """Realized margins against the round-surface class around radius ``sigma``."""
    if geo is None:
        geo = geometry(surface, ambient)
    n, d = ambient.n, ambient.delta
    r = ambient.radius(geo.y)
    m1 = float(np.max(np.abs(r - sigma)))
    m2 = float(np.max(geo.ringA_norm) * sigma ** (n + d))
    m3 = float(np.max(geo.gradringA_norm) * sigma ** (n + 1 + d))
    inside = m1 <= B1 and m2 <= B2 and m3 <= B3
    return BandReport(float(sigma), m1, m2, m3, (B1, B2, B3), bool(inside))


_GL_X, _GL_W = leggauss(16)


def _radial_integral(ambient, surface, rho, r_in):
    """``int_{r_in}^{rho} sqrt(det g) r^(n-1) dr`` along each node's ray."""
    n = surface.n
    th = surface.theta
    dirs = np.zeros((surface.N, n))
    dirs[:, 0], dirs[:, 1] = np.cos(th), np.sin(th)
    origin = np.zeros(n)
    origin[0] = surface.center_offset
    total = np.zeros(surface.N)
    # geometric sub-intervals keep the near-ball region resolved
    edges = [r_in]
    while edges[-1] < rho.max():
        edges.append(edges[-1] * 1.5)
    for lo, hi in zip(edges[:-1], edges[1:]):
        a = np.full(surface.N, lo)
        b = np.clip(rho, lo, hi)
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        r = mid[:, None] + half[:, None] * _GL_X[None, :]
        pts = origin + r[..., None] * dirs[:, None, :]
        s = ambient.conformal_factor(pts)
        dens = s ** (n / 2.0) * r ** (n - 1)
        total += half * (dens @ _GL_W)
    return total


def inner_radius(surface, ambient):
    """Inner radius of the reference ball about the surface center."""
    return 1.0 + abs(ambient.center - surface.center_offset)


def area_and_volume(surface, ambient, geo=None):
    """Area and enclosed volume relative to the reference ball.

    The reference ball is centered at the surface's axis point with radius
    ``1 + |a - c|`` so it always contains the excluded unit ball; only volume
    differences are meaningful.
    """
    if geo is None:
        geo = geometry(surface, ambient)
    n = surface.n
    area = float(np.sum(geo.area_weights))
    radial = _radial_integral(ambient, surface, surface.profile, inner_radius(surface, ambient))
    vol = sphere_area(n - 2) * surface.dtheta * np.sum(np.sin(surface.theta) ** (n - 2) * radial)
    return area, float(vol)


def volume_weights(surface, ambient, geo):
    """Discrete area weights consistent with ``d volume / d rho``.

    ``d V / d t = sum_k w_k v_k`` exactly for normal speeds ``v_k`` when the
    profile moves by ``v_k / gbar(r_hat, nu)``.  The weights approximate the
    same induced measure as ``geo.area_weights``.
    """
    n = surface.n
    th = surface.theta
    s = ambient.conformal_factor(geo.y)
    dvdrho = (sphere_area(n - 2) * surface.dtheta * np.sin(th) ** (n - 2)
              * s ** (n / 2.0) * surface.profile ** (n - 1))
    return dvdrho / geo.radial_normal


def gauss_codazzi_residual(surface, ambient, geo=None):
    """Max-norm residuals of the Gauss and Codazzi equations.

    Gauss is checked on the meridian/azimuth plane (and azimuth/azimuth for
    ``n >= 4``); Codazzi on its only non-trivial axisymmetric component
    ``(nabla_phi h)(theta, phi) - (nabla_theta h)(phi, phi)``.
    """
    if geo is None or geo.sec_nu_t is None:
        geo = geometry(surface, ambient, with_curvature=True)
    n, dth = surface.n, surface.dtheta
    ell, q = geo.ell, geo.q
    dq = stencil.deriv(q, dth, parity=-1)
    qprime_over_ell = dq / ell
    K_tp = -stencil.deriv(qprime_over_ell, dth, parity=1) / (ell * q)
    gauss = K_tp - (geo.sec_t_p + geo.lam_t * geo.lam_p)
    res_g = np.abs(gauss)
    if n >= 4:
        K_pp = (1.0 - qprime_over_ell**2) / q**2
        res_g = np.maximum(res_g, np.abs(K_pp - (geo.sec_p_p + geo.lam_p**2)))
    dlp = stencil.deriv(geo.lam_p, dth)
    codazzi = geo.kappa * (geo.lam_t - geo.lam_p) - dlp / ell - geo.codazzi_ambient
    return float(np.max(res_g)), float(np.max(np.abs(codazzi)))


def best_fit_sphere(surface):
    """Least-squares ``(axial_center, radius)`` of a round sphere through the nodes.

    Uses the algebraic fit ``|y|^2 = 2 x0 y1 + k`` weighted by ``sin^(n-2)``
    so that nodes count according to the round measure.
    """
    y = surface.meridian()
    w = np.sqrt(np.sin(surface.theta) ** (surface.n - 2))
    A = np.column_stack([2 * y[:, 0], np.ones(surface.N)]) * w[:, None]
    b = np.sum(y**2, axis=1) * w
    (x0, k), *_ = np.linalg.lstsq(A, b, rcond=None)
    return float(x0), float(np.sqrt(k + x0**2))


def euclidean_centroid(surface):
    """Axial component of the centroid under the Euclidean area measure."""
    n = surface.n
    mer = surface.meridian(padded=True)
    t = stencil.d1(mer, surface.dtheta)
    y = surface.meridian()
    dmu = np.linalg.norm(t, axis=-1) * np.abs(y[:, 1]) ** (n - 2)
    return float(np.sum(y[:, 0] * dmu) / np.sum(dmu))
