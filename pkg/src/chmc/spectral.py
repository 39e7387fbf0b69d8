r"""Linearized harmonic mean curvature operator on axisymmetric functions.

For a normal variation ``u nu`` the harmonic mean curvature changes by
``-L u`` with

    L u = -(F^{kl} u_{;kl} + (F^{ij} h_ik h_jk + F^{ij} Rm(e_i, nu, e_j, nu)) u),

where ``Rm(X, nu, X, nu)`` is the usual sectional-curvature contraction.
``S = (L + L*) / 2`` is assembled in divergence form so that ``W S`` is
exactly symmetric for the diagonal area weights ``W``.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import stencil
from .errors import AssemblyError, NumericError
from .ambient import sphere_area
from .surface import geometry

__all__ = [
    "OperatorMatrices",
    "SpectralReport",
    "assemble_L",
    "assemble_S",
    "eigen_report",
    "quadratic_form_check",
    "translation_mode_residual",
    "divergence_fields",
    "L_spectrum",
]

log = logging.getLogger(__name__)


@dataclass
class OperatorMatrices:
    n: int
    L: np.ndarray
    weights: np.ndarray
    F_t: np.ndarray
    F_p: np.ndarray
    potential: np.ndarray
    Lcal: np.ndarray
    geo: object
    S: np.ndarray = None
    divF: np.ndarray = None
    div2F: np.ndarray = None

    @property
    def Fkl_field(self):
        return np.column_stack([self.F_t, self.F_p])


@dataclass
class SpectralReport:
    sigma: float
    n: int
    m: float
    delta: float
    mu0: float
    eta0: float
    eta1: float
    smin: float
    mu0_pred: float
    eta0_pred: float
    eigenvalues: np.ndarray = None

    @property
    def ratios(self):
        return {"mu0": self.mu0 / self.mu0_pred, "eta0": self.eta0 / self.eta0_pred,
                "smin_scaled": self.smin * self.sigma**self.n / self.m if self.m else np.nan,
                "eta1_scaled": self.eta1 * self.sigma**self.n / self.m if self.m else np.nan}

    def to_json(self):
        out = {k: getattr(self, k) for k in ("sigma", "n", "m", "delta", "mu0", "eta0", "eta1",
                                             "smin", "mu0_pred", "eta0_pred")}
        out = {k: float(v) if k != "n" else int(v) for k, v in out.items()}
        out["ratios"] = {k: float(v) for k, v in self.ratios.items()}
        return out


def _check_chmc(geo, tol):
    f = np.sum(geo.area_weights * geo.F) / np.sum(geo.area_weights)
    dev = np.max(np.abs(geo.F - f))
    if dev > tol * abs(f):
        log.warning("surface is not CHMC (relative deficit %.3e); bounds are not meaningful",
                    dev / abs(f))


def assemble_L(surface, ambient, chmc_rtol=1e-6):
    """Matrix of ``L`` acting on nodal values of an axisymmetric function."""
    geo = geometry(surface, ambient, with_curvature=True)
    if np.any(geo.undefined):
        raise NumericError("F is undefined on the surface")
    _check_chmc(geo, chmc_rtol)
    n, N, dth = surface.n, surface.N, surface.dtheta
    D1, D2 = stencil.derivative_matrices(N, dth)
    ell, kappa = geo.ell, geo.kappa
    dell = stencil.deriv(ell, dth)
    Lcal = (geo.F_t[:, None] * (D2 / ell[:, None] ** 2 - (dell / ell**3)[:, None] * D1)
            + ((n - 2) * geo.F_p * kappa / ell)[:, None] * D1)
    pot = geo.potential
    L = -Lcal - np.diag(pot)
    return OperatorMatrices(n, L, geo.area_weights, geo.F_t, geo.F_p, pot, Lcal, geo)


def divergence_fields(geo):
    """``(div F)_theta`` (orthonormal component) and ``div div F`` per node."""
    n, dth = geo.n, geo.dtheta
    ell, q, kappa = geo.ell, geo.q, geo.kappa
    beta = stencil.deriv(geo.F_t, dth) / ell + (n - 2) * (geo.F_t - geo.F_p) * kappa
    par = (-1) ** (n - 1)
    flux = q ** (n - 2) * beta
    d = stencil.deriv(flux, dth, parity=par) / (ell * q ** (n - 2))
    return beta, d


def assemble_S(mats, surface=None, rtol=1e-8):
    """Flux-form symmetrization; fills ``mats.S``, ``divF`` and ``div2F``."""
    geo = mats.geo
    n, N = mats.n, mats.L.shape[0]
    dth = geo.dtheta
    ell, q = geo.ell, geo.q
    c = q ** (n - 2) * geo.F_t / ell
    faces = 0.5 * (c[1:] + c[:-1])
    faces = np.concatenate([[0.0], faces, [0.0]])  # no flux through the poles
    vol = ell * q ** (n - 2) * dth**2
    S = np.zeros((N, N))
    idx = np.arange(N)
    S[idx, idx] = (faces[:-1] + faces[1:]) / vol
    S[idx[:-1], idx[:-1] + 1] = -faces[1:-1] / vol[:-1]
    S[idx[1:], idx[1:] - 1] = -faces[1:-1] / vol[1:]
    beta, d = divergence_fields(geo)
    S -= np.diag(mats.potential + 0.5 * d)
    WS = mats.weights[:, None] * S
    asym = np.max(np.abs(WS - WS.T)) / np.max(np.abs(WS))
    if asym > rtol:
        raise AssemblyError(f"S is not self-adjoint (relative asymmetry {asym:.2e})")
    mats.S, mats.divF, mats.div2F = S, beta, d
    return mats


def _weighted_eigh(A, w):
    """Eigenvalues of ``A`` self-adjoint in the ``diag(w)`` inner product."""
    WA = w[:, None] * A
    WA = 0.5 * (WA + WA.T)
    try:
        return scipy.linalg.eigh(WA, np.diag(w), eigvals_only=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc


def mean_zero_basis(w):
    """Orthonormal basis of ``{u : sum(w u) = 0}``."""
    return scipy.linalg.null_space(w[None, :])


def eigen_report(mats, weights=None, sigma=None, ambient=None):
    if mats.S is None:
        assemble_S(mats)
    w = mats.weights if weights is None else weights
    evals = _weighted_eigh(mats.S, w)
    Z = mean_zero_basis(w)
    WS = w[:, None] * mats.S
    WS = 0.5 * (WS + WS.T)
    try:
        mu = scipy.linalg.eigh(Z.T @ WS @ Z, Z.T @ (w[:, None] * Z), eigvals_only=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    n = mats.n
    m = ambient.m if ambient is not None else 0.0
    delta = ambient.delta if ambient is not None else 0.0
    if sigma is None:
        sigma = float((np.sum(w) / sphere_area(n - 1)) ** (1 / (n - 1)))
    mu0_pred = n * m / ((n - 1) * sigma**n)
    eta0_pred = -1 / ((n - 1) * sigma**2) + (n * n - 2 * n + 2) * m / ((n - 1) * (n - 2) * sigma**n)
    return SpectralReport(float(sigma), n, float(m), float(delta), float(mu[0]), float(evals[0]),
                          float(evals[1]), float(np.min(np.abs(evals))), mu0_pred, eta0_pred, evals)


def L_spectrum(mats):
    """Eigenvalues of the non-symmetric ``L`` sorted by real part."""
    ev = scipy.linalg.eigvals(mats.L)
    return ev[np.argsort(ev.real)]


def quadratic_form_check(mats, sigma, m, samples=20, seed=0):
    """Largest ``int u Lcal u / int u^2`` over random mean-zero smooth ``u``.

    Returns ``(worst_ratio, bound)`` where ``bound`` is
    ``-(1/((n-1) sigma^2) - slack)`` with the slack ``3 (m+1) sigma^-n + 5 sigma^-3``.
    """
    rng = np.random.default_rng(seed)
    w = mats.weights
    th = mats.geo.theta
    n = mats.n
    worst = -np.inf
    for _ in range(samples):
        coef = rng.standard_normal(8) / (1 + np.arange(8)) ** 2
        u = np.polynomial.chebyshev.chebval(np.cos(th), coef)
        u -= np.sum(w * u) / np.sum(w)
        ratio = np.sum(w * u * (mats.Lcal @ u)) / np.sum(w * u * u)
        worst = max(worst, ratio)
    slack = 3 * (m + 1) * sigma ** (-n) + 5 * sigma ** (-3.0)
    return float(worst), float(-(1 / ((n - 1) * sigma**2) - slack))


def translation_mode_residual(mats):
    """``(mu, ||L u - mu u|| / ||u||)`` for ``u = gbar(e_1, nu)``.

    ``mu`` is the weighted Rayleigh quotient of ``L`` at ``u``.
    """
    geo = mats.geo
    g = geo.extras["curvature"].metric
    e1 = np.zeros(geo.n)
    e1[0] = 1.0
    u = np.einsum("kab,a,kb->k", g, e1, geo.nu)
    w = mats.weights
    Lu = mats.L @ u
    mu = np.sum(w * u * Lu) / np.sum(w * u * u)
    res = np.sqrt(np.sum(w * (Lu - mu * u) ** 2) / np.sum(w * u * u))
    return float(mu), float(res)
