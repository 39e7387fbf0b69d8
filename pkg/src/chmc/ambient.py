r"""Asymptotically Schwarzschild background metrics.

The metric on :math:`\mathbb{R}^n \setminus B_1` is

.. math::

    \bar g_{\alpha\beta} = U^{4/(n-2)} \delta_{\alpha\beta} + P_{\alpha\beta},
    \qquad U = 1 + \frac{m}{2 r^{n-2}} + \frac{B\, x^1}{r^n},

with :math:`r = |y - a e_1|`.  The axial shift ``a`` and dipole coefficient
``B`` are zero for the plain Schwarzschild chart; they exist so that the
center-of-mass experiments can move the chart.  The perturbation is
conformal-diagonal and axisymmetric,
:math:`P = \varepsilon\, r^{1-n-\delta} \chi(r)\, q(\theta)\, I`.

Derivatives are taken numerically (central differences with a step
proportional to ``r``) so that every metric in the family goes through the
same code path.  The closed-form Schwarzschild Ricci tensor is kept only as
an oracle.
"""

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
from numpy.polynomial import chebyshev

from .errors import DomainError, NumericError

__all__ = [
    "PerturbationSpec",
    "AmbientMetric",
    "CurvatureAtPoint",
    "sphere_area",
    "metric_at",
    "metric_derivatives",
    "christoffel_at",
    "curvature_at",
    "ricci_closed_form",
    "perturbation_decay_report",
]


def sphere_area(k):
    """Area of the unit sphere :math:`S^k \\subset \\mathbb{R}^{k+1}`."""
    return 2.0 * pi ** ((k + 1) / 2.0) / gamma((k + 1) / 2.0)


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


@dataclass(frozen=True)
class PerturbationSpec:
    """Axisymmetric decaying perturbation ``eps r^(1-n-delta) chi(r) q(theta)``.

    ``q(theta) = sum_k c_k cos(k theta)`` with ``theta`` measured from the
    positive symmetry axis.  ``chi`` ramps from 0 to 1 over
    ``[cutoff_radius, 2 cutoff_radius]``.
    """

    epsilon: float = 0.0
    cosine_coeffs: tuple = (1.0,)
    cutoff_radius: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "cosine_coeffs", tuple(float(c) for c in self.cosine_coeffs))
        if self.cutoff_radius <= 0:
            raise ValueError("cutoff_radius must be positive")

    def angular(self, cos_theta):
        # cos(k theta) = T_k(cos theta)
        return chebyshev.chebval(cos_theta, self.cosine_coeffs)

    def chi(self, r):
        rc = self.cutoff_radius
        return _smoothstep((np.asarray(r) - rc) / rc)

    def scalar(self, rel, n, delta):
        """Scalar amplitude at points ``rel`` given relative to the metric center."""
        if self.epsilon == 0.0:
            return np.zeros(rel.shape[:-1])
        r = np.linalg.norm(rel, axis=-1)
        return (self.epsilon * r ** (1.0 - n - delta) * self.chi(r)
                * self.angular(rel[..., 0] / r))


@dataclass(frozen=True)
class AmbientMetric:
    """Background metric; immutable and safe to share between threads."""

    n: int
    m: float
    delta: float = 0.0
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    fd_step_rel: float = 1e-4
    center: float = 0.0
    dipole: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"dimension must be an integer >= 3, got {self.n}")
        if self.m < 0:
            raise ValueError(f"mass must be non-negative, got {self.m}")
        if self.delta < 0:
            raise ValueError(f"decay exponent must be non-negative, got {self.delta}")
        if not self.fd_step_rel > 0:
            raise ValueError("fd_step_rel must be positive")
        object.__setattr__(self, "n", int(self.n))

    @property
    def is_flat(self):
        return self.m == 0 and self.dipole == 0 and self.perturbation.epsilon == 0

    def relative(self, y):
        rel = np.array(y, dtype=float, copy=True)
        if rel.shape[-1] != self.n:
            raise ValueError(f"points must have {self.n} components, got shape {rel.shape}")
        rel[..., 0] -= self.center
        return rel

    def radius(self, y):
        return np.linalg.norm(self.relative(y), axis=-1)

    def conformal_excess(self, y, check=True):
        """``s - 1`` where ``g = s * I``, accurate even when ``s`` is close to 1."""
        rel = self.relative(y)
        r = np.linalg.norm(rel, axis=-1)
        if check and np.any(r < 1.0 - 1e-12):
            raise DomainError(f"point inside the excluded unit ball (min r = {r.min():.6g})")
        n = self.n
        w = self.m / (2.0 * r ** (n - 2))
        if self.dipole:
            w = w + self.dipole * rel[..., 0] / r**n
        return np.expm1(4.0 / (n - 2) * np.log1p(w)) + self.perturbation.scalar(rel, n, self.delta)

    def conformal_factor(self, y, check=True):
        """Scalar ``s`` with ``g = s * I`` at points ``y`` (shape ``(..., n)``)."""
        return 1.0 + self.conformal_excess(y, check)

    def schwarzschild_phi(self, r):
        """The function ``phi = (1 + m / (2 r^(n-2)))^(1/(n-2))``."""
        return (1.0 + self.m / (2.0 * np.asarray(r, dtype=float) ** (self.n - 2))) ** (1.0 / (self.n - 2))

    def c0_bundle(self, radii=(20.0, 40.0, 80.0, 160.0)):
        """Realized decay constants and ``c0 = max(1, m, C_1..)`` for reporting."""
        rep = perturbation_decay_report(self, radii)
        consts = rep["constants"]
        return {"C": consts, "c0": max([1.0, self.m] + list(consts))}


def metric_at(ambient, y):
    """Metric matrices at points ``y``; returns shape ``(..., n, n)``."""
    s = ambient.conformal_factor(y)
    return s[..., None, None] * np.eye(ambient.n)


def _metric_excess(ambient, y, check=True):
    return ambient.conformal_excess(y, check)[..., None, None] * np.eye(ambient.n)


def _fd_points(ambient, y, step_rel=None):
    y = np.asarray(y, dtype=float)
    step_rel = ambient.fd_step_rel if step_rel is None else step_rel
    h = step_rel * ambient.radius(y)
    return y, h


def _central(fun, y, h, a, n):
    """Five-point central difference of ``fun`` along axis ``a``."""
    shift = np.zeros(n)
    shift[a] = 1.0
    off = h[..., None] * shift
    num = (8.0 * (fun(y + off) - fun(y - off)) - (fun(y + 2 * off) - fun(y - 2 * off)))
    hh = h.reshape(h.shape + (1,) * (num.ndim - h.ndim))
    return num / (12.0 * hh)


def metric_derivatives(ambient, y, step_rel=None):
    """``dg[..., a, b, c] = d_a g_bc`` by fourth-order central differences.

    The differences are taken of ``g - delta`` so that round-off scales with
    the deviation from flatness rather than with ``|g|``.
    """
    y, h = _fd_points(ambient, y, step_rel)
    n = ambient.n
    # stencil points may dip just inside the ball when y sits on its boundary
    excess = lambda z: _metric_excess(ambient, z, False)
    dg = np.empty(y.shape[:-1] + (n, n, n))
    for a in range(n):
        dg[..., a, :, :] = _central(excess, y, h, a, n)
    return dg


def _christoffel(ginv, dg):
    # Gamma^c_ab = 1/2 g^cd (d_a g_bd + d_b g_ad - d_d g_ab)
    t = dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1)
    return 0.5 * np.einsum("...cd,...abd->...cab", ginv, t)


def christoffel_at(ambient, y, step_rel=None):
    """Christoffel symbols ``G[..., c, a, b] = Gamma^c_ab``."""
    y = np.asarray(y, dtype=float)
    g = metric_at(ambient, y)
    ginv = np.linalg.inv(g)
    if not np.all(np.isfinite(ginv)):
        raise NumericError("metric matrix is not invertible")
    return _christoffel(ginv, metric_derivatives(ambient, y, step_rel))


@dataclass
class CurvatureAtPoint:
    """Curvature tensors at a batch of points.

    ``riemann[..., a, b, c, d]`` is fully covariant with
    ``ricci_bd = g^ac R_abcd``; for a round sphere of curvature K it equals
    ``K (g_ac g_bd - g_ad g_bc)``.
    """

    metric: np.ndarray
    inverse_metric: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray
    weyl: np.ndarray

    def sectional(self, X, Y):
        """Sectional curvature of the plane spanned by ``X`` and ``Y``."""
        num = np.einsum("...abcd,...a,...b,...c,...d->...", self.riemann, X, Y, X, Y)
        gxx = np.einsum("...ab,...a,...b->...", self.metric, X, X)
        gyy = np.einsum("...ab,...a,...b->...", self.metric, Y, Y)
        gxy = np.einsum("...ab,...a,...b->...", self.metric, X, Y)
        return num / (gxx * gyy - gxy**2)


def curvature_at(ambient, y, step_rel=None):
    """Full curvature set from nested central differences of the metric."""
    y, h = _fd_points(ambient, y, step_rel)
    n = ambient.n
    g = metric_at(ambient, y)
    ginv = np.linalg.inv(g)
    G = christoffel_at(ambient, y, step_rel)
    dG = np.empty(y.shape[:-1] + (n, n, n, n))
    chris = lambda z: christoffel_at(ambient, z, step_rel)
    for e in range(n):
        dG[..., e, :, :, :] = _central(chris, y, h, e, n)
    # R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
    R_up = (np.einsum("...cadb->...abcd", dG) - np.einsum("...dacb->...abcd", dG)
            + np.einsum("...ace,...edb->...abcd", G, G)
            - np.einsum("...ade,...ecb->...abcd", G, G))
    R = np.einsum("...ae,...ebcd->...abcd", g, R_up)
    ric = np.einsum("...abad->...bd", R_up)
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    scal = np.einsum("...bd,...bd->...", ginv, ric)
    weyl = _weyl(R, ric, scal, g, n)
    return CurvatureAtPoint(metric=g, inverse_metric=ginv, christoffel=G,
                            riemann=R, ricci=ric, scalar=scal, weyl=weyl)


def _weyl(R, ric, scal, g, n):
    gg = np.einsum("...ac,...bd->...abcd", g, g) - np.einsum("...ad,...bc->...abcd", g, g)
    rg = (np.einsum("...ac,...bd->...abcd", ric, g) - np.einsum("...ad,...bc->...abcd", ric, g)
          + np.einsum("...bd,...ac->...abcd", ric, g) - np.einsum("...bc,...ad->...abcd", ric, g))
    return R - rg / (n - 2) + scal[..., None, None, None, None] * gg / ((n - 1) * (n - 2))


def ricci_closed_form(ambient, y):
    """Exact Ricci components of the centered Schwarzschild part.

    The perturbation and dipole are ignored; only the axial shift is honoured.
    """
    rel = ambient.relative(y)
    r = np.linalg.norm(rel, axis=-1)
    if np.any(r < 1.0):
        raise DomainError("point inside the excluded unit ball")
    n, m = ambient.n, ambient.m
    phi = ambient.schwarzschild_phi(r)
    pref = (n - 2) * m / r**n * phi ** (4 - 2 * n)
    yhat = rel / r[..., None]
    return pref[..., None, None] * (np.eye(n) - n * yhat[..., :, None] * yhat[..., None, :])


def _scalar_derivative(fun, y, order, h):
    """Tensor of ``order``-th partial derivatives of a scalar by nested differences."""
    n = y.shape[-1]
    if order == 0:
        return fun(y)
    out = []
    for a in range(n):
        off = np.zeros(n)
        off[a] = h
        out.append((_scalar_derivative(fun, y + off, order - 1, h)
                    - _scalar_derivative(fun, y - off, order - 1, h)) / (2.0 * h))
    return np.stack(out)


def perturbation_decay_report(ambient, radii, n_directions=17, max_order=3):
    """Sampled decay constants of the perturbation.

    For every radius and derivative order ``l`` the Frobenius norm of
    ``d^l P`` is maximized over directions in the meridian half plane and
    scaled by ``r^(n-1+l+delta)``.  The returned ``constants`` are the sup
    over radii, i.e. the realized ``C_{l+1}``.
    """
    n, delta = ambient.n, ambient.delta
    pert = ambient.perturbation
    thetas = np.linspace(0.0, np.pi, n_directions)
    table = np.zeros((len(radii), max_order + 1))
    for i, r in enumerate(radii):
        h = 1e-3 * r
        for th in thetas:
            rel = np.zeros(n)
            rel[0], rel[1] = r * np.cos(th), r * np.sin(th)
            for l in range(max_order + 1):
                d = _scalar_derivative(lambda z: pert.scalar(z, n, delta), rel, l, h)
                # P = p I, so |d^l P|_F = sqrt(n) |d^l p|_F
                val = np.sqrt(n) * np.linalg.norm(np.ravel(d)) * r ** (n - 1 + l + delta)
                table[i, l] = max(table[i, l], val)
    return {"radii": list(map(float, radii)), "table": table,
            "constants": table.max(axis=0).tolist()}
