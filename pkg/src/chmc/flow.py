"""Volume-preserving harmonic mean curvature flow on radial graphs.

Each node moves with normal speed ``f - F``.  Because the surface is kept
as a radial graph, the normal displacement is converted into a change of
``rho`` by dividing by ``gbar(r_hat, nu)``; tangential motion only
reparametrizes the surface and is discarded.
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import stencil
from .errors import BandExitError, FlowInstabilityError, UndefinedCurvatureError
from .surface import (BandReport, Surface, area_and_volume, band_membership, best_fit_sphere,
                      geometry, make_coordinate_sphere, volume_weights)

__all__ = [
    "FlowConfig",
    "FlowState",
    "DecayFit",
    "FlowResult",
    "initial_state",
    "step",
    "average_F",
    "run_to_convergence",
    "decay_rate_fit",
    "default_tol_l2",
    "displacement_from_tol",
    "tol_for_displacement",
    "tail_monotone",
    "write_series_csv",
    "SERIES_COLUMNS",
    "volume_matched_start",
    "uniqueness_probe",
]

log = logging.getLogger(__name__)

SERIES_COLUMNS = ("t", "l2_deficit", "sup_deficit", "f", "volume", "max_r",
                  "B1_margin", "B2_margin", "B3_margin")


@dataclass(frozen=True)
class FlowConfig:
    """Time-stepping controls.

    ``tol_l2=None`` selects :func:`default_tol_l2` for the initial surface.
    ``band`` holds ``(B1, B2, B3)``; ``None`` disables the band abort but
    margins are still recorded.  ``band_sigma`` is the reference radius of
    the band (defaults to the best-fit radius of the initial surface).
    """

    dt_safety: float = 0.1
    tol_l2: float = None
    max_time: float = math.inf
    max_steps: int = 200_000
    backoff_factor: float = 0.5
    max_retries: int = 6
    record_every: int = 10
    band: tuple = None
    band_sigma: float = None
    chmc_threshold: float = 1e-4

    def __post_init__(self):
        if not 0 < self.dt_safety <= 1:
            raise ValueError("dt_safety must lie in (0, 1]")
        if self.tol_l2 is not None and not self.tol_l2 > 0:
            raise ValueError("tol_l2 must be positive")
        if not 0 < self.backoff_factor < 1:
            raise ValueError("backoff_factor must lie in (0, 1)")
        if self.record_every < 1 or self.max_steps < 0:
            raise ValueError("record_every must be >= 1 and max_steps >= 0")


@dataclass
class FlowState:
    surface: object
    t: float
    f: float
    l2_deficit: float
    sup_deficit: float
    area: float
    sigma: float
    band: BandReport = None
    steps: int = 0
    dt_scale: float = 1.0
    geo: object = field(default=None, repr=False)
    ambient: object = field(default=None, repr=False)
    _volume: float = field(default=None, repr=False)

    @property
    def volume(self):
        """Enclosed volume, evaluated on first access."""
        if self._volume is None:
            self._volume = area_and_volume(self.surface, self.ambient, self.geo)[1]
        return self._volume


@dataclass
class DecayFit:
    t: np.ndarray
    l2: np.ndarray
    fitted_rate: float
    predicted_rate: float
    window_start: float = float("nan")
    n_used: int = 0

    @property
    def available(self):
        return bool(np.isfinite(self.fitted_rate))

    @property
    def ratio(self):
        if not self.predicted_rate:
            return float("nan")
        return self.fitted_rate / self.predicted_rate

    def to_json(self):
        return {"fitted_rate": _num(self.fitted_rate), "predicted_rate": _num(self.predicted_rate),
                "ratio": _num(self.ratio), "window_start": _num(self.window_start),
                "samples_used": self.n_used, "available": self.available}


@dataclass
class FlowResult:
    state: FlowState
    fit: DecayFit
    series: dict
    converged: bool
    chmc: bool
    initial_volume: float

    @property
    def volume_drift(self):
        return (self.state.volume - self.initial_volume) / abs(self.initial_volume)

    def summary(self):
        st = self.state
        return {"t": st.t, "steps": st.steps, "f": st.f, "l2_deficit": st.l2_deficit,
                "sup_deficit": st.sup_deficit, "sigma": st.sigma, "converged": self.converged,
                "chmc": self.chmc, "volume_drift": self.volume_drift,
                "decay": self.fit.to_json()}


def _num(x):
    return float(x) if np.isfinite(x) else None


def average_F(geo, area_weights=None):
    """Area-weighted mean of the nodal harmonic mean curvature."""
    w = geo.area_weights if area_weights is None else area_weights
    return float(np.sum(w * geo.F) / np.sum(w))


def default_tol_l2(n, sigma, area):
    return (1e-6 * sigma ** (-n - 1)) ** 2 * area


def _slowest_rate(n, m, sigma):
    return n * m / ((n - 1) * sigma**n)


def displacement_from_tol(tol_l2, n, m, sigma, area):
    """Surface displacement left over when the flow stops at ``tol_l2``.

    The residual deficit sits mostly in the slowest (translation) mode,
    whose eigenvalue is about ``n m / ((n-1) sigma^n)``; a displacement
    ``d`` of that mode leaves ``|F - f| ~ rate * d``.
    """
    return float(np.sqrt(tol_l2 / area) / _slowest_rate(n, m, sigma))


def tol_for_displacement(d, n, m, sigma, area):
    """Inverse of :func:`displacement_from_tol`."""
    return float((_slowest_rate(n, m, sigma) * d) ** 2 * area)


def _evaluate(surface, ambient, t, sigma, steps=0, dt_scale=1.0, band=None, band_sigma=None):
    geo = geometry(surface, ambient)
    if np.any(geo.undefined):
        nodes = np.flatnonzero(geo.undefined)
        raise UndefinedCurvatureError("non-positive principal curvature during flow", nodes)
    w = volume_weights(surface, ambient, geo)
    f = float(np.sum(w * geo.F) / np.sum(w))
    dev = geo.F - f
    area = float(np.sum(geo.area_weights))
    l2 = float(np.sum(geo.area_weights * dev**2))
    sup = float(np.max(np.abs(dev)))
    report = None
    if band_sigma is not None:
        B = band if band is not None else (math.inf, math.inf, math.inf)
        report = band_membership(surface, ambient, band_sigma, *B, geo=geo)
    return FlowState(surface, t, f, l2, sup, area, sigma, report, steps, dt_scale, geo, ambient)


def initial_state(surface, ambient, config=FlowConfig()):
    sigma = best_fit_sphere(surface)[1]
    band_sigma = config.band_sigma if config.band_sigma is not None else sigma
    return _evaluate(surface, ambient, 0.0, sigma, band=config.band, band_sigma=band_sigma)


def time_step(state, config):
    return state.dt_scale * config.dt_safety * (state.sigma * state.surface.dtheta) ** 2


def step(state, ambient, config=FlowConfig()):
    """One explicit Euler step; returns the new state."""
    geo = state.geo
    dt = time_step(state, config)
    drho = dt * (state.f - geo.F) / geo.radial_normal
    surf = state.surface.with_profile(state.surface.profile + drho)
    sigma = best_fit_sphere(surf)[1]
    band_sigma = state.band.sigma if state.band is not None else None
    B = state.band.B if state.band is not None else None
    return _evaluate(surf, ambient, state.t + dt, sigma, state.steps + 1, state.dt_scale, B,
                     band_sigma)


def _record(series, st):
    b = st.band
    row = (st.t, st.l2_deficit, st.sup_deficit, st.f, st.volume,
           float(np.max(st.ambient.radius(st.geo.y))),
           b.B1_margin if b else np.nan, b.B2_margin if b else np.nan, b.B3_margin if b else np.nan)
    for k, v in zip(SERIES_COLUMNS, row):
        series[k].append(v)


def _finite(st):
    return np.isfinite(st.l2_deficit) and np.all(np.isfinite(st.surface.profile))


def run_to_convergence(initial, ambient, config=FlowConfig(), tol_l2=None):
    """Flow ``initial`` until the L2 deficit drops below the tolerance.

    Stops early at ``max_time`` / ``max_steps``.  A step that produces
    non-finite values, or a deficit that more than doubles over a
    ten-step window, is rolled back to the window start and retried with a
    smaller time step.  Leaving the band raises :class:`BandExitError`.
    """
    state = initial_state(initial, ambient, config)
    n = initial.n
    if tol_l2 is None:
        tol_l2 = config.tol_l2 if config.tol_l2 is not None else default_tol_l2(
            n, state.sigma, state.area)
    v0 = state.volume
    series = {k: [] for k in SERIES_COLUMNS}
    _record(series, state)
    noise = (1e-13 * abs(state.f)) ** 2 * state.area
    checkpoint = state
    retries = 0
    while state.l2_deficit >= tol_l2 and state.steps < config.max_steps and state.t < config.max_time:
        try:
            new = step(state, ambient, config)
            bad = not _finite(new)
        except (UndefinedCurvatureError, ValueError, FloatingPointError) as exc:
            log.debug("step failed (%s), backing off", exc)
            new, bad = None, True
        if not bad and new.steps - checkpoint.steps >= 10:
            bad = new.l2_deficit > 2 * checkpoint.l2_deficit and new.l2_deficit > noise
        if bad:
            retries += 1
            if retries > config.max_retries:
                raise FlowInstabilityError(
                    f"flow unstable at t={state.t:.6g} after {retries - 1} step reductions")
            state = replace(checkpoint, dt_scale=checkpoint.dt_scale * config.backoff_factor)
            checkpoint = state
            log.info("instability detected, dt scale now %g", state.dt_scale)
            continue
        state = new
        if state.steps - checkpoint.steps >= 10:
            checkpoint = state
        if state.steps % config.record_every == 0:
            _record(series, state)
            if state.band is not None and config.band is not None and not state.band.in_band:
                raise BandExitError(f"iterate left the band at t={state.t:.6g}", state.band)
    if series["t"][-1] != state.t:
        _record(series, state)
    series = {k: np.asarray(v) for k, v in series.items()}
    predicted = 2 * ambient.m / state.sigma**n
    fit = decay_rate_fit(series, predicted, noise_floor=noise)
    converged = state.l2_deficit < tol_l2
    chmc = state.sup_deficit * state.sigma ** (n + 1) <= config.chmc_threshold
    log.info("flow finished: t=%.6g steps=%d l2=%.3e converged=%s", state.t, state.steps,
             state.l2_deficit, converged)
    return FlowResult(state, fit, series, converged, bool(chmc), v0)


def decay_rate_fit(series, predicted_rate=float("nan"), noise_floor=0.0, skip_fraction=0.1):
    """Exponential rate of the L2 deficit over the tail of ``series``.

    The first ``skip_fraction`` of the samples is discarded as transient,
    and samples at or below ``noise_floor`` are ignored.  The result has
    ``fitted_rate = nan`` when fewer than three usable samples remain.
    """
    t = np.asarray(series["t"], dtype=float)
    l2 = np.asarray(series["l2_deficit"], dtype=float)
    start = int(math.ceil(skip_fraction * t.size))
    tt, ll = t[start:], l2[start:]
    keep = (ll > noise_floor) & (ll > 0) & np.isfinite(ll)
    tt, ll = tt[keep], ll[keep]
    if tt.size < 3 or np.ptp(tt) == 0:
        return DecayFit(t, l2, float("nan"), float(predicted_rate))
    slope, _ = np.polyfit(tt, np.log(ll), 1)
    return DecayFit(t, l2, float(-slope), float(predicted_rate), float(tt[0]), int(tt.size))


def tail_monotone(series, slack=1e-12, skip_fraction=0.1):
    """True when the L2 deficit never increases after the transient window."""
    l2 = np.asarray(series["l2_deficit"], dtype=float)
    tail = l2[int(math.ceil(skip_fraction * l2.size)):]
    return bool(np.all(np.diff(tail) <= slack))


def write_series_csv(path, series):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_COLUMNS)
        for row in zip(*(series[k] for k in SERIES_COLUMNS)):
            w.writerow([repr(float(v)) for v in row])


def volume_matched_start(ambient, sigma, shape, amplitude=0.01, N=64, center_offset=0.0):
    """Profile ``s (1 + amplitude * shape(theta))`` enclosing the volume of the ``sigma`` sphere."""
    from scipy.optimize import brentq

    n = ambient.n
    th = stencil.theta_nodes(N)
    bump = 1.0 + amplitude * np.asarray(shape(th), dtype=float)
    target = area_and_volume(make_coordinate_sphere(n, sigma, center_offset, N), ambient)[1]

    def gap(scale):
        surf = Surface(n, scale * bump, center_offset)
        return area_and_volume(surf, ambient)[1] - target

    lo, hi = sigma / bump.max() * 0.9, sigma / bump.min() * 1.1
    scale = brentq(gap, lo, hi, xtol=1e-13 * sigma, rtol=1e-15)
    return Surface(n, scale * bump, center_offset)


def uniqueness_probe(ambient, sigma, shapes, amplitude=0.01, config=FlowConfig(), N=64):
    """Flow several volume-matched starts and compare their limits node by node.

    The limits are compared against the displacement that the stopping
    tolerance can leave behind (:func:`displacement_from_tol`).
    """
    results = [run_to_convergence(volume_matched_start(ambient, sigma, sh, amplitude, N),
                                  ambient, config) for sh in shapes]
    profiles = np.array([r.state.surface.profile for r in results])
    max_diff = float(np.max(np.ptp(profiles, axis=0)))
    n = ambient.n
    tol = config.tol_l2 if config.tol_l2 is not None else default_tol_l2(
        n, sigma, results[0].state.area)
    disp = displacement_from_tol(tol, n, ambient.m, sigma, results[0].state.area)
    return {"max_profile_diff": max_diff, "tol_displacement": disp, "ratio": max_diff / disp,
            "passed": bool(max_diff <= 10 * disp), "converged": [r.converged for r in results],
            "f_values": [r.state.f for r in results], "results": results}
