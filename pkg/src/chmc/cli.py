"""Command-line scenario runner.

Usage::

    chmc <scenario> --config run.json --out results/ [--jobs K]
    chmc compare results_a/ results_b/ [--out diff.json]

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure,
4 a scenario health check failed.
"""

import argparse
import copy
import hashlib
import json
import logging
import math
import os
import sys
import time
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import stencil
from .ambient import AmbientMetric, PerturbationSpec, curvature_at, ricci_closed_form
from .errors import CHMCError, ConfigError, DomainError, LadderError
from .flow import (FlowConfig, run_to_convergence, tail_monotone, tol_for_displacement,
                   uniqueness_probe, write_series_csv)
from .foliation import (build_ladder, center_of_mass_adm, center_of_mass_chm, check_foliation)
from .spectral import assemble_L, assemble_S, eigen_report, quadratic_form_check
from .surface import Surface, geometry

__all__ = ["main", "load_config", "run", "compare_runs", "SCENARIOS"]

log = logging.getLogger("chmc")

SCENARIOS = ("curvature-check", "flow", "spectral", "foliation", "centers", "uniqueness-probe")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSERT = 0, 2, 3, 4

_AMBIENT_KEYS = {"n", "m", "delta", "perturbation", "fd_step_rel", "center", "dipole"}
_PERT_KEYS = {"epsilon", "cosine_coeffs", "cutoff_radius"}
_FLOW_KEYS = {"dt_safety", "tol_l2", "max_time", "max_steps", "instability_backoff",
              "record_every", "chmc_threshold", "tol_displacement"}
_BACKOFF_KEYS = {"factor", "retries"}
_PROFILE_KEYS = {"kind", "power", "amplitude"}
_TOP_KEYS = {"ambient", "grid", "flow", "scenario", "sigma", "sigma_list", "radii_list",
             "initial_profile", "B1", "B2", "B3", "output_dir", "seed", "start_center",
             "starts", "with_spectral", "dump_matrices"}

DEFAULTS = {
    "grid": {"nodes": 64},
    "flow": {"dt_safety": 0.1},
    "seed": 0,
    "start_center": 0.0,
    "with_spectral": True,
    "dump_matrices": False,
}


def _unknown(section, given, allowed):
    extra = set(given) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(extra))}")


def _number(value, name, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number")
    if integer and int(value) != value:
        raise ConfigError(f"{name} must be an integer")
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite")
    return int(value) if integer else float(value)


def load_config(source, scenario=None):
    """Parse and validate a run configuration (path, JSON text or dict)."""
    if isinstance(source, dict):
        cfg = copy.deepcopy(source)
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _unknown("config", cfg, _TOP_KEYS)
    if scenario is not None:
        if cfg.get("scenario", scenario) != scenario:
            raise ConfigError(f"config is for scenario {cfg['scenario']!r}, not {scenario!r}")
        cfg["scenario"] = scenario
    if cfg.get("scenario") not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {', '.join(SCENARIOS)}")
    for k, v in DEFAULTS.items():
        cfg.setdefault(k, copy.deepcopy(v))

    amb = cfg.get("ambient")
    if not isinstance(amb, dict):
        raise ConfigError("missing 'ambient' block")
    _unknown("ambient", amb, _AMBIENT_KEYS)
    for key in ("n", "m"):
        if key not in amb:
            raise ConfigError(f"ambient.{key} is required")
    n = _number(amb["n"], "ambient.n", integer=True)
    if n < 3:
        raise ConfigError("ambient.n must be >= 3")
    if _number(amb["m"], "ambient.m") <= 0:
        raise ConfigError("ambient.m must be > 0")
    if _number(amb.get("delta", 0.0), "ambient.delta") < 0:
        raise ConfigError("ambient.delta must be >= 0")
    if _number(amb.get("fd_step_rel", 1e-4), "ambient.fd_step_rel") <= 0:
        raise ConfigError("ambient.fd_step_rel must be > 0")
    for key in ("center", "dipole"):
        _number(amb.get(key, 0.0), f"ambient.{key}")
    pert = amb.get("perturbation", {})
    if not isinstance(pert, dict):
        raise ConfigError("ambient.perturbation must be an object")
    _unknown("ambient.perturbation", pert, _PERT_KEYS)
    _number(pert.get("epsilon", 0.0), "perturbation.epsilon")
    if _number(pert.get("cutoff_radius", 2.0), "perturbation.cutoff_radius") <= 0:
        raise ConfigError("perturbation.cutoff_radius must be > 0")
    coeffs = pert.get("cosine_coeffs", [1.0])
    if not isinstance(coeffs, list) or not coeffs:
        raise ConfigError("perturbation.cosine_coeffs must be a non-empty list")
    for c in coeffs:
        _number(c, "perturbation.cosine_coeffs[]")

    grid = cfg["grid"]
    if not isinstance(grid, dict):
        raise ConfigError("grid must be an object")
    _unknown("grid", grid, {"nodes"})
    if _number(grid.get("nodes", 64), "grid.nodes", integer=True) < 64:
        raise ConfigError("grid.nodes must be >= 64")

    flow = cfg["flow"]
    if not isinstance(flow, dict):
        raise ConfigError("flow must be an object")
    _unknown("flow", flow, _FLOW_KEYS)
    if "instability_backoff" in flow:
        _unknown("flow.instability_backoff", flow["instability_backoff"], _BACKOFF_KEYS)
    try:
        flow_config(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid flow settings: {exc}") from exc

    if "initial_profile" in cfg:
        prof = cfg["initial_profile"]
        _unknown("initial_profile", prof, _PROFILE_KEYS)
        if prof.get("kind", "cos_power") not in ("cos_power", "sphere"):
            raise ConfigError("initial_profile.kind must be 'cos_power' or 'sphere'")
    for key in ("starts",):
        for prof in cfg.get(key, []):
            _unknown(key, prof, _PROFILE_KEYS)
    for key in ("sigma", "B1", "B2", "B3"):
        if key in cfg and _number(cfg[key], key) <= 0:
            raise ConfigError(f"{key} must be > 0")
    for key in ("sigma_list", "radii_list"):
        if key in cfg:
            vals = cfg[key]
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"{key} must be a non-empty list")
            for v in vals:
                if _number(v, key) <= 0:
                    raise ConfigError(f"{key} entries must be > 0")
    for key in ("sigma",) + (("sigma_list",) if "sigma_list" in cfg else ()):
        vals = cfg.get(key)
        vals = vals if isinstance(vals, list) else [vals] if vals is not None else []
        if any(v <= 2 for v in vals):
            raise ConfigError(f"{key} must exceed 2")
    if "sigma_list" in cfg and any(b <= a for a, b in zip(cfg["sigma_list"], cfg["sigma_list"][1:])):
        raise ConfigError("sigma_list must be strictly increasing")
    _number(cfg["seed"], "seed", integer=True)
    _required(cfg)
    return cfg


def _required(cfg):
    need = {"flow": ["sigma"], "spectral": [], "foliation": ["sigma_list"], "centers": [],
            "uniqueness-probe": ["sigma"], "curvature-check": []}[cfg["scenario"]]
    for key in need:
        if key not in cfg:
            raise ConfigError(f"scenario {cfg['scenario']} needs '{key}'")
    if cfg["scenario"] == "spectral" and "sigma" not in cfg and "sigma_list" not in cfg:
        raise ConfigError("scenario spectral needs 'sigma' or 'sigma_list'")
    if cfg["scenario"] == "centers" and "sigma_list" not in cfg and "radii_list" not in cfg:
        raise ConfigError("scenario centers needs 'sigma_list' and/or 'radii_list'")


def ambient_from_config(cfg):
    amb = cfg["ambient"]
    pert = amb.get("perturbation", {})
    pspec = PerturbationSpec(epsilon=float(pert.get("epsilon", 0.0)),
                            cosine_coeffs=tuple(float(c) for c in pert.get("cosine_coeffs", [1.0])),
                            cutoff_radius=float(pert.get("cutoff_radius", 2.0)))
    return AmbientMetric(n=int(amb["n"]), m=float(amb["m"]), delta=float(amb.get("delta", 0.0)),
                         perturbation=pspec, fd_step_rel=float(amb.get("fd_step_rel", 1e-4)),
                         center=float(amb.get("center", 0.0)), dipole=float(amb.get("dipole", 0.0)))


def flow_config(cfg):
    fl = dict(cfg["flow"])
    backoff = fl.pop("instability_backoff", {})
    fl.pop("tol_displacement", None)
    band = None
    if all(k in cfg for k in ("B1", "B2", "B3")):
        band = (float(cfg["B1"]), float(cfg["B2"]), float(cfg["B3"]))
    if "max_steps" in fl:
        fl["max_steps"] = int(fl["max_steps"])
    if "record_every" in fl:
        fl["record_every"] = int(fl["record_every"])
    return FlowConfig(**fl, band=band, backoff_factor=float(backoff.get("factor", 0.5)),
                      max_retries=int(backoff.get("retries", 6)))


def _flow_config_for(cfg, ambient, sigma):
    """Flow settings for one radius; ``tol_displacement`` becomes an L2 tolerance."""
    fc = flow_config(cfg)
    d = cfg["flow"].get("tol_displacement")
    if d is not None and fc.tol_l2 is None:
        from dataclasses import replace
        from .ambient import sphere_area
        n = ambient.n
        area = sphere_area(n - 1) * sigma ** (n - 1)
        fc = replace(fc, tol_l2=tol_for_displacement(d, n, ambient.m, sigma, area))
    return fc


def _profile_fun(prof):
    kind = prof.get("kind", "cos_power")
    if kind == "sphere":
        return lambda th: np.zeros_like(th)
    p = int(prof.get("power", 2))
    return lambda th: np.cos(th) ** p


# -- output bookkeeping -------------------------------------------------------

class _Outputs:
    def __init__(self, root):
        self.root = Path(root)
        self.files = []

    def path(self, name):
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return p

    def json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)

    def csv(self, name, columns, rows):
        import csv
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(columns)
            for row in rows:
                w.writerow([_cell(v) for v in row])

    def hashes(self):
        out = []
        for name in self.files:
            h = hashlib.sha256((self.root / name).read_bytes()).hexdigest()
            out.append({"path": name, "sha256": h})
        return out

    def mark_partial(self):
        for name in self.files:
            p = self.root / name
            if p.exists():
                p.rename(p.with_name(p.name + ".partial"))


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _check(name, value, threshold, passed):
    return {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}


# -- scenarios ----------------------------------------------------------------

def _scenario_curvature(cfg, ambient, out, jobs):
    n = ambient.n
    radii = cfg.get("radii_list", [5.0, 10.0, 50.0])
    rows, worst = [], {"ricci": 0.0, "scalar": 0.0, "weyl": 0.0}
    pure = ambient.perturbation.epsilon == 0 and ambient.dipole == 0
    for r in radii:
        for th in np.linspace(0.1, np.pi - 0.1, 7):
            y = np.zeros(n)
            y[0] = ambient.center + r * np.cos(th)
            y[1] = r * np.sin(th)
            if n > 3:
                y[2] = 0.0
            curv = curvature_at(ambient, y[None, :])
            ric = curv.ricci[0]
            scale = np.max(np.abs(ric))
            rel = np.nan
            if pure:
                exact = ricci_closed_form(ambient, y[None, :])[0]
                rel = np.max(np.abs(ric - exact)) / np.max(np.abs(exact))
                worst["ricci"] = max(worst["ricci"], rel)
            sr3 = abs(curv.scalar[0]) * r**3
            wr = np.max(np.abs(curv.weyl[0])) / scale if scale else 0.0
            worst["scalar"] = max(worst["scalar"], sr3)
            worst["weyl"] = max(worst["weyl"], wr)
            rows.append((r, th, rel, sr3, wr))
    out.csv("ricci_comparison.csv",
            ["r", "theta", "ricci_rel_err", "scalar_times_r3", "weyl_over_ricci"], rows)
    checks = []
    if pure:
        checks = [_check("ricci_rel_err", worst["ricci"], 1e-4, worst["ricci"] <= 1e-4),
                  _check("scalar_times_r3", worst["scalar"], 1e-4, worst["scalar"] <= 1e-4),
                  _check("weyl_over_ricci", worst["weyl"], 1e-6, worst["weyl"] <= 1e-6)]
    return {"max_ricci_rel_err": worst["ricci"] if pure else None,
            "max_scalar_times_r3": worst["scalar"], "max_weyl_over_ricci": worst["weyl"]}, checks


def _write_flow_outputs(out, prefix, res, ambient):
    write_series_csv(out.path(f"{prefix}series.csv"), res.series)
    out.json(f"{prefix}final_surface.json", res.state.surface.to_json())
    out.json(f"{prefix}decay_fit.json", res.fit.to_json())
    geo = geometry(res.state.surface, ambient, with_curvature=True)
    cols, data = geo.csv_rows()
    out.csv(f"{prefix}geometry.csv", cols, data)


def _flow_checks(res, prefix=""):
    return [
        _check(f"{prefix}converged", res.state.l2_deficit, None, res.converged),
        _check(f"{prefix}chmc", res.state.sup_deficit * res.state.sigma ** (res.state.surface.n + 1),
               None, res.chmc),
        _check(f"{prefix}volume_drift", abs(res.volume_drift), 1e-3, abs(res.volume_drift) <= 1e-3),
    ]


def _scenario_flow(cfg, ambient, out, jobs):
    sigma = float(cfg["sigma"])
    N = int(cfg["grid"]["nodes"])
    prof = cfg.get("initial_profile", {"kind": "cos_power", "power": 2, "amplitude": 0.01})
    amp = float(prof.get("amplitude", 0.01))
    fun = _profile_fun(prof)
    th = stencil.theta_nodes(N)
    start = Surface(ambient.n, sigma * (1 + amp * fun(th)), float(cfg["start_center"]))
    res = run_to_convergence(start, ambient, _flow_config_for(cfg, ambient, sigma))
    _write_flow_outputs(out, "", res, ambient)
    summary = res.summary()
    summary["tail_monotone"] = tail_monotone(res.series)
    summary["max_B_margins"] = {k: float(np.nanmax(res.series[k]))
                                for k in ("B1_margin", "B2_margin", "B3_margin")}
    return summary, _flow_checks(res)


def _chmc_surface(cfg, ambient, sigma, out, prefix):
    N = int(cfg["grid"]["nodes"])
    prof = cfg.get("initial_profile", {"kind": "sphere"})
    th = stencil.theta_nodes(N)
    fun = _profile_fun(prof)
    start = Surface(ambient.n, sigma * (1 + float(prof.get("amplitude", 0.0)) * fun(th)),
                    float(cfg["start_center"]))
    res = run_to_convergence(start, ambient, _flow_config_for(cfg, ambient, sigma))
    out.json(f"{prefix}final_surface.json", res.state.surface.to_json())
    return res


def _fit_exponent(sig, vals):
    sig, vals = np.asarray(sig, float), np.asarray(vals, float)
    if sig.size < 2 or np.any(vals <= 0):
        return None, None
    slope, icpt = np.polyfit(np.log(sig), np.log(vals), 1)
    return float(slope), float(np.exp(icpt))


def _scenario_spectral(cfg, ambient, out, jobs):
    sigmas = cfg.get("sigma_list", [cfg.get("sigma")])
    rows, reports, checks = [], [], []
    for sigma in map(float, sigmas):
        tag = f"sigma_{sigma:g}_"
        res = _chmc_surface(cfg, ambient, sigma, out, tag)
        checks += _flow_checks(res, tag)
        mats = assemble_S(assemble_L(res.state.surface, ambient))
        rep = eigen_report(mats, sigma=sigma, ambient=ambient)
        worst, bound = quadratic_form_check(mats, sigma, ambient.m, seed=int(cfg["seed"]))
        js = rep.to_json()
        js["quadratic_form"] = {"worst_ratio": worst, "bound": bound}
        out.json(f"{tag}spectral.json", js)
        if cfg["dump_matrices"]:
            out.csv(f"{tag}S.csv", [f"c{j}" for j in range(mats.S.shape[1])], mats.S)
            out.csv(f"{tag}L.csv", [f"c{j}" for j in range(mats.L.shape[1])], mats.L)
        checks.append(_check(f"{tag}quadratic_form", worst, bound, worst <= bound))
        reports.append(js)
        rows.append((sigma, rep.mu0, rep.eta0, rep.eta1, rep.smin, rep.mu0_pred, rep.eta0_pred))
    out.csv("spectral.csv", ["sigma", "mu0", "eta0", "eta1", "smin", "mu0_pred", "eta0_pred"], rows)
    sig = [r[0] for r in rows]
    slope, pref = _fit_exponent(sig, [r[1] for r in rows])
    summary = {"reports": reports, "mu0_exponent": slope, "mu0_prefactor": pref,
               "smin_scaled": [r[4] * r[0] ** ambient.n / ambient.m for r in rows]}
    return summary, checks


def _ladder(cfg, ambient, jobs, with_spectral):
    sigmas = [float(s) for s in cfg["sigma_list"]]
    fcs = {_flow_config_for(cfg, ambient, s) for s in sigmas}
    if len(fcs) == 1:
        return build_ladder(sigmas, ambient, fcs.pop(), int(cfg["grid"]["nodes"]),
                            float(cfg["start_center"]), with_spectral, jobs)
    # per-radius tolerances: run the entries one radius at a time
    from .foliation import FoliationLadder
    ladder = FoliationLadder()
    for s in sigmas:
        try:
            part = build_ladder([s], ambient, _flow_config_for(cfg, ambient, s),
                                int(cfg["grid"]["nodes"]), float(cfg["start_center"]),
                                with_spectral, 1)
        except LadderError as exc:
            exc.ladder = ladder
            raise
        ladder.entries.extend(part.entries)
    return ladder


def _write_ladder(out, ladder, fol=None, centroids=None):
    rows = []
    for i, e in enumerate(ladder.entries):
        gap = fol.pairs[i - 1]["min_gap"] if (fol is not None and i > 0) else float("nan")
        c = centroids[i] if centroids is not None else float("nan")
        mu0 = e.spectral.mu0 if e.spectral is not None else float("nan")
        eta0 = e.spectral.eta0 if e.spectral is not None else float("nan")
        rows.append((e.sigma, e.F_value, gap, c, mu0, eta0))
        out.json(f"surfaces/sigma_{e.sigma:g}.json", e.surface.to_json())
    out.csv("ladder.csv", ["sigma", "F_value", "min_gap_to_prev", "centroid_axial", "mu0", "eta0"],
            rows)


def _scenario_foliation(cfg, ambient, out, jobs):
    from .surface import euclidean_centroid
    try:
        ladder = _ladder(cfg, ambient, jobs, bool(cfg["with_spectral"]))
    except LadderError as exc:
        if exc.ladder is not None and len(exc.ladder):
            _write_ladder(out, exc.ladder)
        raise
    fol = check_foliation(ladder) if len(ladder) > 1 else None
    cents = [euclidean_centroid(e.surface) for e in ladder.entries]
    _write_ladder(out, ladder, fol, cents)
    summary = {"sigmas": ladder.sigmas, "F_values": ladder.F_values,
               "flow": [e.flow for e in ladder.entries]}
    checks = []
    if fol is not None:
        out.json("foliation.json", fol.to_json())
        summary.update(fol.to_json())
        checks = [_check("gaps_positive", fol.min_gap, 0.0, fol.all_positive),
                  _check("F_decreasing", None, None, fol.F_decreasing)]
    return summary, checks


def _scenario_centers(cfg, ambient, out, jobs):
    report, checks, summary = {}, [], {}
    if "sigma_list" in cfg:
        ladder = _ladder(cfg, ambient, jobs, False)
        chm = center_of_mass_chm(ladder)
        report.update({k: v for k, v in chm.to_json().items() if v is not None})
        for e in ladder.entries:
            out.json(f"surfaces/sigma_{e.sigma:g}.json", e.surface.to_json())
    if "radii_list" in cfg:
        adm = center_of_mass_adm(ambient, cfg["radii_list"])
        report.update({k: v for k, v in adm.to_json().items() if v is not None})
        known = (adm.b_term or 0.0) + ambient.center
        if known:
            err = abs(adm.c_adm_limit / known - 1)
            checks.append(_check("c_adm_vs_known_center", err, 0.02, err <= 0.02))
    if "c_hm_limit" in report and "c_adm_limit" in report:
        diff = abs(report["c_hm_limit"] - report["c_adm_limit"])
        report["c_difference"] = diff
        if ambient.center:
            checks.append(_check("c_hm_vs_c_adm", diff, 0.05 * abs(ambient.center),
                                 diff <= 0.05 * abs(ambient.center)))
    out.json("centers.json", report)
    summary.update(report)
    return summary, checks


def _scenario_uniqueness(cfg, ambient, out, jobs):
    sigma = float(cfg["sigma"])
    N = int(cfg["grid"]["nodes"])
    starts = cfg.get("starts", [{"kind": "cos_power", "power": 2, "amplitude": 0.01},
                                {"kind": "cos_power", "power": 4, "amplitude": 0.01}])
    amp = {float(s.get("amplitude", 0.01)) for s in starts}
    if len(amp) != 1:
        raise ConfigError("all uniqueness starts must share one amplitude")
    probe = uniqueness_probe(ambient, sigma, [_profile_fun(s) for s in starts], amp.pop(),
                             _flow_config_for(cfg, ambient, sigma), N)
    checks = []
    for i, res in enumerate(probe.pop("results")):
        _write_flow_outputs(out, f"start_{i}_", res, ambient)
        checks += _flow_checks(res, f"start_{i}_")
    out.json("uniqueness.json", probe)
    checks.append(_check("profiles_agree", probe["max_profile_diff"],
                         10 * probe["tol_displacement"], probe["passed"]))
    return probe, checks


_RUNNERS = {
    "curvature-check": _scenario_curvature,
    "flow": _scenario_flow,
    "spectral": _scenario_spectral,
    "foliation": _scenario_foliation,
    "centers": _scenario_centers,
    "uniqueness-probe": _scenario_uniqueness,
}


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def run(cfg, out_dir, jobs=1):
    """Execute a validated config; returns ``(exit_code, manifest)``."""
    ambient = ambient_from_config(cfg)
    out = _Outputs(out_dir)
    out.root.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        summary, checks = _RUNNERS[cfg["scenario"]](cfg, ambient, out, jobs)
    except BaseException:
        out.mark_partial()
        raise
    summary = {"scenario": cfg["scenario"], "results": summary, "checks": checks,
               "passed": all(c["passed"] for c in checks)}
    out.json("summary.json", summary)
    manifest = {"config": cfg, "version": _version(), "scenario": cfg["scenario"],
                "wall_clock_seconds": time.perf_counter() - t0,
                "started_at": datetime.now(timezone.utc).isoformat(), "files": out.hashes()}
    with open(out.root / "manifest.json", "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
    return (EXIT_OK if summary["passed"] else EXIT_ASSERT), manifest


# -- comparison ---------------------------------------------------------------

def _load_run(path):
    p = Path(path)
    manifest = p / "manifest.json" if p.is_dir() else p
    try:
        man = json.loads(manifest.read_text())
        summary = json.loads((manifest.parent / "summary.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load run at {path}: {exc}") from exc
    return man, summary, manifest.parent


def _diff(a, b, prefix=""):
    out = {}
    if isinstance(a, dict) and isinstance(b, dict):
        for k in sorted(set(a) | set(b)):
            key = f"{prefix}.{k}" if prefix else str(k)
            if k not in a or k not in b:
                out[key] = "missing"
            else:
                out.update(_diff(a[k], b[k], key))
    elif isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            out[prefix] = "length mismatch"
        for i, (x, y) in enumerate(zip(a, b)):
            out.update(_diff(x, y, f"{prefix}[{i}]"))
    elif isinstance(a, bool) or isinstance(b, bool):
        out[prefix] = 0.0 if a == b else "changed"
    elif isinstance(a, (int, float)) and isinstance(b, (int, float)):
        scale = max(abs(a), abs(b))
        out[prefix] = 0.0 if a == b else abs(a - b) / scale
    else:
        out[prefix] = 0.0 if a == b else "changed"
    return out


def _profile_on(surface, N):
    """Profile sampled at the nodes of an ``N``-node grid (linear, pole-reflected)."""
    th = surface.theta
    ext_t = np.concatenate([-th[::-1], th, 2 * np.pi - th[::-1]])
    ext_r = np.concatenate([surface.profile[::-1], surface.profile, surface.profile[::-1]])
    return np.interp(stencil.theta_nodes(N), ext_t, ext_r)


def compare_runs(path_a, path_b):
    """Field-wise relative differences between two runs of the same scenario."""
    man_a, sum_a, dir_a = _load_run(path_a)
    man_b, sum_b, dir_b = _load_run(path_b)
    if man_a.get("scenario") != man_b.get("scenario"):
        raise ConfigError("runs are of different scenarios")
    diffs = _diff(sum_a, sum_b)
    numeric = [v for v in diffs.values() if isinstance(v, float)]
    report = {"scenario": man_a["scenario"], "fields": diffs,
              "max_relative_difference": max(numeric) if numeric else 0.0,
              "non_numeric_changes": sorted(k for k, v in diffs.items() if not isinstance(v, float))}
    fa, fb = dir_a / "final_surface.json", dir_b / "final_surface.json"
    if fa.exists() and fb.exists():
        sa = Surface.from_json(fa.read_text())
        sb = Surface.from_json(fb.read_text())
        N = min(sa.N, sb.N)
        report["final_profile_max_diff"] = float(np.max(np.abs(_profile_on(sa, N) - _profile_on(sb, N))))
    return report


# -- entry point --------------------------------------------------------------

def _setup_logging():
    level = os.environ.get("CHMC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _parser():
    p = argparse.ArgumentParser(prog="chmc", description="CHMC surface experiments")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SCENARIOS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for ladders")
    cp = sub.add_parser("compare", help="diff two run directories or manifests")
    cp.add_argument("run_a")
    cp.add_argument("run_b")
    cp.add_argument("--out", help="write the diff report to this JSON file")
    return p


def main(argv=None):
    _setup_logging()
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "compare":
            report = compare_runs(args.run_a, args.run_b)
            text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
            if args.out:
                Path(args.out).write_text(text)
            print(text)
            return EXIT_OK
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = load_config(args.config, args.command)
        out_dir = args.out or cfg.get("output_dir")
        if not out_dir:
            raise ConfigError("no output directory given (--out or output_dir)")
        code, manifest = run(cfg, out_dir, args.jobs)
        status = "ok" if code == EXIT_OK else "checks failed"
        print(f"{args.command}: {status}; {len(manifest['files'])} files in {out_dir}")
        return code
    except (ConfigError, DomainError) as exc:
        log.error("%s", exc)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CHMCError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("%s", exc)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
