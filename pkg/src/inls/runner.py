"""Run orchestration: builds initial data from a config, runs, and writes artifacts."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as dg
from .config import RunConfig
from .dynamics import Monitors, evolve
from .errors import ConfigurationError, RegimeError, SolverError
from .ground_state import (classify_data, solve_ground_state, thresholds, write_profile)
from .initial import band_limited_random, gaussian, scaled_ground_state
from .model import ModelParams
from .verify import run_suites

log = logging.getLogger(__name__)

DEFAULT_OUT = "inls-out"


def output_root(out=None) -> Path:
    return Path(out or os.environ.get("INLS_OUT") or DEFAULT_OUT)


def run_dir(root: Path, name: str) -> Path:
    """A fresh directory ``root/name`` (suffixed ``-2``, ``-3``... when taken)."""
    root.mkdir(parents=True, exist_ok=True)
    path = root / name
    k = 1
    while True:
        try:
            path.mkdir()
            return path
        except FileExistsError:
            k += 1
            path = root / f"{name}-{k}"


def _profile_for(cfg: RunConfig):
    gs = cfg.ground_state
    return solve_ground_state(cfg.params, gs["tol"], r_max=gs["r_max"], h=gs["h"], r0=gs["r0"])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_default) + "\n")


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _summary_base(cfg: RunConfig, kind: str) -> dict:
    return {"kind": kind, "name": cfg.name, "version": __version__, "seed": cfg.seed,
            "config": cfg.raw}


# -- ground state -------------------------------------------------------------------

def run_ground_state(cfg: RunConfig, out_dir: Path) -> dict:
    t0 = time.perf_counter()
    prof = _profile_for(cfg)
    path = write_profile(prof, out_dir / "profile.csv")
    summary = _summary_base(cfg, "ground-state")
    summary.update(status="converged", profile=str(path.name), header=prof.header(),
                   wall_time=time.perf_counter() - t0)
    _write_json(out_dir / "summary.json", summary)
    return summary


# -- evolution ------------------------------------------------------------------------

def build_initial(cfg: RunConfig, profile=None):
    ini, grid = cfg.initial, cfg.grid
    kind = ini["kind"]
    if kind in ("gaussian", "offset_gaussian", "boosted_gaussian"):
        if kind == "offset_gaussian" and ini["center"] is None:
            raise ConfigurationError("offset_gaussian needs [initial] center")
        if kind == "boosted_gaussian" and ini["velocity"] is None:
            raise ConfigurationError("boosted_gaussian needs [initial] velocity")
        return gaussian(grid, ini["amplitude"], ini["width"], ini["center"], ini["velocity"],
                        ini["focus_time"])
    if kind == "scaled_ground_state":
        if profile is None:
            profile = _profile_for(cfg)
        return scaled_ground_state(grid, profile, ini["scale"], ini["center"])
    if kind == "random":
        k_cut = ini["k_cut"] or 0.25 * math.pi / grid.spacing
        return band_limited_random(grid, k_cut, ini["seed"], ini["amplitude"])
    raise ConfigurationError(f"unknown initial kind {kind!r}")


def _evacuation_radii(horizons, b):
    return tuple(dg.evacuation_radius(T, b) for T in horizons)


def run_evolve(cfg: RunConfig, out_dir: Path | None = None) -> dict:
    """Evolve the configured data; returns the summary (and writes it when ``out_dir``)."""
    t0 = time.perf_counter()
    params, d = cfg.params, cfg.diagnostics
    profile = th = None
    if 0 < params.s_c < 1 and params.N == cfg.grid.dim:
        try:
            profile = _profile_for(cfg)
            th = thresholds(profile)
        except (SolverError, RegimeError) as exc:
            log.warning("no ground state for thresholds: %s", exc)
    u0 = build_initial(cfg, profile)
    horizons = tuple(h for h in d["horizons"] if h <= cfg.T * (1 + 1e-12))
    radii = tuple(sorted(set(d["radii"]) | set(_evacuation_radii(horizons, params.b))))
    mon = Monitors(radii=radii, virial_R=d["virial_R"], virial_fd=d["virial_fd"],
                   blowup_factor=d["blowup_factor"], wrap_tol=d["wrap_tol"])
    classification = classify_data(u0, profile) if profile is not None else None

    margins = {R: [] for R in d["coercivity_R"]}

    def observe(rec, field):
        for R in margins:
            res = dg.local_coercivity_check(field, profile, R, d["coercivity_A"])
            margins[R].append(res.margin if res.applicable else math.nan)

    use_obs = bool(margins) and profile is not None and classification == "below_threshold"
    traj = evolve(u0, params, cfg.dt, cfg.T, cfg.log_every, mon,
                  observer=observe if use_obs else None)

    recs = traj.records
    M = traj.series("mass")
    E = traj.series("energy")
    pot = traj.series("potential")
    summary = _summary_base(cfg, "evolve")
    summary.update({
        "status": traj.status, "message": traj.message, "steps": traj.steps,
        "t_final": recs[-1].t, "classification": classification,
        "mass_drift": float(np.max(np.abs(M - M[0])) / M[0]),
        "energy_drift": float(np.max(np.abs(E - E[0])) / max(abs(E[0]), 1e-300)),
        "potential_initial": float(pot[0]), "potential_final": float(pot[-1]),
        "potential_ratio": float(pot[-1] / pot[0]) if pot[0] else math.nan,
        "grad_growth": float(recs[-1].grad_norm / recs[0].grad_norm) if recs[0].grad_norm else math.nan,
    })
    if th is not None:
        summary["thresholds"] = {"s_c": th.s_c, "ME": th.ME, "MK": th.MK}
        viol = dg.first_trapping_violation(traj, th)
        summary["trapping"] = {"holds": dg.h1_trapping_monitor(traj, th),
                               "first_violation": viol}
    if use_obs:
        summary["coercivity"] = {f"{R:g}": {"min_margin": float(np.nanmin(v)),
                                            "all_positive": bool(np.all(np.array(v) > 0))}
                                 for R, v in margins.items()}
    if traj.status == "completed" and d["radii"]:
        times = np.array(traj.times)
        avg_at = [T for T in (cfg.T / 2, cfg.T) if np.any(np.isclose(times, T, rtol=0, atol=1e-9))]
        if len(avg_at) < 2:
            log.info("T/2 = %g is not a logged time; Morawetz averages only at T", cfg.T / 2)
        summary["morawetz"] = {f"{R:g}": {f"{T:g}": dg.morawetz_average(traj, R, T)
                                          for T in avg_at}
                               for R in d["radii"]}
    if traj.status == "completed" and horizons:
        scan = dg.evacuation_scan(traj, params.b, horizons)
        summary["evacuation"] = [{"T": e.T, "R": e.R, "value": e.value, "t_min": e.t_min,
                                  "value_at_t_min": e.value_at_t_min} for e in scan]
    summary["wall_time"] = time.perf_counter() - t0
    summary["_trajectory"] = traj
    summary["_coercivity_margins"] = margins
    if out_dir is not None:
        dg.write_diagnostics_csv(out_dir / "diagnostics.csv", recs)
        _write_json(out_dir / "summary.json",
                    {k: v for k, v in summary.items() if not k.startswith("_")})
    return summary


# -- verification -----------------------------------------------------------------

def run_verify(cfg: RunConfig, out_dir: Path | None = None, suites=None) -> dict:
    t0 = time.perf_counter()
    names = list(suites or cfg.verify["suites"])
    if not names:
        raise ConfigurationError("no suites selected ([verify] suites or --suite)")
    results = run_suites(names, cfg.verify.get("options"))
    report = _summary_base(cfg, "verify")
    report.update(passed=all(r.passed for r in results),
                  suites=[r.as_dict() for r in results],
                  wall_time=time.perf_counter() - t0)
    report["status"] = "passed" if report["passed"] else "failed"
    if out_dir is not None:
        _write_json(out_dir / "report.json", report)
    return report


# -- parameter sweeps --------------------------------------------------------------

SWEEP_COLUMNS = ["N", "p", "b", "s_c", "status", "Q0", "mass", "kinetic", "potential",
                 "ME", "MK", "residual"]


def _sweep_one(args):
    (N, p, b, validation), gs = args
    row = {"N": N, "p": p, "b": b}
    try:
        params = ModelParams(N, p, b, validation)
        row["s_c"] = params.s_c
        prof = solve_ground_state(params, gs["tol"], r_max=gs["r_max"], h=gs["h"], r0=gs["r0"])
        row.update(prof.header())
        row["status"] = "converged"
    except Exception as exc:  # one failed point must not sink the sweep
        row["status"] = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(cfg: RunConfig, out_dir: Path, p_values, b_values, N_values=None,
              workers: int = 1) -> list[dict]:
    t0 = time.perf_counter()
    N_values = N_values or [cfg.params.N]
    jobs = [((int(N), float(p), float(b), cfg.params.validation), cfg.ground_state)
            for N in N_values for p in p_values for b in b_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row.get(k) is None else row.get(k, "")) for k in SWEEP_COLUMNS})
    summary = _summary_base(cfg, "sweep")
    summary.update(points=len(rows), converged=sum(r["status"] == "converged" for r in rows),
                   wall_time=time.perf_counter() - t0, status="completed")
    _write_json(out_dir / "summary.json", summary)
    return rows
