"""Identity and convergence suites behind ``inls verify``.

Each suite returns a :class:`SuiteResult` with the measured values, the
tolerances they were held to and a pass flag.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import diagnostics as dg
from .dynamics import Monitors, evolve, rk4_reference_step, rk4_stable_dt, scaling_transform
from .grid import ComplexField, integrate, make_grid
from .initial import band_limited_random, free_gaussian_exact, gaussian, spectral_resample
from .linear import dispersive_decay_fit, free_evolve
from .model import ModelParams, potential_weight

SUITES = ("conservation", "virial-identity", "commutator", "dispersive-decay",
          "scaling-covariance", "convergence-order")

REFERENCE_PARAMS = dict(N=3, p=2.5, b=0.5)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    measured: dict = dc_field(default_factory=dict)
    tolerance: dict = dc_field(default_factory=dict)
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed),
                "measured": _jsonable(self.measured), "tolerance": _jsonable(self.tolerance),
                "seconds": self.seconds}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _params(kw) -> ModelParams:
    return ModelParams(int(kw.get("N", 3)), float(kw.get("p", 2.5)), float(kw.get("b", 0.5)),
                       bool(kw.get("validation", False)))


def _in(x, lo, hi) -> bool:
    return bool(np.isfinite(x) and lo <= x <= hi)


# -- conservation and virial identity share one pair of runs -----------------------------

@dataclass
class PairedRuns:
    """Two runs of the same data at ``dt`` and ``dt/2`` with virial bookkeeping."""
    params: ModelParams
    dts: tuple
    logs: dict
    semidiscrete: dict   # dt -> array of exact grid dZ/dt at logged times
    seconds: float


def paired_runs(points=64, half_width=12.0, dt=2e-3, T=5.0, log_interval=0.1,
                amplitude=0.4, width=math.sqrt(5.0), focus_time=2.5, virial_R=6.0,
                wrap_tol=None, **model) -> PairedRuns:
    """Gaussian runs at ``dt`` and ``dt/2`` logging Z, its centered difference and the rhs."""
    params = _params({**REFERENCE_PARAMS, **model})
    grid = make_grid(params.N, points, half_width)
    u0 = gaussian(grid, amplitude, width, focus_time=focus_time)
    t0 = time.perf_counter()
    logs, semi = {}, {}
    for h in (dt, dt / 2):
        vw = dg.build_virial_weight(grid, virial_R)
        rates = []
        mon = Monitors(virial_R=virial_R, virial_fd=True, wrap_tol=wrap_tol)
        logs[h] = evolve(u0, params, h, T, log_every=int(round(log_interval / h)), monitors=mon,
                         observer=lambda rec, f: rates.append(
                             dg.semidiscrete_virial_rate(f, vw, params)["total"]))
        semi[h] = np.array(rates)
    return PairedRuns(params, (dt, dt / 2), logs, semi, time.perf_counter() - t0)


def conservation(runs: PairedRuns, mass_tol=1e-10, ratio=(3.4, 4.6)) -> SuiteResult:
    measured = {}
    drift = {}
    for h, log in runs.logs.items():
        M, E = log.series("mass"), log.series("energy")
        measured[f"mass_drift@{h:g}"] = float(np.max(np.abs(M - M[0])) / M[0])
        drift[h] = float(np.max(np.abs(E - E[0])))
        measured[f"energy_drift@{h:g}"] = drift[h]
    dt, dt2 = runs.dts
    measured["energy_ratio"] = drift[dt] / drift[dt2] if drift[dt2] > 0 else math.nan
    ok = (all(v <= mass_tol for k, v in measured.items() if k.startswith("mass"))
          and _in(measured["energy_ratio"], *ratio))
    return SuiteResult("conservation", ok, measured,
                       {"mass_drift": mass_tol, "energy_ratio": list(ratio)}, runs.seconds)


def virial_identity(runs: PairedRuns, ratio=(3.4, 4.6)) -> SuiteResult:
    """Centered-difference dZ/dt against the four-term rhs, for ``dt`` and ``dt/2``.

    The same comparison against the exact grid derivative is reported
    alongside; only the four-term comparison decides the verdict.
    """
    err, err_sd = {}, {}
    for h, log in runs.logs.items():
        fd = log.series("dZdt_fd")
        ok = np.isfinite(fd)
        err[h] = float(np.max(np.abs(fd - log.series("dZdt_rhs"))[ok]))
        err_sd[h] = float(np.max(np.abs(fd - runs.semidiscrete[h])[ok]))
    dt, dt2 = runs.dts
    r = err[dt] / err[dt2]
    r_sd = err_sd[dt] / err_sd[dt2]
    measured = {"max_error": err, "ratio": r, "max_error_vs_grid_rate": err_sd,
                "ratio_vs_grid_rate": r_sd, "order": math.log2(r), "order_vs_grid_rate": math.log2(r_sd)}
    return SuiteResult("virial-identity", _in(r, *ratio), measured, {"ratio": list(ratio)},
                       runs.seconds)


# -- commutator identity ---------------------------------------------------------------

def commutator(points=64, half_width=12.0, R=6.0, A=2 / 3, k_cut=None, seeds=(0, 1, 2),
               tol=1e-8) -> SuiteResult:
    """Residual of the cutoff commutator identity on band-limited random fields.

    Each field is also resampled to twice the resolution; the residual must drop.
    """
    t0 = time.perf_counter()
    grid = make_grid(3, points, half_width)
    if k_cut is None:
        k_cut = 0.5 * math.pi / grid.spacing
    res, res_fine = [], []
    for s in np.atleast_1d(seeds).tolist():
        f = band_limited_random(grid, k_cut, s)
        res.append(dg.commutator_check(f, R, A))
        res_fine.append(dg.commutator_check(spectral_resample(f, 2 * points), R, A))
    ok = max(res) <= tol and all(b < a for a, b in zip(res, res_fine))
    return SuiteResult("commutator", ok,
                       {"residual": res, "residual_doubled": res_fine, "k_cut": k_cut},
                       {"residual": tol}, time.perf_counter() - t0)


# -- free flow ----------------------------------------------------------------------

def dispersive_decay(points=256, half_width=40.0, width=math.sqrt(0.5), times=None,
                     slope=(-1.55, -1.45), closed_points=64, closed_half_width=12.0,
                     closed_width=1.0, closed_times=(0.1, 0.25, 0.5), closed_tol=1e-8,
                     wrap_tol=1e-8) -> SuiteResult:
    """Fitted sup-norm decay exponent and a closed-form comparison of the free flow."""
    t0 = time.perf_counter()
    if times is None:
        times = np.geomspace(1.25, 2.5, 6)
    grid = make_grid(3, points, half_width, offset=False)  # node at the peak
    u0 = gaussian(grid, 1.0, width)
    fit, sup = dispersive_decay_fit(u0, times, wrap_tol)
    del u0
    cg = make_grid(3, closed_points, closed_half_width)
    c0 = gaussian(cg, 1.0, closed_width)
    dev = [float(np.abs(free_evolve(c0, t).values - free_gaussian_exact(cg, t, closed_width)).max())
           for t in closed_times]
    ok = _in(fit, *slope) and max(dev) <= closed_tol
    return SuiteResult("dispersive-decay", ok,
                       {"slope": fit, "sup_norms": sup, "times": list(times),
                        "closed_form_sup_error": dev},
                       {"slope": list(slope), "closed_form_sup_error": closed_tol},
                       time.perf_counter() - t0)


# -- scaling covariance ---------------------------------------------------------------

def scaling_covariance(points=64, half_width=12.0, lam=2.0, dt=1e-3, T=0.1, amplitude=1.0,
                       width=1.0, tol=1e-6, **model) -> SuiteResult:
    """Transform-then-evolve against evolve-then-transform with times scaled by ``lam^2``."""
    t0 = time.perf_counter()
    params = _params({**REFERENCE_PARAMS, **model})
    grid = make_grid(params.N, points, half_width)
    u0 = gaussian(grid, amplitude, width)
    mon = Monitors(wrap_tol=None)
    a = evolve(scaling_transform(u0, params, lam), params, dt, T, log_every=10 ** 9,
               monitors=mon).final
    b = scaling_transform(evolve(u0, params, lam ** 2 * dt, lam ** 2 * T, log_every=10 ** 9,
                                 monitors=mon).final, params, lam)
    rel = math.sqrt(integrate(np.abs(a.values - b.values) ** 2, a.grid)
                    / integrate(np.abs(a.values) ** 2, a.grid))
    return SuiteResult("scaling-covariance", rel <= tol, {"relative_l2": rel, "lambda": lam},
                       {"relative_l2": tol}, time.perf_counter() - t0)


# -- integrator order ----------------------------------------------------------------

def convergence_order(points=32, half_width=8.0, dts=(4e-3, 2e-3, 1e-3), T=0.4,
                      amplitude=1.5, width=1.0, ref_steps_per_dt=8, order=(1.8, 2.2),
                      **model) -> SuiteResult:
    """Global L2 gap between Strang runs and a fine-step RK4 reference at time ``T``."""
    t0 = time.perf_counter()
    params = _params({**REFERENCE_PARAMS, **model})
    grid = make_grid(params.N, points, half_width)
    u0 = gaussian(grid, amplitude, width)
    w = potential_weight(grid, params.b)
    h_ref = min(dts) / ref_steps_per_dt
    if h_ref > rk4_stable_dt(grid):
        h_ref = min(dts) / math.ceil(min(dts) / rk4_stable_dt(grid))
    n_ref = int(round(T / h_ref))
    ref = u0
    for _ in range(n_ref):
        ref = rk4_reference_step(ref, w, params, h_ref)
    norm = math.sqrt(integrate(np.abs(ref.values) ** 2, grid))
    gaps = []
    for h in dts:
        out = evolve(u0, params, h, T, log_every=10 ** 9, monitors=Monitors(wrap_tol=None)).final
        gaps.append(math.sqrt(integrate(np.abs(out.values - ref.values) ** 2, grid)) / norm)
    orders = [math.log(gaps[i] / gaps[i + 1]) / math.log(dts[i] / dts[i + 1])
              for i in range(len(dts) - 1)]
    ok = all(_in(o, *order) for o in orders)
    return SuiteResult("convergence-order", ok,
                       {"dts": list(dts), "l2_gap": gaps, "orders": orders, "rk4_dt": h_ref},
                       {"order": list(order)}, time.perf_counter() - t0)


def run_suites(names, options: dict | None = None) -> list[SuiteResult]:
    """Run the named suites; ``options`` maps suite name to keyword overrides."""
    options = options or {}
    out = []
    runs = None
    for name in names:
        opts = dict(options.get(name, {}))
        if name in ("conservation", "virial-identity"):
            if runs is None:
                shared = {**options.get("conservation", {}), **options.get("virial-identity", {})}
                shared = {k: v for k, v in shared.items() if k not in ("mass_tol", "ratio")}
                runs = paired_runs(**shared)
            out.append(conservation(runs) if name == "conservation" else virial_identity(runs))
        elif name == "commutator":
            out.append(commutator(**opts))
        elif name == "dispersive-decay":
            out.append(dispersive_decay(**opts))
        elif name == "scaling-covariance":
            out.append(scaling_covariance(**opts))
        elif name == "convergence-order":
            out.append(convergence_order(**opts))
        else:
            raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return out
