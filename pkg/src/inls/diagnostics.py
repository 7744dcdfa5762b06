"""Observables of INLS states and trajectories.

Conserved quantities, the truncated virial weight and its identity, ball
integrals used by the Morawetz and energy-evacuation monitors, the commutator
identity for smooth cutoffs and the local coercivity functional.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConfigurationError
from .grid import ComplexField, GridSpec, gradient, integrate, laplacian, radial_distance_field
from .model import ModelParams, PotentialWeight, potential_weight

__all__ = [
    "mass", "kinetic", "potential", "energy", "grad_norm",
    "VirialWeight", "build_virial_weight", "virial_Z", "virial_rhs", "virial_rhs_terms",
    "semidiscrete_virial_rate", "mass_in_ball", "ball_potential", "morawetz_average",
    "smoothstep", "cutoff", "commutator_check", "local_coercivity_check",
    "CoercivityResult", "evacuation_radius", "evacuation_scan", "EvacuationPoint",
    "h1_trapping_monitor", "DiagnosticsRecord", "snapshot", "write_diagnostics_csv",
]


# -- conserved quantities -------------------------------------------------------

def mass(field: ComplexField) -> float:
    return integrate(np.abs(field.values) ** 2, field.grid)


def kinetic(field: ComplexField, grads=None) -> float:
    if grads is None:
        grads = gradient(field.values, field.grid)
    return integrate(sum(np.abs(d) ** 2 for d in grads), field.grid)


def grad_norm(field: ComplexField) -> float:
    return math.sqrt(kinetic(field))


def _weight_for(field: ComplexField, weight, params: ModelParams) -> np.ndarray:
    if weight is None:
        weight = potential_weight(field.grid, params.b)
    if isinstance(weight, PotentialWeight):
        weight = weight.values
    return weight


def potential(field: ComplexField, weight, params: ModelParams) -> float:
    """``integral |x|^-b |u|^(p+1)``."""
    w = _weight_for(field, weight, params)
    return integrate(w * np.abs(field.values) ** (params.p + 1), field.grid)


def energy(field: ComplexField, weight, params: ModelParams) -> float:
    return 0.5 * kinetic(field) - potential(field, weight, params) / (params.p + 1)


# -- smooth step / cutoffs --------------------------------------------------------

@lru_cache(maxsize=8)
def _smoothstep_polys(order: int):
    n = order
    coeffs = np.zeros(2 * n + 2)
    for k in range(n + 1):
        coeffs[n + 1 + k] = math.comb(n + k, k) * math.comb(2 * n + 1, n - k) * (-1) ** k
    s = Polynomial(coeffs)
    return tuple(s.deriv(m) for m in range(4))


SMOOTHSTEP_ORDER = 4  # degree 9, C^4 across both ends


def smoothstep(t, derivative: int = 0) -> np.ndarray:
    """Degree-9 polynomial step: 0 for t <= 0, 1 for t >= 1, C^4 at the joins."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 0.0, 1.0)
    val = _smoothstep_polys(SMOOTHSTEP_ORDER)[derivative](tc)
    if derivative:
        val = np.where((t <= 0) | (t >= 1), 0.0, val)
    return val


def cutoff(grid: GridSpec, R: float, A: float = np.inf):
    """Radial cutoff equal to 1 on ``|x| <= R/2`` and 0 outside ``R(1/2 + 1/A)``.

    With ``A = inf`` the ramp width defaults to ``R/2`` (support in ``|x| <= R``).
    Returns ``(phi, laplacian_phi)`` with the Laplacian in closed form.
    """
    width = R / 2 if np.isinf(A) else R / A
    r = radial_distance_field(grid)
    t = (r - R / 2) / width
    phi = 1.0 - smoothstep(t)
    d1 = -smoothstep(t, 1) / width
    d2 = -smoothstep(t, 2) / width ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = d2 + (grid.dim - 1) * np.where(r > 0, d1 / r, 0.0)
    return phi, lap


# -- virial weight -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VirialWeight:
    """Truncated virial weight ``a`` and the derivatives entering the identity.

    ``a = |x|^2`` on ``|x| <= R/2`` and ``a = 2R|x| - c_R`` for ``|x| > R``; in
    between, ``d_r a`` rises monotonically from ``2r`` to ``2R`` through a C^4
    polynomial blend. ``hess`` maps index pairs ``(i, j)`` with ``i <= j``.
    """

    grid: GridSpec
    R: float
    a: np.ndarray
    grad: tuple
    hess: dict
    lap: np.ndarray
    bilap: np.ndarray
    dr: np.ndarray        # radial derivative d_r a
    drr: np.ndarray       # second radial derivative d_r^2 a
    x_dot_grad_over_r2: np.ndarray  # (x . grad a) / |x|^2
    inner: np.ndarray
    ramp: np.ndarray
    outer: np.ndarray


def _ramp_polys(R: float):
    # d_r a on the ramp in the variable t = 2r/R - 1 in [0, 1]
    S = Polynomial(_smoothstep_polys(SMOOTHSTEP_ORDER)[0].coef)
    G = R * (Polynomial([1, 1]) + Polynomial([1, -1]) * S)
    return G, G.integ()


def build_virial_weight(grid: GridSpec, R: float) -> VirialWeight:
    if not (R > 0):
        raise ConfigurationError(f"virial radius must be positive, got {R}")
    if R > grid.half_width / 2 * (1 + 1e-12):
        raise ConfigurationError(
            f"virial radius R={R} exceeds half the box half-width {grid.half_width}")
    N = grid.dim
    xs = grid.coordinates()
    r = radial_distance_field(grid)
    if np.any(r == 0):
        raise ConfigurationError("virial weight needs an offset grid (node at x = 0)")
    inner = r <= R / 2
    outer = r > R
    ramp = ~(inner | outer)

    G, Gint = _ramp_polys(R)
    t = np.where(ramp, 2 * r / R - 1, 0.0)
    g = np.where(ramp, G(t), 0.0)
    g1 = np.where(ramp, (2 / R) * G.deriv(1)(t), 0.0)
    g2 = np.where(ramp, (2 / R) ** 2 * G.deriv(2)(t), 0.0)
    g3 = np.where(ramp, (2 / R) ** 3 * G.deriv(3)(t), 0.0)
    a_R = R * R / 4 + (R / 2) * Gint(1.0)

    r2 = sum(x * x for x in xs)
    a = np.where(inner, r2, 0.0)
    a = np.where(ramp, R * R / 4 + (R / 2) * Gint(t), a)
    a = np.where(outer, a_R + 2 * R * (r - R), a)

    dr = np.where(inner, 2 * r, np.where(outer, 2 * R, g))
    drr = np.where(inner, 2.0, np.where(outer, 0.0, g1))
    ratio = np.where(inner, 2.0, dr / r)  # (d_r a)/r = x.grad a / |x|^2

    grad = tuple(np.where(inner, 2 * x, ratio * x) for x in xs)

    hess = {}
    for i in range(N):
        for j in range(i, N):
            xx = xs[i] * xs[j] / r2
            delta = 1.0 if i == j else 0.0
            hv = drr * xx + ratio * (delta - xx)
            hv = np.where(inner, 2.0 * delta, hv)
            hess[(i, j)] = np.broadcast_to(hv, grid.shape).copy()

    lap = np.where(inner, 2.0 * N, np.where(outer, 2 * (N - 1) * R / r, g1 + (N - 1) * g / r))

    # Delta(Delta a) for radial a with h = g' + (N-1) g / r
    hp = g2 + (N - 1) * (g1 / r - g / r ** 2)
    hpp = g3 + (N - 1) * (g2 / r - 2 * g1 / r ** 2 + 2 * g / r ** 3)
    bilap_ramp = hpp + (N - 1) * hp / r
    bilap = np.where(inner, 0.0,
                     np.where(outer, 2 * R * (N - 1) * (3 - N) / r ** 3, bilap_ramp))

    arrs = [a, lap, bilap, dr, drr, ratio, *grad, *hess.values()]
    for arr in arrs:
        arr.flags.writeable = False
    return VirialWeight(grid, float(R), a, grad, hess, lap, bilap, dr, drr, ratio,
                        inner, ramp, outer)


def virial_Z(field: ComplexField, weight: VirialWeight, grads=None) -> float:
    """``Z = 2 Im integral conj(u) grad(u) . grad(a)``."""
    if field.grid != weight.grid:
        raise ConfigurationError("field and virial weight live on different grids")
    if grads is None:
        grads = gradient(field.values, field.grid)
    u = field.values
    dens = sum(ga * np.imag(np.conj(u) * d) for ga, d in zip(weight.grad, grads))
    return 2.0 * integrate(dens, field.grid)


def virial_rhs_terms(field: ComplexField, weight: VirialWeight, params: ModelParams,
                     pweight=None, grads=None) -> dict:
    """The four integrals whose sum is ``dZ/dt`` along an INLS solution.

    ``nonlinear_laplacian``: ``(4/(p+1) - 2) int |x|^-b |u|^(p+1) Delta a``;
    ``nonlinear_radial``: ``-(4b/(p+1)) int |x|^(-b-2) |u|^(p+1) x.grad a``;
    ``bilaplacian``: ``-int |u|^2 Delta Delta a``;
    ``hessian``: ``4 Re sum_ij int a_ij conj(u_i) u_j``.
    """
    if field.grid != weight.grid:
        raise ConfigurationError("field and virial weight live on different grids")
    p, b = params.p, params.b
    grid = field.grid
    w = _weight_for(field, pweight, params)
    u = field.values
    if grads is None:
        grads = gradient(u, grid)
    up1 = w * np.abs(u) ** (p + 1)
    t1 = (4 / (p + 1) - 2) * integrate(up1 * weight.lap, grid)
    t2 = -(4 * b / (p + 1)) * integrate(up1 * weight.x_dot_grad_over_r2, grid) if b else 0.0
    t3 = -integrate(np.abs(u) ** 2 * weight.bilap, grid)
    hsum = np.zeros(grid.shape)
    for (i, j), aij in weight.hess.items():
        if i == j:
            hsum += aij * np.abs(grads[i]) ** 2
        else:
            hsum += 2 * aij * np.real(np.conj(grads[i]) * grads[j])
    t4 = 4 * integrate(hsum, grid)
    return {"nonlinear_laplacian": t1, "nonlinear_radial": t2, "bilaplacian": t3,
            "hessian": t4}


def virial_rhs(field: ComplexField, weight: VirialWeight, params: ModelParams,
               pweight=None, grads=None) -> float:
    return sum(virial_rhs_terms(field, weight, params, pweight, grads).values())


def semidiscrete_virial_rate(field: ComplexField, weight: VirialWeight, params: ModelParams,
                             pweight=None) -> dict:
    """Exact derivative of the grid functional Z along the grid vector field.

    ``u_t = i(Lap_h u + F u)`` with the spectral Laplacian and ``F = |x|^-b |u|^(p-1)``;
    ``dZ = 2 Im sum(conj(v) G u + conj(u) G v)`` with ``G = grad a . D_h``.
    Returns the ``linear`` and ``nonlinear`` parts and their ``total``. The
    difference from :func:`virial_rhs` is the spatial discretization error of
    the identity.
    """
    if field.grid != weight.grid:
        raise ConfigurationError("field and virial weight live on different grids")
    grid = field.grid
    u = field.values
    w = _weight_for(field, pweight, params)
    Du = gradient(u, grid)
    Gu = sum(ga * d for ga, d in zip(weight.grad, Du))
    out = {}
    lap = laplacian(field).values
    for name, Hu in (("linear", lap), ("nonlinear", w * np.abs(u) ** (params.p - 1) * u)):
        v = 1j * Hu
        Gv = sum(ga * d for ga, d in zip(weight.grad, gradient(v, grid)))
        dens = np.imag(np.conj(v) * Gu + np.conj(u) * Gv)
        out[name] = 2.0 * integrate(dens, grid)
    out["total"] = out["linear"] + out["nonlinear"]
    return out


# -- ball integrals ------------------------------------------------------------------

def mass_in_ball(field: ComplexField, R: float) -> float:
    """Mass inside the closed ball ``|x| <= R`` (sharp indicator)."""
    r = radial_distance_field(field.grid)
    return integrate(np.where(r <= R, np.abs(field.values) ** 2, 0.0), field.grid)


def ball_potential(field: ComplexField, R: float, params: ModelParams, weight=None) -> float:
    """``int_{|x| <= R} |x|^-b |u|^(p+1)``, the Morawetz integrand."""
    r = radial_distance_field(field.grid)
    w = _weight_for(field, weight, params)
    dens = w * np.abs(field.values) ** (params.p + 1)
    return integrate(np.where(r <= R, dens, 0.0), field.grid)


def _radius_key(values: dict, R: float):
    for key in values:
        if math.isclose(key, R, rel_tol=1e-12, abs_tol=1e-12):
            return key
    raise ConfigurationError(
        f"radius {R:g} was not monitored (have {sorted(values)})")


def _time_average(times: np.ndarray, values: np.ndarray, T: float) -> float:
    if T <= 0:
        raise ConfigurationError("averaging horizon must be positive")
    tol = 1e-9 * max(1.0, T)
    if times.size < 2 or abs(times[0]) > tol or times[-1] < T - tol:
        raise ConfigurationError(
            f"time samples [{times[0] if times.size else None}, "
            f"{times[-1] if times.size else None}] do not cover [0, {T:g}]")
    keep = times <= T + tol
    ts, vs = times[keep], values[keep]
    steps = np.diff(ts)
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=0):
        raise ConfigurationError("time samples are not on a uniform lattice")
    if abs(ts[-1] - T) > tol:
        raise ConfigurationError(f"horizon {T:g} is not a lattice point")
    return float(np.trapezoid(vs, ts)) / T


def morawetz_average(trajectory, R: float, T: float, params: ModelParams | None = None,
                     weight=None) -> float:
    """Trapezoidal time average over ``[0, T]`` of the ball potential at radius ``R``.

    ``trajectory`` is either a :class:`~inls.dynamics.TrajectoryLog` whose records
    monitored radius ``R``, or an iterable of ``(t, field)`` pairs (then
    ``params`` is required).
    """
    records = getattr(trajectory, "records", None)
    if records is not None:
        times = np.array([rec.t for rec in records])
        if not records:
            raise ConfigurationError("empty trajectory")
        key = _radius_key(records[0].morawetz, R)
        vals = np.array([rec.morawetz[key] for rec in records])
    else:
        pairs = list(trajectory)
        if params is None:
            raise ConfigurationError("params are required for raw field sequences")
        times = np.array([t for t, _ in pairs], dtype=float)
        vals = np.array([ball_potential(f, R, params, weight) for _, f in pairs])
    return _time_average(times, vals, T)


# -- commutator identity and local coercivity ---------------------------------------

def commutator_check(field: ComplexField, R: float, A: float = np.inf) -> float:
    """Relative residual of ``int|grad(phi f)|^2 = int phi^2|grad f|^2 - int phi Lap(phi)|f|^2``."""
    grid = field.grid
    phi, lap_phi = cutoff(grid, R, A)
    f = field.values
    lhs = integrate(sum(np.abs(d) ** 2 for d in gradient(phi * f, grid)), grid)
    gf = gradient(f, grid)
    rhs = (integrate(phi ** 2 * sum(np.abs(d) ** 2 for d in gf), grid)
           - integrate(phi * lap_phi * np.abs(f) ** 2, grid))
    scale = max(abs(lhs), abs(rhs))
    return 0.0 if scale == 0 else abs(lhs - rhs) / scale


@dataclass
class CoercivityResult:
    applicable: bool
    lhs: float = math.nan
    rhs: float = math.nan
    margin: float = math.nan
    classification: str = ""


def local_coercivity_check(field: ComplexField, profile, R: float, A: float = np.inf,
                           weight=None) -> CoercivityResult:
    """Localized coercivity functional for the cut-off state ``phi_R u``.

    ``lhs = int|grad(phi u)|^2 + ((N-b)/(p+1) - N/2) int |x|^-b |phi u|^(p+1)``,
    ``rhs = int |x|^-b |phi u|^(p+1)``, ``margin = lhs/rhs``. Only evaluated for
    data classified below the ground-state thresholds.
    """
    from .ground_state import classify_data

    params = profile.params
    verdict = classify_data(field, profile, weight=weight)
    if verdict != "below_threshold":
        return CoercivityResult(False, classification=verdict)
    N, p, b = params.N, params.p, params.b
    phi, _ = cutoff(field.grid, R, A)
    v = field.with_values(phi * field.values)
    kin = kinetic(v)
    pot = potential(v, weight, params)
    lhs = kin + ((N - b) / (p + 1) - N / 2) * pot
    margin = lhs / pot if pot > 0 else math.nan
    return CoercivityResult(True, lhs, pot, margin, verdict)


# -- evacuation and trapping monitors --------------------------------------------------

def evacuation_radius(T: float, b: float) -> float:
    """``R_n = T_n^(1/(1+b))``."""
    return float(T) ** (1.0 / (1.0 + b))


@dataclass(frozen=True)
class EvacuationPoint:
    T: float
    R: float
    value: float
    t_min: float
    value_at_t_min: float


def default_horizons(T_end: float, count: int = 3) -> list[float]:
    return [T_end / 2 ** (count - 1 - k) for k in range(count)]


def evacuation_scan(trajectory_log, b: float, horizons: Sequence[float] | None = None):
    """Morawetz averages over ``[0, T_n]`` in the balls ``|x| <= T_n^(1/(1+b))``.

    Each entry also reports the logged time with the smallest ball potential,
    a witness for the mean-value argument.
    """
    records = trajectory_log.records
    times = np.array([rec.t for rec in records])
    if horizons is None:
        horizons = default_horizons(times[-1])
    horizons = list(horizons)
    if np.any(np.diff(horizons) <= 0):
        raise ConfigurationError("horizons must be increasing")
    out = []
    for T in horizons:
        R = evacuation_radius(T, b)
        key = _radius_key(records[0].morawetz, R)
        vals = np.array([rec.morawetz[key] for rec in records])
        value = _time_average(times, vals, T)
        sel = times <= T + 1e-9 * max(1.0, T)
        i = int(np.argmin(vals[sel]))
        out.append(EvacuationPoint(T, R, value, float(times[sel][i]), float(vals[sel][i])))
    return out


def trapping_values(trajectory_log, s_c: float) -> np.ndarray:
    records = trajectory_log.records
    alpha = (1 - s_c) / s_c
    m0 = records[0].mass
    return np.array([math.sqrt(m0) ** alpha * rec.grad_norm for rec in records])


def h1_trapping_monitor(trajectory_log, thresholds) -> bool:
    """True iff ``||u0||^((1-s_c)/s_c) ||grad u(t)||`` stays below ``MK`` at every logged time."""
    vals = trapping_values(trajectory_log, thresholds.s_c)
    return bool(np.all(vals < thresholds.MK))


def first_trapping_violation(trajectory_log, thresholds):
    vals = trapping_values(trajectory_log, thresholds.s_c)
    bad = np.nonzero(vals >= thresholds.MK)[0]
    return None if bad.size == 0 else trajectory_log.records[bad[0]].t


# -- per-snapshot records ------------------------------------------------------------

@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    kinetic: float
    potential: float
    Z: float
    dZdt_rhs: float
    grad_norm: float
    mass_in_ball: dict = dc_field(default_factory=dict)
    morawetz: dict = dc_field(default_factory=dict)
    dZdt_fd: float = math.nan


def snapshot(t: float, field: ComplexField, params: ModelParams, pweight: np.ndarray,
             vweight: VirialWeight | None, radii: Iterable[float] = ()) -> DiagnosticsRecord:
    """All scalar observables of one state, sharing a single set of gradients."""
    grid = field.grid
    u = field.values
    grads = gradient(u, grid)
    dens = np.abs(u) ** 2
    m = integrate(dens, grid)
    kin = integrate(sum(np.abs(d) ** 2 for d in grads), grid)
    pdens = pweight * np.abs(u) ** (params.p + 1)
    pot = integrate(pdens, grid)
    if vweight is not None:
        Z = virial_Z(field, vweight, grads)
        rhs = virial_rhs(field, vweight, params, pweight, grads)
    else:
        Z = rhs = math.nan
    r = radial_distance_field(grid)
    mib, mor = {}, {}
    for R in radii:
        inside = r <= R
        mib[R] = integrate(np.where(inside, dens, 0.0), grid)
        mor[R] = integrate(np.where(inside, pdens, 0.0), grid)
    return DiagnosticsRecord(t, m, 0.5 * kin - pot / (params.p + 1), kin, pot, Z, rhs,
                             math.sqrt(kin), mib, mor)


CSV_COLUMNS = ["t", "mass", "energy", "kinetic", "potential", "Z", "dZdt_rhs", "grad_norm"]


def _fmt(v: float) -> str:
    return format(v, ".17g")


def write_diagnostics_csv(path, records: Sequence[DiagnosticsRecord]) -> None:
    """Write records with 17 significant digits (round-trips doubles exactly)."""
    radii = sorted(records[0].mass_in_ball) if records else []
    header = (CSV_COLUMNS + [f"mass_in_ball@{R:g}" for R in radii]
              + [f"morawetz@{R:g}" for R in radii])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for rec in records:
            row = [_fmt(getattr(rec, c)) for c in CSV_COLUMNS]
            row += [_fmt(rec.mass_in_ball[R]) for R in radii]
            row += [_fmt(rec.morawetz[R]) for R in radii]
            w.writerow(row)


def read_diagnostics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]
