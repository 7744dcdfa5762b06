"""Time integration of ``i u_t + Laplacian u + |x|^-b |u|^(p-1) u = 0`` on a periodic grid.

The production integrator is Strang splitting of the two exactly solvable
sub-flows (free flow in Fourier space, pointwise phase rotation for the
nonlinearity). A classical explicit RK4 method-of-lines step serves as an
independent reference.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .diagnostics import build_virial_weight, snapshot, virial_Z
from .errors import (ConfigurationError, NumericalOverflowError,
                     OracleStabilityError, ParameterError)
from .grid import ComplexField, GridSpec, fft, ifft, k_squared, make_grid
from .linear import DEFAULT_WRAP_TOL, boundary_mass_fraction, free_multiplier
from .model import ModelParams, PotentialWeight, critical_index, potential_weight

__all__ = [
    "critical_index", "nonlinear_phase_step", "strang_step", "rk4_reference_step",
    "rk4_stable_dt", "scaling_transform", "evolve", "Monitors", "TrajectoryLog",
    "COMPLETED", "BLOWUP", "HORIZON",
]

log = logging.getLogger(__name__)

COMPLETED = "completed"
BLOWUP = "blowup_detected"
HORIZON = "horizon_exceeded"


def _check_grid(field: ComplexField, params: ModelParams, weight: PotentialWeight):
    if field.grid.dim != params.N:
        raise ConfigurationError(f"grid dimension {field.grid.dim} != N={params.N}")
    if weight.grid != field.grid:
        raise ConfigurationError("potential weight lives on a different grid")


def _phase_rotate(u: np.ndarray, w: np.ndarray, p: float, dt: float) -> np.ndarray:
    amp = np.abs(u)
    if p == 3:
        amp *= amp
    else:
        amp **= p - 1
    amp *= w
    amp *= dt
    return u * np.exp(1j * amp)


def nonlinear_phase_step(field: ComplexField, weight: PotentialWeight, params: ModelParams,
                         dt: float) -> ComplexField:
    """Exact flow of ``i u_t = -|x|^-b |u|^(p-1) u``: ``u -> u exp(i dt |x|^-b |u|^(p-1))``."""
    _check_grid(field, params, weight)
    if dt == 0:
        return field.copy()
    return field.with_values(_phase_rotate(field.values, weight.values, params.p, dt))


def strang_step(field: ComplexField, weight: PotentialWeight, params: ModelParams,
                dt: float) -> ComplexField:
    """Half free flow, full nonlinear phase, half free flow."""
    _check_grid(field, params, weight)
    if dt == 0:
        return field.copy()
    half = free_multiplier(field.grid, dt / 2)
    u = ifft(half * fft(field.values))
    u = _phase_rotate(u, weight.values, params.p, dt)
    u = ifft(half * fft(u))
    if not np.all(np.isfinite(u)):
        raise NumericalOverflowError("non-finite values after a Strang step")
    return field.with_values(u)


def rk4_stable_dt(grid: GridSpec) -> float:
    """Largest RK4 step for the spectral Laplacian (imaginary-axis limit 2*sqrt(2))."""
    return 2.0 * math.sqrt(2.0) / float(k_squared(grid).max())


def _rhs(u: np.ndarray, k2: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    lap = ifft(-k2 * fft(u))
    return 1j * (lap + w * np.abs(u) ** (p - 1) * u)


def rk4_reference_step(field: ComplexField, weight: PotentialWeight, params: ModelParams,
                       dt: float) -> ComplexField:
    """One classical RK4 step of ``u_t = i(Laplacian u + |x|^-b |u|^(p-1) u)``.

    Stable for ``dt <= rk4_stable_dt(grid)`` (of order ``h^2/pi^2``).
    """
    _check_grid(field, params, weight)
    if dt == 0:
        return field.copy()
    k2 = k_squared(field.grid)
    w, p, u = weight.values, params.p, field.values
    k1 = _rhs(u, k2, w, p)
    k2_ = _rhs(u + 0.5 * dt * k1, k2, w, p)
    k3 = _rhs(u + 0.5 * dt * k2_, k2, w, p)
    k4 = _rhs(u + dt * k3, k2, w, p)
    out = u + (dt / 6.0) * (k1 + 2 * k2_ + 2 * k3 + k4)
    n0 = np.linalg.norm(u)
    n1 = np.linalg.norm(out)
    if not np.isfinite(n1) or (n0 > 0 and n1 > 10 * n0):
        raise OracleStabilityError(
            f"RK4 norm grew from {n0:.3e} to {n1:.3e} in one step (dt={dt:g})")
    return field.with_values(out)


def scaling_transform(field: ComplexField, params: ModelParams, lam: float) -> ComplexField:
    """``u_lam(x) = lam^((2-b)/(p-1)) u(lam x)`` on the grid of half-width ``L/lam``.

    Node ``j`` of the new grid sits at ``x_j/lam``, so the resampling is exact.
    """
    if not lam > 0:
        raise ParameterError(f"scaling factor must be positive, got {lam}")
    g = field.grid
    new = make_grid(g.dim, g.points, g.half_width / lam, g.offset)
    return ComplexField(new, lam ** params.scaling_exponent * field.values, check=False)


@dataclass
class Monitors:
    """What :func:`evolve` records and when it stops.

    ``radii``: ball radii for mass-in-ball and Morawetz columns;
    ``virial_R``: truncation radius of the virial weight (``None`` disables Z);
    ``virial_fd``: also evaluate Z one step before and after each logged step;
    ``blowup_factor``: stop when ``||grad u||`` exceeds this multiple of its initial value;
    ``wrap_tol``: admissible boundary-shell mass fraction (``None`` disables the guard);
    ``keep_fields``: store a copy of the state at each logged time.
    """

    radii: tuple = ()
    virial_R: float | None = None
    virial_fd: bool = False
    blowup_factor: float = 50.0
    wrap_tol: float | None = DEFAULT_WRAP_TOL
    keep_fields: bool = False


@dataclass
class TrajectoryLog:
    times: list = dc_field(default_factory=list)
    records: list = dc_field(default_factory=list)
    status: str = COMPLETED
    final: ComplexField | None = None
    fields: list = dc_field(default_factory=list)
    steps: int = 0
    dt: float = math.nan
    message: str = ""

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records])


class _Stepper:
    """Strang stepping with the trailing half free flow held back.

    Consecutive steps ``L/2 N L/2 L/2 N L/2`` are fused into ``L/2 N L N ... L/2``,
    halving the number of transforms; :meth:`state` closes the pending half step.
    """

    def __init__(self, u: np.ndarray, grid: GridSpec, w: np.ndarray, p: float, dt: float):
        self.grid, self.w, self.p, self.dt = grid, w, p, dt
        self.half = free_multiplier(grid, dt / 2)
        self.full = self.half * self.half
        self.u = u
        self.open = False  # True when a trailing half free step is pending

    def step(self):
        uh = fft(self.u)
        uh *= self.full if self.open else self.half
        self.u = _phase_rotate(ifft(uh), self.w, self.p, self.dt)
        self.open = True

    def state(self) -> np.ndarray:
        if self.open:
            uh = fft(self.u)
            uh *= self.half
            self.u = ifft(uh)
            self.open = False
        return self.u


def evolve(u0: ComplexField, params: ModelParams, dt: float, T: float, log_every: int = 1,
           monitors: Monitors | None = None, weight: PotentialWeight | None = None,
           observer=None) -> TrajectoryLog:
    """Strang-split evolution from ``u0`` up to time ``T`` with fixed step ``dt``.

    Diagnostics are recorded at ``t = 0`` and every ``log_every`` steps (and at
    the final step). The run stops early with status ``blowup_detected`` when
    the gradient norm exceeds ``blowup_factor`` times its initial value, or with
    ``horizon_exceeded`` when the wraparound guard trips; both are checked at
    logged times.

    ``observer(record, field)``, if given, is called at every logged time.
    """
    if not dt > 0 or not T > 0:
        raise ConfigurationError("dt and T must be positive")
    mon = monitors or Monitors()
    grid = u0.grid
    if weight is None:
        weight = potential_weight(grid, params.b)
    _check_grid(u0, params, weight)
    n_steps = int(round(T / dt))
    if not math.isclose(n_steps * dt, T, rel_tol=1e-9):
        raise ConfigurationError(f"T={T} is not a multiple of dt={dt}")
    log_every = max(1, int(log_every))
    vweight = build_virial_weight(grid, mon.virial_R) if mon.virial_R else None
    radii = tuple(float(R) for R in mon.radii)
    w = weight.values

    logged = set(range(0, n_steps + 1, log_every)) | {n_steps}
    fd_steps = set()
    if mon.virial_fd and vweight is not None:
        for n in logged:
            fd_steps.update((n - 1, n + 1))
    z_at = {}

    out = TrajectoryLog(dt=dt)
    stepper = _Stepper(u0.values.copy(), grid, w, params.p, dt)
    grad0 = None

    def record(n, u):
        rec = snapshot(n * dt, ComplexField(grid, u, check=False), params, w, vweight, radii)
        out.times.append(rec.t)
        out.records.append(rec)
        if mon.keep_fields:
            out.fields.append(ComplexField(grid, u.copy(), check=False))
        if observer is not None:
            observer(rec, ComplexField(grid, u, check=False))
        z_at[n] = rec.Z
        return rec

    for n in range(n_steps + 1):
        if n > 0:
            stepper.step()
        if n in logged or n in fd_steps:
            u = stepper.state()
            if not np.all(np.isfinite(u)):
                raise NumericalOverflowError(f"non-finite state at step {n}")
            if n in logged:
                rec = record(n, u)
                if grad0 is None:
                    grad0 = rec.grad_norm
                if grad0 > 0 and rec.grad_norm > mon.blowup_factor * grad0:
                    out.status = BLOWUP
                    out.message = (f"gradient norm grew by {rec.grad_norm / grad0:.1f}x "
                                   f"at t={rec.t:g}")
                    break
                if mon.wrap_tol is not None:
                    frac = boundary_mass_fraction(ComplexField(grid, u, check=False))
                    if frac > mon.wrap_tol:
                        out.status = HORIZON
                        out.message = f"boundary mass fraction {frac:.2e} at t={rec.t:g}"
                        break
            else:
                z_at[n] = virial_Z(ComplexField(grid, u, check=False), vweight)
    out.steps = n
    out.final = ComplexField(grid, stepper.state(), check=False)
    if fd_steps:
        for rec in out.records:
            n = int(round(rec.t / dt))
            if n - 1 in z_at and n + 1 in z_at:
                rec.dZdt_fd = (z_at[n + 1] - z_at[n - 1]) / (2 * dt)
    if out.status != COMPLETED:
        log.info("evolve stopped: %s (%s)", out.status, out.message)
    return out
