"""Radial ground state of ``Delta Q - Q + |x|^-b Q^p = 0`` by shooting on ``Q(0)``.

The radial ODE ``Q'' + (N-1)/r Q' - Q + r^-b Q^p = 0`` is integrated with a
fixed-step RK4 kernel in two pieces: in ``s = log r`` from ``r0`` to ``r = 1``
(where ``r^(2-b)`` is smooth in ``s``) and uniformly in ``r`` beyond. A trial
value of ``Q(0)`` is "too large" when the trajectory crosses zero and "too
small" when it turns upward while still positive; bisection brackets the
decaying solution. Past the radius where the two bracketing trajectories
separate, the profile continues with the decaying linear solution
``C r^-nu K_nu(r)``, ``nu = N/2 - 1``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from numba import njit
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.integrate import simpson
from scipy.special import gamma, kv, kvp

from .errors import ParameterError, RegimeError, SolverError
from .grid import ComplexField, GridSpec, radial_distance_field
from .model import ModelParams

__all__ = [
    "GroundStateProfile", "Thresholds", "solve_ground_state", "thresholds",
    "classify_data", "pohozaev_residual", "sphere_area", "sample_on_grid",
    "write_profile", "read_profile", "norms_of_scaled",
]

log = logging.getLogger(__name__)

TOO_LARGE = 1     # trajectory crossed zero
TOO_SMALL = -1    # trajectory turned upward while positive
CLASSIFY_MARGIN = 1e-9


def sphere_area(N: int) -> float:
    """Area of the unit sphere in R^N (2 for N=1)."""
    return 2.0 * math.pi ** (N / 2) / gamma(N / 2)


# -- shooting kernel -----------------------------------------------------------------

@njit(cache=True)
def _force(q, r_pow, p):
    # r^-b |q|^(p-1) q, with r_pow holding the matching power of r
    aq = abs(q)
    return r_pow * aq ** (p - 1.0) * q


@njit(cache=True)
def _log_rhs(s, q, P, N, p, b):
    e = math.exp(s)
    return P, (2.0 - N) * P + e * e * q - _force(q, math.exp((2.0 - b) * s), p)


@njit(cache=True)
def _lin_rhs(r, q, dq, N, p, b):
    return dq, -(N - 1.0) / r * dq + q - _force(q, r ** (-b), p)


@njit(cache=True)
def _verdict(q, dq):
    if q < 0.0:
        return 1
    if dq > 0.0:
        return -1
    return 0


@njit(cache=True)
def _shoot(q0, N, p, b, r0, n_log, r_split, n_lin, r_max, Q_out, D_out):
    """Integrate from ``r0`` and stop at the first classification.

    ``Q_out``/``D_out`` receive ``Q`` and ``dQ/dr`` at the nodes. Returns
    ``(verdict, last_index)``; verdict 0 means undecided at ``r_max``.
    """
    s0 = math.log(r0)
    ds = (math.log(r_split) - s0) / n_log
    q = q0 + q0 / (2.0 * N) * r0 * r0 - q0 ** p / ((2.0 - b) * (N - b)) * r0 ** (2.0 - b)
    dq = q0 / N * r0 - q0 ** p / (N - b) * r0 ** (1.0 - b)
    P = r0 * dq
    Q_out[0] = q
    D_out[0] = dq
    for i in range(n_log):
        s = s0 + i * ds
        k1q, k1p = _log_rhs(s, q, P, N, p, b)
        k2q, k2p = _log_rhs(s + 0.5 * ds, q + 0.5 * ds * k1q, P + 0.5 * ds * k1p, N, p, b)
        k3q, k3p = _log_rhs(s + 0.5 * ds, q + 0.5 * ds * k2q, P + 0.5 * ds * k2p, N, p, b)
        k4q, k4p = _log_rhs(s + ds, q + ds * k3q, P + ds * k3p, N, p, b)
        q += ds / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        P += ds / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        dq = P / math.exp(s + ds)
        Q_out[i + 1] = q
        D_out[i + 1] = dq
        v = _verdict(q, dq)
        if v != 0:
            return v, i + 1
    h = (r_max - r_split) / n_lin
    for j in range(n_lin):
        r = r_split + j * h
        k1q, k1p = _lin_rhs(r, q, dq, N, p, b)
        k2q, k2p = _lin_rhs(r + 0.5 * h, q + 0.5 * h * k1q, dq + 0.5 * h * k1p, N, p, b)
        k3q, k3p = _lin_rhs(r + 0.5 * h, q + 0.5 * h * k2q, dq + 0.5 * h * k2p, N, p, b)
        k4q, k4p = _lin_rhs(r + h, q + h * k3q, dq + h * k3p, N, p, b)
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        dq += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        k = n_log + 1 + j
        Q_out[k] = q
        D_out[k] = dq
        v = _verdict(q, dq)
        if v != 0:
            return v, k
    # undecided: the sign of the growing mode decides
    if q + dq > 0.0:
        return -1, n_log + n_lin
    return 1, n_log + n_lin


@dataclass(frozen=True)
class _Mesh:
    N: int
    p: float
    b: float
    r0: float
    n_log: int
    r_split: float
    n_lin: int
    r_max: float

    @property
    def size(self) -> int:
        return self.n_log + self.n_lin + 1

    def nodes(self) -> np.ndarray:
        s = np.linspace(math.log(self.r0), math.log(self.r_split), self.n_log + 1)
        r_lin = np.linspace(self.r_split, self.r_max, self.n_lin + 1)[1:]
        return np.concatenate([np.exp(s), r_lin])

    def shoot(self, q0: float):
        Q = np.full(self.size, np.nan)
        D = np.full(self.size, np.nan)
        v, last = _shoot(float(q0), float(self.N), float(self.p), float(self.b), self.r0,
                         self.n_log, self.r_split, self.n_lin, self.r_max, Q, D)
        return int(v), int(last), Q, D


# -- profile ---------------------------------------------------------------------

@dataclass
class GroundStateProfile:
    """Radial samples of the ground state with its norms.

    ``mass``, ``kinetic`` and ``potential`` are the integrals of ``Q^2``,
    ``|grad Q|^2`` and ``|x|^-b Q^(p+1)`` over R^N.
    """

    params: ModelParams
    r: np.ndarray
    Q: np.ndarray
    Q0: float
    mass: float
    kinetic: float
    potential: float
    residual: float
    dQ: np.ndarray | None = None
    junction: float = math.nan
    tail_coef: float = math.nan
    trace: list = dc_field(default_factory=list, repr=False)

    @property
    def norms(self) -> dict:
        return {"mass": self.mass, "kinetic": self.kinetic, "potential": self.potential}

    @property
    def energy(self) -> float:
        return 0.5 * self.kinetic - self.potential / (self.params.p + 1)

    def __call__(self, r) -> np.ndarray:
        """Evaluate ``Q`` at arbitrary radii (expansion near 0, decaying tail far out)."""
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        N, p, b = self.params.N, self.params.p, self.params.b
        q0 = self.Q0
        lo = r < self.r[0]
        hi = r > self.r[-1]
        mid = ~(lo | hi)
        out[lo] = (q0 + q0 / (2 * N) * r[lo] ** 2
                   - q0 ** p / ((2 - b) * (N - b)) * r[lo] ** (2 - b))
        if np.isfinite(self.tail_coef):
            out[hi] = _tail(self.tail_coef, N, r[hi])
        else:
            out[hi] = 0.0
        out[mid] = self._interp()(r[mid])
        return out

    def _interp(self):
        if getattr(self, "_spline", None) is None:
            if self.dQ is not None:
                self._spline = CubicHermiteSpline(self.r, self.Q, self.dQ)
            else:
                self._spline = CubicSpline(self.r, self.Q)
        return self._spline

    def header(self) -> dict:
        th = None
        try:
            th = thresholds(self)
        except RegimeError:
            pass
        return {
            "N": self.params.N, "p": self.params.p, "b": self.params.b,
            "s_c": self.params.s_c, "Q0": self.Q0, "mass": self.mass,
            "kinetic": self.kinetic, "potential": self.potential,
            "ME": th.ME if th else None, "MK": th.MK if th else None,
            "residual": self.residual,
        }


def _tail(C, N, r):
    nu = N / 2.0 - 1.0
    return C * r ** (-nu) * kv(nu, r)


def _tail_deriv(C, N, r):
    nu = N / 2.0 - 1.0
    return C * (-nu * r ** (-nu - 1) * kv(nu, r) + r ** (-nu) * kvp(nu, r))


def _bracket(mesh: _Mesh, q_min: float, q_max: float, ladder: int, trace: list):
    prev = None
    for q in np.geomspace(q_min, q_max, ladder):
        v = mesh.shoot(q)[0]
        trace.append((float(q), v))
        if v == TOO_LARGE:
            if prev is None:
                raise SolverError(f"Q(0)={q_min:g} already crosses zero; lower q_min")
            return prev, float(q)
        prev = float(q)
    raise SolverError(f"no bracket for Q(0) in [{q_min:g}, {q_max:g}]")


def _rk4_defect(mesh: _Mesh, r, Q, D, stop: int) -> float:
    """Largest one-step defect of the stored nodes, per unit length.

    Each node is re-propagated with two RK4 half steps; the Richardson estimate
    ``(16/15)|y_(n+1) - y_half|/h`` bounds the local consistency error.
    """
    N, p, b = mesh.N, mesh.p, mesh.b

    def f_log(s, q, P):
        e = np.exp(s)
        return P, (2 - N) * P + e * e * q - np.exp((2 - b) * s) * np.abs(q) ** (p - 1) * q

    def f_lin(r_, q, d):
        return d, -(N - 1) / r_ * d + q - r_ ** (-b) * np.abs(q) ** (p - 1) * q

    def rk4(f, t, y1, y2, h):
        a1, b1 = f(t, y1, y2)
        a2, b2 = f(t + h / 2, y1 + h / 2 * a1, y2 + h / 2 * b1)
        a3, b3 = f(t + h / 2, y1 + h / 2 * a2, y2 + h / 2 * b2)
        a4, b4 = f(t + h, y1 + h * a3, y2 + h * b3)
        return y1 + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4), y2 + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)

    worst = 0.0
    nl = min(mesh.n_log, stop)
    if nl > 0:
        s = np.log(r[: nl + 1])
        h = s[1] - s[0]
        P = r[: nl + 1] * D[: nl + 1]
        q, Pm = rk4(f_log, s[:-1], Q[:nl], P[:nl], h / 2)
        q, Pm = rk4(f_log, s[:-1] + h / 2, q, Pm, h / 2)
        err = np.maximum(np.abs(q - Q[1: nl + 1]), np.abs(Pm - P[1: nl + 1]) / r[1: nl + 1])
        worst = max(worst, float(np.max(err)) * 16 / 15 / h)
    if stop > mesh.n_log:
        i0 = mesh.n_log
        rr = r[i0: stop + 1]
        h = rr[1] - rr[0]
        q, d = rk4(f_lin, rr[:-1], Q[i0:stop], D[i0:stop], h / 2)
        q, d = rk4(f_lin, rr[:-1] + h / 2, q, d, h / 2)
        err = np.maximum(np.abs(q - Q[i0 + 1: stop + 1]), np.abs(d - D[i0 + 1: stop + 1]))
        worst = max(worst, float(np.max(err)) * 16 / 15 / h)
    return worst


def _radial_integrals(mesh: _Mesh, r, Q, D, q0: float):
    """Mass, kinetic and potential integrals over R^N (without the sphere area)."""
    N, p, b = mesh.N, mesh.p, mesh.b
    nl = mesh.n_log
    s = np.log(r[: nl + 1])
    # log part: dr r^(N-1) = e^(N s) ds
    wN = np.exp(N * s)
    m = simpson(Q[: nl + 1] ** 2 * wN, x=s)
    k = simpson(D[: nl + 1] ** 2 * wN, x=s)
    pot = simpson(r[: nl + 1] ** (-b) * np.abs(Q[: nl + 1]) ** (p + 1) * wN, x=s)
    rr = r[nl:]
    wl = rr ** (N - 1)
    m += simpson(Q[nl:] ** 2 * wl, x=rr)
    k += simpson(D[nl:] ** 2 * wl, x=rr)
    pot += simpson(rr ** (-b) * np.abs(Q[nl:]) ** (p + 1) * wl, x=rr)
    # [0, r0]: Q ~ q0 and |Q'| grows like r^(1-b)
    r0 = mesh.r0
    m += q0 ** 2 * r0 ** N / N
    k += D[0] ** 2 * r0 ** N / (N + 2 - 2 * b)
    pot += q0 ** (p + 1) * r0 ** (N - b) / (N - b)
    return m, k, pot


def solve_ground_state(params: ModelParams, tol: float = 1e-8, *, r_max: float = 30.0,
                       h: float = 2.0 ** -9, r0: float = 1e-6, q_range=(0.1, 1e4),
                       ladder: int = 40, max_iter: int = 200,
                       sep_tol: float = 1e-10) -> GroundStateProfile:
    """Shoot on ``Q(0)`` until the decaying ground state is bracketed.

    ``h`` is the radial step (the log-variable step below ``r = 1`` is the same).
    The returned profile has ``residual < tol`` or :class:`SolverError` is raised.
    """
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    if not (r0 > 0 and r_max > 2 and h > 0):
        raise ParameterError("need r0 > 0, r_max > 2 and h > 0")
    N, p, b = params.N, float(params.p), float(params.b)
    n_log = max(8, int(math.ceil(-math.log(r0) / h)))
    n_lin = max(8, int(math.ceil((r_max - 1.0) / h)))
    n_log += n_log % 2   # even counts for composite Simpson
    n_lin += n_lin % 2
    mesh = _Mesh(N, p, b, r0, n_log, 1.0, n_lin, float(r_max))

    trace: list = []
    lo, hi = _bracket(mesh, q_range[0], q_range[1], ladder, trace)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        v = mesh.shoot(mid)[0]
        trace.append((mid, v))
        if v == TOO_LARGE:
            hi = mid
        else:
            lo = mid
    _, stop_lo, Q_lo, D_lo = mesh.shoot(lo)
    _, stop_hi, Q_hi, D_hi = mesh.shoot(hi)
    r = mesh.nodes()
    stop = min(stop_lo, stop_hi)
    gap = np.abs(Q_hi[: stop + 1] - Q_lo[: stop + 1])
    bad = np.nonzero(gap > sep_tol * max(lo, 1.0))[0]
    jm = (int(bad[0]) - 1) if bad.size else stop
    Q = 0.5 * (Q_lo + Q_hi)
    D = 0.5 * (D_lo + D_hi)
    # the trustworthy part must end with a decreasing positive profile
    while jm > 0 and not (Q[jm] > 0 and D[jm] < 0):
        jm -= 1
    if jm <= mesh.n_log:
        raise SolverError("bracketing trajectories separate before r = 1")

    residual = _rk4_defect(mesh, r, Q, D, jm)
    rm = r[jm]
    C = Q[jm] / _tail(1.0, N, rm)
    slope_jump = abs(_tail_deriv(C, N, rm) - D[jm])
    tail_r = r[jm + 1:]
    Q[jm + 1:] = _tail(C, N, tail_r)
    D[jm + 1:] = _tail_deriv(C, N, tail_r)
    tail_defect = float(np.max(tail_r ** (-b) * Q[jm + 1:] ** p)) if tail_r.size else 0.0
    residual = max(residual, tail_defect, slope_jump)

    if not (np.all(Q > 0) and np.all(np.diff(Q) < 0)):
        raise SolverError("converged profile is not positive and decreasing")
    if residual >= tol:
        raise SolverError(f"ODE residual {residual:.3e} exceeds tol={tol:g}; refine h")

    m, k, pot = _radial_integrals(mesh, r, Q, D, lo)
    area = sphere_area(N)
    q0 = 0.5 * (lo + hi)
    log.debug("ground state N=%s p=%s b=%s: Q0=%.15g, junction r=%.2f, residual %.2e",
              N, p, b, q0, rm, residual)
    return GroundStateProfile(params, r, Q, q0, area * m, area * k, area * pot, residual,
                              dQ=D, junction=float(rm), tail_coef=float(C), trace=trace)


def pohozaev_residual(profile: GroundStateProfile) -> float:
    """Relative defect of ``int|grad Q|^2 + int Q^2 = int |x|^-b Q^(p+1)``."""
    return abs(profile.kinetic + profile.mass - profile.potential) / abs(profile.potential)


def norms_of_scaled(profile: GroundStateProfile, c: float) -> dict:
    """Mass, kinetic and potential integrals of ``c Q``."""
    p = profile.params.p
    return {"mass": c * c * profile.mass, "kinetic": c * c * profile.kinetic,
            "potential": abs(c) ** (p + 1) * profile.potential}


# -- thresholds and classification ------------------------------------------------------

@dataclass(frozen=True)
class Thresholds:
    s_c: float
    ME: float
    MK: float


def _exponent(s_c: float) -> float:
    if not 0 < s_c < 1:
        raise RegimeError(f"thresholds need 0 < s_c < 1, got s_c={s_c:.6g}")
    return (1 - s_c) / s_c


def thresholds(profile: GroundStateProfile) -> Thresholds:
    s_c = profile.params.s_c
    alpha = _exponent(s_c)
    ME = profile.mass ** alpha * profile.energy
    MK = math.sqrt(profile.mass) ** alpha * math.sqrt(profile.kinetic)
    return Thresholds(s_c, ME, MK)


def _data_functionals(u0, params: ModelParams, weight=None):
    from . import diagnostics as dg

    if isinstance(u0, GroundStateProfile):
        return u0.mass, u0.energy, math.sqrt(u0.kinetic)
    M = dg.mass(u0)
    K = dg.kinetic(u0)
    P = dg.potential(u0, weight, params)
    return M, 0.5 * K - P / (params.p + 1), math.sqrt(K)


def classify_data(u0, profile: GroundStateProfile, weight=None,
                  margin: float = CLASSIFY_MARGIN) -> str:
    """``below_threshold``, ``above_threshold`` or ``at_boundary`` for ``u0``.

    ``u0`` is a :class:`ComplexField` (or a profile, compared via its norms).
    Values within the relative ``margin`` of a threshold count as on the boundary.
    """
    th = thresholds(profile)
    alpha = _exponent(th.s_c)
    M, E, G = _data_functionals(u0, profile.params, weight)
    lhs_me = M ** alpha * E
    lhs_mk = math.sqrt(M) ** alpha * G
    rel = [(lhs_me - th.ME) / abs(th.ME), (lhs_mk - th.MK) / abs(th.MK)]
    if all(x < -margin for x in rel):
        return "below_threshold"
    if any(x > margin for x in rel):
        return "above_threshold"
    return "at_boundary"


# -- grids and files -----------------------------------------------------------------

def sample_on_grid(profile: GroundStateProfile, grid: GridSpec, scale: float = 1.0,
                   center=None) -> ComplexField:
    """``scale * Q(|x - center|)`` on ``grid``."""
    if grid.dim != profile.params.N:
        raise ParameterError(f"grid dim {grid.dim} != N={profile.params.N}")
    if center is None:
        r = radial_distance_field(grid)
    else:
        c = np.asarray(center, dtype=float)
        r = np.sqrt(sum((x - ci) ** 2 for x, ci in zip(grid.coordinates(), c)))
    return ComplexField(grid, scale * profile(r))


def write_profile(profile: GroundStateProfile, path) -> Path:
    """CSV ``r,Q`` preceded by a ``# {json}`` header line, plus a ``.json`` sidecar."""
    path = Path(path)
    head = profile.header()
    with path.open("w") as fh:
        fh.write("# " + json.dumps(head) + "\n")
        fh.write("r,Q\n")
        for ri, qi in zip(profile.r, profile.Q):
            fh.write(f"{ri:.17g},{qi:.17g}\n")
    path.with_suffix(".json").write_text(json.dumps(head, indent=2) + "\n")
    return path


def read_profile(path) -> GroundStateProfile:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ParameterError(f"{path} has no JSON header line")
        head = json.loads(first[1:])
        data = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
    N, p, b = int(head["N"]), float(head["p"]), float(head["b"])
    try:
        params = ModelParams(N, p, b)
    except ParameterError:
        params = ModelParams(N, p, b, validation=True)
    return GroundStateProfile(params, data[:, 0], data[:, 1], head["Q0"], head["mass"],
                              head["kinetic"], head["potential"], head["residual"])
