"""Free Schrödinger flow ``e^{it Laplacian}`` and its dispersive decay."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, HorizonError
from .grid import ComplexField, GridSpec, fft, ifft, integrate, k_squared

__all__ = [
    "free_evolve",
    "free_multiplier",
    "boundary_mass_fraction",
    "check_horizon",
    "dispersive_decay_fit",
    "DEFAULT_WRAP_TOL",
]

#: Default admissible fraction of the mass in the outer shell of the box.
DEFAULT_WRAP_TOL = 1e-8
SHELL_FRACTION = 0.1


def free_multiplier(grid: GridSpec, t: float) -> np.ndarray:
    """Fourier symbol ``exp(-i |k|^2 t)``."""
    return np.exp(-1j * float(t) * k_squared(grid))


def free_evolve(field: ComplexField, t: float) -> ComplexField:
    """Exact free evolution ``u_hat_k -> exp(-i|k|^2 t) u_hat_k``."""
    if t == 0:
        return field.copy()
    uh = fft(field.values)
    uh *= free_multiplier(field.grid, t)
    return field.with_values(ifft(uh))


@lru_cache(maxsize=16)
def _shell_mask(grid: GridSpec) -> np.ndarray:
    inner = (1.0 - SHELL_FRACTION) * grid.half_width
    mask = np.zeros(grid.shape, dtype=bool)
    for x in grid.coordinates():
        mask = mask | (np.abs(x) > inner)
    mask.flags.writeable = False
    return mask


def boundary_mass_fraction(field: ComplexField) -> float:
    """Fraction of the mass in the outer 10% shell (``max_j |x_j| > 0.9 L``)."""
    dens = np.abs(field.values) ** 2
    total = float(dens.sum())
    if total == 0.0:
        return 0.0
    return float(dens[_shell_mask(field.grid)].sum()) / total


def check_horizon(field: ComplexField, tol: float | None = DEFAULT_WRAP_TOL, t=None):
    """Raise :class:`HorizonError` once the shell mass exceeds ``tol``."""
    if tol is None:
        return
    frac = boundary_mass_fraction(field)
    if frac > tol:
        where = "" if t is None else f" at t={t:g}"
        raise HorizonError(
            f"boundary mass fraction {frac:.3e} exceeds {tol:.1e}{where}")


def dispersive_decay_fit(u0: ComplexField, t_list, wrap_tol: float | None = DEFAULT_WRAP_TOL):
    """Least-squares slope of ``log ||e^{it Laplacian} u0||_inf`` against ``log t``.

    Every requested time is first checked against the wraparound guard, so a
    horizon error is raised before any periodic image can bias the fit.

    Returns ``(slope, sup_norms)``.
    """
    t = np.asarray(t_list, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ConfigurationError("need at least two times for a decay fit")
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ConfigurationError("times must be positive and increasing")
    if integrate(np.abs(u0.values) ** 2, u0.grid) == 0:
        raise ConfigurationError("cannot fit the decay of the zero field")
    sup = np.empty_like(t)
    for i, ti in enumerate(t):
        u = free_evolve(u0, ti)
        check_horizon(u, wrap_tol, ti)
        sup[i] = np.abs(u.values).max()
        del u
    slope, _ = np.polyfit(np.log(t), np.log(sup), 1)
    return float(slope), sup
