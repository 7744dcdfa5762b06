"""Model parameters (N, p, b) and the inhomogeneous weight |x|^-b."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ParameterError
from .grid import GridSpec, radial_distance_field

__all__ = ["ModelParams", "PotentialWeight", "critical_index", "potential_weight"]


def critical_index(params: "ModelParams | None" = None, *, N=None, p=None, b=None) -> float:
    """Scaling-critical Sobolev index ``s_c = N/2 - (2 - b)/(p - 1)``."""
    if params is not None:
        N, p, b = params.N, params.p, params.b
    if p is None or p <= 1:
        raise ParameterError(f"critical index needs p > 1, got p={p}")
    return N / 2.0 - (2.0 - b) / (p - 1.0)


@dataclass(frozen=True)
class ModelParams:
    """Dimension ``N``, power ``p`` and inhomogeneity ``b``.

    By default the intercritical range studied for scattering is enforced:
    ``N >= 3``, ``0 < b < min(N/2, 2)`` and ``1 + (4-2b)/N < p < 1 + (4-2b)/(N-2)``.
    ``validation=True`` lifts that gate (only ``p > 1`` and ``0 <= b < min(N, 2)``
    remain) so that low-dimensional closed-form cases can be used as oracles.
    """

    N: int
    p: float
    b: float
    validation: bool = False

    def __post_init__(self):
        N, p, b = self.N, self.p, self.b
        if int(N) != N or N < 1:
            raise ParameterError(f"N must be a positive integer, got {N}")
        if not p > 1:
            raise ParameterError(f"p must exceed 1, got {p}")
        if self.validation:
            if not (0 <= b < min(N, 2)):
                raise ParameterError(f"b must lie in [0, min(N, 2)), got {b}")
            return
        if N < 3:
            raise ParameterError(
                f"N={N} is outside the scattering regime; pass validation=True")
        if not (0 < b < min(N / 2, 2)):
            raise ParameterError(f"b={b} violates 0 < b < min(N/2, 2)")
        lo, hi = 1 + (4 - 2 * b) / N, 1 + (4 - 2 * b) / (N - 2)
        if not (lo < p < hi):
            raise ParameterError(f"p={p} violates {lo:.6g} < p < {hi:.6g}")

    @property
    def s_c(self) -> float:
        return critical_index(self)

    @property
    def in_intercritical_regime(self) -> bool:
        try:
            ModelParams(self.N, self.p, self.b)
        except ParameterError:
            return False
        return True

    @property
    def scaling_exponent(self) -> float:
        """Amplitude exponent ``(2 - b)/(p - 1)`` of the scaling symmetry."""
        return (2.0 - self.b) / (self.p - 1.0)


@dataclass(frozen=True, eq=False)
class PotentialWeight:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ConfigurationError("weight shape does not match its grid")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError(
                "weight |x|^-b is singular on this grid; use an offset grid")


def potential_weight(grid: GridSpec, b: float, coupling: float = 1.0) -> PotentialWeight:
    """``coupling * |x|^-b`` on the nodes; ``coupling=0`` switches the term off."""
    if b == 0:
        w = np.ones(grid.shape)
    else:
        r = radial_distance_field(grid)
        with np.errstate(divide="ignore"):
            w = r ** (-b)
    w = w * coupling
    w.flags.writeable = False
    return PotentialWeight(grid, w)
