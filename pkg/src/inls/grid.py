"""Periodic spectral grids, complex fields and spectral calculus.

Conventions (fixed so that output files are portable):

* nodes along each axis are ``x_j = -L + (j + offset/2) h`` with ``h = 2L/M``;
* arrays have shape ``(M,) * dim`` and are flattened in row-major (C) order;
* wavevectors follow the standard FFT ordering, ``k = 2*pi*fftfreq(M, h)``,
  i.e. multiples of ``pi/L``.

Transforms use :mod:`scipy.fft`. Cached arrays returned by the helpers below
are marked read-only so they can be shared between threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError

__all__ = [
    "GridSpec",
    "ComplexField",
    "FrequencyMultiplier",
    "make_grid",
    "radial_distance_field",
    "gradient",
    "laplacian",
    "laplacian_multiplier",
    "integrate",
    "fft",
    "ifft",
]


@dataclass(frozen=True)
class GridSpec:
    dim: int
    points: int
    half_width: float
    offset: bool = True

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"dim must be 1, 2 or 3, got {self.dim}")
        m = int(self.points)
        if m != self.points or m < 8 or m & (m - 1):
            raise ConfigurationError(
                f"points must be a power of two >= 8, got {self.points}")
        if not (np.isfinite(self.half_width) and self.half_width > 0):
            raise ConfigurationError(
                f"half_width must be positive, got {self.half_width}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def nodes_1d(self) -> np.ndarray:
        return _nodes_1d(self)

    def wavenumbers_1d(self) -> np.ndarray:
        return _wavenumbers_1d(self)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis."""
        return _coordinates(self)

    def wavevectors(self) -> tuple[np.ndarray, ...]:
        """Broadcastable wavevector arrays, one per axis."""
        return _wavevectors(self)

    def zeros(self) -> "ComplexField":
        return ComplexField(self, np.zeros(self.shape, dtype=complex))

    def field(self, values) -> "ComplexField":
        return ComplexField(self, values)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@lru_cache(maxsize=64)
def _nodes_1d(grid: GridSpec) -> np.ndarray:
    j = np.arange(grid.points)
    shift = 0.5 if grid.offset else 0.0
    return _readonly(-grid.half_width + (j + shift) * grid.spacing)


@lru_cache(maxsize=64)
def _wavenumbers_1d(grid: GridSpec) -> np.ndarray:
    return _readonly(2.0 * np.pi * sfft.fftfreq(grid.points, d=grid.spacing))


def _axis_view(v: np.ndarray, axis: int, dim: int) -> np.ndarray:
    shape = [1] * dim
    shape[axis] = v.size
    return v.reshape(shape)


@lru_cache(maxsize=64)
def _coordinates(grid: GridSpec):
    x = grid.nodes_1d()
    return tuple(_axis_view(x, ax, grid.dim) for ax in range(grid.dim))


@lru_cache(maxsize=64)
def _wavevectors(grid: GridSpec):
    k = grid.wavenumbers_1d()
    return tuple(_axis_view(k, ax, grid.dim) for ax in range(grid.dim))


@lru_cache(maxsize=16)
def _k_squared(grid: GridSpec) -> np.ndarray:
    k2 = np.zeros(grid.shape)
    for k in grid.wavevectors():
        k2 = k2 + k * k
    return _readonly(k2)


@lru_cache(maxsize=16)
def _radius(grid: GridSpec) -> np.ndarray:
    r2 = np.zeros(grid.shape)
    for x in grid.coordinates():
        r2 = r2 + x * x
    return _readonly(np.sqrt(r2))


def make_grid(dim: int, points: int, half_width: float, offset: bool = True) -> GridSpec:
    """Build a validated :class:`GridSpec`."""
    return GridSpec(int(dim), points, float(half_width), bool(offset))


class ComplexField:
    """Complex samples of a wavefunction on a :class:`GridSpec`.

    ``values`` is stored with shape ``grid.shape``; ``flat()`` gives the
    row-major vector of length ``M**N``.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values, check: bool = True):
        v = np.asarray(values, dtype=complex)
        if v.shape != grid.shape:
            if v.size != grid.size:
                raise ConfigurationError(
                    f"field has {v.size} values, grid needs {grid.size}")
            v = v.reshape(grid.shape)
        if check and not np.all(np.isfinite(v)):
            raise ConfigurationError("field contains non-finite values")
        self.grid = grid
        self.values = v

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy(), check=False)

    def with_values(self, values) -> "ComplexField":
        return ComplexField(self.grid, values, check=False)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"ComplexField({self.grid!r})"


@dataclass(frozen=True, eq=False)
class FrequencyMultiplier:
    grid: GridSpec
    values: np.ndarray

    def apply(self, field: ComplexField) -> ComplexField:
        if field.grid != self.grid:
            raise ConfigurationError("multiplier and field live on different grids")
        return field.with_values(ifft(self.values * fft(field.values)))


def fft(a: np.ndarray) -> np.ndarray:
    return sfft.fftn(a, workers=-1)


def ifft(a: np.ndarray) -> np.ndarray:
    return sfft.ifftn(a, workers=-1)


def radial_distance_field(grid: GridSpec) -> np.ndarray:
    """|x| at every node (read-only, shape ``grid.shape``)."""
    return _radius(grid)


def laplacian_multiplier(grid: GridSpec) -> FrequencyMultiplier:
    return FrequencyMultiplier(grid, _readonly(-_k_squared(grid).astype(complex)))


def k_squared(grid: GridSpec) -> np.ndarray:
    return _k_squared(grid)


def gradient(field: ComplexField | np.ndarray, grid: GridSpec | None = None):
    """Spectral gradient: one array per axis, ``ifft(i k_j fft(u))``.

    Accepts a :class:`ComplexField` (returns fields) or a raw array together
    with ``grid`` (returns arrays).
    """
    if isinstance(field, ComplexField):
        return [field.with_values(d) for d in gradient(field.values, field.grid)]
    uh = fft(field)
    return [ifft(1j * k * uh) for k in grid.wavevectors()]


def laplacian(field: ComplexField) -> ComplexField:
    return field.with_values(ifft(-_k_squared(field.grid) * fft(field.values)))


def integrate(values: np.ndarray, grid: GridSpec) -> float:
    """Riemann sum times the cell volume (spectrally accurate when periodic)."""
    v = np.asarray(values)
    if v.size != grid.size:
        raise ConfigurationError(
            f"array has {v.size} entries, grid has {grid.size}")
    total = np.sum(v) * grid.cell_volume
    return complex(total) if np.iscomplexobj(v) else float(total)


def spectral_l2_squared(field: ComplexField) -> float:
    """Discrete Parseval form of ``integrate(|u|^2)``."""
    uh = fft(field.values)
    return float(np.sum(np.abs(uh) ** 2)) * field.grid.cell_volume / field.grid.size


def kinetic_spectral(field: ComplexField) -> float:
    """``integrate(|grad u|^2)`` evaluated in frequency space."""
    uh = fft(field.values)
    return (float(np.sum(_k_squared(field.grid) * np.abs(uh) ** 2))
            * field.grid.cell_volume / field.grid.size)
