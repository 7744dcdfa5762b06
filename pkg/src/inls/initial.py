"""Initial data: Gaussians (centered, offset, boosted, chirped), scaled ground states, random fields."""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .grid import ComplexField, GridSpec, fft, ifft, k_squared

__all__ = ["gaussian", "scaled_ground_state", "band_limited_random", "spectral_resample",
           "free_gaussian_exact"]


def _shifted(grid: GridSpec, center):
    xs = grid.coordinates()
    if center is None:
        return xs
    c = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    return tuple(x - ci for x, ci in zip(xs, c))


def gaussian(grid: GridSpec, amplitude=1.0, width=1.0, center=None, velocity=None,
             focus_time=0.0) -> ComplexField:
    """``A exp(-|x-c|^2 / (2 z)) exp(i v.x / 2)`` with ``z = width^2 - 2i*focus_time``.

    A positive ``focus_time`` adds the inward chirp that the free flow undoes at
    that time, where the Gaussian has waist ``width``. ``velocity`` is the group
    velocity of the boost (phase ``exp(i v.x/2)``).
    """
    if not width > 0:
        raise ConfigurationError(f"width must be positive, got {width}")
    xs = _shifted(grid, center)
    r2 = sum(x * x for x in xs)
    z = width ** 2 - 2j * focus_time
    u = amplitude * np.exp(-r2 / (2 * z))
    if velocity is not None:
        v = np.broadcast_to(np.asarray(velocity, dtype=float), (grid.dim,))
        u = u * np.exp(0.5j * sum(vi * x for vi, x in zip(v, grid.coordinates())))
    return ComplexField(grid, u)


def free_gaussian_exact(grid: GridSpec, t: float, width=1.0, amplitude=1.0) -> np.ndarray:
    """Closed form of ``e^{it Laplacian}`` applied to ``A exp(-|x|^2/(2 width^2))`` on R^N."""
    z = width ** 2 + 2j * t
    r2 = sum(x * x for x in grid.coordinates())
    return amplitude * (width ** 2 / z) ** (grid.dim / 2) * np.exp(-r2 / (2 * z))


def scaled_ground_state(grid: GridSpec, profile, scale=1.0, center=None) -> ComplexField:
    from .ground_state import sample_on_grid

    return sample_on_grid(profile, grid, scale, center)


def band_limited_random(grid: GridSpec, k_cut: float, seed: int, amplitude=1.0) -> ComplexField:
    """Random complex field whose Fourier modes vanish for ``|k| > k_cut``.

    Modes are drawn from ``numpy.random.default_rng(seed)``; the result is
    normalized to unit sup norm times ``amplitude``.
    """
    k_nyq = np.pi / grid.spacing
    if not 0 < k_cut < k_nyq:
        raise ConfigurationError(f"k_cut must lie in (0, {k_nyq:.4g}), got {k_cut}")
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    c *= k_squared(grid) <= k_cut ** 2
    u = ifft(c)
    return ComplexField(grid, amplitude * u / np.abs(u).max())


def spectral_resample(field: ComplexField, points: int) -> ComplexField:
    """Trigonometric interpolation onto a grid with ``points`` nodes per axis.

    Exact for fields without energy at or above the coarser Nyquist frequency.
    """
    g = field.grid
    new = GridSpec(g.dim, points, g.half_width, g.offset)
    if points == g.points:
        return field.copy()
    small, big = min(g.points, points), max(g.points, points)
    keep = np.r_[0:small // 2, big - small // 2:big] if points > g.points else None
    uh = fft(field.values)
    if g.offset:
        # half-cell offset nodes: undo the phase of the old origin, apply the new one
        for k in g.wavevectors():
            uh = uh * np.exp(-1j * k * (g.spacing / 2))
    if points > g.points:
        out = np.zeros(new.shape, dtype=complex)
        out[np.ix_(*([keep] * g.dim))] = uh
    else:
        sel = np.r_[0:small // 2, g.points - small // 2:g.points]
        out = uh[np.ix_(*([sel] * g.dim))]
    if g.offset:
        for k in new.wavevectors():
            out = out * np.exp(1j * k * (new.spacing / 2))
    out *= (points / g.points) ** g.dim
    return ComplexField(new, ifft(out))
