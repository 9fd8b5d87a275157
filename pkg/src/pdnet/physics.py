"""Plane-wave transfer-matrix model of a layered duct metastructure.

The structure is a stack of coaxial cylindrical air channels placed in a
rigid-walled reference tube. Each channel is a lossless two-port

    [[cos kL,          i Zc sin kL],
     [i sin(kL) / Zc,  cos kL     ]],    Zc = rho c / (pi r^2),

relating (pressure, volume velocity) at its inlet to its outlet. Layers are
cascaded in propagation order and the stack is terminated anechoically on
both sides by the reference tube impedance Z0.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# first non-axisymmetric cutoff zero of J1' for a circular duct
_CUTOFF_ZERO = 1.8412
_CHUNK = 4096


@dataclass(frozen=True)
class Medium:
    sound_speed: float = 343.0
    density: float = 1.21

    def __post_init__(self):
        if not (self.sound_speed > 0 and self.density > 0):
            raise DomainError("medium sound speed and density must be positive")


@dataclass(frozen=True)
class Geometry:
    """Reference tube and layer bounds, all lengths in metres."""

    tube_radius: float = 0.0145
    layer_length: float = 0.020
    layer_count: int = 5
    radius_min: float = 0.0018125
    radius_max: float = 0.0145

    def __post_init__(self):
        if not 0 < self.radius_min <= self.radius_max <= self.tube_radius:
            raise DomainError(
                "geometry requires 0 < radius_min <= radius_max <= tube_radius"
            )
        if not self.layer_length > 0:
            raise DomainError("layer_length must be positive")
        if int(self.layer_count) != self.layer_count or self.layer_count < 1:
            raise DomainError("layer_count must be a positive integer")

    def cutoff_frequency(self, medium: Medium) -> float:
        """First higher-order mode cutoff of the reference tube (Hz)."""
        return _CUTOFF_ZERO * medium.sound_speed / (2 * np.pi * self.tube_radius)


def frequency_grid(start=20.0, step=20.0, count=250) -> np.ndarray:
    """Equally spaced frequency grid, default 20, 40, ..., 5000 Hz."""
    grid = start + step * np.arange(count, dtype=np.float64)
    check_grid(grid)
    return grid


def check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("frequency grid must be a non-empty 1-D sequence")
    if not np.all(grid > 0):
        raise DomainError("frequencies must be strictly positive")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise DomainError("frequencies must be strictly increasing")
    return grid


def check_structure(radii, geometry: Geometry) -> np.ndarray:
    """Validate radii of shape (L,) or (n, L) against the geometry."""
    radii = np.asarray(radii, dtype=np.float64)
    if radii.shape[-1:] != (geometry.layer_count,):
        raise DomainError(
            f"structure needs {geometry.layer_count} radii, got shape {radii.shape}"
        )
    if not np.all(np.isfinite(radii)):
        raise DomainError("structure radii must be finite")
    if np.any(radii < geometry.radius_min) or np.any(radii > geometry.radius_max):
        raise DomainError(
            f"radii must lie in [{geometry.radius_min}, {geometry.radius_max}] m"
        )
    return radii


def characteristic_impedance(radius, medium: Medium):
    return medium.density * medium.sound_speed / (np.pi * np.asarray(radius) ** 2)


def segment_matrix(radius, length, frequency, medium: Medium = Medium()) -> np.ndarray:
    """2x2 complex transfer matrix of one uniform lossless duct segment."""
    if not (radius > 0 and length > 0 and frequency > 0):
        raise DomainError("radius, length and frequency must be positive")
    kl = 2 * np.pi * frequency / medium.sound_speed * length
    zc = characteristic_impedance(radius, medium)
    c, s = np.cos(kl), np.sin(kl)
    return np.array([[c, 1j * zc * s], [1j * s / zc, c]], dtype=np.complex128)


def _cascade(radii, grid, geometry, medium):
    """Cascade entries (a, b, c, d), each of shape (n, F), for radii (n, L)."""
    k = 2 * np.pi * grid / medium.sound_speed
    kl = k * geometry.layer_length
    cos_kl = np.cos(kl)[None, :]
    sin_kl = np.sin(kl)[None, :]
    n = radii.shape[0]
    a = np.ones((n, grid.size), dtype=np.complex128)
    b = np.zeros_like(a)
    c = np.zeros_like(a)
    d = np.ones_like(a)
    for layer in range(radii.shape[1]):
        zc = characteristic_impedance(radii[:, layer], medium)[:, None]
        sa = cos_kl
        sb = 1j * zc * sin_kl
        sc = 1j * sin_kl / zc
        sd = cos_kl
        a, b, c, d = (
            a * sa + b * sc,
            a * sb + b * sd,
            c * sa + d * sc,
            c * sb + d * sd,
        )
    return a, b, c, d


def cascade_matrix(radii, grid, geometry: Geometry = Geometry(), medium: Medium = Medium()):
    """Total transfer matrices of one structure, shape (F, 2, 2)."""
    radii = check_structure(radii, geometry)
    grid = check_grid(grid)
    a, b, c, d = _cascade(radii[None, :], grid, geometry, medium)
    return np.stack([np.stack([a[0], b[0]], -1), np.stack([c[0], d[0]], -1)], -2)


def scattering(radii, grid, geometry: Geometry = Geometry(), medium: Medium = Medium()):
    """Complex transmission and reflection coefficients, each shaped like the spectrum."""
    radii = check_structure(radii, geometry)
    grid = check_grid(grid)
    single = radii.ndim == 1
    a, b, c, d = _cascade(np.atleast_2d(radii), grid, geometry, medium)
    z0 = characteristic_impedance(geometry.tube_radius, medium)
    denom = a + b / z0 + c * z0 + d
    t = 2 / denom
    r = (a + b / z0 - c * z0 - d) / denom
    if single:
        return t[0], r[0]
    return t, r


def transmission(radii, grid=None, geometry: Geometry = Geometry(), medium: Medium = Medium()):
    """Power transmittance |t|^2 on the grid.

    Parameters
    ----------
    radii : array_like
        Layer radii in metres in propagation order, shape (L,) or (n, L).
    grid : array_like, optional
        Frequencies in Hz; defaults to 20..5000 Hz in 20 Hz steps.

    Returns
    -------
    ndarray
        Shape (F,) or (n, F). Large batches are evaluated in chunks.
    """
    if grid is None:
        grid = frequency_grid()
    radii = check_structure(radii, geometry)
    grid = check_grid(grid)
    if grid[-1] >= geometry.cutoff_frequency(medium):
        warnings.warn(
            f"grid reaches {grid[-1]:.0f} Hz, above the plane-wave cutoff "
            f"{geometry.cutoff_frequency(medium):.0f} Hz",
            stacklevel=2,
        )
    z0 = characteristic_impedance(geometry.tube_radius, medium)
    batch = np.atleast_2d(radii)
    out = np.empty((batch.shape[0], grid.size))
    for lo in range(0, batch.shape[0], _CHUNK):
        a, b, c, d = _cascade(batch[lo:lo + _CHUNK], grid, geometry, medium)
        out[lo:lo + _CHUNK] = np.abs(2 / (a + b / z0 + c * z0 + d)) ** 2
    return out[0] if radii.ndim == 1 else out


def spectrum_error(predicted, target) -> float:
    """Mean absolute transmittance difference."""
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if predicted.shape != target.shape:
        raise DomainError(
            f"spectrum length mismatch: {predicted.shape} vs {target.shape}"
        )
    return float(np.mean(np.abs(predicted - target)))
