"""Grids, complex fields, field volumes and the centered unitary 2D DFT.

Array layout follows numpy image convention: a 2D field is stored with
shape ``(ny, nx)`` and a volume with shape ``(nz, ny, nx)``, so ``x`` is the
fastest-varying index in C order. Lengths are in micrometers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft


def fft_workers() -> int:
    """Thread count for FFTs, capped by ``HOLOTOMO_THREADS`` when set."""
    raw = os.environ.get("HOLOTOMO_THREADS")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class GridSpec:
    """Physical sampling of the object-plane grid.

    ``dx`` and ``dy`` are object-plane pitches, i.e. sensor pitch divided by
    the magnification (see :meth:`from_sensor`).
    """

    nx: int
    ny: int
    dx: float
    dy: float
    dz: float
    wavelength: float
    na: float
    magnification: float = 1.0

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n < 2:
                raise ValueError(f"{name} must be an integer >= 2, got {n!r}")
            if n % 2:
                raise ValueError(f"{name} must be even, got {n}")
            object.__setattr__(self, name, int(n))
        for name in ("dx", "dy", "dz", "wavelength", "magnification"):
            val = float(getattr(self, name))
            if not np.isfinite(val) or val <= 0:
                raise ValueError(f"{name} must be positive, got {val}")
            object.__setattr__(self, name, val)
        na = float(self.na)
        if not 0 < na < 1:
            raise ValueError(f"na must lie in (0, 1), got {na}")
        object.__setattr__(self, "na", na)

    @classmethod
    def from_sensor(cls, nx, ny, sensor_pitch, magnification, dz, wavelength, na):
        pitch = sensor_pitch / magnification
        return cls(nx, ny, pitch, pitch, dz, wavelength, na, magnification)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def k(self) -> float:
        return 2 * np.pi / self.wavelength

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel-center coordinates ``(x, y)`` with the origin at pixel ``(ny/2, nx/2)``."""
        x = (np.arange(self.nx) - self.nx // 2) * self.dx
        y = (np.arange(self.ny) - self.ny // 2) * self.dy
        return np.meshgrid(x, y, indexing="xy")

    def freqs(self) -> tuple[np.ndarray, np.ndarray]:
        """Centered frequency grids ``(fx, fy)`` in cycles per micrometer."""
        fx = (np.arange(self.nx) - self.nx // 2) / (self.nx * self.dx)
        fy = (np.arange(self.ny) - self.ny // 2) / (self.ny * self.dy)
        return np.meshgrid(fx, fy, indexing="xy")

    def band_mask(self) -> np.ndarray:
        """Closed NA disc, also excluding evanescent frequencies."""
        fx, fy = self.freqs()
        rho2 = fx**2 + fy**2
        cutoff = self.na / self.wavelength
        return (rho2 <= cutoff**2) & (rho2 <= 1.0 / self.wavelength**2)


def _frozen_complex(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128, copy=True)
    if arr.shape != shape:
        raise ValueError(f"array shape {arr.shape} does not match grid {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Field2D:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_complex(self.values, self.grid.shape))

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class AxialBox:
    """Reconstruction box along z.

    Slice ``j`` sits at ``z_center + ((nz - 1)/2 - j) * dz``; index 0 is the
    slice farthest from the detector.
    """

    nz: int
    z_center: float

    def __post_init__(self):
        if int(self.nz) != self.nz or self.nz < 1:
            raise ValueError(f"nz must be a positive integer, got {self.nz!r}")
        object.__setattr__(self, "nz", int(self.nz))
        object.__setattr__(self, "z_center", float(self.z_center))

    def positions(self, dz: float) -> np.ndarray:
        offsets = (self.nz - 1) / 2 - np.arange(self.nz)
        return self.z_center + offsets * dz

    def validate(self, dz: float) -> None:
        z = self.positions(dz)
        if np.any(z <= 0):
            raise ValueError(
                f"axial box reaches the detector side: nearest slice at z={z.min():.4g} um"
            )


@dataclass(frozen=True, eq=False)
class FieldVolume:
    grid: GridSpec
    z_center: float
    values: np.ndarray
    box: AxialBox = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 3:
            raise ValueError(f"volume values must be 3D (nz, ny, nx), got ndim={arr.ndim}")
        box = AxialBox(arr.shape[0], self.z_center)
        box.validate(self.grid.dz)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "z_center", box.z_center)
        object.__setattr__(
            self, "values", _frozen_complex(arr, (box.nz,) + self.grid.shape)
        )

    @property
    def nz(self) -> int:
        return self.box.nz

    @property
    def z_positions(self) -> np.ndarray:
        return self.box.positions(self.grid.dz)

    @property
    def z_range(self) -> tuple[float, float]:
        z = self.z_positions
        return float(z.min()), float(z.max())

    def slice(self, j: int) -> Field2D:
        return Field2D(self.grid, self.values[j])

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def with_values(self, values) -> "FieldVolume":
        return FieldVolume(self.grid, self.z_center, values)

    @classmethod
    def zeros(cls, grid: GridSpec, box: AxialBox) -> "FieldVolume":
        return cls(grid, box.z_center, np.zeros((box.nz,) + grid.shape, complex))


def _check_finite(arr):
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite values")


def fft2c(arr: np.ndarray) -> np.ndarray:
    """Unitary 2D DFT over the last two axes, zero frequency moved to the center."""
    spec = sfft.fft2(arr, axes=(-2, -1), norm="ortho", workers=fft_workers())
    return sfft.fftshift(spec, axes=(-2, -1))


def ifft2c(spec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2c`."""
    arr = sfft.ifftshift(spec, axes=(-2, -1))
    return sfft.ifft2(arr, axes=(-2, -1), norm="ortho", workers=fft_workers())


def dft2_forward(f: Field2D) -> Field2D:
    """Centered unitary DFT of ``f``.

    The returned ``Field2D`` holds spectrum samples: index ``(ny/2, nx/2)`` is
    the zero frequency and ``f.grid.freqs()`` gives the frequency of each bin.
    """
    _check_finite(f.values)
    return Field2D(f.grid, fft2c(f.values))


def dft2_inverse(spec: Field2D) -> Field2D:
    _check_finite(spec.values)
    return Field2D(spec.grid, ifft2c(spec.values))


def volume_energy_profile(u: FieldVolume) -> np.ndarray:
    """Per-slice energy ``sum |u_j|^2``."""
    return np.sum(np.abs(u.values) ** 2, axis=(1, 2))
