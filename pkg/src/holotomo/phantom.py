"""Synthetic multi-slice phase phantoms and off-axis hologram synthesis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import AxialBox, FieldVolume, GridSpec
from .holography import Hologram
from .propagation import forward_A

PAPER_PITCH = 3.45 / 40
PAPER_FOV = 280 * PAPER_PITCH


def paper_grid(n: int = 280, pitch: float = PAPER_PITCH) -> GridSpec:
    """Object-plane grid of the 40x, 650 nm, NA 0.75 microscope."""
    return GridSpec(n, n, pitch, pitch, 0.75, 0.65, 0.75, 3.45 / pitch)


def standard_grid(n: int = 64) -> GridSpec:
    """``n x n`` grid covering the paper-scale field of view (~24 um)."""
    return paper_grid(n, PAPER_FOV / n)


def two_cell_grid(n: int = 128) -> GridSpec:
    return paper_grid(n, 360 * PAPER_PITCH / n)


@dataclass(frozen=True)
class Dip:
    center: tuple[float, float]
    radius: float
    depth: float


@dataclass(frozen=True)
class Cell:
    """A disc-like phase object.

    ``center`` is in micrometers relative to the grid center; ``slices`` is an
    inclusive ``(first, last)`` range of occupied slice indices.
    """

    center: tuple[float, float]
    radius: float
    peak_phase: float = 1.5
    slices: tuple[int, int] = (1, 3)
    dip: Dip | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("cell radius must be positive")
        if not np.isfinite(self.peak_phase):
            raise ValueError("peak phase must be finite")
        if self.dip is not None and not self.dip.radius > 0:
            raise ValueError("dip radius must be positive")
        lo, hi = self.slices
        if lo > hi:
            raise ValueError(f"empty slice range {self.slices}")


@dataclass(frozen=True)
class PhantomSpec:
    grid: GridSpec
    box: AxialBox
    cells: tuple[Cell, ...] = field(default_factory=tuple)
    support_scale: float = 2.5
    support_order: int = 8

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        for c in self.cells:
            lo, hi = c.slices
            if lo < 0 or hi >= self.box.nz:
                raise ValueError(f"cell slices {c.slices} outside [0, {self.box.nz})")
        if self.support_scale <= 0 or self.support_order < 2:
            raise ValueError("invalid support parameters")


def super_gaussian(r2: np.ndarray, radius: float, order: int) -> np.ndarray:
    """``exp(-(r/radius)^order)`` evaluated from squared distances."""
    return np.exp(-((r2 / radius**2) ** (order / 2)))


def cell_phase(cell: Cell, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Order-4 super-Gaussian phase profile, minus an optional Gaussian dip."""
    cx, cy = cell.center
    phi = cell.peak_phase * super_gaussian((x - cx) ** 2 + (y - cy) ** 2, cell.radius, 4)
    if cell.dip is not None:
        dx, dy = cell.dip.center
        phi = phi - cell.dip.depth * np.exp(
            -((x - dx) ** 2 + (y - dy) ** 2) / cell.dip.radius**2
        )
    return phi


def make_phantom(spec: PhantomSpec) -> FieldVolume:
    """Unit-amplitude phase slices confined to soft cell supports.

    Each occupied slice carries the full phase profile of every cell that
    occupies it; the amplitude is a super-Gaussian support of radius
    ``support_scale * radius``, so it is ~1 over the cell and ~0 far away.
    """
    grid, box = spec.grid, spec.box
    x, y = grid.coords()
    vol = np.zeros((box.nz,) + grid.shape, dtype=np.complex128)
    for j in range(box.nz):
        cells = [c for c in spec.cells if c.slices[0] <= j <= c.slices[1]]
        if not cells:
            continue
        amp = np.zeros(grid.shape)
        phi = np.zeros(grid.shape)
        for c in cells:
            r2 = (x - c.center[0]) ** 2 + (y - c.center[1]) ** 2
            amp = np.maximum(amp, super_gaussian(r2, spec.support_scale * c.radius, spec.support_order))
            phi += cell_phase(c, x, y)
        vol[j] = amp * np.exp(1j * phi)
    return FieldVolume(grid, box.z_center, vol)


@dataclass(frozen=True)
class Reference:
    """Tilted plane reference ``amplitude * exp(2 pi i (fx x + fy y))``."""

    fx: float
    fy: float
    amplitude: float = 1.0


def paper_reference(grid: GridSpec, bins: int | None = None) -> Reference:
    """Diagonal carrier on exact frequency bins at ~57% of Nyquist per axis."""
    if bins is None:
        bins = int(round(0.286 * grid.nx))
    return Reference(bins / (grid.nx * grid.dx), bins / (grid.ny * grid.dy))


def simulate_hologram(
    u: FieldVolume,
    reference: Reference,
    snr_db: float | None = None,
    bits: int | None = None,
    seed: int = 0,
) -> Hologram:
    """Intensity ``|r + A u|^2`` with optional Gaussian noise and quantization.

    SNR is defined as ``mean(I^2) / noise_variance`` of the clean intensity.
    Noisy intensities are clipped at zero; quantized output is in counts of a
    ``2**bits - 1`` full scale set by the maximum intensity.
    """
    grid = u.grid
    nyq_x, nyq_y = 1 / (2 * grid.dx), 1 / (2 * grid.dy)
    if abs(reference.fx) >= nyq_x or abs(reference.fy) >= nyq_y:
        raise ValueError("carrier frequency must be below the grid Nyquist frequency")
    x, y = grid.coords()
    r = reference.amplitude * np.exp(2j * np.pi * (reference.fx * x + reference.fy * y))
    intensity = np.abs(r + forward_A(u).values) ** 2
    rng = np.random.default_rng(seed)
    if snr_db is not None:
        sigma = np.sqrt(np.mean(intensity**2) / 10 ** (snr_db / 10))
        intensity = np.clip(intensity + rng.normal(0.0, sigma, intensity.shape), 0, None)
    if bits is not None:
        full = 2**bits - 1
        peak = intensity.max()
        intensity = np.round(intensity / peak * full) if peak > 0 else intensity
    return Hologram(grid, intensity)


def default_scene(grid: GridSpec | None = None, z_center: float = 9.0, nz: int = 5) -> PhantomSpec:
    """Single RBC-like cell in the central slices of a paper-scale box."""
    grid = grid or paper_grid()
    half = min(grid.nx * grid.dx, grid.ny * grid.dy) / 2
    cell = Cell((0.0, 0.0), 0.2 * half, 1.5, (1, nz - 2) if nz >= 3 else (0, nz - 1))
    return PhantomSpec(grid, AxialBox(nz, z_center), (cell,))


def two_cell_scene(grid: GridSpec | None = None, z_center: float = 4.7, nz: int = 5) -> PhantomSpec:
    """A flat-phase cell beside one with a localized phase dip.

    The default grid is 128 px across a 360-pixel-wide paper-scale field so
    both cells fit with margin.
    """
    grid = grid or two_cell_grid()
    half = min(grid.nx * grid.dx, grid.ny * grid.dy) / 2
    radius = 0.22 * half
    occ = (1, nz - 2) if nz >= 3 else (0, nz - 1)
    normal = Cell((-0.45 * half, 0.0), radius, 1.5, occ)
    dip = Dip((0.45 * half + 0.3 * radius, 0.2 * radius), 0.3 * radius, 1.0)
    infected = Cell((0.45 * half, 0.0), radius, 1.5, occ, dip)
    return PhantomSpec(grid, AxialBox(nz, z_center), (normal, infected))
