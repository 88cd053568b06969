"""Band-limited angular spectrum propagation and the multi-slice operator.

The forward operator sums every slice of a volume after propagating it to the
detector plane (z = 0); its Hermitian adjoint back-propagates a detector field
into every slice of an axial box.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fields import AxialBox, Field2D, FieldVolume, GridSpec, fft2c, ifft2c


@dataclass(frozen=True, eq=False)
class PropagationKernel:
    grid: GridSpec
    z: float
    transfer: np.ndarray


@lru_cache(maxsize=256)
def _transfer(grid: GridSpec, z: float) -> np.ndarray:
    fx, fy = grid.freqs()
    kz2 = grid.k**2 - 4 * np.pi**2 * (fx**2 + fy**2)
    mask = grid.band_mask()
    kz = np.sqrt(np.where(mask, kz2, 0.0))
    h = np.where(mask, np.exp(1j * z * kz), 0.0).astype(np.complex128)
    h.setflags(write=False)
    return h


def make_kernel(grid: GridSpec, z: float) -> PropagationKernel:
    """Angular spectrum transfer function for a signed distance ``z``.

    Inside the NA disc the transfer is ``exp(i z sqrt(k^2 - 4 pi^2 (fx^2 + fy^2)))``,
    outside it is exactly zero. Evanescent waves are dropped, not damped.
    """
    z = float(z)
    return PropagationKernel(grid, z, _transfer(grid, z))


def _stack_transfer(grid: GridSpec, zs) -> np.ndarray:
    return np.stack([_transfer(grid, float(z)) for z in zs])


def bandlimit(f: Field2D) -> Field2D:
    """Project ``f`` onto the NA pass band."""
    return Field2D(f.grid, ifft2c(fft2c(f.values) * f.grid.band_mask()))


def propagate(f: Field2D, z) -> Field2D:
    """Propagate ``f`` by ``z`` micrometers (negative ``z`` back-propagates).

    ``z`` may also be a precomputed :class:`PropagationKernel`.
    """
    if isinstance(z, PropagationKernel):
        kernel = z
        if kernel.grid != f.grid:
            raise ValueError("kernel grid does not match field grid")
        h = kernel.transfer
    else:
        h = _transfer(f.grid, float(z))
    return Field2D(f.grid, ifft2c(h * fft2c(f.values)))


def forward_values(grid: GridSpec, zs: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Array-level forward operator: ``sum_j propagate(values[j], zs[j])``."""
    spec = fft2c(values)
    acc = np.sum(_stack_transfer(grid, zs) * spec, axis=0)
    return ifft2c(acc)


def adjoint_values(grid: GridSpec, zs: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Array-level adjoint: slice ``j`` is ``values`` propagated by ``-zs[j]``."""
    spec = fft2c(values)
    return ifft2c(_stack_transfer(grid, -np.asarray(zs)) * spec[None])


def forward_A(u: FieldVolume) -> Field2D:
    """Detector field produced by the volume ``u``."""
    return Field2D(u.grid, forward_values(u.grid, u.z_positions, u.values))


def adjoint_A(v: Field2D, box: AxialBox, grid: GridSpec | None = None) -> FieldVolume:
    """Back-propagate ``v`` into every slice of ``box``.

    This is the exact Hermitian adjoint of :func:`forward_A` for volumes on
    the same grid and box.
    """
    if grid is not None and grid != v.grid:
        raise ValueError("detector field grid does not match the requested grid")
    box.validate(v.grid.dz)
    zs = box.positions(v.grid.dz)
    return FieldVolume(v.grid, box.z_center, adjoint_values(v.grid, zs, v.values))
