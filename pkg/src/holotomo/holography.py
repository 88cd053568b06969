"""Off-axis hologram demodulation, background removal, autofocus and weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .fields import AxialBox, Field2D, GridSpec, fft2c, ifft2c
from .propagation import _transfer


class CarrierSeparationError(ValueError):
    pass


class DegenerateContrastError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Hologram:
    grid: GridSpec
    intensity: np.ndarray

    def __post_init__(self):
        arr = np.array(self.intensity, dtype=np.float64, copy=True)
        if arr.shape != self.grid.shape:
            raise ValueError(f"hologram shape {arr.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("hologram intensity must be finite and nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "intensity", arr)


@dataclass(frozen=True)
class Carrier:
    """Reference-beam tilt frequency ``(fx, fy)`` in cycles/um.

    The demodulated lobe is the one at ``-(fx, fy)``, i.e. the
    ``conj(reference) * object`` cross term for a reference
    ``exp(2 pi i (fx x + fy y))``. ``mask_radius`` defaults to half the
    carrier magnitude.
    """

    fx: float
    fy: float
    mask_radius: float | None = None

    @property
    def magnitude(self) -> float:
        return float(np.hypot(self.fx, self.fy))

    @property
    def radius(self) -> float:
        return self.mask_radius if self.mask_radius is not None else self.magnitude / 2


def _bin_offset(grid: GridSpec, fx: float, fy: float) -> tuple[int, int]:
    return (int(round(fy * grid.ny * grid.dy)), int(round(fx * grid.nx * grid.dx)))


def demodulate_ftm(h: Hologram, carrier: Carrier) -> Field2D:
    """Recover the complex object field from one cross-term lobe.

    A hard circular mask of radius ``carrier.radius`` is centered on the lobe,
    the lobe is shifted to baseband by an integer number of frequency bins and
    inverse transformed.
    """
    r = carrier.radius
    if r <= 0:
        raise ValueError("mask radius must be positive")
    # DC mask has the same radius as the carrier mask
    if 2 * r > carrier.magnitude:
        raise CarrierSeparationError(
            f"insufficient carrier separation: |carrier|={carrier.magnitude:.4g} "
            f"cycles/um but mask radius {r:.4g} overlaps the DC lobe"
        )
    grid = h.grid
    fx, fy = grid.freqs()
    spec = fft2c(h.intensity.astype(np.complex128))
    mask = (fx + carrier.fx) ** 2 + (fy + carrier.fy) ** 2 <= r**2
    shift = _bin_offset(grid, carrier.fx, carrier.fy)
    lobe = np.roll(spec * mask, shift, axis=(0, 1))
    return Field2D(grid, ifft2c(lobe))


def detect_carrier(h: Hologram, dc_radius: float | None = None) -> Carrier:
    """Strongest off-DC spectral peak, returned as a :class:`Carrier`.

    Only the half plane ``fx < 0`` (ties broken toward ``fy < 0``) is searched
    so the picked lobe is deterministic. ``dc_radius`` defaults to the
    ``2 NA / wavelength`` extent of the object autocorrelation term.
    """
    grid = h.grid
    fx, fy = grid.freqs()
    if dc_radius is None:
        dc_radius = 2 * grid.na / grid.wavelength
    power = np.abs(fft2c(h.intensity.astype(np.complex128))) ** 2
    power[fx**2 + fy**2 <= dc_radius**2] = 0
    power[(fx > 0) | ((fx == 0) & (fy >= 0))] = 0
    if not np.any(power > 0):
        raise CarrierSeparationError("no spectral peak outside the DC region; carrier not found")
    iy, ix = np.unravel_index(np.argmax(power), power.shape)
    # lobe at -carrier
    return Carrier(-float(fx[iy, ix]), -float(fy[iy, ix]))


def gaussian_window(grid: GridSpec, radius_px: float | None) -> np.ndarray:
    """Centered Gaussian with 1/e^2 radius ``radius_px``; ``None`` gives all ones."""
    if radius_px is None or np.isinf(radius_px):
        return np.ones(grid.shape)
    iy, ix = np.indices(grid.shape)
    r2 = (ix - grid.nx // 2) ** 2 + (iy - grid.ny // 2) ** 2
    return np.exp(-2.0 * r2 / float(radius_px) ** 2)


def default_window_radius(grid: GridSpec) -> float:
    return 0.4 * min(grid.nx, grid.ny) / 2


def subtract_background(v: Field2D, window_radius_px: float | None = None) -> Field2D:
    """``(v - mean(v)) * G`` with a centered Gaussian ``G``.

    Pass ``window_radius_px=float('inf')`` to skip the window.
    """
    if window_radius_px is None:
        window_radius_px = default_window_radius(v.grid)
    g = gaussian_window(v.grid, window_radius_px)
    return Field2D(v.grid, (v.values - v.values.mean()) * g)


def default_radius_px(grid: GridSpec) -> int:
    return max(1, int(round(65 * grid.nx / 280)))


def _disc(grid: GridSpec, radius_px: float, center_px=None) -> np.ndarray:
    cx, cy = (grid.nx // 2, grid.ny // 2) if center_px is None else center_px
    iy, ix = np.indices(grid.shape)
    return (ix - cx) ** 2 + (iy - cy) ** 2 <= radius_px**2


def _contrast(values: np.ndarray, disc: np.ndarray) -> float:
    return float(np.sqrt(np.std(np.abs(values[disc]))))


def amplitude_contrast(v: Field2D, radius_px: float, center_px=None) -> float:
    """Square root of the population std of ``|v|`` inside a disc.

    The disc is centered on the grid center unless ``center_px=(ix, iy)`` is
    given.
    """
    if radius_px <= 0:
        raise ValueError(f"radius_px must be positive, got {radius_px}")
    if radius_px > min(v.grid.nx, v.grid.ny) / 2:
        raise ValueError(f"radius_px={radius_px} does not fit in the grid")
    return _contrast(v.values, _disc(v.grid, radius_px, center_px))


@dataclass(frozen=True, eq=False)
class FocusScan:
    z_list: np.ndarray
    sigma_list: np.ndarray
    contrast_list: np.ndarray
    z_focus: float
    window_radius_px: int

    @property
    def focus_index(self) -> int:
        return int(np.flatnonzero(self.z_list == self.z_focus)[0])


def z_ladder(z_min: float, z_max: float, z_step: float) -> np.ndarray:
    if z_step <= 0:
        raise ValueError("z_step must be positive")
    if not 0 <= z_min < z_max:
        raise ValueError("need 0 <= z_min < z_max")
    n = int(np.floor((z_max - z_min) / z_step + 1e-9)) + 1
    return z_min + z_step * np.arange(n)


def _backprop_contrasts(v: Field2D, zs, radius_px: float, center_px=None) -> np.ndarray:
    amplitude_contrast(v, radius_px, center_px)  # validates radius
    disc = _disc(v.grid, radius_px, center_px)
    spec = fft2c(v.values)
    return np.array(
        [_contrast(ifft2c(_transfer(v.grid, -float(z)) * spec), disc) for z in zs]
    )


def focus_scan(
    v: Field2D,
    z_min: float,
    z_max: float,
    z_step: float,
    radius_px: int | None = None,
    center_px=None,
) -> FocusScan:
    """Back-propagation sweep of the amplitude contrast.

    The focus is the smallest z attaining the minimum contrast; values within
    round-off (``1e-12`` of the mean field amplitude in sigma) count as ties.
    """
    if radius_px is None:
        radius_px = default_radius_px(v.grid)
    zs = z_ladder(z_min, z_max, z_step)
    if zs.size == 0:
        raise ValueError("empty z ladder")
    contrast = _backprop_contrasts(v, zs, radius_px, center_px)
    sigma = contrast**2
    tol = 1e-12 * float(np.mean(np.abs(v.values)))
    k = int(np.flatnonzero(sigma <= sigma.min() + tol)[0])
    return FocusScan(zs, sigma, contrast, float(zs[k]), int(radius_px))


@dataclass(frozen=True, eq=False)
class WeightVector:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1D sequence")
        if np.any(~np.isfinite(w)) or np.any(w <= 0) or np.any(w > 1):
            raise ValueError("weights must lie in (0, 1]")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    @classmethod
    def from_contrasts(cls, contrasts) -> "WeightVector":
        c = np.asarray(contrasts, dtype=np.float64)
        if np.any(c <= 0):
            raise DegenerateContrastError("degenerate contrast; weights undefined")
        inv = 1.0 / c
        return cls(inv / inv.max())


def compute_weights(
    v: Field2D, box: AxialBox, radius_px: int | None = None, center_px=None
) -> WeightVector:
    """Inverse amplitude contrast of ``v`` back-propagated to each slice, max-normalized."""
    if radius_px is None:
        radius_px = default_radius_px(v.grid)
    box.validate(v.grid.dz)
    return WeightVector.from_contrasts(
        _backprop_contrasts(v, box.positions(v.grid.dz), radius_px, center_px)
    )


def _wrap(phi):
    return (phi + np.pi) % (2 * np.pi) - np.pi


def unwrap_least_squares(wrapped: np.ndarray) -> np.ndarray:
    """Unweighted least-squares unwrapping with a DCT Poisson solver.

    Returns the smooth least-squares phase (defined up to a constant, here
    fixed to zero mean).
    """
    ny, nx = wrapped.shape
    dx = np.zeros_like(wrapped)
    dy = np.zeros_like(wrapped)
    dx[:, :-1] = _wrap(np.diff(wrapped, axis=1))
    dy[:-1, :] = _wrap(np.diff(wrapped, axis=0))
    rho = dx.copy()
    rho[:, 1:] -= dx[:, :-1]
    rho += dy
    rho[1:, :] -= dy[:-1, :]
    rho_hat = sfft.dctn(rho, type=2, norm="ortho")
    ky = np.cos(np.pi * np.arange(ny) / ny)[:, None]
    kx = np.cos(np.pi * np.arange(nx) / nx)[None, :]
    denom = 2 * (kx + ky - 2)
    denom[0, 0] = 1.0
    phi_hat = rho_hat / denom
    phi_hat[0, 0] = 0.0
    return sfft.idctn(phi_hat, type=2, norm="ortho")


def unwrap_phase(v: Field2D) -> np.ndarray:
    """Unwrapped phase of ``v`` in radians.

    The least-squares solution is snapped to the nearest value congruent to
    the wrapped phase, so the output rewraps exactly to ``angle(v)``.
    """
    amp = np.abs(v.values)
    if not np.any(amp > 0):
        raise ValueError("cannot unwrap the phase of an all-zero field")
    wrapped = np.angle(v.values)
    smooth = unwrap_least_squares(wrapped)
    # align the free constant before snapping so rounding is not near +-pi
    smooth += np.angle(np.sum(amp * np.exp(1j * (wrapped - smooth))))
    return wrapped + 2 * np.pi * np.round((smooth - wrapped) / (2 * np.pi))
