"""Binary field files, CSV tables and image export.

Field file layout (all little-endian)::

    magic      4 bytes  b"HTF1"
    version    u16      1
    kind       u16      0 = field2d, 1 = volume
    nx, ny, nz u32
    dx, dy, dz, wavelength, na, magnification, z_center   f64
    payload    (re, im) f64 pairs, x fastest, then y, then z

A 2D field is stored with ``nz = 1``. Hologram intensities are stored as a
2D field with zero imaginary part.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .fields import Field2D, FieldVolume, GridSpec

MAGIC = b"HTF1"
VERSION = 1
KIND_FIELD2D = 0
KIND_VOLUME = 1
_HEADER = struct.Struct("<4sHH3I7d")
_PAYLOAD_DTYPE = np.dtype("<c16")


class FileFormatError(ValueError):
    pass


def _pack(kind, grid: GridSpec, nz: int, z_center: float, values: np.ndarray) -> bytes:
    header = _HEADER.pack(
        MAGIC, VERSION, kind, grid.nx, grid.ny, nz,
        grid.dx, grid.dy, grid.dz, grid.wavelength, grid.na, grid.magnification,
        z_center,
    )
    return header + np.ascontiguousarray(values, dtype=_PAYLOAD_DTYPE).tobytes()


def encode(obj) -> bytes:
    if isinstance(obj, FieldVolume):
        return _pack(KIND_VOLUME, obj.grid, obj.nz, obj.z_center, obj.values)
    if isinstance(obj, Field2D):
        return _pack(KIND_FIELD2D, obj.grid, 1, 0.0, obj.values)
    raise TypeError(f"cannot encode {type(obj).__name__}")


def decode(data: bytes):
    if len(data) < _HEADER.size:
        raise FileFormatError("truncated header")
    (magic, version, kind, nx, ny, nz,
     dx, dy, dz, wl, na, mag, z_center) = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FileFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FileFormatError(f"unsupported version {version}")
    if kind not in (KIND_FIELD2D, KIND_VOLUME):
        raise FileFormatError(f"unknown kind {kind}")
    expected = 2 * nx * ny * nz * 8
    payload = data[_HEADER.size:]
    if len(payload) != expected:
        raise FileFormatError(f"payload is {len(payload)} bytes, expected {expected}")
    try:
        grid = GridSpec(nx, ny, dx, dy, dz, wl, na, mag)
    except ValueError as exc:
        raise FileFormatError(f"invalid grid in header: {exc}") from exc
    values = np.frombuffer(payload, dtype=_PAYLOAD_DTYPE).reshape(nz, ny, nx)
    if kind == KIND_FIELD2D:
        if nz != 1:
            raise FileFormatError("field2d file must have nz = 1")
        return Field2D(grid, values[0])
    return FieldVolume(grid, z_center, values)


def save_field(path, obj) -> None:
    Path(path).write_bytes(encode(obj))


def load_field(path):
    """Load a :class:`Field2D` or :class:`FieldVolume` from ``path``."""
    return decode(Path(path).read_bytes())


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_focus_csv(path, scan) -> None:
    write_csv(path, ["z_um", "sqrt_sigma"], zip(scan.z_list, scan.contrast_list))


def write_history_csv(path, history) -> None:
    write_csv(path, ["iter", "c1", "c2", "theta", "e_d", "t"], history)


def save_gray16(path, image: np.ndarray) -> None:
    """Write a 16-bit grayscale PNG, scaling the maximum to 65535."""
    img = np.asarray(image, dtype=np.float64)
    peak = img.max()
    scaled = np.zeros(img.shape) if peak <= 0 else img / peak * 65535
    Image.fromarray(np.round(scaled).astype(np.uint16)).save(path)


def load_gray(path) -> np.ndarray:
    """Read a grayscale image (8 or 16 bit) as float64 counts."""
    with Image.open(path) as im:
        if im.mode not in ("I;16", "I;16B", "I;16L", "I", "L"):
            raise FileFormatError(f"{path}: expected a grayscale image, got mode {im.mode}")
        return np.asarray(im, dtype=np.float64)


def to_gray8(image: np.ndarray, vmin: float, vmax: float) -> np.ndarray:
    span = vmax - vmin
    scaled = (image - vmin) / span if span > 0 else np.zeros(image.shape)
    return np.round(np.clip(scaled, 0, 1) * 255).astype(np.uint8)


def save_gray8(path, image: np.ndarray, vmin: float, vmax: float) -> None:
    Image.fromarray(to_gray8(image, vmin, vmax)).save(path)


PHASE_COLORMAP = "viridis"


def save_colormap(path, image: np.ndarray, vmin: float, vmax: float, cmap: str = PHASE_COLORMAP) -> None:
    """Write an 8-bit RGB PNG through a matplotlib colormap."""
    from matplotlib import colormaps

    lut = (colormaps[cmap](np.linspace(0, 1, 256))[:, :3] * 255).round().astype(np.uint8)
    Image.fromarray(lut[to_gray8(image, vmin, vmax)]).save(path)
