"""Isotropic 3D total variation with physical (anisotropic) sample spacing.

Differences are forward differences divided by the spacing along each axis,
with a zero difference at the far boundary (Neumann). The divergence below is
the exact negative adjoint of that gradient, so ``<G u, p> = -<u, D p>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FieldVolume, GridSpec


@dataclass(frozen=True)
class TvConfig:
    epsilon: float
    spacing: tuple[float, float, float]  # (dx, dy, dz)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        sp = tuple(float(s) for s in self.spacing)
        if len(sp) != 3 or min(sp) <= 0:
            raise ValueError(f"spacing must be three positive numbers, got {self.spacing}")
        object.__setattr__(self, "spacing", sp)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @classmethod
    def for_guess(cls, guess: FieldVolume, rel_epsilon: float = 1e-3) -> "TvConfig":
        """Epsilon scaled to the peak amplitude of ``guess``."""
        peak = float(np.max(np.abs(guess.values)))
        eps = rel_epsilon * peak if peak > 0 else rel_epsilon
        return cls(eps, spacing_of(guess.grid))


def spacing_of(grid: GridSpec) -> tuple[float, float, float]:
    return (grid.dx, grid.dy, grid.dz)


def gradient(u: np.ndarray, spacing) -> np.ndarray:
    """Forward differences of a ``(nz, ny, nx)`` array, shape ``(3, nz, ny, nx)``.

    Component order is (x, y, z).
    """
    dx, dy, dz = spacing
    g = np.zeros((3,) + u.shape, dtype=u.dtype)
    g[0, :, :, :-1] = (u[:, :, 1:] - u[:, :, :-1]) / dx
    g[1, :, :-1, :] = (u[:, 1:, :] - u[:, :-1, :]) / dy
    g[2, :-1, :, :] = (u[1:, :, :] - u[:-1, :, :]) / dz
    return g


def divergence(p: np.ndarray, spacing) -> np.ndarray:
    """Negative adjoint of :func:`gradient`."""
    dx, dy, dz = spacing
    out = np.zeros(p.shape[1:], dtype=p.dtype)
    for axis, (comp, h) in enumerate(zip((p[0], p[1], p[2]), (dx, dy, dz))):
        ax = 2 - axis
        n = comp.shape[ax]
        if n == 1:
            continue
        first = [slice(None)] * 3
        first[ax] = slice(0, 1)
        mid = [slice(None)] * 3
        mid[ax] = slice(1, n - 1)
        prev = [slice(None)] * 3
        prev[ax] = slice(0, n - 2)
        last = [slice(None)] * 3
        last[ax] = slice(n - 1, n)
        before_last = [slice(None)] * 3
        before_last[ax] = slice(n - 2, n - 1)
        d = np.empty_like(comp)
        d[tuple(first)] = comp[tuple(first)]
        d[tuple(mid)] = comp[tuple(mid)] - comp[tuple(prev)]
        d[tuple(last)] = -comp[tuple(before_last)]
        out += d / h
    return out


def _magnitude2(g: np.ndarray) -> np.ndarray:
    return np.sum(g.real**2 + g.imag**2, axis=0)


def tv_value(u: FieldVolume, cfg: TvConfig) -> float:
    """Unsmoothed TV: sum over voxels of the gradient magnitude."""
    return float(np.sum(np.sqrt(_magnitude2(gradient(u.values, cfg.spacing)))))


def tv_smoothed_value(u: FieldVolume, cfg: TvConfig) -> float:
    """``sum sqrt(|grad u|^2 + eps^2)``; the functional :func:`tv_gradient` differentiates."""
    g = gradient(u.values, cfg.spacing)
    return float(np.sum(np.sqrt(_magnitude2(g) + cfg.epsilon**2)))


def tv_gradient_values(u: np.ndarray, cfg: TvConfig) -> np.ndarray:
    g = gradient(u, cfg.spacing)
    mag = np.sqrt(_magnitude2(g) + cfg.epsilon**2)
    return -divergence(g / mag, cfg.spacing)


def tv_gradient(u: FieldVolume, cfg: TvConfig) -> FieldVolume:
    """``-div(grad u / sqrt(|grad u|^2 + eps^2))``.

    Real and imaginary parts are the partial derivatives of the smoothed TV
    with respect to the real and imaginary parts of ``u``, which is twice the
    Wirtinger derivative with respect to ``conj(u)``.
    """
    return u.with_values(tv_gradient_values(u.values, cfg))
