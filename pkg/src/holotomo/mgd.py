"""Mean gradient descent (MGD) for data fidelity + total variation.

Each iteration steps along the bisector of the unit steepest-descent
directions of the data misfit ``C1 = ||V - A U||^2`` and the TV penalty
``C2``, so neither objective needs a weighting parameter. Optional per-slice
weights multiply the guess after every update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .fields import AxialBox, Field2D, FieldVolume
from .holography import WeightVector
from .propagation import adjoint_values, forward_values
from .tv import TvConfig, tv_gradient_values, tv_value

log = logging.getLogger(__name__)


class StationaryObjectiveError(ValueError):
    """Raised when a gradient vanishes and has no direction."""


DECAY_RULES = ("stall", "increase")


@dataclass(frozen=True)
class MgdConfig:
    """Optimizer settings.

    ``t_init=None`` sets the first step to ``t_init_scale * ||initial guess||``.
    The scheduled step ``t`` is multiplied by ``t_decay`` after
    ``decay_patience`` consecutive iterations in which ``c1`` failed to beat
    its best value (``decay_rule="stall"``) or rose above the previous
    iteration (``decay_rule="increase"``); it never drops below
    ``t_floor_ratio * t_init``.

    The step actually taken is ``max(t, residual_gain * ||V - A U|| / sqrt(nz))``.
    ``||r|| / sqrt(nz)`` is the length of the pure data step that cancels a
    band-limited residual, so the residual term keeps the data fit from
    falling behind the slice weighting once ``t`` has decayed. Set
    ``residual_gain=0`` for the plain schedule.
    """

    max_iters: int = 500
    theta_stop: float = 2.8
    theta_patience: int = 20
    t_init: float | None = None
    t_init_scale: float = 0.01
    t_decay: float = 0.5
    decay_patience: int = 10
    decay_rule: str = "stall"
    t_floor_ratio: float = 1e-6
    residual_gain: float = 0.5
    noise_amplitude: float = 0.01
    weights: WeightVector | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be an integer >= 1, got {self.max_iters}")
        if not np.pi / 2 < self.theta_stop < np.pi:
            raise ValueError(f"theta_stop must lie in (pi/2, pi), got {self.theta_stop}")
        if self.theta_patience < 1 or self.decay_patience < 1:
            raise ValueError("patience values must be >= 1")
        if self.t_init is not None and not self.t_init > 0:
            raise ValueError(f"t_init must be positive, got {self.t_init}")
        if not self.t_init_scale > 0:
            raise ValueError("t_init_scale must be positive")
        if self.decay_rule not in DECAY_RULES:
            raise ValueError(f"decay_rule must be one of {DECAY_RULES}, got {self.decay_rule!r}")
        if not 0 < self.t_decay <= 1:
            raise ValueError("t_decay must lie in (0, 1]")
        if not 0 <= self.t_floor_ratio <= 1:
            raise ValueError("t_floor_ratio must lie in [0, 1]")
        if self.residual_gain < 0:
            raise ValueError("residual_gain must be nonnegative")
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be nonnegative")


class HistoryRecord(NamedTuple):
    iter: int
    c1: float
    c2: float
    theta: float
    e_d: float
    t: float


@dataclass(frozen=True, eq=False)
class MgdState:
    """Optimizer iterate.

    ``d1_hat``/``d2_hat`` and ``theta`` describe the directions used for the
    update that produced ``guess``; they are ``None``/``nan`` for the
    initial state.
    """

    guess: FieldVolume
    iter: int
    c1: float
    c2: float
    e_d: float
    t: float
    t_init: float
    d1_hat: FieldVolume | None = None
    d2_hat: FieldVolume | None = None
    theta: float = float("nan")
    best_c1: float = float("inf")
    stall: int = 0
    obtuse_run: int = 0
    history: tuple[HistoryRecord, ...] = field(default_factory=tuple)


def _check_compat(guess: FieldVolume, v: Field2D):
    if guess.grid != v.grid:
        raise ValueError("guess and data grids differ")


def _residual(guess: FieldVolume, v: Field2D) -> np.ndarray:
    return v.values - forward_values(guess.grid, guess.z_positions, guess.values)


def c1_value(guess: FieldVolume, v: Field2D) -> float:
    """Squared Frobenius norm of the data residual."""
    _check_compat(guess, v)
    r = _residual(guess, v)
    return float(np.vdot(r, r).real)


def c1_gradient(guess: FieldVolume, v: Field2D) -> FieldVolume:
    """Wirtinger gradient ``-A^H (V - A U)`` with respect to ``conj(U)``."""
    _check_compat(guess, v)
    r = _residual(guess, v)
    return guess.with_values(-adjoint_values(guess.grid, guess.z_positions, r))


def _unit(g: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(g)
    if n == 0 or not np.isfinite(n):
        raise StationaryObjectiveError("stationary objective: gradient is zero")
    return g / n


def unit_direction(g: FieldVolume) -> FieldVolume:
    """``g / ||g||`` over the whole volume."""
    return g.with_values(_unit(g.values))


def _angle(d1: np.ndarray, d2: np.ndarray) -> float:
    c = np.vdot(d1, d2).real
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def angle_theta(d1_hat: FieldVolume, d2_hat: FieldVolume, tol: float = 1e-9) -> float:
    """Angle between ``-d1_hat`` and ``-d2_hat`` using the real inner product."""
    for d in (d1_hat, d2_hat):
        if abs(d.norm() - 1.0) > tol:
            raise ValueError(f"direction is not unit norm (norm={d.norm():.6g})")
    return _angle(d1_hat.values, d2_hat.values)


def relative_data_error(guess: FieldVolume, v: Field2D) -> float:
    vv = v.norm() ** 2
    if vv == 0:
        raise ValueError("data field has zero norm")
    return c1_value(guess, v) / vv


def make_initial_guess(v: Field2D, box: AxialBox, cfg: MgdConfig) -> FieldVolume:
    """Back-propagated field divided by the slice count, plus seeded complex noise.

    The noise standard deviation per voxel is ``noise_amplitude`` times the
    RMS of the back-propagated volume.
    """
    box.validate(v.grid.dz)
    zs = box.positions(v.grid.dz)
    ub = adjoint_values(v.grid, zs, v.values) / box.nz
    if cfg.noise_amplitude > 0:
        rng = np.random.default_rng(cfg.rng_seed)
        rms = np.sqrt(np.mean(np.abs(ub) ** 2))
        scale = cfg.noise_amplitude * rms / np.sqrt(2)
        noise = rng.normal(0.0, scale, ub.shape) + 1j * rng.normal(0.0, scale, ub.shape)
        ub = ub + noise
    return FieldVolume(v.grid, box.z_center, ub)


def initial_state(guess: FieldVolume, v: Field2D, tv: TvConfig, cfg: MgdConfig) -> MgdState:
    c1 = c1_value(guess, v)
    t0 = cfg.t_init if cfg.t_init is not None else cfg.t_init_scale * guess.norm()
    if not t0 > 0:
        raise ValueError("initial step size is zero; supply t_init")
    return MgdState(
        guess=guess,
        iter=0,
        c1=c1,
        c2=tv_value(guess, tv),
        e_d=c1 / v.norm() ** 2,
        t=t0,
        t_init=t0,
        best_c1=c1,
    )


def _direction_or_zero(g: np.ndarray) -> np.ndarray:
    try:
        return _unit(g)
    except StationaryObjectiveError:
        return np.zeros_like(g)


def mgd_step(state: MgdState, v: Field2D, tv: TvConfig, cfg: MgdConfig) -> MgdState:
    """One bisector update, then optional slice weighting and step-size bookkeeping.

    A vanishing gradient contributes a zero direction (that objective is
    treated as converged); theta is then pi/2.
    """
    u = state.guess
    _check_compat(u, v)
    grid, zs = u.grid, u.z_positions
    vals = u.values
    r = v.values - forward_values(grid, zs, vals)
    d1 = _direction_or_zero(-adjoint_values(grid, zs, r))
    d2 = _direction_or_zero(tv_gradient_values(vals, tv))
    theta = _angle(d1, d2)

    step = max(state.t, cfg.residual_gain * np.linalg.norm(r) / np.sqrt(u.nz))
    new = vals - step * (d1 + d2) / 2
    if cfg.weights is not None:
        w = cfg.weights.weights
        if w.size != u.nz:
            raise ValueError(f"{w.size} weights for {u.nz} slices")
        new = new * w[:, None, None]
    guess = u.with_values(new)

    r = v.values - forward_values(grid, zs, guess.values)
    c1 = float(np.vdot(r, r).real)
    c2 = tv_value(guess, tv)
    e_d = c1 / v.norm() ** 2

    t, best, stall = state.t, state.best_c1, state.stall
    if cfg.decay_rule == "stall":
        improved = c1 < best
    else:
        improved = c1 <= state.c1
    stall = 0 if improved else stall + 1
    best = min(best, c1)
    if stall >= cfg.decay_patience:
        t = max(t * cfg.t_decay, cfg.t_floor_ratio * state.t_init)
        stall = 0
    obtuse_run = state.obtuse_run + 1 if theta >= cfg.theta_stop else 0
    it = state.iter + 1
    rec = HistoryRecord(it, c1, c2, theta, e_d, step)
    return replace(
        state,
        guess=guess,
        iter=it,
        c1=c1,
        c2=c2,
        e_d=e_d,
        t=t,
        d1_hat=u.with_values(d1),
        d2_hat=u.with_values(d2),
        theta=theta,
        best_c1=best,
        stall=stall,
        obtuse_run=obtuse_run,
        history=state.history + (rec,),
    )


def run_mgd(
    v: Field2D,
    box: AxialBox,
    tv: TvConfig | None = None,
    cfg: MgdConfig | None = None,
    initial: FieldVolume | None = None,
    observer: Callable[[MgdState], None] | None = None,
) -> MgdState:
    """Iterate :func:`mgd_step` until ``max_iters`` or a sustained obtuse angle.

    The loop stops early once theta has stayed at or above ``theta_stop`` for
    ``theta_patience`` consecutive iterations. ``tv`` defaults to an epsilon of
    1e-3 times the peak amplitude of the initial guess.
    """
    cfg = cfg or MgdConfig()
    guess = initial if initial is not None else make_initial_guess(v, box, cfg)
    tv = tv or TvConfig.for_guess(guess)
    state = initial_state(guess, v, tv, cfg)
    while state.iter < cfg.max_iters:
        state = mgd_step(state, v, tv, cfg)
        if observer is not None:
            observer(state)
        if state.iter % 50 == 0:
            log.debug("iter %d  E_d=%.3e  theta=%.3f  t=%.3e", state.iter, state.e_d, state.theta, state.t)
        if state.obtuse_run >= cfg.theta_patience:
            log.info("stopping at iter %d: theta >= %.3f for %d iterations", state.iter, cfg.theta_stop, cfg.theta_patience)
            break
    return state
