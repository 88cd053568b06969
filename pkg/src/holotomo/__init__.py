"""Multi-slice holographic tomography from a single off-axis hologram."""

from .fields import AxialBox, Field2D, FieldVolume, GridSpec, dft2_forward, dft2_inverse, volume_energy_profile
from .holography import (
    Carrier,
    CarrierSeparationError,
    DegenerateContrastError,
    FocusScan,
    Hologram,
    WeightVector,
    amplitude_contrast,
    compute_weights,
    demodulate_ftm,
    detect_carrier,
    focus_scan,
    subtract_background,
    unwrap_phase,
)
from .mgd import MgdConfig, MgdState, angle_theta, c1_gradient, c1_value, mgd_step, run_mgd
from .propagation import PropagationKernel, adjoint_A, forward_A, make_kernel, propagate
from .tv import TvConfig, tv_gradient, tv_value

__all__ = [
    "AxialBox", "Field2D", "FieldVolume", "GridSpec", "dft2_forward", "dft2_inverse",
    "volume_energy_profile", "Carrier", "CarrierSeparationError", "DegenerateContrastError",
    "FocusScan", "Hologram", "WeightVector", "amplitude_contrast", "compute_weights",
    "demodulate_ftm", "detect_carrier", "focus_scan", "subtract_background", "unwrap_phase",
    "MgdConfig", "MgdState", "angle_theta", "c1_gradient", "c1_value", "mgd_step", "run_mgd",
    "PropagationKernel", "adjoint_A", "forward_A", "make_kernel", "propagate",
    "TvConfig", "tv_gradient", "tv_value",
]
