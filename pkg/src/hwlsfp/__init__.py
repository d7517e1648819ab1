"""Hardware-impaired multi-cell massive MIMO downlink with large-scale fading precoding."""

from .estimators import LsfpPrecoder
from .exceptions import HwLsfpError
from .hardware import HardwareProfile, build_bussgang_matrices, bussgang_gain, distortion_factor
from .harness import PRESETS, ExperimentConfig, load_config, preset_profile, run_experiment
from .optimizer import mm_optimize
from .performance import (
    LsfpWeights,
    SinrTerms,
    equal_power_slp,
    estimate_sinr_terms,
    mc_validate_sinr,
    sinr_closed_form,
    slp_weights,
    sum_se,
)
from .precoding import PrecoderKind
from .scenario import SystemConfig, build_channel_statistics, generate_network

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "HardwareProfile",
    "HwLsfpError",
    "LsfpPrecoder",
    "LsfpWeights",
    "PRESETS",
    "PrecoderKind",
    "SinrTerms",
    "SystemConfig",
    "build_bussgang_matrices",
    "build_channel_statistics",
    "bussgang_gain",
    "distortion_factor",
    "equal_power_slp",
    "estimate_sinr_terms",
    "generate_network",
    "load_config",
    "mc_validate_sinr",
    "mm_optimize",
    "preset_profile",
    "run_experiment",
    "sinr_closed_form",
    "slp_weights",
    "sum_se",
]
