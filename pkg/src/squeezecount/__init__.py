"""Room-temperature photon-number sensing with a two-mode squeezer.

An unknown few-photon state meets a bright coherent probe on a two-mode
squeezer; the amplified coincidence product of the output intensities
resolves the input occupation. This package provides the closed-form signal
model, a truncated-Fock oracle, a Gaussian covariance engine, shot-level
classification, and a sweep/plotting CLI.
"""
from ._version import __version__
from .params import DeviceParams, InputState, SignalPoint
from .analytic import (
    DegenerateNoiseError,
    channel_moments,
    confidence_z,
    correlation_signal,
    correlation_signal_lossy,
    correlation_variance,
    dark_mean,
    g12,
    intensities,
    number_covariance,
    optimum_alpha,
    second_moments,
    signal_point,
    snr,
    step_size,
)
from .fock import (
    CutoffCeilingError,
    MomentSet,
    TruncationLeakError,
    TwoModeState,
    apply_channel_probs,
    apply_loss,
    apply_squeezer,
    apply_squeezer_expm,
    converge,
    moments,
    prepare_input,
    recommended_cutoff,
    run_pipeline,
)
from .gaussian import (
    GaussianState,
    apply_symplectic_beamsplitter,
    apply_symplectic_squeezer,
    attenuate,
    gaussian_prepare,
    gaussian_signal_point,
    photon_mean,
    photon_pair_moment,
    photon_second_moment,
)
from .inference import (
    ClassifierModel,
    ClassifyResult,
    ShotRecord,
    build_classifier,
    classify,
    joint_distribution,
    load_shots,
    required_shots,
    sample_shots,
    save_shots,
)
from .sweeps import (
    Axis,
    ConfigError,
    PRESETS,
    SweepResult,
    SweepSpec,
    emit_csv,
    emit_json,
    parse_config,
    preset_spec,
    run_sweep,
    run_verify,
)

__all__ = [
    "__version__",
    "DeviceParams", "InputState", "SignalPoint",
    "DegenerateNoiseError", "intensities", "correlation_signal",
    "correlation_signal_lossy", "correlation_variance", "second_moments",
    "snr", "g12", "number_covariance", "step_size", "optimum_alpha",
    "dark_mean", "confidence_z", "channel_moments", "signal_point",
    "TwoModeState", "MomentSet", "TruncationLeakError", "CutoffCeilingError",
    "recommended_cutoff", "prepare_input", "apply_squeezer",
    "apply_squeezer_expm", "apply_loss", "apply_channel_probs", "moments",
    "run_pipeline", "converge",
    "GaussianState", "gaussian_prepare", "apply_symplectic_squeezer",
    "apply_symplectic_beamsplitter", "attenuate", "photon_mean",
    "photon_pair_moment", "photon_second_moment", "gaussian_signal_point",
    "ShotRecord", "ClassifierModel", "ClassifyResult", "joint_distribution",
    "sample_shots", "save_shots", "load_shots", "build_classifier",
    "classify", "required_shots",
    "ConfigError", "Axis", "SweepSpec", "SweepResult", "PRESETS",
    "parse_config", "preset_spec", "run_sweep", "emit_csv", "emit_json",
    "run_verify",
]
