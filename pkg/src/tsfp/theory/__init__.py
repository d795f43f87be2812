"""Numerical oracles for the coding-rate and disentanglement theory."""

from .oracles import (
    DEFAULT_N_GRID,
    SensitivityProbe,
    Spectrum,
    equicorrelated,
    noise_sensitivity_probe,
    orthogonality_descent,
    projection_error,
    random_rotation,
    run_all,
    sample_complexity_experiment,
    spectral_tail_bound,
    token_tc,
    unit_columns,
    verify_hadamard,
    worst_case_sensitivity,
)

__all__ = [
    "DEFAULT_N_GRID",
    "SensitivityProbe",
    "Spectrum",
    "equicorrelated",
    "noise_sensitivity_probe",
    "orthogonality_descent",
    "projection_error",
    "random_rotation",
    "run_all",
    "sample_complexity_experiment",
    "spectral_tail_bound",
    "token_tc",
    "unit_columns",
    "verify_hadamard",
    "worst_case_sensitivity",
]
