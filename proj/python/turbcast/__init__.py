"""Cn2 forecasting and high-dimensional QKD turbulence simulation."""

from ._core import (
    GruForecaster,
    angle_coefficients,
    angle_mode,
    beam_geometry,
    fried_r0,
    key_rate,
    lg_mode,
    oam_alphabet,
    periodic_time_features,
    run_table,
    sample_screen_coefficients,
    security_threshold,
    shannon_h,
    simulate_channel,
    synthetic_series,
    zernike_eval,
    zernike_variances,
)

__all__ = [
    "GruForecaster",
    "angle_coefficients",
    "angle_mode",
    "beam_geometry",
    "fried_r0",
    "key_rate",
    "lg_mode",
    "oam_alphabet",
    "periodic_time_features",
    "run_table",
    "sample_screen_coefficients",
    "security_threshold",
    "shannon_h",
    "simulate_channel",
    "synthetic_series",
    "zernike_eval",
    "zernike_variances",
]
