"""Two-level transition probabilities for finite-duration pulses.

Exact numerics, the split ramp-plus-adiabatic model, the integrated
closed-form model, profile analysis and fitting of measured line shapes.
"""

from .analysis import (Landscape, Method, Profile, delta_half_solve, detuning_profile,
                       extract_features, half_width, landscape, probabilities)
from .dynamics import DriveParams, propagate_exact, propagate_rk4, transition_probability
from .errors import FinitePulseError
from .fitting import FitConfig, FitModel, FitResult, fit, ingest_csv
from .integrated_model import integrated_curve, integrated_probability, strong_asymptotics
from .shapes import PulseShape, ShapeKind, area, calibrate_area, make_shape
from .split_model import SplitMode, split_probability, split_propagator

__version__ = "0.1.0"

__all__ = [
    "DriveParams", "FinitePulseError", "FitConfig", "FitModel", "FitResult", "Landscape",
    "Method", "Profile", "PulseShape", "ShapeKind", "SplitMode", "area", "calibrate_area",
    "delta_half_solve", "detuning_profile", "extract_features", "fit", "half_width",
    "ingest_csv", "integrated_curve", "integrated_probability", "landscape", "make_shape",
    "probabilities", "propagate_exact", "propagate_rk4", "split_probability",
    "split_propagator", "strong_asymptotics", "transition_probability",
]
