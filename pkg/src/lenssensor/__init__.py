"""Lens-integrated Y-shaped soft optical sensor: material extraction, lens design,
2D ray tracing and rotation experiments."""

from .errors import BracketError, DomainError, LensSensorError, ParseError, ValidationError
from .experiment import (
    ComparisonReport,
    FoldedCurves,
    Protocol,
    ProtocolTrace,
    ReadoutModel,
    SweepResult,
    compare_with_without_lens,
    crop_and_fold,
    differential,
    emit_report,
    rotation_sweep,
    synthesize_protocol,
)
from .lensdesign import LensProfile, LensSpec, export_profile, import_profile, oval_residual, solve_profile, solve_sag
from .material import (
    OpticalConstants,
    SlabSample,
    Spectrum,
    WorkingCurveFit,
    WorkingCurvePoint,
    compute_constants,
    fit_working_curve,
    forward_slab_model,
    index_at_wavelength,
    refractive_index,
)
from .raytrace import DetectionTally, FanParams, TraceLimits, TraceOutcome, focal_spot, run_fan, trace
from .scene import Pose, SensorGeometry, SensorParams, apply_pose, build_sensor, classify_point, load_scene_file

__version__ = "0.1.0"
