from .calibration import (
    CalibrationResult,
    align_histograms,
    calibrate,
    combined_fwhm,
    detect_first_scatter_peak,
    estimate_dcr,
    estimate_fwhm_map,
    interpolate_bad_pixels,
    strip_first_scatter,
)
from .common import load_cube, load_geometry, load_volume, save_cube, save_geometry, save_volume, write_pgm
from .config import SceneDescription, load_run_config, load_scene
from .exceptions import (
    CalibrationError,
    DomainError,
    FormatError,
    NoPeakError,
    ReconstructionError,
    SimulationError,
    SpadNlosException,
    UsageError,
)
from .fbp import backproject, depth_laplacian_filter, reconstruct_fbp
from .histogram import bin_to_path_length, default_geometry, grid_geometry, path_length_to_bins
from .logger import setup_logger
from .objects import (
    CalibrationReport,
    DcrMap,
    DelayMap,
    FwhmMap,
    PhasorParams,
    ReconstructionSpec,
    SceneGeometry,
    SensorModel,
    SweepEntry,
    TargetSurface,
    TimeHistogramCube,
    VirtualWavelet,
    VoxelVolume,
    WallPlane,
)
from .phasor import make_wavelet, parameter_sweep, phasor_transform, propagate, reconstruct_phasor
from .simulator import apply_instrument, dark_frame, make_letter_f, make_plane_target, make_point_target, realistic_sensor, render_ideal_transients

__all__ = [
    "logger",
    # histogram model
    "TimeHistogramCube",
    "WallPlane",
    "SceneGeometry",
    "VoxelVolume",
    "bin_to_path_length",
    "path_length_to_bins",
    "grid_geometry",
    "default_geometry",
    "load_cube",
    "save_cube",
    "load_volume",
    "save_volume",
    "load_geometry",
    "save_geometry",
    "write_pgm",
    # simulation
    "TargetSurface",
    "SensorModel",
    "render_ideal_transients",
    "apply_instrument",
    "dark_frame",
    "make_letter_f",
    "make_plane_target",
    "make_point_target",
    "realistic_sensor",
    "SceneDescription",
    "load_scene",
    # calibration
    "DcrMap",
    "DelayMap",
    "FwhmMap",
    "CalibrationReport",
    "CalibrationResult",
    "estimate_dcr",
    "interpolate_bad_pixels",
    "detect_first_scatter_peak",
    "align_histograms",
    "combined_fwhm",
    "estimate_fwhm_map",
    "strip_first_scatter",
    "calibrate",
    # reconstruction
    "ReconstructionSpec",
    "backproject",
    "depth_laplacian_filter",
    "reconstruct_fbp",
    "PhasorParams",
    "VirtualWavelet",
    "SweepEntry",
    "make_wavelet",
    "phasor_transform",
    "propagate",
    "reconstruct_phasor",
    "parameter_sweep",
    "load_run_config",
    # Exceptions
    "SpadNlosException",
    "DomainError",
    "FormatError",
    "SimulationError",
    "CalibrationError",
    "NoPeakError",
    "ReconstructionError",
    "UsageError",
]

logger = setup_logger()
