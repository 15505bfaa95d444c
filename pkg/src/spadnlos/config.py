from __future__ import annotations

import os
from pathlib import Path
from typing import Annotated, Any, Literal, TypeVar

import numpy as np
import yaml
from pydantic import Field, TypeAdapter, ValidationError
from pydantic.dataclasses import dataclass

from .calibration import DEFAULT_GATE
from .constants import (
    BIN_WIDTH_PS,
    DCR_BAD_PIXEL_THRESHOLD,
    EXPOSURE_S,
    JITTER_FWHM_PS,
    PDE,
    PULSE_FWHM_PS,
    REPETITION_RATE_HZ,
    SENSOR_BINS,
    SENSOR_COLS,
    SENSOR_ROWS,
)
from .exceptions import UsageError
from .histogram import grid_geometry
from .objects import ReconstructionSpec, SceneGeometry, SensorModel, TargetSurface
from .phasor import SWEEP_SIGMAS, SWEEP_WAVELENGTHS
from .simulator import DEFAULT_REFERENCE_BIN, make_letter_f, make_plane_target, make_point_target, realistic_sensor

__all__ = [
    "default_workers",
    "RunConfig",
    "SimulateConfig",
    "CalibrateConfig",
    "ReconstructConfig",
    "ProjectConfig",
    "SweepConfig",
    "load_run_config",
    "LetterFTarget",
    "PlaneTarget",
    "PointTarget",
    "NoTarget",
    "SensorSpec",
    "SceneDescription",
    "load_scene",
]


def default_workers() -> int:
    return int(os.getenv("SPADNLOS_WORKERS", "0"))


@dataclass(kw_only=True)
class RunConfig:
    """Settings shared by every command; `workers` = 0 lets the kernels use every core."""

    seed: int | None = None
    workers: int = Field(default_factory=default_workers)

    def input_paths(self) -> dict[str, Path | None]:
        return {}

    def validate(self) -> None:
        missing = [f"{name}={path}" for name, path in self.input_paths().items() if path is not None and not Path(path).exists()]
        if self.workers < 0:
            missing.append(f"workers={self.workers}")

        if missing:
            raise UsageError(f"Please verify and correct these inputs: {missing}")


@dataclass(kw_only=True)
class SimulateConfig(RunConfig):
    output: Path
    scene: Path | None = None
    dark_output: Path | None = None
    poisson: bool | None = None

    def input_paths(self) -> dict[str, Path | None]:
        return {"scene": self.scene}


@dataclass(kw_only=True)
class CalibrateConfig(RunConfig):
    raw: Path
    output: Path
    dark: Path | None = None
    geometry: Path | None = None
    report: Path | None = None
    exposure: float = EXPOSURE_S
    gate: tuple[int, int] = DEFAULT_GATE
    threshold: float = DCR_BAD_PIXEL_THRESHOLD
    guard: int | None = None
    reference_bin: int | None = None
    strip: bool = True

    def input_paths(self) -> dict[str, Path | None]:
        return {"raw": self.raw, "dark": self.dark, "geometry": self.geometry}

    @property
    def report_path(self) -> Path:
        return self.report or self.output.with_name(self.output.stem + ".calibration.json")


@dataclass(kw_only=True)
class _VolumeOptions(RunConfig):
    dims: tuple[int, int, int] = (120, 120, 120)
    origin: tuple[float, float, float] = (-0.6, -0.6, 0.1)
    voxel_size: float = 0.01
    attenuation: bool = False

    def reconstruction_spec(self, filter_kind: Literal["none", "depth_laplacian"] = "none") -> ReconstructionSpec:
        return ReconstructionSpec(
            dims=self.dims,
            origin=self.origin,
            voxel_size=self.voxel_size,
            attenuation_compensation=self.attenuation,
            filter_kind=filter_kind,
        )


@dataclass(kw_only=True)
class ReconstructConfig(_VolumeOptions):
    cube: Path
    output: Path
    geometry: Path | None = None
    method: Literal["fbp", "phasor"] = "fbp"
    wavelength: float | None = None
    sigma: float | None = None
    filter_kind: Literal["none", "depth_laplacian"] = "depth_laplacian"
    reference_bin: int | None = None

    def input_paths(self) -> dict[str, Path | None]:
        return {"cube": self.cube, "geometry": self.geometry}

    def validate(self) -> None:
        super().validate()

        if self.method == "fbp" and (self.wavelength is not None or self.sigma is not None):
            raise UsageError("--wavelength and --sigma only apply to --method phasor")
        if self.method == "phasor" and (self.wavelength is None or self.sigma is None):
            raise UsageError("--method phasor needs both --wavelength and --sigma")


@dataclass(kw_only=True)
class ProjectConfig(RunConfig):
    volume: Path
    output: Path
    axis: Literal["front", "side", "top", "all"] = "front"

    def input_paths(self) -> dict[str, Path | None]:
        return {"volume": self.volume}


@dataclass(kw_only=True)
class SweepConfig(_VolumeOptions):
    cube: Path
    output: Path
    geometry: Path | None = None
    scene: Path | None = None
    images: Path | None = None
    wavelengths: list[float] = Field(default_factory=lambda: list(SWEEP_WAVELENGTHS))
    sigmas: list[float] = Field(default_factory=lambda: list(SWEEP_SIGMAS))
    reference_bin: int | None = None

    def input_paths(self) -> dict[str, Path | None]:
        return {"cube": self.cube, "geometry": self.geometry, "scene": self.scene}

    def validate(self) -> None:
        super().validate()

        if not self.wavelengths or not self.sigmas:
            raise UsageError("A sweep needs at least one wavelength and one sigma")


Config = TypeVar("Config", bound=RunConfig)


def load_run_config(cls: type[Config], config_file: str | Path | None = None, overrides: dict[str, Any] | None = None) -> Config:
    """
    Build `cls` from a YAML (or JSON) file, then from the command-line values that were actually given.

    The result is validated before it is returned.
    """
    values: dict[str, Any] = {}
    if config_file is not None:
        config_file = Path(config_file)
        if not config_file.exists():
            raise UsageError(f"Config file {config_file} does not exist")
        values = yaml.safe_load(config_file.read_text(encoding="utf8")) or {}
        if not isinstance(values, dict):
            raise UsageError(f"Config file {config_file} must hold a mapping")

    values |= {key: value for key, value in (overrides or {}).items() if value is not None}

    try:
        config = TypeAdapter(cls).validate_python(values)
    except ValidationError as exc:
        raise UsageError(str(exc)) from exc
    config.validate()
    return config


@dataclass
class LetterFTarget:
    kind: Literal["letter_f"] = "letter_f"
    size: float = 0.5
    standoff_range: tuple[float, float] = (0.7, 1.0)
    tilt_deg: float = 36.0
    sample_pitch: float = 0.01
    albedo: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def build(self) -> TargetSurface:
        return make_letter_f(self.size, self.standoff_range, self.tilt_deg, self.sample_pitch, albedo=self.albedo, center=self.center)


@dataclass
class PlaneTarget:
    kind: Literal["plane"] = "plane"
    size: float = 0.3
    depth: float = 0.8
    sample_pitch: float = 0.01
    tilt_deg: float = 0.0
    albedo: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def build(self) -> TargetSurface:
        return make_plane_target(self.size, self.depth, self.sample_pitch, tilt_deg=self.tilt_deg, albedo=self.albedo, center=self.center)


@dataclass
class PointTarget:
    kind: Literal["point"] = "point"
    position: tuple[float, float, float] = (0.0, 0.0, 0.85)
    albedo: float = 1.0

    def build(self) -> TargetSurface:
        return make_point_target(self.position, albedo=self.albedo)


@dataclass
class NoTarget:
    kind: Literal["none"] = "none"

    def build(self) -> TargetSurface:
        return TargetSurface(points=np.zeros((0, 3)), normals=np.zeros((0, 3)), albedo=np.zeros(0), kind="none")


Target = Annotated[LetterFTarget | PlaneTarget | PointTarget | NoTarget, Field(discriminator="kind")]


@dataclass
class SensorSpec:
    """`realistic` draws the reported DCR population and delays; `ideal` has neither, nor any blur."""

    profile: Literal["realistic", "ideal"] = "realistic"
    max_delay: int = 25
    jitter_fwhm: float = JITTER_FWHM_PS
    jitter_spread: float = 0.0
    laser_pulse_fwhm: float = PULSE_FWHM_PS
    ambient_rate: float = 0.0
    pde: float = PDE
    exposure: float = EXPOSURE_S
    repetition_rate: float = REPETITION_RATE_HZ

    def build(self, rows: int, cols: int, seed: int) -> SensorModel:
        if self.profile == "ideal":
            return SensorModel.ideal(rows, cols, rng_seed=seed, exposure=self.exposure, ambient_rate=self.ambient_rate)

        return realistic_sensor(
            rows,
            cols,
            seed=seed,
            max_delay=self.max_delay,
            jitter_spread=self.jitter_spread,
            jitter_fwhm=self.jitter_fwhm,
            laser_pulse_fwhm=self.laser_pulse_fwhm,
            ambient_rate=self.ambient_rate,
            pde=self.pde,
            exposure=self.exposure,
            repetition_rate=self.repetition_rate,
        )


@dataclass
class SceneDescription:
    target: Target = Field(default_factory=LetterFTarget)
    sensor: SensorSpec = Field(default_factory=SensorSpec)
    rows: int = SENSOR_ROWS
    cols: int = SENSOR_COLS
    fov_extent: tuple[float, float] = (1.0, 1.0)
    bins: int = SENSOR_BINS
    bin_width: float = BIN_WIDTH_PS
    reference_bin: int = DEFAULT_REFERENCE_BIN
    signal_scale: float = 1e5
    first_scatter_amplitude: float | None = None
    include_return_leg: bool = True
    poisson: bool = True
    seed: int = 0

    def geometry(self) -> SceneGeometry:
        return grid_geometry(self.rows, self.cols, fov_extent=self.fov_extent)


def load_scene(path: str | Path | None = None) -> SceneDescription:
    """The scene in `path` (JSON or YAML); the letter 'F' setup when no path is given."""
    if path is None:
        return SceneDescription()

    return TypeAdapter(SceneDescription).validate_python(yaml.safe_load(Path(path).read_text(encoding="utf8")) or {})
