from __future__ import annotations

import dataclasses
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import AliasChoices, BeforeValidator, ConfigDict, Field, PlainSerializer
from pydantic.dataclasses import dataclass

from .constants import BIN_WIDTH_PS, C, DCR_BAD_PIXEL_THRESHOLD, EXPOSURE_S, JITTER_FWHM_PS, PDE, PS, PULSE_FWHM_PS, REPETITION_RATE_HZ
from .exceptions import DomainError

__all__ = [
    "ValueKind",
    "TimeHistogramCube",
    "WallPlane",
    "SceneGeometry",
    "VoxelVolume",
    "ReconstructionSpec",
    "TargetSurface",
    "SensorModel",
    "DcrMap",
    "DelayMap",
    "FwhmMap",
    "PeakEstimate",
    "CalibrationReport",
    "PhasorParams",
    "VirtualWavelet",
    "SweepEntry",
]

ARRAYS = ConfigDict(arbitrary_types_allowed=True)
PLANE_TOLERANCE = 1e-9


def as_readonly_array(x: Any) -> np.ndarray:
    arr = np.array(x, copy=True)
    arr.setflags(write=False)
    return arr


def as_optional_array(x: Any) -> np.ndarray | None:
    if x is None:
        return None
    return as_readonly_array(x)


def as_vector3(x: Any) -> np.ndarray:
    arr = np.array(x, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"Expected a 3D point, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def as_points(x: Any) -> np.ndarray:
    arr = np.array(x, dtype=np.float64).reshape(-1, 3)
    arr.setflags(write=False)
    return arr


def _to_list(arr: np.ndarray | None) -> list | None:
    return None if arr is None else arr.tolist()


Array = Annotated[np.ndarray, BeforeValidator(as_readonly_array), PlainSerializer(_to_list)]
OptionalArray = Annotated[np.ndarray | None, BeforeValidator(as_optional_array), PlainSerializer(_to_list)]
Vector3 = Annotated[np.ndarray, BeforeValidator(as_vector3), PlainSerializer(_to_list)]
Points = Annotated[np.ndarray, BeforeValidator(as_points), PlainSerializer(_to_list)]

ValueKind = Literal["counts", "real", "complex"]
VolumeKind = Literal["real", "complex"]
_DTYPES: dict[str, type[np.generic]] = {"counts": np.uint32, "real": np.float64, "complex": np.complex128}


def _cast(data: Any, value_kind: str) -> np.ndarray:
    data = np.asarray(data)
    if value_kind == "counts":
        if np.iscomplexobj(data) or np.any(data < 0) or not np.array_equal(data, np.round(data)):
            raise DomainError("Counts must be non-negative integers")
        return data.astype(np.uint32)
    if value_kind == "real" and np.iscomplexobj(data):
        raise DomainError("Complex values cannot be stored in a real-kind container")
    return data.astype(_DTYPES[value_kind])


@dataclass(frozen=True, eq=False, config=ARRAYS)
class TimeHistogramCube:
    """
    A rows x cols grid of photon-arrival histograms.

    `data` has shape (rows, cols, bins). Bin b of an aligned cube (one with a `reference_bin`)
    represents the time (b - reference_bin) * bin_width after light departs the laser spot.
    """

    data: Array
    bin_width: float = BIN_WIDTH_PS
    value_kind: ValueKind = "counts"
    reference_bin: int | None = None

    def __post_init__(self):
        if self.data.ndim != 3:
            raise DomainError(f"Cube data must be (rows, cols, bins), got shape {self.data.shape}")
        if not self.bin_width > 0:
            raise DomainError(f"bin_width must be positive, got {self.bin_width}")
        if self.data.dtype != _DTYPES[self.value_kind]:
            raise DomainError(f"{self.value_kind}-kind data must be {np.dtype(_DTYPES[self.value_kind])}, got {self.data.dtype}")

    @classmethod
    def from_array(
        cls, data: Any, *, bin_width: float = BIN_WIDTH_PS, value_kind: ValueKind = "real", reference_bin: int | None = None
    ) -> TimeHistogramCube:
        ref = None if reference_bin is None else int(reference_bin)
        return cls(data=_cast(data, value_kind), bin_width=float(bin_width), value_kind=value_kind, reference_bin=ref)

    def derive(self, data: Any, *, value_kind: ValueKind | None = None, **changes: Any) -> TimeHistogramCube:
        """A new cube sharing this cube's metadata, unless overridden in `changes`."""
        fields = {"bin_width": self.bin_width, "reference_bin": self.reference_bin} | changes
        return TimeHistogramCube.from_array(data, value_kind=value_kind or self.value_kind, **fields)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def bins(self) -> int:
        return self.data.shape[2]

    @property
    def pixel_count(self) -> int:
        return self.rows * self.cols

    @property
    def is_aligned(self) -> bool:
        return self.reference_bin is not None

    @property
    def path_per_bin(self) -> float:
        """Optical path length covered by one bin, in meters."""
        return self.bin_width * PS * C

    def histograms(self) -> np.ndarray:
        """The data as (pixels, bins), row-major over pixels."""
        return self.data.reshape(self.pixel_count, self.bins)

    def as_float(self) -> np.ndarray:
        if self.value_kind == "complex":
            raise DomainError("A complex cube has no real-valued view")
        return self.data.astype(np.float64)


@dataclass(frozen=True, eq=False, config=ARRAYS)
class WallPlane:
    origin: Vector3
    basis_u: Vector3
    basis_v: Vector3

    def __post_init__(self):
        gram = np.array(
            [
                [self.basis_u @ self.basis_u, self.basis_u @ self.basis_v],
                [self.basis_v @ self.basis_u, self.basis_v @ self.basis_v],
            ]
        )
        if not np.allclose(gram, np.eye(2), atol=PLANE_TOLERANCE, rtol=0.0):
            raise DomainError("The wall basis must be orthonormal")

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.basis_u, self.basis_v)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points) - self.origin) @ self.normal

    def to_plane_coords(self, points: np.ndarray) -> np.ndarray:
        offset = np.asarray(points) - self.origin
        return np.stack([offset @ self.basis_u, offset @ self.basis_v], axis=-1)


@dataclass(frozen=True, eq=False, config=ARRAYS)
class SceneGeometry:
    wall_plane: WallPlane
    pixel_points: Array
    laser_spot: Vector3
    camera_pos: Vector3
    laser_pos: Vector3
    fov_extent: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        points = self.pixel_points
        if points.ndim != 3 or points.shape[2] != 3 or points.dtype != np.float64:
            raise DomainError(f"pixel_points must be a float (rows, cols, 3) array, got {points.dtype} {points.shape}")

        if np.max(np.abs(self.wall_plane.signed_distance(points))) > PLANE_TOLERANCE:
            raise DomainError("Every pixel point must lie on the wall plane")
        if abs(self.wall_plane.signed_distance(self.laser_spot)) > PLANE_TOLERANCE:
            raise DomainError("The laser spot must lie on the wall plane")

        du, dv = self.grid_steps
        rows, cols = points.shape[:2]
        expected = points[0, 0] + np.arange(cols)[None, :, None] * du + np.arange(rows)[:, None, None] * dv
        if np.max(np.abs(points - expected)) > PLANE_TOLERANCE:
            raise DomainError("pixel_points must form a uniform grid")
        if cols > 1 and abs(np.linalg.norm(du) * cols - self.fov_extent[0]) > PLANE_TOLERANCE:
            raise DomainError("The pixel grid does not span the horizontal field of view")
        if rows > 1 and abs(np.linalg.norm(dv) * rows - self.fov_extent[1]) > PLANE_TOLERANCE:
            raise DomainError("The pixel grid does not span the vertical field of view")

        if self._inside_pixel_hull(self.laser_spot):
            raise DomainError("The laser spot must lie outside the camera's field of view")

    @property
    def grid_steps(self) -> tuple[np.ndarray, np.ndarray]:
        points = self.pixel_points
        du = points[0, 1] - points[0, 0] if points.shape[1] > 1 else np.zeros(3)
        dv = points[1, 0] - points[0, 0] if points.shape[0] > 1 else np.zeros(3)
        return du, dv

    def _inside_pixel_hull(self, point: np.ndarray) -> bool:
        du, dv = self.grid_steps
        steps = [(step, n - 1) for step, n in ((du, self.cols), (dv, self.rows)) if np.linalg.norm(step) > 0]
        offset = point - self.pixel_points[0, 0]
        if not steps:
            return bool(np.linalg.norm(offset) <= PLANE_TOLERANCE)

        basis = np.stack([step for step, _ in steps], axis=1)
        coeffs, *_ = np.linalg.lstsq(basis, offset, rcond=None)
        if np.linalg.norm(offset - basis @ coeffs) > PLANE_TOLERANCE:
            return False
        return all(-PLANE_TOLERANCE <= c <= limit + PLANE_TOLERANCE for c, (_, limit) in zip(coeffs, steps, strict=True))

    @property
    def rows(self) -> int:
        return self.pixel_points.shape[0]

    @property
    def cols(self) -> int:
        return self.pixel_points.shape[1]

    def flat_points(self) -> np.ndarray:
        return self.pixel_points.reshape(-1, 3)

    def return_leg_lengths(self) -> np.ndarray:
        """Distance from every pixel's wall point to the camera, (rows, cols)."""
        return np.linalg.norm(self.pixel_points - self.camera_pos, axis=-1)

    @property
    def camera_wall_distance(self) -> float:
        return float(abs(self.wall_plane.signed_distance(self.camera_pos)))

    @property
    def laser_wall_distance(self) -> float:
        return float(abs(self.wall_plane.signed_distance(self.laser_pos)))


@dataclass(frozen=True, eq=False, config=ARRAYS)
class VoxelVolume:
    """Values on a regular grid of cubic voxels; `origin` is the outer corner of voxel (0, 0, 0)."""

    data: Array
    origin: Vector3
    voxel_size: float
    value_kind: VolumeKind = "real"

    def __post_init__(self):
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise DomainError(f"Volume data must be (nx, ny, nz) with every axis >= 1, got {self.data.shape}")
        if not self.voxel_size > 0:
            raise DomainError(f"voxel_size must be positive, got {self.voxel_size}")
        if self.data.dtype != _DTYPES[self.value_kind]:
            raise DomainError(f"{self.value_kind}-kind volume must be {np.dtype(_DTYPES[self.value_kind])}, got {self.data.dtype}")

    @classmethod
    def from_array(cls, data: Any, *, origin: Any, voxel_size: float, value_kind: VolumeKind = "real") -> VoxelVolume:
        return cls(data=_cast(data, value_kind), origin=origin, voxel_size=float(voxel_size), value_kind=value_kind)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.origin[i] + (np.arange(n) + 0.5) * self.voxel_size for i, n in enumerate(self.dims))

    def center(self, index: tuple[int, int, int]) -> np.ndarray:
        return self.origin + (np.asarray(index) + 0.5) * self.voxel_size

    def magnitude(self) -> VoxelVolume:
        return VoxelVolume.from_array(np.abs(self.data), origin=self.origin, voxel_size=self.voxel_size)


@dataclass(frozen=True)
class ReconstructionSpec:
    dims: tuple[int, int, int] = (120, 120, 120)
    origin: tuple[float, float, float] = (-0.6, -0.6, 0.1)
    voxel_size: float = 0.01
    attenuation_compensation: bool = False
    filter_kind: Literal["none", "depth_laplacian"] = "depth_laplacian"

    def __post_init__(self):
        if min(self.dims) < 1:
            raise DomainError(f"Every volume dimension must be >= 1, got {self.dims}")
        if not self.voxel_size > 0:
            raise DomainError(f"voxel_size must be positive, got {self.voxel_size}")
        if self.origin[2] + 0.5 * self.voxel_size < 0:
            raise DomainError("The reconstruction volume must lie in the hidden half-space (z >= 0)")

    @classmethod
    def around(cls, center: Any, voxels: int, voxel_size: float, **kwargs: Any) -> ReconstructionSpec:
        """A cubic grid of `voxels`^3 whose central voxel is centered on `center`."""
        center = np.asarray(center, dtype=np.float64)
        origin = center - (voxels // 2 + 0.5) * voxel_size
        return cls(dims=(voxels,) * 3, origin=tuple(float(o) for o in origin), voxel_size=voxel_size, **kwargs)

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.origin[i] + (np.arange(n) + 0.5) * self.voxel_size for i, n in enumerate(self.dims))

    def volume(self, data: Any, value_kind: VolumeKind = "real") -> VoxelVolume:
        return VoxelVolume.from_array(data, origin=self.origin, voxel_size=self.voxel_size, value_kind=value_kind)


@dataclass(frozen=True, eq=False, config=ARRAYS)
class TargetSurface:
    """Point samples of a hidden Lambertian surface; each sample stands for `patch_area` square meters."""

    points: Points
    normals: Points
    albedo: Array
    patch_area: float = 1.0
    kind: Literal["letter_f", "plane", "point", "none"] = "point"

    def __post_init__(self):
        n = len(self.points)
        if self.normals.shape != (n, 3) or self.albedo.shape != (n,):
            raise DomainError("points, normals and albedo must describe the same number of samples")
        if n and np.max(np.abs(np.linalg.norm(self.normals, axis=1) - 1.0)) > 1e-9:
            raise DomainError("Surface normals must be unit length")
        if n and (np.min(self.albedo) < 0 or np.max(self.albedo) > 1):
            raise DomainError("Albedo must lie in [0, 1]")
        if not self.patch_area > 0:
            raise DomainError(f"patch_area must be positive, got {self.patch_area}")

    def __len__(self) -> int:
        return len(self.points)

    def with_albedo(self, albedo: Any) -> TargetSurface:
        return dataclasses.replace(self, albedo=np.broadcast_to(np.asarray(albedo, dtype=np.float64), (len(self),)))


@dataclass(frozen=True, eq=False, config=ARRAYS)
class SensorModel:
    """Instrument imperfections of the SPAD array and the laser."""

    dcr: Array
    delay: Array
    jitter_fwhm: float = JITTER_FWHM_PS
    laser_pulse_fwhm: float = PULSE_FWHM_PS
    ambient_rate: float = 0.0
    pde: float = PDE
    exposure: float = EXPOSURE_S
    rng_seed: int = 0
    jitter_fwhm_map: OptionalArray = None
    repetition_rate: float = REPETITION_RATE_HZ

    def __post_init__(self):
        if self.dcr.ndim != 2 or self.delay.shape != self.dcr.shape:
            raise DomainError("dcr and delay must be (rows, cols) maps of the same shape")
        if np.any(self.dcr < 0) or self.ambient_rate < 0:
            raise DomainError("Dark and ambient count rates must be non-negative")
        if not np.array_equal(self.delay, np.round(self.delay)):
            raise DomainError("Per-pixel delays must be whole bins")
        if self.jitter_fwhm < 0 or self.laser_pulse_fwhm < 0:
            raise DomainError("Timing widths must be non-negative")
        if not 0 < self.pde <= 1:
            raise DomainError(f"pde must lie in (0, 1], got {self.pde}")
        if not self.exposure > 0:
            raise DomainError(f"exposure must be positive, got {self.exposure}")
        if self.jitter_fwhm_map is not None and (self.jitter_fwhm_map.shape != self.dcr.shape or np.any(self.jitter_fwhm_map < 0)):
            raise DomainError("jitter_fwhm_map must be a non-negative (rows, cols) map")

    @classmethod
    def ideal(cls, rows: int, cols: int, **kwargs: Any) -> SensorModel:
        """No dark counts, no delays, no blur, perfect efficiency, one second of exposure."""
        defaults = {
            "dcr": np.zeros((rows, cols)),
            "delay": np.zeros((rows, cols), dtype=np.int64),
            "jitter_fwhm": 0.0,
            "laser_pulse_fwhm": 0.0,
            "pde": 1.0,
            "exposure": 1.0,
        }
        return cls(**(defaults | kwargs))

    @property
    def shape(self) -> tuple[int, int]:
        return self.dcr.shape

    def jitter_map(self) -> np.ndarray:
        if self.jitter_fwhm_map is not None:
            return self.jitter_fwhm_map.astype(np.float64)
        return np.full(self.shape, self.jitter_fwhm)

    def irf_fwhm_map(self) -> np.ndarray:
        """Per-pixel instrument response width in ps."""
        return np.hypot(self.laser_pulse_fwhm, self.jitter_map())


@dataclass(frozen=True, eq=False, config=ARRAYS)
class DcrMap:
    rates: Array
    bad_mask: Array
    threshold: float = DCR_BAD_PIXEL_THRESHOLD

    def __post_init__(self):
        if self.bad_mask.shape != self.rates.shape:
            raise DomainError("bad_mask and rates must have the same shape")
        if not np.array_equal(self.bad_mask.astype(bool), self.rates > self.threshold):
            raise DomainError("bad_mask must flag exactly the pixels whose rate exceeds the threshold")

    @classmethod
    def from_rates(cls, rates: Any, threshold: float = DCR_BAD_PIXEL_THRESHOLD) -> DcrMap:
        rates = np.asarray(rates, dtype=np.float64)
        return cls(rates=rates, bad_mask=rates > threshold, threshold=float(threshold))

    @property
    def bad_count(self) -> int:
        return int(np.count_nonzero(self.bad_mask))

    def fraction_below(self, limit: float) -> float:
        return float(np.mean(self.rates < limit))


@dataclass(frozen=True, eq=False, config=ARRAYS)
class DelayMap:
    """
    Per-pixel integer shifts found by alignment.

    `offsets` is the first-scatter peak bin minus `reference_bin`; `return_leg` is the extra shift applied
    afterwards to compensate each pixel's wall-to-camera leg.
    """

    offsets: Array
    reference_bin: int
    return_leg: Array

    def __post_init__(self):
        if self.offsets.shape != self.return_leg.shape:
            raise DomainError("offsets and return_leg must have the same shape")
        if not (np.issubdtype(self.offsets.dtype, np.integer) and np.issubdtype(self.return_leg.dtype, np.integer)):
            raise DomainError("Delay offsets must be integer bins")

    def spread(self, mask: np.ndarray | None = None) -> int:
        values = self.offsets if mask is None else self.offsets[mask]
        return int(values.max() - values.min()) if values.size else 0


@dataclass(frozen=True, eq=False, config=ARRAYS)
class FwhmMap:
    """Per-pixel first-scatter widths in ps; NaN where no peak was measured."""

    widths: Array

    def __post_init__(self):
        measured = self.widths[np.isfinite(self.widths)]
        if np.any(measured <= 0):
            raise DomainError("Every measured FWHM must be positive")

    @property
    def mean_ps(self) -> float:
        return float(np.nanmean(self.widths))

    def in_bins(self, bin_width: float) -> np.ndarray:
        return self.widths / bin_width


@dataclass(frozen=True)
class PeakEstimate:
    peak_bin: int
    peak_subbin: float
    fwhm_ps: float


@dataclass(frozen=True)
class CalibrationReport:
    pixels: int
    fraction_dcr_below_100: float
    fraction_dcr_below_1000: float
    bad_pixels: int
    reference_bin: int
    delay_spread_bins: int
    delay_spread_ps: float
    mean_fwhm_ps: float
    min_fwhm_ps: float
    max_fwhm_ps: float
    mean_fwhm_bins: float
    guard_bins: int
    peak_histogram: dict[int, int] = Field(default_factory=dict)
    fwhm_histogram: dict[int, int] = Field(default_factory=dict)


@dataclass(frozen=True)
class PhasorParams:
    """Virtual illumination: `wavelength` in meters, `sigma` the wavelet length in wavelengths."""

    wavelength: float = Field(validation_alias=AliasChoices("lambda", "wavelength"))
    sigma: float = Field(validation_alias=AliasChoices("sigma", "cycles"))

    def __post_init__(self):
        if not self.wavelength > 0 or not self.sigma > 0:
            raise DomainError(f"wavelength and sigma must be positive, got ({self.wavelength}, {self.sigma})")


@dataclass(frozen=True, eq=False, config=ARRAYS)
class VirtualWavelet:
    samples: Array
    center_index: int

    def __post_init__(self):
        if self.samples.ndim != 1 or len(self.samples) % 2 == 0 or self.center_index != len(self.samples) // 2:
            raise DomainError("A wavelet has an odd number of samples centered on its middle sample")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True, kw_only=True)
class SweepEntry:
    wavelength: float = Field(validation_alias=AliasChoices("lambda", "wavelength"), serialization_alias="lambda")
    sigma: float
    peak_to_background: float
    iou: float | None = None
