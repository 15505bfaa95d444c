from __future__ import annotations

import logging
import time
from typing import Any

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .constants import BIN_WIDTH_PS, JITTER_FWHM_PS, SENSOR_BINS
from .exceptions import DomainError, SimulationError
from .histogram import path_length_to_bins
from .objects import SceneGeometry, SensorModel, TargetSurface, TimeHistogramCube

__all__ = [
    "DEFAULT_REFERENCE_BIN",
    "FIRST_SCATTER_GAIN",
    "FWHM_TO_SIGMA",
    "render_ideal_transients",
    "apply_instrument",
    "dark_frame",
    "shift_histograms",
    "make_letter_f",
    "make_point_target",
    "make_plane_target",
    "realistic_sensor",
]

logger = logging.getLogger(__name__)

DEFAULT_REFERENCE_BIN = 100
FIRST_SCATTER_GAIN = 10.0
FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))

# Fractions of the letter's bounding square covered by its strokes, in normalized (u, v), v up.
_STEM = (0.0, 0.2, 0.0, 1.0)
_TOP_BAR = (0.0, 1.0, 0.8, 1.0)
_MIDDLE_BAR = (0.0, 0.7, 0.4, 0.6)


def _third_bounce(geometry: SceneGeometry, target: TargetSurface) -> tuple[np.ndarray, np.ndarray]:
    """Path lengths |S-x| + |x-w_i| and Lambertian weights, both (pixels, points)."""
    walls = geometry.flat_points()
    points = target.points

    to_spot = geometry.laser_spot - points
    r1 = np.linalg.norm(to_spot, axis=1)
    cos1 = np.clip(np.einsum("nk,nk->n", target.normals, to_spot) / r1, 0.0, None)

    to_wall = walls[:, None, :] - points[None, :, :]
    r2 = np.linalg.norm(to_wall, axis=2)
    cos2 = np.clip(np.einsum("nk,pnk->pn", target.normals, to_wall) / r2, 0.0, None)

    weight = (target.albedo * target.patch_area * cos1 / r1**2)[None, :] * cos2 / r2**2
    return r1[None, :] + r2, weight


def render_ideal_transients(
    geometry: SceneGeometry,
    target: TargetSurface,
    *,
    bins: int = SENSOR_BINS,
    bin_width: float = BIN_WIDTH_PS,
    reference_bin: int = DEFAULT_REFERENCE_BIN,
    first_scatter_amplitude: float | None = None,
    signal_scale: float = 1.0,
    include_return_leg: bool = False,
) -> TimeHistogramCube:
    """
    Noiseless three-bounce transients: laser spot -> target -> wall point -> camera.

    A path of length L lands at bin `reference_bin + L / path_per_bin`, split linearly between the
    two straddling bins. The direct reflection is an impulse at `reference_bin` in every pixel.

    Without `include_return_leg` the result is already aligned (its `reference_bin` is set).
    With it, every pixel also carries its wall-to-camera leg beyond the shortest one, the way
    a raw acquisition does, and the result is unaligned.
    """
    if bins < 2:
        raise DomainError(f"A histogram needs at least two bins, got {bins}")
    if not 0 <= reference_bin < bins:
        raise DomainError(f"reference_bin {reference_bin} outside [0, {bins})")
    if len(target) and np.min(target.points[:, 2]) <= 0:
        raise DomainError("Target points must lie in the hidden half-space (z > 0)")

    started = time.perf_counter()
    data = np.zeros((geometry.rows * geometry.cols, bins))

    if len(target):
        lengths, weight = _third_bounce(geometry, target)
        if include_return_leg:
            legs = geometry.return_leg_lengths().reshape(-1)
            lengths = lengths + (legs - legs.min())[:, None]

        position = reference_bin + path_length_to_bins(lengths, bin_width)
        overflow = position > bins - 1
        if np.any(overflow):
            pixel, point = np.argwhere(overflow)[0]
            raise SimulationError(
                f"Path via target point {tuple(float(c) for c in np.round(target.points[point], 6))} reaches bin {position[pixel, point]:.1f}, "
                f"beyond the {bins}-bin histogram"
            )

        weight = weight * signal_scale
        lo = np.floor(position).astype(np.int64)
        frac = position - lo
        hi = np.minimum(lo + 1, bins - 1)
        offset = np.arange(len(data))[:, None] * bins
        data += np.bincount((offset + lo).ravel(), (weight * (1.0 - frac)).ravel(), minlength=data.size).reshape(data.shape)
        data += np.bincount((offset + hi).ravel(), (weight * frac).ravel(), minlength=data.size).reshape(data.shape)

    if first_scatter_amplitude is None:
        peak = data.max()
        first_scatter_amplitude = FIRST_SCATTER_GAIN * peak if peak > 0 else signal_scale
    data[:, reference_bin] += first_scatter_amplitude

    logger.info(
        f"Rendered {len(target)} target samples into {len(data)} pixels ({len(target) * len(data):,} paths) "
        f"in {time.perf_counter() - started:.2f}s"
    )

    return TimeHistogramCube.from_array(
        data.reshape(geometry.rows, geometry.cols, bins),
        bin_width=bin_width,
        value_kind="real",
        reference_bin=None if include_return_leg else reference_bin,
    )


def shift_histograms(histograms: np.ndarray, shifts: np.ndarray, fill: np.ndarray | float = 0.0) -> np.ndarray:
    """Shift each row of (pixels, bins) by an integer (positive = later); vacated bins take `fill`."""
    histograms = np.asarray(histograms)
    pixels, bins = histograms.shape
    shifts = np.asarray(shifts, dtype=np.int64).reshape(pixels)
    fill = np.broadcast_to(np.asarray(fill, dtype=histograms.dtype), (pixels,))

    source = np.arange(bins)[None, :] - shifts[:, None]
    valid = (source >= 0) & (source < bins)
    gathered = np.take_along_axis(histograms, np.clip(source, 0, bins - 1), axis=1)
    return np.where(valid, gathered, fill[:, None])


def _blur(histograms: np.ndarray, fwhm_bins: np.ndarray) -> np.ndarray:
    out = histograms.copy()
    for width in np.unique(fwhm_bins):
        if width <= 0:
            continue
        rows = fwhm_bins == width
        out[rows] = gaussian_filter1d(histograms[rows], width * FWHM_TO_SIGMA, axis=1, mode="constant", truncate=4.0)
    return out


def apply_instrument(ideal: TimeHistogramCube, sensor: SensorModel, *, poisson: bool = True) -> TimeHistogramCube:
    """
    Degrade an ideal cube the way the SPAD camera does.

    Each pixel is blurred by a Gaussian of FWHM hypot(laser pulse, jitter), delayed by its integer
    offset, scaled by pde * exposure and lifted by (dcr + ambient) * exposure / bins per bin.
    With `poisson` every bin is then drawn from a Poisson law on a per-pixel stream of `rng_seed`;
    without it the expected counts come back as a real-kind cube.
    """
    if ideal.value_kind == "complex":
        raise DomainError("The instrument model takes a real-valued cube")
    if (ideal.rows, ideal.cols) != sensor.shape:
        raise DomainError(f"Sensor maps are {sensor.shape} but the cube is {ideal.rows}x{ideal.cols}")

    histograms = ideal.as_float().reshape(ideal.pixel_count, ideal.bins)
    if np.any(histograms < 0):
        raise DomainError("An ideal cube cannot hold negative energy")

    histograms = _blur(histograms, sensor.irf_fwhm_map().reshape(-1) / ideal.bin_width)
    histograms = shift_histograms(histograms, sensor.delay.reshape(-1))

    background = (sensor.dcr.reshape(-1) + sensor.ambient_rate) * sensor.exposure / ideal.bins
    expected = histograms * sensor.pde * sensor.exposure + background[:, None]
    shape = (ideal.rows, ideal.cols, ideal.bins)

    if not poisson:
        return ideal.derive(expected.reshape(shape), value_kind="real", reference_bin=None)

    streams = np.random.SeedSequence(sensor.rng_seed).spawn(len(expected))
    counts = np.empty(expected.shape, dtype=np.int64)
    for pixel, (stream, mean) in enumerate(zip(streams, expected, strict=True)):
        counts[pixel] = np.random.default_rng(stream).poisson(mean)

    logger.debug(f"Sampled {counts.sum():,} photon counts over {len(counts)} pixels")
    return ideal.derive(counts.reshape(shape), value_kind="counts", reference_bin=None)


def dark_frame(
    sensor: SensorModel, *, bins: int = SENSOR_BINS, bin_width: float = BIN_WIDTH_PS, poisson: bool = True
) -> TimeHistogramCube:
    """An acquisition with the laser off: dark counts and ambient light only."""
    rows, cols = sensor.shape
    empty = TimeHistogramCube.from_array(np.zeros((rows, cols, bins)), bin_width=bin_width)
    return apply_instrument(empty, sensor, poisson=poisson)


def _letter_mask(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    mask = np.zeros(np.broadcast(u, v).shape, dtype=bool)
    for u0, u1, v0, v1 in (_STEM, _TOP_BAR, _MIDDLE_BAR):
        mask |= (u >= u0) & (u <= u1) & (v >= v0) & (v <= v1)
    return mask


def _tilted_sheet(
    px: np.ndarray, py: np.ndarray, *, depth: float, tilt_deg: float, center: tuple[float, float]
) -> tuple[np.ndarray, np.ndarray]:
    """Points of a sheet facing the wall, rotated about the vertical axis through (center, depth)."""
    tilt = np.radians(tilt_deg)
    points = np.stack(
        [center[0] + px * np.cos(tilt), center[1] + py, depth + px * np.sin(tilt)],
        axis=1,
    )
    normals = np.broadcast_to(np.array([np.sin(tilt), 0.0, -np.cos(tilt)]), points.shape)
    return points, normals


def make_letter_f(
    size: float = 0.5,
    standoff_range: tuple[float, float] = (0.7, 1.0),
    tilt_deg: float = 36.0,
    sample_pitch: float = 0.01,
    *,
    albedo: float = 1.0,
    center: tuple[float, float] = (0.0, 0.0),
) -> TargetSurface:
    """A planar letter 'F' of `size` x `size` meters, tilted about the vertical axis and centered in `standoff_range`."""
    if not size > 0:
        raise DomainError(f"size must be positive, got {size}")
    if not 0 < sample_pitch < size:
        raise DomainError(f"sample_pitch must lie in (0, size), got {sample_pitch}")
    near, far = standoff_range
    if not 0 < near <= far:
        raise DomainError(f"standoff_range must be increasing and positive, got {standoff_range}")

    depth = (near + far) / 2
    half_extent = size / 2 * abs(np.sin(np.radians(tilt_deg)))
    if half_extent > (far - near) / 2 + 1e-12:
        raise DomainError(f"A {size} m letter tilted by {tilt_deg} deg spans {2 * half_extent:.3f} m in depth, more than {standoff_range}")

    n = int(np.floor(size / sample_pitch + 1e-9))
    centers = (np.arange(n) + 0.5) * sample_pitch
    u, v = np.meshgrid(centers / size, centers / size, indexing="xy")
    keep = _letter_mask(u, v)

    px = u[keep] * size - size / 2
    py = v[keep] * size - size / 2
    points, normals = _tilted_sheet(px, py, depth=depth, tilt_deg=tilt_deg, center=center)

    return TargetSurface(
        points=points,
        normals=normals,
        albedo=np.full(len(points), albedo),
        patch_area=sample_pitch**2,
        kind="letter_f",
    )


def make_plane_target(
    size: float,
    depth: float,
    sample_pitch: float,
    *,
    tilt_deg: float = 0.0,
    albedo: float = 1.0,
    center: tuple[float, float] = (0.0, 0.0),
) -> TargetSurface:
    """A square sheet of side `size` at `depth`, facing the wall unless tilted."""
    if not 0 < sample_pitch < size:
        raise DomainError(f"sample_pitch must lie in (0, size), got {sample_pitch}")
    if not depth > 0:
        raise DomainError(f"depth must be positive, got {depth}")

    n = int(np.floor(size / sample_pitch + 1e-9))
    centers = (np.arange(n) + 0.5) * sample_pitch - size / 2
    px, py = (a.reshape(-1) for a in np.meshgrid(centers, centers, indexing="xy"))
    points, normals = _tilted_sheet(px, py, depth=depth, tilt_deg=tilt_deg, center=center)

    return TargetSurface(
        points=points,
        normals=normals,
        albedo=np.full(len(points), albedo),
        patch_area=sample_pitch**2,
        kind="plane",
    )


def make_point_target(position: Any, *, albedo: float = 1.0, normal: Any = (0.0, 0.0, -1.0), patch_area: float = 1.0) -> TargetSurface:
    return TargetSurface(
        points=[position],
        normals=[normal],
        albedo=[albedo],
        patch_area=patch_area,
        kind="point",
    )


def realistic_sensor(
    rows: int,
    cols: int,
    *,
    seed: int = 0,
    max_delay: int = 25,
    jitter_spread: float = 0.0,
    **kwargs: Any,
) -> SensorModel:
    """
    A sensor with the reported population: 80% of pixels under 100 counts/s, 90% under 1000 counts/s
    and the rest hot, integer delays uniform over [0, max_delay] bins.

    `jitter_spread` > 0 draws per-pixel jitter uniformly within +-spread (relative) of the nominal value.
    """
    if max_delay < 0:
        raise DomainError(f"max_delay must be non-negative, got {max_delay}")
    if not 0 <= jitter_spread < 1:
        raise DomainError(f"jitter_spread must lie in [0, 1), got {jitter_spread}")

    rng = np.random.default_rng(seed)
    pixels = rows * cols
    quiet = round(0.8 * pixels)
    moderate = round(0.9 * pixels) - quiet
    hot = pixels - quiet - moderate

    dcr = np.concatenate(
        [
            rng.uniform(5.0, 80.0, quiet),
            rng.uniform(150.0, 800.0, moderate),
            rng.uniform(1500.0, 5000.0, hot),
        ]
    )
    dcr = rng.permutation(dcr).reshape(rows, cols)
    delay = rng.integers(0, max_delay, size=(rows, cols), endpoint=True)

    fields: dict[str, Any] = {"rng_seed": seed} | kwargs
    if jitter_spread > 0:
        nominal = fields.get("jitter_fwhm", JITTER_FWHM_PS)
        fields["jitter_fwhm_map"] = nominal * rng.uniform(1 - jitter_spread, 1 + jitter_spread, size=(rows, cols))

    return SensorModel(dcr=dcr, delay=delay, **fields)
