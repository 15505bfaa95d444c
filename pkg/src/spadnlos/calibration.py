from __future__ import annotations

import logging
import math
from collections import Counter
from typing import Any

import numpy as np
from pydantic.dataclasses import dataclass

from .constants import BIN_WIDTH_PS, DCR_BAD_PIXEL_THRESHOLD
from .exceptions import CalibrationError, DomainError, NoPeakError
from .histogram import path_length_to_bins
from .objects import ARRAYS, CalibrationReport, DcrMap, DelayMap, FwhmMap, PeakEstimate, SceneGeometry, TimeHistogramCube
from .simulator import shift_histograms

__all__ = [
    "DEFAULT_GATE",
    "TAIL_FRACTION",
    "CalibrationResult",
    "estimate_dcr",
    "interpolate_bad_pixels",
    "background_estimate",
    "detect_first_scatter_peak",
    "align_histograms",
    "combined_fwhm",
    "estimate_fwhm_map",
    "default_guard",
    "strip_first_scatter",
    "calibrate",
]

logger = logging.getLogger(__name__)

DEFAULT_GATE = (0, 200)
TAIL_FRACTION = 0.1
GUARD_FWHM_MULTIPLE = 3.0


def estimate_dcr(dark: TimeHistogramCube, exposure: float, threshold: float = DCR_BAD_PIXEL_THRESHOLD) -> DcrMap:
    """Dark count rate per pixel from an acquisition with the laser off."""
    if not exposure > 0:
        raise DomainError(f"exposure must be positive, got {exposure}")

    dcr = DcrMap.from_rates(dark.as_float().sum(axis=2) / exposure, threshold)
    logger.info(f"DCR: {dcr.fraction_below(100):.1%} of pixels below 100 counts/s, {dcr.bad_count} above {threshold:g} counts/s")
    return dcr


def interpolate_bad_pixels(cube: TimeHistogramCube, bad_mask: Any) -> TimeHistogramCube:
    """
    Replace every bad pixel's histogram by the bin-wise mean of its good 8-neighbours.

    A bad pixel with no good neighbour looks one ring further out until it finds one. Only pixels that
    were good to begin with contribute.
    """
    bad = np.asarray(bad_mask, dtype=bool)
    if bad.shape != (cube.rows, cube.cols):
        raise DomainError(f"bad_mask is {bad.shape} but the cube is {cube.rows}x{cube.cols}")
    if not bad.any():
        return cube
    if bad.all():
        raise CalibrationError("Every pixel is bad; nothing to interpolate from")

    source = cube.as_float()
    out = source.copy()
    for row, col in np.argwhere(bad):
        radius = 1
        while True:
            r0, r1 = max(row - radius, 0), min(row + radius + 1, cube.rows)
            c0, c1 = max(col - radius, 0), min(col + radius + 1, cube.cols)
            good = ~bad[r0:r1, c0:c1]
            if good.any():
                out[row, col] = source[r0:r1, c0:c1][good].mean(axis=0)
                break
            radius += 1

    logger.info(f"Interpolated {int(bad.sum())} bad pixels")
    return cube.derive(out, value_kind="real")


def background_estimate(histograms: np.ndarray) -> np.ndarray | float:
    """Median of the last 10% of bins, along the last axis."""
    histograms = np.asarray(histograms, dtype=np.float64)
    tail = max(1, int(round(histograms.shape[-1] * TAIL_FRACTION)))
    return np.median(histograms[..., -tail:], axis=-1)


def _check_gate(gate: tuple[int, int], bins: int) -> tuple[int, int]:
    start, stop = int(gate[0]), min(int(gate[1]), bins)
    if not 0 <= start < stop:
        raise DomainError(f"Gate {tuple(gate)} does not select any of {bins} bins")
    return start, stop


def _crossing(histogram: np.ndarray, peak: int, half: float, step: int) -> float:
    """Sub-bin position where the histogram falls to `half`, walking away from `peak` by `step`."""
    i = peak
    while 0 <= i + step < len(histogram) and histogram[i + step] > half:
        i += step
    j = i + step
    if not 0 <= j < len(histogram) or histogram[i] <= histogram[j]:
        return float(i)
    return i + step * (histogram[i] - half) / (histogram[i] - histogram[j])


def detect_first_scatter_peak(
    histogram: Any,
    gate: tuple[int, int] = DEFAULT_GATE,
    *,
    bin_width: float = BIN_WIDTH_PS,
    pixel: tuple[int, int] | None = None,
) -> PeakEstimate:
    """
    Gated argmax (first index on ties) with a 3-point parabolic refinement.

    The width is measured between the half-maximum crossings above the histogram's tail background,
    each located by linear interpolation.
    """
    histogram = np.asarray(histogram, dtype=np.float64)
    start, stop = _check_gate(gate, len(histogram))
    window = histogram[start:stop]
    if not np.any(window > 0):
        raise NoPeakError(f"No signal in bins [{start}, {stop})", pixel=pixel)

    peak = start + int(np.argmax(window))
    top = histogram[peak]

    subbin = float(peak)
    if 0 < peak < len(histogram) - 1:
        left, right = histogram[peak - 1], histogram[peak + 1]
        curvature = left - 2 * top + right
        if curvature < 0:
            subbin += 0.5 * (left - right) / curvature

    baseline = min(float(background_estimate(histogram)), top)
    half = baseline + (top - baseline) / 2
    width = _crossing(histogram, peak, half, 1) - _crossing(histogram, peak, half, -1)

    return PeakEstimate(peak_bin=peak, peak_subbin=subbin, fwhm_ps=float(width * bin_width))


def _peaks(cube: TimeHistogramCube, gate: tuple[int, int], skip: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    histograms = cube.as_float()
    peaks = np.zeros((cube.rows, cube.cols), dtype=np.int64)
    widths = np.full((cube.rows, cube.cols), np.nan)
    for row in range(cube.rows):
        for col in range(cube.cols):
            if skip[row, col]:
                continue
            estimate = detect_first_scatter_peak(histograms[row, col], gate, bin_width=cube.bin_width, pixel=(row, col))
            peaks[row, col] = estimate.peak_bin
            widths[row, col] = estimate.fwhm_ps
    return peaks, widths


def _skip_mask(cube: TimeHistogramCube, bad_mask: Any) -> np.ndarray:
    if bad_mask is None:
        return np.zeros((cube.rows, cube.cols), dtype=bool)

    mask = np.asarray(bad_mask, dtype=bool)
    if mask.shape != (cube.rows, cube.cols):
        raise DomainError(f"bad_mask is {mask.shape} but the cube is {cube.rows}x{cube.cols}")
    if mask.all():
        raise CalibrationError("Every pixel is bad")
    return mask


def align_histograms(
    cube: TimeHistogramCube,
    gate: tuple[int, int],
    geometry: SceneGeometry,
    *,
    reference_bin: int | None = None,
    bad_mask: Any = None,
) -> tuple[TimeHistogramCube, DelayMap]:
    """
    Shift every histogram so its first-scatter peak lands on `reference_bin`, then compensate each
    pixel's wall-to-camera leg relative to the shortest one.

    `reference_bin` defaults to the median detected peak. Vacated bins take the pixel's tail background.
    Pixels in `bad_mask` are shifted by the reference only (offset 0).
    """
    if (geometry.rows, geometry.cols) != (cube.rows, cube.cols):
        raise DomainError(f"Geometry has {geometry.rows}x{geometry.cols} pixels but the cube has {cube.rows}x{cube.cols}")

    skip = _skip_mask(cube, bad_mask)
    peaks, _ = _peaks(cube, gate, skip)
    if reference_bin is None:
        reference_bin = int(np.round(np.median(peaks[~skip])))
    elif not 0 <= reference_bin < cube.bins:
        raise DomainError(f"reference_bin {reference_bin} outside [0, {cube.bins})")

    offsets = np.where(skip, 0, peaks - reference_bin)

    legs = geometry.return_leg_lengths()
    return_leg = np.round(path_length_to_bins(legs - legs.min(), cube.bin_width)).astype(np.int64)

    histograms = cube.as_float().reshape(cube.pixel_count, cube.bins)
    fill = background_estimate(histograms)
    histograms = shift_histograms(histograms, -offsets.reshape(-1), fill)
    histograms = shift_histograms(histograms, -return_leg.reshape(-1), fill)

    delays = DelayMap(offsets=offsets, reference_bin=reference_bin, return_leg=return_leg)
    logger.info(
        f"Aligned {cube.pixel_count} pixels on bin {reference_bin}: delay spread {delays.spread(~skip)} bins, "
        f"return-leg shifts up to {int(return_leg.max())} bins"
    )

    aligned = cube.derive(histograms.reshape(cube.data.shape), value_kind="real", reference_bin=reference_bin)
    return aligned, delays


def combined_fwhm(tau_l: float, tau_d: float) -> float:
    """Width of a Gaussian pulse observed through Gaussian jitter."""
    if tau_l < 0 or tau_d < 0:
        raise DomainError(f"Widths must be non-negative, got ({tau_l}, {tau_d})")
    return float(np.hypot(tau_l, tau_d))


def estimate_fwhm_map(cube: TimeHistogramCube, gate: tuple[int, int] = DEFAULT_GATE, *, bad_mask: Any = None) -> FwhmMap:
    skip = _skip_mask(cube, bad_mask)
    _, widths = _peaks(cube, gate, skip)
    fwhm = FwhmMap(widths=widths)
    logger.info(f"First-scatter FWHM: mean {fwhm.mean_ps:.1f} ps ({fwhm.mean_ps / cube.bin_width:.2f} bins)")
    return fwhm


def default_guard(fwhm: FwhmMap, bin_width: float) -> int:
    return int(math.ceil(GUARD_FWHM_MULTIPLE * fwhm.mean_ps / bin_width))


def strip_first_scatter(
    cube: TimeHistogramCube,
    reference_bin: int | None = None,
    guard: int = 0,
    *,
    delay_map: DelayMap | None = None,
) -> TimeHistogramCube:
    """
    Replace the bins within `guard` of the direct reflection by the pixel's background.

    Without a delay map the window sits on `reference_bin` in every pixel; with one it follows each
    pixel's return-leg shift.
    """
    if reference_bin is None:
        if not cube.is_aligned:
            raise CalibrationError("Cannot strip the first scatter from an unaligned cube")
        reference_bin = cube.reference_bin
    if guard < 0:
        raise DomainError(f"guard must be non-negative, got {guard}")
    if 2 * guard + 1 >= cube.bins:
        raise CalibrationError(f"A guard of {guard} bins covers the whole {cube.bins}-bin histogram")

    centers = np.full(cube.pixel_count, reference_bin, dtype=np.int64)
    if delay_map is not None:
        centers -= delay_map.return_leg.reshape(-1)

    histograms = cube.as_float().reshape(cube.pixel_count, cube.bins)
    fill = background_estimate(histograms)
    bins = np.arange(cube.bins)[None, :]
    window = np.abs(bins - centers[:, None]) <= guard
    histograms = np.where(window, fill[:, None], histograms)

    return cube.derive(histograms.reshape(cube.data.shape), value_kind="real", reference_bin=reference_bin)


@dataclass(frozen=True, eq=False, config=ARRAYS)
class CalibrationResult:
    cube: TimeHistogramCube
    dcr: DcrMap
    delays: DelayMap
    fwhm: FwhmMap
    report: CalibrationReport


def _histogram(values: np.ndarray) -> dict[int, int]:
    return dict(sorted(Counter(int(v) for v in values).items()))


def calibrate(
    raw: TimeHistogramCube,
    geometry: SceneGeometry,
    *,
    dark: TimeHistogramCube | None = None,
    exposure: float,
    gate: tuple[int, int] = DEFAULT_GATE,
    threshold: float = DCR_BAD_PIXEL_THRESHOLD,
    guard: int | None = None,
    reference_bin: int | None = None,
    strip: bool = True,
) -> CalibrationResult:
    """
    Turn a raw acquisition into a reconstruction-ready cube: FWHM measurement and alignment of
    the good pixels, bad-pixel interpolation in the aligned frame, then first-scatter removal.

    Without a `dark` acquisition the dark count rate is read off each pixel's tail background.
    """
    if not exposure > 0:
        raise DomainError(f"exposure must be positive, got {exposure}")

    if dark is not None:
        if dark.data.shape[:2] != raw.data.shape[:2]:
            raise DomainError("The dark and raw acquisitions must come from the same sensor")
        dcr = estimate_dcr(dark, exposure, threshold)
    else:
        rates = background_estimate(raw.as_float()) * raw.bins / exposure
        dcr = DcrMap.from_rates(rates, threshold)
        logger.info(f"No dark acquisition; estimated DCR from tail backgrounds, {dcr.bad_count} bad pixels")

    fwhm = estimate_fwhm_map(raw, gate, bad_mask=dcr.bad_mask)
    aligned, delays = align_histograms(raw, gate, geometry, reference_bin=reference_bin, bad_mask=dcr.bad_mask)
    aligned = interpolate_bad_pixels(aligned, dcr.bad_mask)

    if guard is None:
        guard = default_guard(fwhm, raw.bin_width)
    cube = strip_first_scatter(aligned, guard=guard, delay_map=delays) if strip else aligned

    good = ~dcr.bad_mask
    spread = delays.spread(good)
    report = CalibrationReport(
        pixels=raw.pixel_count,
        fraction_dcr_below_100=dcr.fraction_below(100),
        fraction_dcr_below_1000=dcr.fraction_below(1000),
        bad_pixels=dcr.bad_count,
        reference_bin=delays.reference_bin,
        delay_spread_bins=spread,
        delay_spread_ps=spread * raw.bin_width,
        mean_fwhm_ps=fwhm.mean_ps,
        min_fwhm_ps=float(np.nanmin(fwhm.widths)),
        max_fwhm_ps=float(np.nanmax(fwhm.widths)),
        mean_fwhm_bins=fwhm.mean_ps / raw.bin_width,
        guard_bins=guard,
        peak_histogram=_histogram((delays.offsets + delays.reference_bin)[good]),
        fwhm_histogram=_histogram(np.round(fwhm.in_bins(raw.bin_width)[good])),
    )

    return CalibrationResult(cube=cube, dcr=dcr, delays=delays, fwhm=fwhm, report=report)
