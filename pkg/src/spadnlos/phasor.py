from __future__ import annotations

import logging
from collections.abc import Callable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from ._kernels import configure_workers, gather
from .constants import C, PS
from .exceptions import DomainError, ReconstructionError
from .metrics import occupancy_mask, peak_to_background, shape_iou
from .objects import PhasorParams, ReconstructionSpec, SceneGeometry, SweepEntry, TargetSurface, TimeHistogramCube, VirtualWavelet, VoxelVolume

__all__ = [
    "SWEEP_WAVELENGTHS",
    "SWEEP_SIGMAS",
    "BEST_PHASOR_PARAMS",
    "make_wavelet",
    "phasor_transform",
    "propagate",
    "reconstruct_phasor",
    "parameter_sweep",
]

logger = logging.getLogger(__name__)

SWEEP_WAVELENGTHS = (0.10, 0.08, 0.06)
SWEEP_SIGMAS = (3.0, 4.0, 5.0)
BEST_PHASOR_PARAMS = PhasorParams(wavelength=0.096, sigma=4.7)


def make_wavelet(params: PhasorParams, bin_width: float) -> VirtualWavelet:
    """
    Gaussian-windowed complex carrier of wavelength `params.wavelength`, sampled every `bin_width` ps.

    The support spans sigma wavelengths (nearest odd number of samples) and holds +-3 standard
    deviations of the envelope. The result has zero mean and unit energy.
    """
    if not bin_width > 0:
        raise DomainError(f"bin_width must be positive, got {bin_width}")
    path_per_bin = C * bin_width * PS
    if params.wavelength < 2 * path_per_bin:
        raise DomainError(
            f"Wavelength {params.wavelength} m aliases at {bin_width} ps bins (needs >= {2 * path_per_bin:.4f} m)"
        )

    support = params.sigma * params.wavelength / C
    samples_needed = support / (bin_width * PS)
    length = max(1, 2 * int(np.round((samples_needed - 1) / 2)) + 1)
    if length < 3:
        raise DomainError(f"sigma={params.sigma} at lambda={params.wavelength} m leaves a wavelet of {length} sample(s)")
    center = length // 2

    t = (np.arange(length) - center) * bin_width * PS
    envelope = np.exp(-(t**2) / (2 * (support / 6) ** 2))
    samples = np.exp(2j * np.pi * C * t / params.wavelength) * envelope
    samples -= samples.mean()
    samples /= np.sqrt(np.sum(np.abs(samples) ** 2))

    return VirtualWavelet(samples=samples, center_index=center)


def phasor_transform(cube: TimeHistogramCube, wavelet: VirtualWavelet) -> TimeHistogramCube:
    """Convolve every histogram with the wavelet; sample k of the output is centered on bin k."""
    if not cube.is_aligned:
        raise ReconstructionError("The cube carries no reference bin; align it before reconstructing")
    if cube.value_kind == "complex":
        raise ReconstructionError("The phasor transform takes a counts- or real-kind cube")
    if len(wavelet) > cube.bins:
        raise ReconstructionError(f"The wavelet spans {len(wavelet)} samples, longer than the {cube.bins}-bin histograms")

    data = fftconvolve(cube.as_float(), wavelet.samples[None, None, :], mode="same", axes=2)
    return cube.derive(data, value_kind="complex")


def propagate(phasors: TimeHistogramCube, geometry: SceneGeometry, spec: ReconstructionSpec, *, workers: int = 0) -> VoxelVolume:
    if phasors.value_kind != "complex":
        raise ReconstructionError("Propagation takes a complex-kind cube")
    if not phasors.is_aligned:
        raise ReconstructionError("The cube carries no reference bin; align it before reconstructing")
    if (geometry.rows, geometry.cols) != (phasors.rows, phasors.cols):
        raise ReconstructionError(f"Geometry has {geometry.rows}x{geometry.cols} pixels but the cube has {phasors.rows}x{phasors.cols}")

    configure_workers(workers)
    histograms = phasors.histograms()
    args = (geometry.flat_points(), geometry.laser_spot, spec.axes(), phasors.reference_bin, phasors.path_per_bin, spec.attenuation_compensation)
    real = gather(histograms.real, *args)
    imag = gather(histograms.imag, *args)
    return spec.volume(real + 1j * imag, value_kind="complex")


def reconstruct_phasor(
    cube: TimeHistogramCube, geometry: SceneGeometry, spec: ReconstructionSpec, params: PhasorParams, *, workers: int = 0
) -> VoxelVolume:
    wavelet = make_wavelet(params, cube.bin_width)
    logger.info(f"Phasor reconstruction with lambda={params.wavelength} m, sigma={params.sigma} ({len(wavelet)}-sample wavelet)")
    return propagate(phasor_transform(cube, wavelet), geometry, spec, workers=workers).magnitude()


def parameter_sweep(
    cube: TimeHistogramCube,
    geometry: SceneGeometry,
    spec: ReconstructionSpec,
    wavelengths: Sequence[float] = SWEEP_WAVELENGTHS,
    sigmas: Sequence[float] = SWEEP_SIGMAS,
    *,
    ground_truth: TargetSurface | None = None,
    workers: int = 0,
    on_volume: Callable[[PhasorParams, VoxelVolume], None] | None = None,
) -> list[SweepEntry]:
    """Reconstruct once per (wavelength, sigma) pair, wavelength-major, and score each volume."""
    if not wavelengths or not sigmas:
        raise DomainError("A sweep needs at least one wavelength and one sigma")

    truth = None if ground_truth is None else occupancy_mask(ground_truth, spec)
    entries = []
    for wavelength in wavelengths:
        for sigma in sigmas:
            params = PhasorParams(wavelength=wavelength, sigma=sigma)
            volume = reconstruct_phasor(cube, geometry, spec, params, workers=workers)
            entry = SweepEntry(
                wavelength=wavelength,
                sigma=sigma,
                peak_to_background=peak_to_background(volume),
                iou=None if truth is None else shape_iou(volume, truth),
            )
            logger.info(f"lambda={wavelength} sigma={sigma}: peak/background {entry.peak_to_background:.2f}, IoU {entry.iou}")
            entries.append(entry)
            if on_volume is not None:
                on_volume(params, volume)

    return entries
