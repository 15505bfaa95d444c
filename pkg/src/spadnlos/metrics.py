from __future__ import annotations

import numpy as np
from scipy.ndimage import binary_dilation

from .exceptions import DomainError
from .objects import ReconstructionSpec, TargetSurface, VoxelVolume

__all__ = ["occupancy_mask", "threshold_mask", "surface_mask", "shape_iou", "iou", "peak_to_background", "argmax_index", "argmax_position"]


def occupancy_mask(target: TargetSurface, spec: ReconstructionSpec, *, dilation: int = 0) -> np.ndarray:
    """Voxels of `spec` holding at least one target sample, optionally grown by `dilation` voxels."""
    mask = np.zeros(spec.dims, dtype=bool)
    if len(target):
        index = np.floor((target.points - np.asarray(spec.origin)) / spec.voxel_size).astype(np.int64)
        inside = np.all((index >= 0) & (index < np.asarray(spec.dims)), axis=1)
        mask[tuple(index[inside].T)] = True

    if dilation > 0:
        mask = binary_dilation(mask, iterations=dilation)
    return mask


def threshold_mask(volume: VoxelVolume, fraction: float = 0.5) -> np.ndarray:
    magnitude = np.abs(volume.data)
    peak = magnitude.max()
    if peak <= 0:
        return np.zeros(magnitude.shape, dtype=bool)
    return magnitude >= fraction * peak


def surface_mask(volume: VoxelVolume, fraction: float = 0.5) -> np.ndarray:
    """
    The visible surface of the thresholded volume: in every (x, y) column, the voxel of largest
    magnitude, kept when it clears `fraction` of the global maximum.
    """
    magnitude = np.abs(volume.data)
    depth = np.argmax(magnitude, axis=2)
    front = np.zeros(magnitude.shape, dtype=bool)
    np.put_along_axis(front, depth[..., None], True, axis=2)
    return front & threshold_mask(volume, fraction)


def shape_iou(volume: VoxelVolume, truth: np.ndarray, *, fraction: float = 0.5, tolerance: int = 1) -> float:
    """IoU of the reconstructed surface against an occupancy mask, both grown by `tolerance` voxels."""
    if truth.shape != volume.dims:
        raise DomainError(f"Truth mask is {truth.shape} but the volume is {volume.dims}")
    if tolerance < 0:
        raise DomainError(f"tolerance must be non-negative, got {tolerance}")

    surface = surface_mask(volume, fraction)
    if tolerance > 0:
        surface = binary_dilation(surface, iterations=tolerance)
        truth = binary_dilation(truth, iterations=tolerance)
    return iou(surface, truth)


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two boolean masks; two empty masks agree perfectly."""
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def peak_to_background(volume: VoxelVolume) -> float:
    """max |v| over median |v|."""
    magnitude = np.abs(volume.data)
    peak, background = float(magnitude.max()), float(np.median(magnitude))
    if background > 0:
        return peak / background
    return float("inf") if peak > 0 else 0.0


def argmax_index(volume: VoxelVolume) -> tuple[int, int, int]:
    return tuple(int(i) for i in np.unravel_index(np.argmax(np.abs(volume.data)), volume.dims))


def argmax_position(volume: VoxelVolume) -> np.ndarray:
    return volume.center(argmax_index(volume))
