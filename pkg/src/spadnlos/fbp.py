from __future__ import annotations

import logging

import numpy as np

from ._kernels import configure_workers, gather
from .exceptions import DomainError, ReconstructionError
from .objects import ReconstructionSpec, SceneGeometry, TimeHistogramCube, VoxelVolume

__all__ = ["backproject", "depth_laplacian_filter", "reconstruct_fbp"]

logger = logging.getLogger(__name__)


def _check_inputs(cube: TimeHistogramCube, geometry: SceneGeometry) -> None:
    if not cube.is_aligned:
        raise ReconstructionError("The cube carries no reference bin; align it before reconstructing")
    if (geometry.rows, geometry.cols) != (cube.rows, cube.cols):
        raise ReconstructionError(f"Geometry has {geometry.rows}x{geometry.cols} pixels but the cube has {cube.rows}x{cube.cols}")


def backproject(cube: TimeHistogramCube, geometry: SceneGeometry, spec: ReconstructionSpec, *, workers: int = 0) -> VoxelVolume:
    """Ellipsoidal back projection of an aligned cube onto the voxel grid of `spec`."""
    _check_inputs(cube, geometry)
    if cube.value_kind == "complex":
        raise ReconstructionError("Back projection takes a counts- or real-kind cube")

    threads = configure_workers(workers)
    logger.debug(f"Back projection on {threads} threads into a {spec.dims} grid")

    data = gather(
        cube.as_float().reshape(cube.pixel_count, cube.bins),
        geometry.flat_points(),
        geometry.laser_spot,
        spec.axes(),
        cube.reference_bin,
        cube.path_per_bin,
        spec.attenuation_compensation,
    )
    return spec.volume(data)


def depth_laplacian_filter(volume: VoxelVolume) -> VoxelVolume:
    """Negated second difference along z, rectified; the first and last slices are zero."""
    if volume.value_kind != "real":
        raise DomainError("The depth filter takes a real-kind volume")
    if volume.dims[2] < 3:
        raise DomainError(f"The depth filter needs at least 3 slices, got {volume.dims[2]}")

    v = volume.data
    out = np.zeros(v.shape)
    out[:, :, 1:-1] = np.maximum(0.0, -(v[:, :, :-2] - 2.0 * v[:, :, 1:-1] + v[:, :, 2:]))
    return VoxelVolume.from_array(out, origin=volume.origin, voxel_size=volume.voxel_size)


def reconstruct_fbp(cube: TimeHistogramCube, geometry: SceneGeometry, spec: ReconstructionSpec, *, workers: int = 0) -> VoxelVolume:
    volume = backproject(cube, geometry, spec, workers=workers)
    if spec.filter_kind == "depth_laplacian":
        volume = depth_laplacian_filter(volume)
    return volume
