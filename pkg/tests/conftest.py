import os
from pathlib import Path

import numpy as np
import pytest
from spadnlos import SceneGeometry, TargetSurface, grid_geometry


@pytest.fixture()
def tmp_path(tmp_path) -> Path:
    original_dir = Path.cwd()
    try:
        os.chdir(tmp_path)
        yield tmp_path
    finally:
        os.chdir(original_dir)


@pytest.fixture()
def small_geometry() -> SceneGeometry:
    return grid_geometry(8, 8)


@pytest.fixture()
def flat_geometry() -> SceneGeometry:
    """A camera so far away that every pixel's return leg rounds to the same bin."""
    return grid_geometry(
        4,
        4,
        fov_extent=(0.04, 0.04),
        camera_pos=(0.0, 0.0, 50.0),
        laser_pos=(-0.1, 0.0, 50.0),
        laser_spot=(-0.1, 0.0, 0.0),
    )


@pytest.fixture()
def empty_target() -> TargetSurface:
    return TargetSurface(points=np.zeros((0, 3)), normals=np.zeros((0, 3)), albedo=np.zeros(0), kind="none")


@pytest.fixture()
def naive_backprojection():
    """Brute-force reference for the gather kernel: np.interp per pixel over the whole grid."""

    def backproject(cube, geometry, spec) -> np.ndarray:
        histograms = cube.histograms()
        if cube.value_kind != "complex":
            histograms = histograms.astype(np.float64)
        voxels = np.stack(np.meshgrid(*spec.axes(), indexing="ij"), axis=-1)
        r1 = np.linalg.norm(voxels - geometry.laser_spot, axis=-1)

        out = np.zeros(spec.dims, dtype=histograms.dtype)
        for histogram, wall in zip(histograms, geometry.flat_points(), strict=True):
            r2 = np.linalg.norm(voxels - wall, axis=-1)
            position = cube.reference_bin + (r1 + r2) / cube.path_per_bin
            value = np.interp(position, np.arange(cube.bins), histogram, left=0.0, right=0.0)
            if spec.attenuation_compensation:
                value = value * r1**2 * r2**2
            out += value
        return out

    return backproject
