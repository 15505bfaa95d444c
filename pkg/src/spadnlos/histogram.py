from __future__ import annotations

from typing import Any

import numpy as np

from .constants import C, PS, SENSOR_COLS, SENSOR_ROWS
from .exceptions import DomainError
from .objects import SceneGeometry, WallPlane

__all__ = [
    "bin_to_path_length",
    "path_length_to_bins",
    "grid_geometry",
    "default_geometry",
    "CAMERA_POS",
    "LASER_POS",
    "LASER_SPOT",
]

# The wall is z=0 with +z into the hidden volume, x right and y up as seen from the camera.
# The spot sits 0.2 m outside the left edge of the 1 m field of view; its exact position is a convention.
CAMERA_POS = (-0.75, 0.0, 1.2)
LASER_POS = (-0.85, 0.0, 1.2)
LASER_SPOT = (-0.7, 0.0, 0.0)


def bin_to_path_length(bin_index: float, bin_width: float) -> float:
    """Optical path (m) travelled during `bin_index` bins of `bin_width` ps."""
    if bin_index < 0:
        raise DomainError(f"bin_index must be non-negative, got {bin_index}")
    if not bin_width > 0:
        raise DomainError(f"bin_width must be positive, got {bin_width}")

    return bin_index * bin_width * PS * C


def path_length_to_bins(path_length: float | np.ndarray, bin_width: float) -> float | np.ndarray:
    if not bin_width > 0:
        raise DomainError(f"bin_width must be positive, got {bin_width}")

    return path_length / (bin_width * PS * C)


def grid_geometry(
    rows: int,
    cols: int,
    *,
    fov_extent: tuple[float, float] = (1.0, 1.0),
    camera_pos: Any = CAMERA_POS,
    laser_pos: Any = LASER_POS,
    laser_spot: Any = LASER_SPOT,
    wall_origin: Any = (0.0, 0.0, 0.0),
    basis_u: Any = (1.0, 0.0, 0.0),
    basis_v: Any = (0.0, 1.0, 0.0),
) -> SceneGeometry:
    """
    Geometry whose pixels image a uniform rows x cols grid centered on `wall_origin`.

    Pixel (0, 0) is the top-left cell: columns grow along `basis_u`, rows grow against `basis_v`.
    """
    if rows < 1 or cols < 1:
        raise DomainError(f"A pixel grid needs at least one row and column, got {rows}x{cols}")

    plane = WallPlane(origin=wall_origin, basis_u=basis_u, basis_v=basis_v)
    width, height = fov_extent
    u = -width / 2 + (np.arange(cols) + 0.5) * width / cols
    v = height / 2 - (np.arange(rows) + 0.5) * height / rows

    points = plane.origin + u[None, :, None] * plane.basis_u + v[:, None, None] * plane.basis_v

    return SceneGeometry(
        wall_plane=plane,
        pixel_points=points,
        laser_spot=laser_spot,
        camera_pos=camera_pos,
        laser_pos=laser_pos,
        fov_extent=(float(width), float(height)),
    )


def default_geometry() -> SceneGeometry:
    """Camera and laser 1.2 m from the wall, a 1 m x 1 m field of view imaged by 32 x 32 pixels."""
    return grid_geometry(SENSOR_ROWS, SENSOR_COLS)
