from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import RootModel, TypeAdapter
from pydantic.dataclasses import dataclass, is_pydantic_dataclass

from .exceptions import FormatError
from .histogram import grid_geometry
from .objects import SceneGeometry, TimeHistogramCube, VoxelVolume

__all__ = [
    "CUBE_HEADER",
    "VOLUME_HEADER",
    "save_cube",
    "load_cube",
    "save_volume",
    "load_volume",
    "save_geometry",
    "load_geometry",
    "maximum_intensity_projection",
    "write_pgm",
    "read_pgm",
    "to_json",
    "save_json",
    "sidecar_path",
    "write_sidecar",
    "read_sidecar",
    "make_filesystem_safe",
]

CUBE_MAGIC = b"NLCB"
VOLUME_MAGIC = b"NLVL"
FORMAT_VERSION = 1

CUBE_HEADER = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u2"),
        ("value_kind", "<u2"),
        ("rows", "<u2"),
        ("cols", "<u2"),
        ("bins", "<u4"),
        ("bin_width_ps", "<f8"),
        ("reserved", "V8"),
    ]
)

VOLUME_HEADER = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u2"),
        ("value_kind", "<u2"),
        ("nx", "<u4"),
        ("ny", "<u4"),
        ("nz", "<u4"),
        ("origin", "<f8", (3,)),
        ("voxel_size_m", "<f8"),
    ]
)

_KIND_CODES = {"counts": 0, "real": 1, "complex": 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}
_FILE_DTYPES = {"counts": np.dtype("<u4"), "real": np.dtype("<f8"), "complex": np.dtype("<c16")}


def _read_header(raw: bytes, header: np.dtype, magic: bytes) -> np.void:
    if len(raw) < header.itemsize:
        raise FormatError(f"Truncated header: expected {header.itemsize} bytes, got {len(raw)}", offset=len(raw))

    fields = np.frombuffer(raw, dtype=header, count=1)[0]
    if fields["magic"] != magic:
        raise FormatError(f"Bad magic {bytes(fields['magic'])!r}, expected {magic!r}", offset=0)
    if fields["version"] != FORMAT_VERSION:
        raise FormatError(f"Unsupported version {fields['version']}", offset=4)
    if int(fields["value_kind"]) not in _KIND_NAMES:
        raise FormatError(f"Unknown value kind {fields['value_kind']}", offset=6)

    return fields


def _read_payload(raw: bytes, offset: int, kind: str, count: int) -> np.ndarray:
    dtype = _FILE_DTYPES[kind]
    expected = count * dtype.itemsize
    available = len(raw) - offset
    if available < expected:
        raise FormatError(f"Truncated payload: expected {expected} bytes, got {available}", offset=len(raw))
    if available > expected:
        raise FormatError(f"Dimensions account for {expected} payload bytes but the file holds {available}", offset=offset + expected)

    return np.frombuffer(raw, dtype=dtype, count=count, offset=offset)


def save_cube(cube: TimeHistogramCube, path: str | Path) -> Path:
    path = Path(path)

    header = np.zeros(1, dtype=CUBE_HEADER)
    header["magic"] = CUBE_MAGIC
    header["version"] = FORMAT_VERSION
    header["value_kind"] = _KIND_CODES[cube.value_kind]
    header["rows"] = cube.rows
    header["cols"] = cube.cols
    header["bins"] = cube.bins
    header["bin_width_ps"] = cube.bin_width

    with path.open("wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(cube.data, dtype=_FILE_DTYPES[cube.value_kind]).tobytes())

    return path


def load_cube(path: str | Path) -> TimeHistogramCube:
    """Read an NLCB file. Alignment metadata is not part of the format; see `read_sidecar`."""
    raw = Path(path).read_bytes()
    header = _read_header(raw, CUBE_HEADER, CUBE_MAGIC)

    kind = _KIND_NAMES[int(header["value_kind"])]
    rows, cols, bins = int(header["rows"]), int(header["cols"]), int(header["bins"])
    if rows == 0 or cols == 0 or bins == 0:
        raise FormatError(f"Degenerate dimensions {rows}x{cols}x{bins}", offset=8)

    data = _read_payload(raw, CUBE_HEADER.itemsize, kind, rows * cols * bins)
    return TimeHistogramCube(
        data=data.reshape(rows, cols, bins).astype(_FILE_DTYPES[kind].newbyteorder("=")),
        bin_width=float(header["bin_width_ps"]),
        value_kind=kind,
    )


def save_volume(volume: VoxelVolume, path: str | Path) -> Path:
    path = Path(path)

    header = np.zeros(1, dtype=VOLUME_HEADER)
    header["magic"] = VOLUME_MAGIC
    header["version"] = FORMAT_VERSION
    header["value_kind"] = _KIND_CODES[volume.value_kind]
    header["nx"], header["ny"], header["nz"] = volume.dims
    header["origin"] = volume.origin
    header["voxel_size_m"] = volume.voxel_size

    with path.open("wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(volume.data, dtype=_FILE_DTYPES[volume.value_kind]).tobytes())

    return path


def load_volume(path: str | Path) -> VoxelVolume:
    raw = Path(path).read_bytes()
    header = _read_header(raw, VOLUME_HEADER, VOLUME_MAGIC)

    kind = _KIND_NAMES[int(header["value_kind"])]
    if kind == "counts":
        raise FormatError("Volumes hold real or complex values only", offset=6)
    dims = int(header["nx"]), int(header["ny"]), int(header["nz"])
    if min(dims) == 0:
        raise FormatError(f"Degenerate dimensions {dims}", offset=8)

    data = _read_payload(raw, VOLUME_HEADER.itemsize, kind, dims[0] * dims[1] * dims[2])
    return VoxelVolume(
        data=data.reshape(dims).astype(_FILE_DTYPES[kind].newbyteorder("=")),
        origin=header["origin"].astype(np.float64),
        voxel_size=float(header["voxel_size_m"]),
        value_kind=kind,
    )


@dataclass
class _WallPlaneDocument:
    origin: tuple[float, float, float]
    basis_u: tuple[float, float, float]
    basis_v: tuple[float, float, float]


@dataclass
class GeometryDocument:
    wall_plane: _WallPlaneDocument
    camera_pos: tuple[float, float, float]
    laser_pos: tuple[float, float, float]
    laser_spot: tuple[float, float, float]
    fov_extent: tuple[float, float]
    rows: int
    cols: int

    def to_geometry(self) -> SceneGeometry:
        return grid_geometry(
            self.rows,
            self.cols,
            fov_extent=self.fov_extent,
            camera_pos=self.camera_pos,
            laser_pos=self.laser_pos,
            laser_spot=self.laser_spot,
            wall_origin=self.wall_plane.origin,
            basis_u=self.wall_plane.basis_u,
            basis_v=self.wall_plane.basis_v,
        )

    @classmethod
    def from_geometry(cls, geometry: SceneGeometry) -> GeometryDocument:
        def vec(x: np.ndarray) -> tuple[float, float, float]:
            return tuple(float(v) for v in x)

        # The document stores the grid's center; pixel points are regenerated from it.
        center = geometry.pixel_points.reshape(-1, 3).mean(axis=0)
        return cls(
            wall_plane=_WallPlaneDocument(
                origin=vec(center),
                basis_u=vec(geometry.wall_plane.basis_u),
                basis_v=vec(geometry.wall_plane.basis_v),
            ),
            camera_pos=vec(geometry.camera_pos),
            laser_pos=vec(geometry.laser_pos),
            laser_spot=vec(geometry.laser_spot),
            fov_extent=geometry.fov_extent,
            rows=geometry.rows,
            cols=geometry.cols,
        )


def save_geometry(geometry: SceneGeometry, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(to_json(GeometryDocument.from_geometry(geometry)), encoding="utf8")
    return path


def load_geometry(path: str | Path) -> SceneGeometry:
    document = TypeAdapter(GeometryDocument).validate_json(Path(path).read_text(encoding="utf8"))
    return document.to_geometry()


Axis = Literal["front", "side", "top"]

# view -> (axis reduced by the projection, image column axis, image row axis)
PROJECTION_AXES: dict[str, tuple[int, int, int]] = {
    "front": (2, 0, 1),
    "side": (0, 2, 1),
    "top": (1, 0, 2),
}


def maximum_intensity_projection(volume: VoxelVolume, axis: Axis) -> np.ndarray:
    """
    Project |volume| along one axis into an image indexed [row, col].

    front: width nx, height ny (looking at the wall from the hidden side, y up);
    side: width nz, height ny; top: width nx, height nz (z grows downwards).
    """
    reduce_axis, col_axis, row_axis = PROJECTION_AXES[axis]
    projected = np.abs(volume.data).max(axis=reduce_axis)

    kept = [a for a in range(3) if a != reduce_axis]
    image = projected if kept.index(row_axis) == 0 else projected.T
    if row_axis == 1:  # y points up, image rows point down
        image = image[::-1]
    return np.ascontiguousarray(image)


def write_pgm(image: np.ndarray, path: str | Path) -> Path:
    """Min-max normalize to 16 bits and write a binary PGM (P5, maxval 65535). A constant image maps to all zeros."""
    path = Path(path)
    image = np.asarray(image, dtype=np.float64)

    lo, hi = float(image.min()), float(image.max())
    if hi > lo:
        scaled = np.round((image - lo) / (hi - lo) * 65535.0)
    else:
        scaled = np.zeros_like(image)

    height, width = image.shape
    with path.open("wb") as fh:
        fh.write(f"P5\n{width} {height}\n65535\n".encode("ascii"))
        fh.write(scaled.astype(">u2").tobytes())

    return path


def read_pgm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    match = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if not match:
        raise FormatError("Not a binary PGM file", offset=0)

    width, height, maxval = (int(g) for g in match.groups())
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(raw, dtype=dtype, count=width * height, offset=match.end()).reshape(height, width)


def to_json(data: Any, *, indent: int = 4) -> str:
    if is_pydantic_dataclass(data.__class__):
        return RootModel[data.__class__](data).model_dump_json(indent=indent, by_alias=True, exclude_none=True)
    if isinstance(data, list) and data and is_pydantic_dataclass(data[0].__class__):
        return TypeAdapter(list[data[0].__class__]).dump_json(data, indent=indent, by_alias=True, exclude_none=True).decode("utf8")

    return json.dumps(data, indent=indent)


def save_json(data: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(exist_ok=True, parents=True)
    path.write_text(to_json(data), encoding="utf8")
    return path


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_sidecar(path: str | Path, metadata: dict) -> Path:
    return save_json(metadata, sidecar_path(path))


def read_sidecar(path: str | Path) -> dict:
    """Metadata written next to `path`, or an empty dict when there is none."""
    meta = sidecar_path(path)
    if not meta.exists():
        return {}

    return json.loads(meta.read_text(encoding="utf8"))


def make_filesystem_safe(name: str) -> str:
    name = re.sub("[^-_a-z0-9.]+", "_", name, flags=re.IGNORECASE)
    name = re.sub("_{2,}", "_", name)
    return name
