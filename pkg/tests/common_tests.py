from pathlib import Path

import numpy as np
import pytest
from spadnlos import FormatError, TimeHistogramCube, VoxelVolume, grid_geometry
from spadnlos.common import (
    CUBE_HEADER,
    VOLUME_HEADER,
    load_cube,
    load_geometry,
    load_volume,
    make_filesystem_safe,
    maximum_intensity_projection,
    read_pgm,
    read_sidecar,
    save_cube,
    save_geometry,
    save_volume,
    sidecar_path,
    write_pgm,
    write_sidecar,
)


def test_header_sizes() -> None:
    assert CUBE_HEADER.itemsize == 32
    assert VOLUME_HEADER.itemsize == 52


def test_cube_file(tmp_path: Path) -> None:
    data = np.arange(2 * 3 * 5).reshape(2, 3, 5)
    cube = TimeHistogramCube.from_array(data, value_kind="counts", bin_width=40.0)

    path = save_cube(cube, "cube.nlcb")
    raw = path.read_bytes()

    assert raw[:4] == b"NLCB"
    assert len(raw) == 32 + data.size * 4

    sut = load_cube(path)
    assert sut.value_kind == "counts"
    assert sut.bin_width == 40.0
    assert sut.reference_bin is None
    np.testing.assert_array_equal(sut.data, data)


@pytest.mark.parametrize("value_kind", ["real", "complex"])
def test_cube_file_kinds(tmp_path: Path, value_kind) -> None:
    data = np.linspace(0, 1, 24).reshape(2, 2, 6)
    if value_kind == "complex":
        data = data + 1j * data[::-1]

    sut = load_cube(save_cube(TimeHistogramCube.from_array(data, value_kind=value_kind), "cube.nlcb"))

    assert sut.value_kind == value_kind
    np.testing.assert_array_equal(sut.data, data)


def test_cube_file_bad_magic(tmp_path: Path) -> None:
    path = save_cube(TimeHistogramCube.from_array(np.zeros((1, 1, 4))), "cube.nlcb")
    path.write_bytes(b"XXXX" + path.read_bytes()[4:])

    with pytest.raises(FormatError, match=r"at byte 0") as exc:
        load_cube(path)
    assert exc.value.offset == 0


def test_cube_file_bad_version(tmp_path: Path) -> None:
    path = save_cube(TimeHistogramCube.from_array(np.zeros((1, 1, 4))), "cube.nlcb")
    raw = bytearray(path.read_bytes())
    raw[4] = 9
    path.write_bytes(bytes(raw))

    with pytest.raises(FormatError) as exc:
        load_cube(path)
    assert exc.value.offset == 4


def test_cube_file_truncated(tmp_path: Path) -> None:
    path = save_cube(TimeHistogramCube.from_array(np.zeros((2, 2, 4))), "cube.nlcb")
    path.write_bytes(path.read_bytes()[:-3])

    with pytest.raises(FormatError, match="Truncated payload"):
        load_cube(path)

    path.write_bytes(b"NLCB")
    with pytest.raises(FormatError, match="Truncated header"):
        load_cube(path)


def test_cube_file_trailing_bytes(tmp_path: Path) -> None:
    path = save_cube(TimeHistogramCube.from_array(np.zeros((2, 2, 4))), "cube.nlcb")
    path.write_bytes(path.read_bytes() + b"\0" * 8)

    with pytest.raises(FormatError, match="Dimensions account for"):
        load_cube(path)


def test_volume_file(tmp_path: Path) -> None:
    data = np.random.default_rng(1).normal(size=(3, 4, 5))
    volume = VoxelVolume.from_array(data, origin=(-0.6, -0.6, 0.1), voxel_size=0.01)

    sut = load_volume(save_volume(volume, "volume.nlvl"))

    assert sut.dims == (3, 4, 5)
    assert sut.voxel_size == 0.01
    np.testing.assert_array_equal(sut.origin, [-0.6, -0.6, 0.1])
    np.testing.assert_array_equal(sut.data, data)


def test_volume_file_rejects_cube(tmp_path: Path) -> None:
    path = save_cube(TimeHistogramCube.from_array(np.zeros((1, 1, 4))), "cube.nlcb")

    with pytest.raises(FormatError, match="at byte 0"):
        load_volume(path)


def test_geometry_file(tmp_path: Path) -> None:
    geometry = grid_geometry(4, 6, fov_extent=(0.6, 0.4), camera_pos=(0.1, 0.2, 1.0))

    sut = load_geometry(save_geometry(geometry, "geometry.json"))

    assert (sut.rows, sut.cols) == (4, 6)
    assert sut.fov_extent == (0.6, 0.4)
    np.testing.assert_allclose(sut.pixel_points, geometry.pixel_points, atol=1e-12)
    np.testing.assert_allclose(sut.camera_pos, [0.1, 0.2, 1.0])
    np.testing.assert_allclose(sut.laser_spot, geometry.laser_spot)


def _volume_with(shape, index, value=1.0) -> VoxelVolume:
    data = np.zeros(shape)
    data[index] = value
    return VoxelVolume.from_array(data, origin=(0, 0, 0.1), voxel_size=0.1)


def test_maximum_intensity_projection_dims() -> None:
    volume = _volume_with((3, 4, 5), (0, 0, 0))

    assert maximum_intensity_projection(volume, "front").shape == (4, 3)
    assert maximum_intensity_projection(volume, "side").shape == (4, 5)
    assert maximum_intensity_projection(volume, "top").shape == (5, 3)


def test_maximum_intensity_projection_single_voxel() -> None:
    volume = _volume_with((3, 4, 5), (2, 3, 1), value=7.0)

    front = maximum_intensity_projection(volume, "front")
    side = maximum_intensity_projection(volume, "side")
    top = maximum_intensity_projection(volume, "top")

    for image in (front, side, top):
        assert np.count_nonzero(image) == 1
        assert image.max() == 7.0

    # y points up: the highest y sits on the first image row
    assert front[0, 2] == 7.0
    assert side[0, 1] == 7.0
    assert top[1, 2] == 7.0


def test_write_pgm(tmp_path: Path) -> None:
    image = np.array([[0.0, 1.0, 2.0], [3.0, 4.0, 8.0]])

    path = write_pgm(image, "image.pgm")

    assert path.read_bytes().startswith(b"P5\n3 2\n65535\n")
    sut = read_pgm(path)
    assert sut.shape == (2, 3)
    assert sut.min() == 0
    assert sut.max() == 65535
    assert sut[0, 2] == round(2 / 8 * 65535)


def test_write_pgm_constant_image(tmp_path: Path) -> None:
    sut = read_pgm(write_pgm(np.full((4, 5), 3.0), "flat.pgm"))

    assert sut.shape == (4, 5)
    assert not sut.any()


def test_sidecar(tmp_path: Path) -> None:
    assert read_sidecar("cube.nlcb") == {}

    write_sidecar("cube.nlcb", {"reference_bin": 100, "seed": 1})

    assert sidecar_path("cube.nlcb") == Path("cube.nlcb.meta.json")
    assert read_sidecar("cube.nlcb") == {"reference_bin": 100, "seed": 1}


def test_make_filesystem_safe() -> None:
    assert make_filesystem_safe("sweep lambda=0.1 sigma=3.pgm") == "sweep_lambda_0.1_sigma_3.pgm"
    assert make_filesystem_safe("a//b") == "a_b"
