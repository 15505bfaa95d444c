import numpy as np
import pytest
from spadnlos import bin_to_path_length, default_geometry, grid_geometry, path_length_to_bins
from spadnlos.constants import C


def test_bin_to_path_length() -> None:
    # 25 bins of 55 ps: the ~41 cm of path a 25-bin miscalibration amounts to
    assert bin_to_path_length(25, 55) == pytest.approx(1375e-12 * C)
    assert bin_to_path_length(25, 55) == pytest.approx(0.41221, abs=1e-4)
    assert bin_to_path_length(0, 55) == 0.0
    assert bin_to_path_length(1, 55) == pytest.approx(0.016489, abs=1e-6)


@pytest.mark.parametrize(("bin_index", "bin_width"), [(-1, 55), (1, 0), (1, -5)])
def test_bin_to_path_length_domain(bin_index, bin_width) -> None:
    with pytest.raises(ValueError):
        bin_to_path_length(bin_index, bin_width)


def test_path_length_to_bins() -> None:
    assert path_length_to_bins(bin_to_path_length(17.5, 55), 55) == pytest.approx(17.5)
    np.testing.assert_allclose(path_length_to_bins(np.array([0.0, 1375e-12 * C]), 55), [0.0, 25.0])


@pytest.mark.parametrize(("first", "second"), [(0, 25), (3.5, 17.25), (100, 924)])
def test_bin_to_path_length_is_additive(first, second) -> None:
    total = bin_to_path_length(first + second, 55)

    assert total == pytest.approx(bin_to_path_length(first, 55) + bin_to_path_length(second, 55), rel=1e-12)
    assert path_length_to_bins(total, 55) == pytest.approx(first + second, rel=1e-12)


def test_grid_geometry() -> None:
    sut = grid_geometry(32, 32)

    assert sut.pixel_points.shape == (32, 32, 3)
    np.testing.assert_allclose(sut.pixel_points[0, 0], [-0.5 + 1 / 64, 0.5 - 1 / 64, 0.0])
    np.testing.assert_allclose(sut.pixel_points[31, 31], [0.5 - 1 / 64, -0.5 + 1 / 64, 0.0])

    du, dv = sut.grid_steps
    np.testing.assert_allclose(du, [1 / 32, 0, 0])
    np.testing.assert_allclose(dv, [0, -1 / 32, 0])


def test_default_geometry() -> None:
    sut = default_geometry()

    assert (sut.rows, sut.cols) == (32, 32)
    assert sut.camera_wall_distance == pytest.approx(1.2)
    assert sut.laser_wall_distance == pytest.approx(1.2)
    assert sut.fov_extent == (1.0, 1.0)

    legs = sut.return_leg_lengths()
    assert legs.shape == (32, 32)
    assert legs.min() >= 1.2


def test_geometry_rejects_spot_inside_fov() -> None:
    with pytest.raises(ValueError, match="outside the camera's field of view"):
        grid_geometry(4, 4, laser_spot=(0.1, 0.1, 0.0))


def test_geometry_rejects_spot_off_wall() -> None:
    with pytest.raises(ValueError, match="must lie on the wall plane"):
        grid_geometry(4, 4, laser_spot=(-0.7, 0.0, 0.1))


def test_geometry_rejects_bad_basis() -> None:
    with pytest.raises(ValueError, match="orthonormal"):
        grid_geometry(4, 4, basis_u=(1.0, 0.1, 0.0))

    with pytest.raises(ValueError):
        grid_geometry(0, 4)
