import numpy as np
import pytest
from spadnlos import (
    PhasorParams,
    ReconstructionError,
    ReconstructionSpec,
    SensorModel,
    TimeHistogramCube,
    apply_instrument,
    calibrate,
    grid_geometry,
    make_point_target,
    make_wavelet,
    parameter_sweep,
    phasor_transform,
    propagate,
    reconstruct_phasor,
    render_ideal_transients,
)
from spadnlos.metrics import argmax_position
from spadnlos.phasor import BEST_PHASOR_PARAMS, SWEEP_SIGMAS, SWEEP_WAVELENGTHS


@pytest.mark.parametrize(
    ("wavelength", "sigma", "length"),
    [(0.10, 3.0, 19), (0.06, 3.0, 11), (0.096, 4.7, 27), (0.10, 5.0, 31)],
)
def test_make_wavelet_length(wavelength, sigma, length) -> None:
    sut = make_wavelet(PhasorParams(wavelength=wavelength, sigma=sigma), 55.0)

    assert len(sut) == length
    assert sut.center_index == length // 2


def test_make_wavelet_normalization() -> None:
    sut = make_wavelet(PhasorParams(wavelength=0.1, sigma=3.0), 55.0)

    assert abs(sut.samples.sum()) < 1e-12
    assert np.sum(np.abs(sut.samples) ** 2) == pytest.approx(1.0)
    assert np.argmax(np.abs(sut.samples)) == sut.center_index


@pytest.mark.parametrize(("wavelength", "sigma"), [(0.1, 3.0), (0.06, 5.0), (0.096, 4.7)])
def test_make_wavelet_carrier(wavelength, sigma) -> None:
    sut = make_wavelet(PhasorParams(wavelength=wavelength, sigma=sigma), 55.0)

    spectrum = np.abs(np.fft.fft(sut.samples))
    path_per_bin = TimeHistogramCube.from_array(np.zeros((1, 1, 2))).path_per_bin
    expected = len(sut) * path_per_bin / wavelength
    assert abs(int(np.argmax(spectrum)) - expected) <= 1


def test_make_wavelet_domain() -> None:
    with pytest.raises(ValueError, match="aliases"):
        make_wavelet(PhasorParams(wavelength=0.02, sigma=3.0), 55.0)

    with pytest.raises(ValueError, match="sample"):
        make_wavelet(PhasorParams(wavelength=0.04, sigma=0.5), 55.0)

    with pytest.raises(ValueError):
        make_wavelet(PhasorParams(wavelength=0.1, sigma=3.0), 0.0)


def test_phasor_transform_superposition() -> None:
    histogram = np.zeros(64)
    histogram[20] = 1.0
    histogram[35] = 2.0
    cube = TimeHistogramCube.from_array(histogram.reshape(1, 1, 64), reference_bin=0)
    wavelet = make_wavelet(PhasorParams(wavelength=0.1, sigma=3.0), 55.0)

    sut = phasor_transform(cube, wavelet)

    expected = np.zeros(64, dtype=complex)
    for bin_index, amplitude in ((20, 1.0), (35, 2.0)):
        for k in range(64):
            j = k - bin_index + wavelet.center_index
            if 0 <= j < len(wavelet):
                expected[k] += amplitude * wavelet.samples[j]

    assert sut.value_kind == "complex"
    assert sut.reference_bin == 0
    np.testing.assert_allclose(sut.data[0, 0], expected, atol=1e-12)


def test_phasor_transform_errors() -> None:
    wavelet = make_wavelet(PhasorParams(wavelength=0.1, sigma=3.0), 55.0)

    with pytest.raises(ReconstructionError, match="align"):
        phasor_transform(TimeHistogramCube.from_array(np.zeros((1, 1, 64))), wavelet)

    with pytest.raises(ReconstructionError, match="longer"):
        phasor_transform(TimeHistogramCube.from_array(np.zeros((1, 1, 10)), reference_bin=0), wavelet)

    complex_cube = TimeHistogramCube.from_array(np.zeros((1, 1, 64), dtype=complex), value_kind="complex", reference_bin=0)
    with pytest.raises(ReconstructionError):
        phasor_transform(complex_cube, wavelet)


def test_propagate_matches_naive(naive_backprojection) -> None:
    geometry = grid_geometry(8, 8)
    spec = ReconstructionSpec.around((0.0, 0.0, 0.4), voxels=16, voxel_size=0.02, filter_kind="none")
    rng = np.random.default_rng(4)
    data = rng.random((8, 8, 128)) + 1j * rng.random((8, 8, 128))
    cube = TimeHistogramCube.from_array(data, value_kind="complex", reference_bin=0)

    sut = propagate(cube, geometry, spec)

    expected = naive_backprojection(cube, geometry, spec)
    assert sut.value_kind == "complex"
    np.testing.assert_allclose(sut.data, expected, rtol=1e-9, atol=1e-12 * np.abs(expected).max())


def test_propagate_errors(small_geometry) -> None:
    spec = ReconstructionSpec.around((0.0, 0.0, 0.4), voxels=4, voxel_size=0.02)

    with pytest.raises(ReconstructionError, match="complex-kind"):
        propagate(TimeHistogramCube.from_array(np.zeros((8, 8, 16)), reference_bin=0), small_geometry, spec)

    with pytest.raises(ReconstructionError, match="8x8"):
        propagate(TimeHistogramCube.from_array(np.zeros((4, 4, 16), dtype=complex), value_kind="complex", reference_bin=0), small_geometry, spec)


def test_reconstruct_phasor_localizes_point() -> None:
    geometry = grid_geometry(16, 16)
    truth = np.array([0.0, 0.05, 0.85])
    cube = render_ideal_transients(geometry, make_point_target(truth), bins=512)
    spec = ReconstructionSpec.around(truth, voxels=21, voxel_size=0.01)

    sut = reconstruct_phasor(cube, geometry, spec, BEST_PHASOR_PARAMS)

    assert sut.value_kind == "real"
    assert np.all(sut.data >= 0)
    assert np.linalg.norm(argmax_position(sut) - truth) <= BEST_PHASOR_PARAMS.wavelength / 2


def test_parameter_sweep(small_geometry, mocker) -> None:
    target = make_point_target((0.0, 0.0, 0.6))
    cube = render_ideal_transients(small_geometry, target, bins=512)
    spec = ReconstructionSpec.around((0.0, 0.0, 0.6), voxels=8, voxel_size=0.02)
    on_volume = mocker.stub(name="on_volume")

    sut = parameter_sweep(cube, small_geometry, spec, (0.1, 0.08), (3.0, 4.0), ground_truth=target, on_volume=on_volume)

    assert [(entry.wavelength, entry.sigma) for entry in sut] == [(0.1, 3.0), (0.1, 4.0), (0.08, 3.0), (0.08, 4.0)]
    assert all(entry.peak_to_background > 1 for entry in sut)
    assert all(0 <= entry.iou <= 1 for entry in sut)
    assert on_volume.call_count == 4
    params, volume = on_volume.call_args_list[0].args
    assert params == PhasorParams(wavelength=0.1, sigma=3.0)
    assert volume.dims == (8, 8, 8)


def test_parameter_sweep_defaults() -> None:
    assert SWEEP_WAVELENGTHS == (0.10, 0.08, 0.06)
    assert SWEEP_SIGMAS == (3.0, 4.0, 5.0)


def test_parameter_sweep_without_ground_truth(small_geometry) -> None:
    cube = render_ideal_transients(small_geometry, make_point_target((0.0, 0.0, 0.6)), bins=512)
    spec = ReconstructionSpec.around((0.0, 0.0, 0.6), voxels=4, voxel_size=0.02)

    sut = parameter_sweep(cube, small_geometry, spec, (0.1,), (3.0,))

    assert len(sut) == 1
    assert sut[0].iou is None


def test_parameter_sweep_needs_parameters(small_geometry) -> None:
    cube = TimeHistogramCube.from_array(np.zeros((8, 8, 64)), reference_bin=0)
    spec = ReconstructionSpec.around((0.0, 0.0, 0.6), voxels=4, voxel_size=0.02)

    with pytest.raises(ValueError, match="at least one"):
        parameter_sweep(cube, small_geometry, spec, (), (3.0,))


def test_phasor_transform_is_linear() -> None:
    rng = np.random.default_rng(5)
    first, second = rng.random((2, 2, 64)), rng.random((2, 2, 64))
    wavelet = make_wavelet(BEST_PHASOR_PARAMS, 55.0)

    def transform(data):
        return phasor_transform(TimeHistogramCube.from_array(data, reference_bin=0), wavelet).data

    np.testing.assert_allclose(transform(3.0 * first + 0.25 * second), 3.0 * transform(first) + 0.25 * transform(second), atol=1e-12)


@pytest.fixture()
def complex_cubes():
    rng = np.random.default_rng(6)
    data = rng.random((2, 8, 8, 128)) + 1j * rng.random((2, 8, 8, 128))
    return [TimeHistogramCube.from_array(d, value_kind="complex", reference_bin=0) for d in data]


def test_propagate_is_linear(small_geometry, complex_cubes) -> None:
    spec = ReconstructionSpec.around((0.0, 0.0, 0.4), voxels=8, voxel_size=0.02)
    first, second = complex_cubes
    a, b = 0.5 - 2j, 1.5j
    combined = TimeHistogramCube.from_array(a * first.data + b * second.data, value_kind="complex", reference_bin=0)

    sut = propagate(combined, small_geometry, spec)

    expected = a * propagate(first, small_geometry, spec).data + b * propagate(second, small_geometry, spec).data
    np.testing.assert_allclose(sut.data, expected, rtol=1e-9, atol=1e-12 * np.abs(expected).max())


@pytest.mark.parametrize("phase", [0.3, np.pi / 2, 2.0])
def test_magnitude_ignores_global_phase(small_geometry, complex_cubes, phase) -> None:
    spec = ReconstructionSpec.around((0.0, 0.0, 0.4), voxels=8, voxel_size=0.02)
    cube = complex_cubes[0]
    rotated = TimeHistogramCube.from_array(np.exp(1j * phase) * cube.data, value_kind="complex", reference_bin=0)

    expected = propagate(cube, small_geometry, spec).magnitude().data
    sut = propagate(rotated, small_geometry, spec).magnitude().data

    np.testing.assert_allclose(sut, expected, rtol=0, atol=1e-12 * expected.max())


def test_reconstruct_phasor_ignores_uniform_delay(small_geometry) -> None:
    spec = ReconstructionSpec.around((0.0, 0.0, 0.8), voxels=9, voxel_size=0.02)
    ideal = render_ideal_transients(small_geometry, make_point_target((0.0, 0.0, 0.8)), bins=512, include_return_leg=True)

    volumes = []
    for delay in (0, 9):
        raw = apply_instrument(ideal, SensorModel.ideal(8, 8, delay=np.full((8, 8), delay)), poisson=False)
        cube = calibrate(raw, small_geometry, exposure=1.0, reference_bin=100).cube
        volumes.append(reconstruct_phasor(cube, small_geometry, spec, BEST_PHASOR_PARAMS).data)

    np.testing.assert_allclose(volumes[1], volumes[0], rtol=1e-9, atol=1e-12 * volumes[0].max())


def test_two_point_targets_superpose_before_magnitude(small_geometry) -> None:
    spec = ReconstructionSpec.around((0.0, 0.0, 0.6), voxels=8, voxel_size=0.02)
    wavelet = make_wavelet(BEST_PHASOR_PARAMS, 55.0)
    cubes = [
        render_ideal_transients(small_geometry, make_point_target(p), bins=512, first_scatter_amplitude=0.0)
        for p in ((-0.04, 0.0, 0.6), (0.04, 0.0, 0.6))
    ]
    both = TimeHistogramCube.from_array(cubes[0].data + cubes[1].data, reference_bin=cubes[0].reference_bin)

    fields = [propagate(phasor_transform(cube, wavelet), small_geometry, spec).data for cube in cubes]
    sut = propagate(phasor_transform(both, wavelet), small_geometry, spec)

    expected = fields[0] + fields[1]
    np.testing.assert_allclose(sut.data, expected, rtol=1e-9, atol=1e-12 * np.abs(expected).max())
    np.testing.assert_allclose(reconstruct_phasor(both, small_geometry, spec, BEST_PHASOR_PARAMS).data, np.abs(expected), atol=1e-12 * np.abs(expected).max())
