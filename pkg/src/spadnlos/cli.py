from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

from pydantic import RootModel
from pydantic.dataclasses import dataclass

from .calibration import calibrate
from .common import (
    load_cube,
    load_geometry,
    load_volume,
    make_filesystem_safe,
    maximum_intensity_projection,
    read_sidecar,
    save_cube,
    save_geometry,
    save_json,
    save_volume,
    to_json,
    write_pgm,
    write_sidecar,
)
from .config import (
    CalibrateConfig,
    ProjectConfig,
    ReconstructConfig,
    RunConfig,
    SimulateConfig,
    SweepConfig,
    load_run_config,
    load_scene,
)
from .exceptions import SpadNlosException, UsageError
from .fbp import reconstruct_fbp
from .histogram import default_geometry
from .metrics import argmax_position, peak_to_background
from .objects import CalibrationReport, DcrMap, DelayMap, FwhmMap, PhasorParams, SceneGeometry, TimeHistogramCube, VoxelVolume
from .phasor import parameter_sweep, reconstruct_phasor
from .simulator import apply_instrument, dark_frame, render_ideal_transients

__all__ = ["CalibrationArtifacts", "main", "build_parser", "cmd_simulate", "cmd_calibrate", "cmd_reconstruct", "cmd_project", "cmd_sweep"]

logger = logging.getLogger(__name__)

ERROR_PREFIX = "spadnlos: error: "
PROJECTION_VIEWS = ("front", "side", "top")


@dataclass(frozen=True)
class CalibrationArtifacts:
    report: CalibrationReport
    dcr: DcrMap
    delays: DelayMap
    fwhm: FwhmMap


def _effective(config: RunConfig) -> dict[str, Any]:
    return RootModel[type(config)](config).model_dump(mode="json")


def _recorded_geometry(cube_path: Path) -> Path | None:
    """The geometry file named in a cube's sidecar. Relative entries are relative to the cube's directory."""
    recorded = read_sidecar(cube_path).get("geometry")
    if not recorded:
        return None

    path = Path(recorded)
    if not path.is_absolute():
        path = cube_path.parent / path
    if not path.exists():
        raise UsageError(f"{cube_path} was made with geometry {recorded}, which is missing ({path}); pass --geometry")
    return path


def _geometry_for(path: Path | None, cube_path: Path) -> SceneGeometry:
    """An explicit geometry file, else the one recorded next to the cube, else the default setup."""
    if path is None:
        path = _recorded_geometry(cube_path)

    if path is None:
        logger.info("No geometry given; using the default 32x32 setup")
        return default_geometry()
    return load_geometry(path)


def _aligned_cube(cube_path: Path, reference_bin: int | None) -> TimeHistogramCube:
    cube = load_cube(cube_path)
    if reference_bin is None:
        reference_bin = read_sidecar(cube_path).get("reference_bin")
    if reference_bin is None:
        return cube
    return cube.derive(cube.data, reference_bin=reference_bin)


def cmd_simulate(config: SimulateConfig) -> Path:
    scene = load_scene(config.scene)
    seed = scene.seed if config.seed is None else config.seed
    poisson = scene.poisson if config.poisson is None else config.poisson

    geometry = scene.geometry()
    target = scene.target.build()
    sensor = scene.sensor.build(scene.rows, scene.cols, seed)

    ideal = render_ideal_transients(
        geometry,
        target,
        bins=scene.bins,
        bin_width=scene.bin_width,
        reference_bin=scene.reference_bin,
        first_scatter_amplitude=scene.first_scatter_amplitude,
        signal_scale=scene.signal_scale,
        include_return_leg=scene.include_return_leg,
    )
    cube = apply_instrument(ideal, sensor, poisson=poisson)

    output = save_cube(cube, config.output)
    geometry_path = save_geometry(geometry, output.with_name(output.stem + ".geometry.json"))

    summary = {
        "total_counts": float(cube.data.sum()),
        "max_per_pixel": float(cube.data.max()),
        "value_kind": cube.value_kind,
        "target_samples": len(target),
        "exposure_s": sensor.exposure,
        "repetition_rate_hz": sensor.repetition_rate,
        "laser_pulses": sensor.exposure * sensor.repetition_rate,
    }
    write_sidecar(
        output,
        {
            "command": "simulate",
            "config": _effective(config),
            "scene": RootModel[type(scene)](scene).model_dump(mode="json"),
            "seed": seed,
            "geometry": geometry_path.name,
            "summary": summary,
        },
    )

    if config.dark_output is not None:
        dark = save_cube(dark_frame(sensor, bins=scene.bins, bin_width=scene.bin_width, poisson=poisson), config.dark_output)
        write_sidecar(dark, {"command": "simulate", "config": _effective(config), "seed": seed, "dark": True})

    print(f"Wrote {output} ({cube.rows}x{cube.cols}x{cube.bins}, {cube.value_kind})")
    print(f"  target samples : {len(target)} ({target.kind})")
    print(f"  total counts   : {summary['total_counts']:.0f}")
    print(f"  per-pixel max  : {summary['max_per_pixel']:.1f}")
    print(f"  exposure       : {sensor.exposure:g} s at {sensor.repetition_rate / 1e6:g} MHz")
    return output


def cmd_calibrate(config: CalibrateConfig) -> Path:
    raw = load_cube(config.raw)
    dark = None if config.dark is None else load_cube(config.dark)
    geometry = _geometry_for(config.geometry, config.raw)

    result = calibrate(
        raw,
        geometry,
        dark=dark,
        exposure=config.exposure,
        gate=config.gate,
        threshold=config.threshold,
        guard=config.guard,
        reference_bin=config.reference_bin,
        strip=config.strip,
    )

    output = save_cube(result.cube, config.output)
    report_path = config.report_path
    report_path.write_text(to_json(CalibrationArtifacts(result.report, result.dcr, result.delays, result.fwhm)), encoding="utf8")

    recorded_geometry = config.geometry or _recorded_geometry(config.raw)
    write_sidecar(
        output,
        {
            "command": "calibrate",
            "config": _effective(config),
            "reference_bin": result.cube.reference_bin,
            "geometry": None if recorded_geometry is None else os.path.relpath(recorded_geometry.resolve(), output.resolve().parent),
            "report": str(report_path),
        },
    )

    report = result.report
    print(f"Wrote {output} and {report_path}")
    print(f"  DCR < 100 counts/s  : {report.fraction_dcr_below_100:.1%} of pixels")
    print(f"  DCR < 1000 counts/s : {report.fraction_dcr_below_1000:.1%} of pixels")
    print(f"  bad pixels          : {report.bad_pixels}")
    print(f"  delay spread        : {report.delay_spread_bins} bins ({report.delay_spread_ps:.0f} ps)")
    print(f"  mean FWHM           : {report.mean_fwhm_ps:.1f} ps ({report.mean_fwhm_bins:.2f} bins)")
    print(f"  reference bin       : {report.reference_bin}, guard {report.guard_bins} bins")
    return output


def _volume_summary(volume: VoxelVolume) -> dict[str, Any]:
    return {
        "argmax_position": [float(v) for v in argmax_position(volume)],
        "peak_to_background": peak_to_background(volume),
    }


def cmd_reconstruct(config: ReconstructConfig) -> Path:
    cube = _aligned_cube(config.cube, config.reference_bin)
    geometry = _geometry_for(config.geometry, config.cube)

    if config.method == "fbp":
        volume = reconstruct_fbp(cube, geometry, config.reconstruction_spec(config.filter_kind), workers=config.workers)
    else:
        params = PhasorParams(wavelength=config.wavelength, sigma=config.sigma)
        volume = reconstruct_phasor(cube, geometry, config.reconstruction_spec(), params, workers=config.workers)

    output = save_volume(volume, config.output)
    summary = _volume_summary(volume)
    write_sidecar(output, {"command": "reconstruct", "config": _effective(config), "summary": summary})

    x, y, z = summary["argmax_position"]
    print(f"Wrote {output} ({'x'.join(map(str, volume.dims))} voxels, {config.method})")
    print(f"  argmax             : ({x:.3f}, {y:.3f}, {z:.3f}) m")
    print(f"  peak-to-background : {summary['peak_to_background']:.2f}")
    return output


def cmd_project(config: ProjectConfig) -> list[Path]:
    volume = load_volume(config.volume)
    views = PROJECTION_VIEWS if config.axis == "all" else (config.axis,)

    written = []
    for view in views:
        path = config.output if config.axis != "all" else config.output.with_name(f"{config.output.stem}_{view}.pgm")
        image = maximum_intensity_projection(volume, view)
        written.append(write_pgm(image, path))
        print(f"Wrote {path} ({view} view, {image.shape[1]}x{image.shape[0]})")

    return written


def cmd_sweep(config: SweepConfig) -> Path:
    cube = _aligned_cube(config.cube, config.reference_bin)
    geometry = _geometry_for(config.geometry, config.cube)
    ground_truth = None if config.scene is None else load_scene(config.scene).target.build()

    on_volume: Callable[[PhasorParams, VoxelVolume], None] | None = None
    if config.images is not None:
        config.images.mkdir(parents=True, exist_ok=True)

        def on_volume(params: PhasorParams, volume: VoxelVolume) -> None:
            name = make_filesystem_safe(f"sweep_lambda{params.wavelength:g}_sigma{params.sigma:g}.pgm")
            write_pgm(maximum_intensity_projection(volume, "front"), config.images / name)

    entries = parameter_sweep(
        cube,
        geometry,
        config.reconstruction_spec(),
        config.wavelengths,
        config.sigmas,
        ground_truth=ground_truth,
        workers=config.workers,
        on_volume=on_volume,
    )

    output = save_json(entries, config.output)
    write_sidecar(output, {"command": "sweep", "config": _effective(config)})

    print(f"Wrote {output} ({len(entries)} entries)")
    for entry in entries:
        iou = "" if entry.iou is None else f", IoU {entry.iou:.3f}"
        print(f"  lambda={entry.wavelength:g} m sigma={entry.sigma:g}: peak/background {entry.peak_to_background:.2f}{iou}")
    return output


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML or JSON file with defaults for this command")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int, help="kernel threads, 0 = all cores (default: $SPADNLOS_WORKERS or 0)")


def _add_volume(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dims", type=int, nargs=3, metavar=("NX", "NY", "NZ"))
    parser.add_argument("--origin", type=float, nargs=3, metavar=("X", "Y", "Z"), help="outer corner of voxel (0, 0, 0), meters")
    parser.add_argument("--voxel-size", type=float, help="meters")
    parser.add_argument("--attenuation", action=argparse.BooleanOptionalAction, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spadnlos", description="Non-line-of-sight imaging with a SPAD camera: simulate, calibrate, reconstruct.")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="render a synthetic acquisition")
    _add_common(simulate)
    simulate.add_argument("--scene", type=Path, help="scene JSON (default: the letter 'F' setup)")
    simulate.add_argument("--output", type=Path)
    simulate.add_argument("--dark-output", type=Path, help="also write a laser-off acquisition")
    simulate.add_argument("--poisson", action=argparse.BooleanOptionalAction, default=None)
    simulate.set_defaults(handler=cmd_simulate, config_cls=SimulateConfig)

    calibrate_ = commands.add_parser("calibrate", help="bad pixels, alignment, FWHM and first-scatter removal")
    _add_common(calibrate_)
    calibrate_.add_argument("--raw", type=Path)
    calibrate_.add_argument("--dark", type=Path)
    calibrate_.add_argument("--geometry", type=Path)
    calibrate_.add_argument("--output", type=Path)
    calibrate_.add_argument("--report", type=Path)
    calibrate_.add_argument("--exposure", type=float, help="seconds")
    calibrate_.add_argument("--gate", type=int, nargs=2, metavar=("START", "STOP"))
    calibrate_.add_argument("--threshold", type=float, help="bad-pixel DCR threshold, counts/s")
    calibrate_.add_argument("--guard", type=int, help="first-scatter half window in bins (default: 3 x mean FWHM)")
    calibrate_.add_argument("--reference-bin", type=int)
    calibrate_.add_argument("--strip", action=argparse.BooleanOptionalAction, default=None)
    calibrate_.set_defaults(handler=cmd_calibrate, config_cls=CalibrateConfig)

    reconstruct = commands.add_parser("reconstruct", help="back projection or phasor-field reconstruction")
    _add_common(reconstruct)
    _add_volume(reconstruct)
    reconstruct.add_argument("--cube", type=Path)
    reconstruct.add_argument("--geometry", type=Path)
    reconstruct.add_argument("--output", type=Path)
    reconstruct.add_argument("--method", choices=("fbp", "phasor"))
    reconstruct.add_argument("--wavelength", "--lambda", type=float, dest="wavelength", help="virtual wavelength, meters")
    reconstruct.add_argument("--sigma", type=float, help="wavelet length in wavelengths")
    reconstruct.add_argument("--filter", choices=("none", "depth_laplacian"), dest="filter_kind")
    reconstruct.add_argument("--reference-bin", type=int)
    reconstruct.set_defaults(handler=cmd_reconstruct, config_cls=ReconstructConfig)

    project = commands.add_parser("project", help="maximum-intensity projection to PGM")
    _add_common(project)
    project.add_argument("--volume", type=Path)
    project.add_argument("--axis", choices=(*PROJECTION_VIEWS, "all"))
    project.add_argument("--output", type=Path)
    project.set_defaults(handler=cmd_project, config_cls=ProjectConfig)

    sweep = commands.add_parser("sweep", help="phasor reconstructions over a (lambda, sigma) grid")
    _add_common(sweep)
    _add_volume(sweep)
    sweep.add_argument("--cube", type=Path)
    sweep.add_argument("--geometry", type=Path)
    sweep.add_argument("--scene", type=Path, help="scene JSON whose target scores each volume by IoU")
    sweep.add_argument("--output", type=Path)
    sweep.add_argument("--images", type=Path, help="directory for one front-view PGM per cell")
    sweep.add_argument("--wavelengths", type=float, nargs="*")
    sweep.add_argument("--sigmas", type=float, nargs="*")
    sweep.add_argument("--reference-bin", type=int)
    sweep.set_defaults(handler=cmd_sweep, config_cls=SweepConfig)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "handler", "config_cls")}
    overrides = {k: (list(v) if isinstance(v, tuple) else v) for k, v in overrides.items()}

    try:
        config = load_run_config(args.config_cls, args.config, overrides)
        args.handler(config)
    except UsageError as exc:
        print(f"{ERROR_PREFIX}{exc}", file=sys.stderr)
        return 2
    except (SpadNlosException, ValueError, OSError) as exc:
        print(f"{ERROR_PREFIX}{exc}", file=sys.stderr)
        return 1

    return 0


if __name__ == "__main__":
    sys.exit(main())

