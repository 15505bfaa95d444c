from __future__ import annotations

from pydantic.dataclasses import dataclass

__all__ = [
    "PhysicalConstants",
    "C",
    "PS",
    "SENSOR_BINS",
    "BIN_WIDTH_PS",
    "SENSOR_ROWS",
    "SENSOR_COLS",
    "EXPOSURE_S",
    "REPETITION_RATE_HZ",
    "PDE",
    "JITTER_FWHM_PS",
    "PULSE_FWHM_PS",
    "DCR_BAD_PIXEL_THRESHOLD",
]


@dataclass(frozen=True)
class PhysicalConstants:
    c: float = 299_792_458.0  # m/s, exact


PHYSICAL = PhysicalConstants()
C = PHYSICAL.c
PS = 1e-12

SENSOR_ROWS = 32
SENSOR_COLS = 32
SENSOR_BINS = 1024
BIN_WIDTH_PS = 55.0
EXPOSURE_S = 3.0
REPETITION_RATE_HZ = 10e6
PDE = 0.28
JITTER_FWHM_PS = 150.0
PULSE_FWHM_PS = 70.0
DCR_BAD_PIXEL_THRESHOLD = 1000.0  # counts/s
