from __future__ import annotations


class SpadNlosException(Exception): ...


class DomainError(SpadNlosException, ValueError): ...


class FormatError(SpadNlosException):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class SimulationError(SpadNlosException): ...


class CalibrationError(SpadNlosException): ...


class NoPeakError(CalibrationError):
    def __init__(self, message: str, pixel: tuple[int, int] | None = None):
        if pixel is not None:
            message = f"pixel (row={pixel[0]}, col={pixel[1]}): {message}"
        super().__init__(message)
        self.pixel = pixel


class ReconstructionError(SpadNlosException): ...


class UsageError(SpadNlosException): ...
