"""Input validation helpers used by every public entry point."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError


def as_float_array(x, name: str = "array", ndim: int | None = None) -> np.ndarray:
    """Coerce to a float64 ndarray and reject NaN/inf values."""
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise InvalidInputError(f"{name} must be {ndim}-D, got {arr.ndim}-D")
    if arr.size == 0:
        raise InvalidInputError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise InvalidInputError(f"{name} must be a positive finite number, got {value}")
    return value


def check_same_length(a, b, what: str = "signals") -> None:
    if len(a) != len(b):
        raise InvalidInputError(f"{what} must have equal length ({len(a)} != {len(b)})")


def check_same_rate(rate_a: float, rate_b: float) -> None:
    if rate_a != rate_b:
        raise InvalidInputError(f"sample rates differ ({rate_a} != {rate_b})")


def check_band(lo_hz: float, hi_hz: float, rate_hz: float) -> None:
    if not (0.0 < lo_hz < hi_hz < rate_hz / 2.0):
        raise InvalidInputError(
            f"band [{lo_hz}, {hi_hz}] must satisfy 0 < lo < hi < rate/2 = {rate_hz / 2.0}"
        )


def check_unit_interval(value: float, name: str) -> float:
    value = float(value)
    if not (0.0 < value < 1.0):
        raise InvalidInputError(f"{name} must lie strictly in (0, 1), got {value}")
    return value


def check_shape(arr: np.ndarray, shape: tuple[int, ...], name: str) -> None:
    if arr.shape != shape:
        raise InvalidInputError(f"{name} must have shape {shape}, got {arr.shape}")
