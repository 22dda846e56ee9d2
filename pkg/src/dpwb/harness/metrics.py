"""Epsilon grid and the two utility metrics."""

from __future__ import annotations

import numpy as np

from dpwb.errors import InvalidArgumentError

GRID_LINEAR_STEPS = 50
GRID_LOG_STEPS = 23
GRID_LOG_START = 0.5
GRID_END = 100.0


class UndefinedBaselineError(InvalidArgumentError):
    """Relative error is undefined for a zero baseline."""


def _six_digits(x: float) -> float:
    return float(f"{x:.6g}")


def epsilon_grid() -> tuple[float, ...]:
    """The 73 privacy parameters of the utility suite.

    0.01 to 0.50 in steps of 0.01, then 23 geometric steps ``0.5 * 200**(i/23)``
    ending at exactly 100. Values are rounded to 6 significant digits so that
    they survive a round trip through the report files unchanged.
    """
    linear = [k / 100 for k in range(1, GRID_LINEAR_STEPS + 1)]
    ratio = GRID_END / GRID_LOG_START
    log = [_six_digits(GRID_LOG_START * ratio ** (i / GRID_LOG_STEPS)) for i in range(1, GRID_LOG_STEPS + 1)]
    log[-1] = GRID_END
    return tuple(linear + log)


def mre(errors, baseline: float) -> float:
    """Mean of ``|error| / |baseline|``."""
    if baseline == 0:
        raise UndefinedBaselineError("relative error undefined for a zero baseline")
    errors = np.abs(np.asarray(errors, dtype=float))
    return float(np.mean(errors / abs(baseline)))


def sase(errors, dataset_size: int) -> float:
    """Sample standard deviation (n - 1 denominator) of ``|error| / dataset_size``."""
    errors = np.abs(np.asarray(errors, dtype=float))
    if errors.size < 2:
        raise InvalidArgumentError("sase needs at least 2 errors")
    if dataset_size <= 0:
        raise InvalidArgumentError(f"dataset_size must be positive, got {dataset_size}")
    return float(np.std(errors / dataset_size, ddof=1))
