from collections.abc import Sequence
from typing import Any

import numpy as np

from .types import Vector

TIME_GRID_TOLERANCE = 1e-9


def as_field_values(values: Any, n: int) -> Vector:
    """
    Broadcast the result of a field evaluation to a float vector of length n.

    Fields are allowed to return scalars (constant fields) or arrays.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape == (n,):
        return arr.copy()

    return np.broadcast_to(arr, (n,)).copy()


def count_steps(T_final: float, tau: float) -> int:
    if tau <= 0:
        raise ValueError(f"Time step must be positive, got {tau!r}")
    if T_final <= 0:
        raise ValueError(f"Final time must be positive, got {T_final!r}")

    steps = round(T_final / tau)
    if steps < 1 or abs(steps * tau - T_final) > TIME_GRID_TOLERANCE * max(1.0, T_final):
        raise ValueError(f"T_final={T_final!r} is not an integer multiple of tau={tau!r}")

    return steps


def fit_order(params: Sequence[float], errors: Sequence[float], last: int = 3) -> float:
    """
    Least-squares slope of log(error) against log(parameter) over the last points of a sweep.
    """
    if len(params) != len(errors):
        raise ValueError("params and errors must have the same length")
    if len(params) < 2:
        raise ValueError("At least two points are required to fit an order")

    xs = np.log(np.asarray(params[-last:], dtype=np.float64))
    ys = np.log(np.maximum(np.asarray(errors[-last:], dtype=np.float64), np.finfo(np.float64).tiny))
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


__all__ = [
    "TIME_GRID_TOLERANCE",
    "as_field_values",
    "count_steps",
    "fit_order",
]
