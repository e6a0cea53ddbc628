"""Gaussian laser spot with a fixed or piecewise-linearly moving center."""

from __future__ import annotations

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing_extensions import Self

from .types import Point, SourceKind

TIME_TOLERANCE = 1e-12

LASER_PEAK_INTENSITY = 4.0e4
LASER_BEAM_WIDTH = 0.015


class PathSegment(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    t_start: float
    t_end: float
    start: tuple[float, float]
    end: tuple[float, float]

    @model_validator(mode="after")
    def _check_interval(self) -> Self:
        if not self.t_start < self.t_end:
            raise ValueError(f"segment must have t_start < t_end, got [{self.t_start}, {self.t_end}]")
        return self

    def contains(self, t: float) -> bool:
        return self.t_start - TIME_TOLERANCE <= t <= self.t_end + TIME_TOLERANCE

    def position(self, t: float) -> Point:
        s = min(max((t - self.t_start) / (self.t_end - self.t_start), 0.0), 1.0)
        return (
            self.start[0] + s * (self.end[0] - self.start[0]),
            self.start[1] + s * (self.end[1] - self.start[1]),
        )


class SourceSpec(BaseModel):
    """
    Heat source I(x, y, t) = I_m exp(-|x - c(t)|^2 / w0^2).

    Path segments are closed on the right: at a shared endpoint the earlier segment wins.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: SourceKind = SourceKind.none
    I_m: float = Field(default=0.0, ge=0)
    w0: float = Field(default=LASER_BEAM_WIDTH, gt=0)
    center: tuple[float, float] | None = None
    segments: tuple[PathSegment, ...] = ()

    @model_validator(mode="after")
    def _check_kind(self) -> Self:
        if self.kind is SourceKind.fixed_gaussian and self.center is None:
            raise ValueError("fixed_gaussian source requires a center")

        if self.kind is SourceKind.path_gaussian:
            if not self.segments:
                raise ValueError("path_gaussian source requires at least one segment")
            for prev, nxt in zip(self.segments, self.segments[1:]):
                if nxt.t_start < prev.t_end - TIME_TOLERANCE:
                    raise ValueError(f"segments overlap at t={nxt.t_start}")
                if nxt.t_start > prev.t_end + TIME_TOLERANCE:
                    raise ValueError(f"segments leave a gap between t={prev.t_end} and t={nxt.t_start}")

        return self

    @property
    def window(self) -> tuple[float, float]:
        if self.kind is SourceKind.path_gaussian:
            return self.segments[0].t_start, self.segments[-1].t_end
        return -np.inf, np.inf

    def covers(self, t_begin: float, t_end: float) -> bool:
        lo, hi = self.window
        return lo - TIME_TOLERANCE <= t_begin and t_end <= hi + TIME_TOLERANCE


def center_at(spec: SourceSpec, t: float) -> Point | None:
    if spec.kind is SourceKind.none:
        return None
    if spec.kind is SourceKind.fixed_gaussian:
        assert spec.center is not None
        return spec.center

    for segment in spec.segments:
        if segment.contains(t):
            return segment.position(t)

    lo, hi = spec.window
    raise ValueError(f"t={t!r} lies outside the source path window [{lo}, {hi}]")


def evaluate(spec: SourceSpec, x: Any, y: Any, t: float) -> Any:
    center = center_at(spec, t)
    if center is None or spec.I_m == 0.0:
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))

    r2 = (np.asarray(x, dtype=np.float64) - center[0]) ** 2 + (np.asarray(y, dtype=np.float64) - center[1]) ** 2
    return spec.I_m * np.exp(-r2 / spec.w0**2)


def distance_to_path(spec: SourceSpec, x: Any, y: Any) -> Any:
    """Distance from (x, y) to the set the spot center visits: the fixed center or the union of the segments."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if spec.kind is SourceKind.none:
        return np.full(np.broadcast_shapes(x.shape, y.shape), np.inf)
    if spec.kind is SourceKind.fixed_gaussian:
        assert spec.center is not None
        return np.hypot(x - spec.center[0], y - spec.center[1])

    best = np.full(np.broadcast_shapes(x.shape, y.shape), np.inf)
    for segment in spec.segments:
        (ax, ay), (bx, by) = segment.start, segment.end
        dx, dy = bx - ax, by - ay
        length2 = dx * dx + dy * dy
        s = np.zeros_like(best) if length2 == 0.0 else np.clip(((x - ax) * dx + (y - ay) * dy) / length2, 0.0, 1.0)
        best = np.minimum(best, np.hypot(x - (ax + s * dx), y - (ay + s * dy)))
    return best


def fixed_spot(
    center: Point = (0.5, 0.5),
    I_m: float = LASER_PEAK_INTENSITY,
    w0: float = LASER_BEAM_WIDTH,
) -> SourceSpec:
    return SourceSpec(kind=SourceKind.fixed_gaussian, I_m=I_m, w0=w0, center=center)


def y_path(I_m: float = LASER_PEAK_INTENSITY, w0: float = LASER_BEAM_WIDTH) -> SourceSpec:
    """Three strokes converging at the square's center, one per third of the unit time window."""
    hub = (0.5, 0.5)
    third = 1.0 / 3.0
    return SourceSpec(
        kind=SourceKind.path_gaussian,
        I_m=I_m,
        w0=w0,
        segments=(
            PathSegment(t_start=0.0, t_end=third, start=(0.25, 5.0 / 6.0), end=hub),
            PathSegment(t_start=third, t_end=2.0 * third, start=(0.5, 1.0 / 6.0), end=hub),
            PathSegment(t_start=2.0 * third, t_end=1.0, start=(0.75, 5.0 / 6.0), end=hub),
        ),
    )


__all__ = [
    "LASER_BEAM_WIDTH",
    "LASER_PEAK_INTENSITY",
    "PathSegment",
    "SourceSpec",
    "center_at",
    "distance_to_path",
    "evaluate",
    "fixed_spot",
    "y_path",
]
