from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cache

import numpy as np

from .types import Vector


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Symmetric rule on a triangle.

    `points` are barycentric coordinates (one row per point), `weights` are fractions of the
    triangle area and sum to one, `order` is the polynomial degree integrated exactly.
    """

    points: Vector
    weights: Vector
    order: int

    @property
    def n_points(self) -> int:
        return int(self.weights.shape[0])


def _orbit3(a: float) -> list[tuple[float, float, float]]:
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)]


def _rule(order: int, orbits: list[tuple[float, list[tuple[float, float, float]]]]) -> QuadratureRule:
    points = [p for _, pts in orbits for p in pts]
    weights = [w for w, pts in orbits for _ in pts]
    return QuadratureRule(np.array(points), np.array(weights), order)


@cache
def _rules() -> dict[int, QuadratureRule]:
    sqrt15 = math.sqrt(15.0)
    third = 1.0 / 3.0
    return {
        1: _rule(1, [(1.0, [(third, third, third)])]),
        2: _rule(2, [(third, _orbit3(1.0 / 6.0))]),
        4: _rule(
            4,
            [
                (0.22338158967801146570, _orbit3(0.44594849091596488632)),
                (0.10995174365532186764, _orbit3(0.09157621350977074346)),
            ],
        ),
        5: _rule(
            5,
            [
                (9.0 / 40.0, [(third, third, third)]),
                ((155.0 - sqrt15) / 1200.0, _orbit3((6.0 - sqrt15) / 21.0)),
                ((155.0 + sqrt15) / 1200.0, _orbit3((6.0 + sqrt15) / 21.0)),
            ],
        ),
    }


def triangle_rule(order: int) -> QuadratureRule:
    """Cheapest available rule that is exact for polynomials of degree `order`."""
    rules = _rules()
    for available in sorted(rules):
        if available >= order:
            return rules[available]

    raise ValueError(f"No triangle rule of order {order}; highest available is {max(rules)}")


__all__ = [
    "QuadratureRule",
    "triangle_rule",
]
