"""Uniform conforming triangulations of the unit square."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .types import IndexArray, Point, Vector

_LOGGER = logging.getLogger(__name__)

BOUNDARY_TOLERANCE = 1e-14


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Triangulation of (0,1)^dim.

    Nodes are numbered row-major by (y, x): node (i, j) has index j * (n_per_side + 1) + i
    and coordinates (i * h, j * h). Elements are counterclockwise vertex triples.
    """

    dim: int
    n_per_side: int
    coordinates: Vector = field(repr=False)
    elements: IndexArray = field(repr=False)
    boundary_mask: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.n_per_side

    @property
    def n_nodes(self) -> int:
        return int(self.coordinates.shape[0])

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    @property
    def nodes(self) -> list[Point]:
        return [(float(x), float(y)) for x, y in self.coordinates]

    @cached_property
    def boundary_nodes(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.boundary_mask))

    @cached_property
    def interior_nodes(self) -> IndexArray:
        return np.flatnonzero(~self.boundary_mask).astype(np.int64)

    def signed_areas(self) -> Vector:
        p = self.coordinates[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def barycentric(self, element: int, point: Point) -> Vector:
        """Barycentric coordinates of `point` with respect to an element."""
        p = self.coordinates[self.elements[element]]
        T = np.column_stack((p[1] - p[0], p[2] - p[0]))
        l12 = np.linalg.solve(T, np.asarray(point, dtype=np.float64) - p[0])
        return np.array([1.0 - l12.sum(), l12[0], l12[1]])

    def nearest_node(self, point: Point) -> int:
        d2 = np.sum((self.coordinates - np.asarray(point, dtype=np.float64)) ** 2, axis=1)
        return int(np.argmin(d2))

    def edge_counts(self) -> dict[tuple[int, int], int]:
        counts: dict[tuple[int, int], int] = {}
        for tri in self.elements:
            for a, b in ((0, 1), (1, 2), (2, 0)):
                i, j = sorted((int(tri[a]), int(tri[b])))
                counts[i, j] = counts.get((i, j), 0) + 1
        return counts


def build_uniform(n_per_side: int, dim: int = 2) -> Mesh:
    if n_per_side < 1:
        raise ValueError(f"n_per_side must be a positive integer, got {n_per_side!r}")
    if dim == 3:
        raise NotImplementedError("Only two-dimensional meshes are constructed")
    if dim != 2:
        raise ValueError(f"Unsupported dimension {dim!r}")

    n = n_per_side
    ticks = np.arange(n + 1, dtype=np.float64) / n
    xx, yy = np.meshgrid(ticks, ticks)  # row-major by (y, x)
    coordinates = np.column_stack((xx.ravel(), yy.ravel()))

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    n00 = (j * (n + 1) + i).ravel()
    n10 = n00 + 1
    n01 = n00 + (n + 1)
    n11 = n01 + 1
    # every cell is split along its lower-left to upper-right diagonal
    lower = np.column_stack((n00, n10, n11))
    upper = np.column_stack((n00, n11, n01))
    elements = np.stack((lower, upper), axis=1).reshape(-1, 3).astype(np.int64)

    on_edge = (np.abs(coordinates) <= BOUNDARY_TOLERANCE) | (np.abs(coordinates - 1.0) <= BOUNDARY_TOLERANCE)
    boundary_mask = on_edge.any(axis=1)

    _LOGGER.debug("Built uniform mesh n_per_side=%d: %d nodes, %d elements", n, len(coordinates), len(elements))

    return Mesh(
        dim=dim,
        n_per_side=n,
        coordinates=coordinates,
        elements=elements,
        boundary_mask=boundary_mask,
    )


def interior_index_map(mesh: Mesh) -> dict[int, int]:
    return {int(node): k for k, node in enumerate(mesh.interior_nodes)}


__all__ = [
    "BOUNDARY_TOLERANCE",
    "Mesh",
    "build_uniform",
    "interior_index_map",
]
