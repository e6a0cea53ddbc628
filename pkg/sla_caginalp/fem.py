"""P1 finite elements on a `Mesh`: assembly, interpolation, projections and discrete norms."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
import scipy.sparse as sp

from .linalg import SolverConfig, SparseMatrix, as_sparse, cg_solve, solver_config
from .mesh import Mesh
from .quadrature import QuadratureRule, triangle_rule
from .types import SpaceTimeField, SpatialField, SpatialGradient, Vector
from .utils import as_field_values

_LOGGER = logging.getLogger(__name__)

_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0

# ∫_K λ_i λ_j λ_l dx / |K| : 1/10 for i=j=l, 1/30 for two equal indices, 1/60 for three distinct
_TRIPLE = np.full((3, 3, 3), 1.0 / 60.0)
for _i in range(3):
    for _j in range(3):
        if _i != _j:
            _TRIPLE[_i, _i, _j] = _TRIPLE[_i, _j, _i] = _TRIPLE[_j, _i, _i] = 1.0 / 30.0
    _TRIPLE[_i, _i, _i] = 1.0 / 10.0

FD_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class FemSpace:
    mesh: Mesh
    gradients: Vector = field(repr=False)
    areas: Vector = field(repr=False)

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_nodes

    @cached_property
    def mass(self) -> SparseMatrix:
        return assemble_mass(self)

    @cached_property
    def stiffness(self) -> SparseMatrix:
        return assemble_stiffness(self)

    def quadrature_points(self, rule: QuadratureRule) -> Vector:
        """Physical coordinates of the rule's points on every element, shape (E, nq, 2)."""
        vertices = self.mesh.coordinates[self.mesh.elements]
        return np.einsum("qi,eid->eqd", rule.points, vertices)


def create_space(mesh: Mesh) -> FemSpace:
    vertices = mesh.coordinates[mesh.elements]
    x = vertices[:, :, 0]
    y = vertices[:, :, 1]
    twice_area = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    if np.any(twice_area <= 0):
        raise ValueError("Mesh contains degenerate or clockwise elements")

    gradients = np.empty((mesh.n_elements, 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        gradients[:, i, 0] = (y[:, j] - y[:, k]) / twice_area
        gradients[:, i, 1] = (x[:, k] - x[:, j]) / twice_area

    return FemSpace(mesh=mesh, gradients=gradients, areas=0.5 * twice_area)


def scatter_local(space: FemSpace, local: Vector) -> SparseMatrix:
    """Sum per-element (E, 3, 3) local matrices into a global CSR matrix."""
    elements = space.mesh.elements
    rows = np.repeat(elements, 3, axis=1).ravel()
    cols = np.tile(elements, (1, 3)).ravel()
    n = space.n_dofs
    return as_sparse(sp.coo_array((local.ravel(), (rows, cols)), shape=(n, n)))


def assemble_mass(space: FemSpace) -> SparseMatrix:
    local = space.areas[:, None, None] * _LOCAL_MASS[None, :, :]
    return scatter_local(space, local)


def assemble_stiffness(space: FemSpace) -> SparseMatrix:
    G = space.gradients
    local = space.areas[:, None, None] * np.einsum("eid,ejd->eij", G, G)
    return scatter_local(space, local)


def assemble_weighted_mass(space: FemSpace, w: Vector) -> SparseMatrix:
    """Exact ∫ I_h(w) χ_i χ_j for a nodal weight vector."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (space.n_dofs,):
        raise ValueError(f"Weight vector must have {space.n_dofs} entries, got shape {w.shape}")

    w_local = w[space.mesh.elements]
    local = space.areas[:, None, None] * np.einsum("ijl,el->eij", _TRIPLE, w_local)
    return scatter_local(space, local)


def nodal_interpolate(space: FemSpace, f: SpatialField) -> Vector:
    coords = space.mesh.coordinates
    return as_field_values(f(coords[:, 0], coords[:, 1]), space.n_dofs)


def load_from_function(space: FemSpace, f: SpaceTimeField, t: float) -> Vector:
    coords = space.mesh.coordinates
    values = as_field_values(f(coords[:, 0], coords[:, 1], t), space.n_dofs)
    return np.asarray(space.mass @ values, dtype=np.float64)


def vector_mass_load(space: FemSpace, values: Vector) -> Vector:
    """P1-interpolated load of a nodal vector field of shape (N, 2), returned with the same shape."""
    values = np.asarray(values, dtype=np.float64).reshape(space.n_dofs, 2)
    return np.column_stack([space.mass @ values[:, c] for c in range(2)])


def integrate(space: FemSpace, f: SpatialField, order: int = 4) -> float:
    rule = triangle_rule(order)
    pts = space.quadrature_points(rule)
    values = np.asarray(f(pts[..., 0], pts[..., 1]), dtype=np.float64)
    values = np.broadcast_to(values, pts.shape[:2])
    return float(np.sum(space.areas * (values @ rule.weights)))


def integrate_composite(
    space: FemSpace,
    nodal: Vector,
    g: Callable[[Any], Any],
    order: int = 4,
) -> float:
    """∫ g(I_h v) dx, exact when g is a polynomial of degree <= order."""
    rule = triangle_rule(order)
    at_points = nodal[space.mesh.elements] @ rule.points.T
    values = np.asarray(g(at_points), dtype=np.float64)
    return float(np.sum(space.areas * (values @ rule.weights)))


def _fd_gradient(f: SpatialField) -> SpatialGradient:
    h = FD_STEP

    def grad(x: Vector, y: Vector) -> tuple[Any, Any]:
        def d(fp: Callable[[float], Any]) -> Any:
            return (-fp(2 * h) + 8 * fp(h) - 8 * fp(-h) + fp(-2 * h)) / (12 * h)

        gx = d(lambda s: np.asarray(f(x + s, y), dtype=np.float64))
        gy = d(lambda s: np.asarray(f(x, y + s), dtype=np.float64))
        return gx, gy

    return grad


def ritz_project(
    space: FemSpace,
    f: SpatialField,
    config: SolverConfig | None = None,
    grad: SpatialGradient | None = None,
) -> Vector:
    """
    Neumann Ritz projection: (∇(f - R_h f), ∇ψ) = 0 for all ψ and ∫ R_h f = ∫ f.

    When `grad` is omitted, ∇f is approximated by fourth-order central differences.
    """
    config = solver_config.resolve(config)
    grad = grad or _fd_gradient(f)

    rule = triangle_rule(4)
    pts = space.quadrature_points(rule)
    gx, gy = grad(pts[..., 0], pts[..., 1])
    mean_grad = np.stack(
        (
            np.broadcast_to(np.asarray(gx, dtype=np.float64), pts.shape[:2]) @ rule.weights,
            np.broadcast_to(np.asarray(gy, dtype=np.float64), pts.shape[:2]) @ rule.weights,
        ),
        axis=1,
    )
    local = space.areas[:, None] * np.einsum("eid,ed->ei", space.gradients, mean_grad)
    rhs = np.bincount(space.mesh.elements.ravel(), weights=local.ravel(), minlength=space.n_dofs)
    rhs -= rhs.mean()

    projected = cg_solve(space.stiffness, rhs, config)

    ones = np.ones(space.n_dofs)
    measure = float(ones @ (space.mass @ ones))
    shift = (integrate(space, f) - float(ones @ (space.mass @ projected))) / measure
    return projected + shift


def discrete_laplacian(
    space: FemSpace,
    f: Vector,
    config: SolverConfig | None = None,
    *,
    lumped: bool = False,
) -> Vector:
    """Δ_h f = -M⁻¹ S f with the space's stiffness and its consistent or row-lumped mass."""
    rhs = -(space.stiffness @ np.asarray(f, dtype=np.float64))
    if lumped:
        return np.asarray(rhs / (space.mass @ np.ones(space.n_dofs)), dtype=np.float64)
    return cg_solve(space.mass, rhs, config)


@dataclass(frozen=True)
class Norms:
    l2: float
    h1_semi: float
    linf: float


def norms(space: FemSpace, f: Vector) -> Norms:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 2:
        # vector field stored per node: sum the component norms
        parts = [norms(space, f[:, c]) for c in range(f.shape[1])]
        return Norms(
            l2=float(np.sqrt(sum(p.l2**2 for p in parts))),
            h1_semi=float(np.sqrt(sum(p.h1_semi**2 for p in parts))),
            linf=max(p.linf for p in parts),
        )

    return Norms(
        l2=float(np.sqrt(max(f @ (space.mass @ f), 0.0))),
        h1_semi=float(np.sqrt(max(f @ (space.stiffness @ f), 0.0))),
        linf=float(np.max(np.abs(f))) if f.size else 0.0,
    )


__all__ = [
    "FemSpace",
    "Norms",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_weighted_mass",
    "create_space",
    "discrete_laplacian",
    "integrate",
    "integrate_composite",
    "load_from_function",
    "nodal_interpolate",
    "norms",
    "ritz_project",
    "scatter_local",
    "vector_mass_load",
]
