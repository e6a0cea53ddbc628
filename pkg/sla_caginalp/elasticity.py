"""Quasi-static plane-strain elasticity with a phase-dependent stiffness and eigenstrain."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import FemSpace, vector_mass_load
from .linalg import SolverConfig, SparseMatrix, as_sparse, cg_solve_info
from .model import (
    VOIGT_IDENTITY,
    VOIGT_WEIGHTS,
    MaterialLaws,
    ModelParams,
    gel_elasticity_tensor,
    stiffness_scale,
)
from .types import IndexArray, Vector

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ElasticSystem:
    """
    Interior-DOF system K U = F.

    Displacement DOFs are interleaved per node (2 * node + component); `dof_map` lists the
    interior DOFs in that numbering.
    """

    K: SparseMatrix
    F: Vector
    dof_map: IndexArray
    n_nodes: int

    @property
    def n_dofs(self) -> int:
        return int(self.dof_map.shape[0])

    def restrict(self, u: Vector) -> Vector:
        return np.asarray(u, dtype=np.float64).ravel()[self.dof_map]

    def expand(self, interior: Vector) -> Vector:
        full = np.zeros(2 * self.n_nodes)
        full[self.dof_map] = interior
        return full.reshape(self.n_nodes, 2)

    def residual_norm(self, u: Vector) -> float:
        """Relative residual ‖KU - F‖ / ‖F‖ of a full nodal displacement; absolute when F = 0."""
        U = self.restrict(u)
        r = float(np.linalg.norm(self.K @ U - self.F))
        f = float(np.linalg.norm(self.F))
        return r / f if f > 0 else r


def strain_displacement(gradients: Vector) -> Vector:
    """Per-element (E, 3, 6) map from interleaved nodal displacements to (ε11, ε22, ε12)."""
    B = np.zeros((gradients.shape[0], 3, 6))
    gx = gradients[:, :, 0]
    gy = gradients[:, :, 1]
    B[:, 0, 0::2] = gx
    B[:, 1, 1::2] = gy
    B[:, 2, 0::2] = 0.5 * gy
    B[:, 2, 1::2] = 0.5 * gx
    return B


def _element_dofs(space: FemSpace) -> IndexArray:
    elements = space.mesh.elements
    return np.stack((2 * elements, 2 * elements + 1), axis=2).reshape(-1, 6)


def interior_dofs(space: FemSpace) -> IndexArray:
    nodes = space.mesh.interior_nodes
    return np.stack((2 * nodes, 2 * nodes + 1), axis=1).ravel()


def assemble(
    space: FemSpace,
    params: ModelParams,
    laws: MaterialLaws,
    phi: Vector,
    theta: Vector,
    theta0: Vector,
    body_load: Vector | None = None,
) -> ElasticSystem:
    n = space.n_dofs
    phi, theta, theta0 = (np.asarray(v, dtype=np.float64) for v in (phi, theta, theta0))
    for name, v in (("phi", phi), ("theta", theta), ("theta0", theta0)):
        if v.shape != (n,):
            raise ValueError(f"{name} must have {n} nodal values, got shape {v.shape}")

    elements = space.mesh.elements
    coefficient = stiffness_scale(params, laws.k_fun(phi))
    eigenstrain = coefficient * (laws.m_fun(phi) - params.beta * (theta - theta0))

    C = gel_elasticity_tensor(params)
    WC = VOIGT_WEIGHTS[:, None] * C
    B = strain_displacement(space.gradients)

    # I_h of a nodal coefficient integrates to the vertex average times the area
    c_bar = np.asarray(coefficient)[elements].mean(axis=1)
    g_bar = np.asarray(eigenstrain)[elements].mean(axis=1)

    local_K = (space.areas * c_bar)[:, None, None] * np.einsum("eai,ab,ebj->eij", B, WC, B)
    local_F = (space.areas * g_bar)[:, None] * np.einsum("eai,a->ei", B, WC @ VOIGT_IDENTITY)

    dofs = _element_dofs(space)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    K_full = as_sparse(sp.coo_array((local_K.ravel(), (rows, cols)), shape=(2 * n, 2 * n)))
    F_full = np.bincount(dofs.ravel(), weights=local_F.ravel(), minlength=2 * n)

    if body_load is not None:
        F_full += vector_mass_load(space, body_load).ravel()

    dof_map = interior_dofs(space)
    K = as_sparse(K_full[dof_map][:, dof_map])
    return ElasticSystem(K=K, F=F_full[dof_map], dof_map=dof_map, n_nodes=n)


def solve(
    system: ElasticSystem,
    config: SolverConfig | None = None,
    x0: Vector | None = None,
) -> Vector:
    """Displacement as an (N, 2) nodal array, zero on the boundary."""
    if system.n_dofs == 0:
        return system.expand(np.zeros(0))

    guess = system.restrict(x0) if x0 is not None else None
    result = cg_solve_info(system.K, system.F, config, x0=guess)
    _LOGGER.debug("Elasticity solve: %d iterations, residual %.3e", result.iterations, result.residual)
    return system.expand(result.solution)


__all__ = [
    "ElasticSystem",
    "assemble",
    "interior_dofs",
    "solve",
    "strain_displacement",
]
