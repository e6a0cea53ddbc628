from math import factorial
from typing import Any

import numpy as np
from pydantic import TypeAdapter

from sla_caginalp.fem import FemSpace
from sla_caginalp.mesh import Mesh
from sla_caginalp.model import MaterialLaws, ModelParams, lame_constants
from sla_caginalp.quadrature import triangle_rule


def parse_obj_as(tp: Any, obj: Any) -> Any:
    return TypeAdapter(tp).validate_python(obj)


def monomial_integral(a: int, b: int) -> float:
    """∫ x^a y^b over the reference triangle (0,0), (1,0), (0,1)."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def _hat_gradients(vertices: np.ndarray) -> tuple[np.ndarray, float]:
    """Gradients of the three hat functions from the inverse of the [1 x y] Vandermonde matrix."""
    V = np.column_stack((np.ones(3), vertices))
    coeffs = np.linalg.inv(V)
    area = 0.5 * abs(np.linalg.det(V))
    return coeffs[1:, :].T, area


def dense_mass(mesh: Mesh) -> np.ndarray:
    n = mesh.n_nodes
    M = np.zeros((n, n))
    for tri in mesh.elements:
        _, area = _hat_gradients(mesh.coordinates[tri])
        for a in range(3):
            for b in range(3):
                M[tri[a], tri[b]] += area * (2.0 if a == b else 1.0) / 12.0
    return M


def dense_stiffness(mesh: Mesh) -> np.ndarray:
    n = mesh.n_nodes
    S = np.zeros((n, n))
    for tri in mesh.elements:
        grads, area = _hat_gradients(mesh.coordinates[tri])
        for a in range(3):
            for b in range(3):
                S[tri[a], tri[b]] += area * grads[a] @ grads[b]
    return S


def _strain(grad: np.ndarray, component: int) -> np.ndarray:
    """Symmetric gradient of the vector hat function grad ⊗ e_component."""
    G = np.zeros((2, 2))
    G[component, :] = grad
    return 0.5 * (G + G.T)


def dense_elasticity(
    mesh: Mesh,
    params: ModelParams,
    laws: MaterialLaws,
    phi: np.ndarray,
    theta: np.ndarray,
    theta0: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Full 2N stiffness and load assembled element by element with 2x2 tensor contractions."""
    lam, mu = lame_constants(params.young_E, params.poisson_nu)
    n = mesh.n_nodes
    K = np.zeros((2 * n, 2 * n))
    F = np.zeros(2 * n)

    def stress(eps: np.ndarray) -> np.ndarray:
        return lam * np.trace(eps) * np.eye(2) + 2 * mu * eps

    for tri in mesh.elements:
        grads, area = _hat_gradients(mesh.coordinates[tri])
        c = np.mean([params.kappa + float(laws.k_fun(phi[i])) * (1 - params.kappa) for i in tri])
        g = np.mean(
            [
                (params.kappa + float(laws.k_fun(phi[i])) * (1 - params.kappa))
                * (float(laws.m_fun(phi[i])) - params.beta * (theta[i] - theta0[i]))
                for i in tri
            ],
        )
        for a in range(3):
            for ca in range(2):
                row = 2 * tri[a] + ca
                eps_a = _strain(grads[a], ca)
                F[row] += area * g * np.sum(stress(np.eye(2)) * eps_a)
                for b in range(3):
                    for cb in range(2):
                        eps_b = _strain(grads[b], cb)
                        K[row, 2 * tri[b] + cb] += area * c * np.sum(stress(eps_b) * eps_a)
    return K, F


def central_difference(f: Any, x: float, h: float = 1e-4) -> float:
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def l2_error(space: FemSpace, values: np.ndarray, f: Any) -> float:
    """‖I_h v - f‖_{L²} evaluated with the degree-5 rule."""
    rule = triangle_rule(5)
    pts = space.quadrature_points(rule)
    diff = np.asarray(values)[space.mesh.elements] @ rule.points.T - f(pts[..., 0], pts[..., 1])
    return float(np.sqrt(np.sum(space.areas * (diff**2 @ rule.weights))))
