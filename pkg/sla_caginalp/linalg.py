"""Sparse storage, linear operators and preconditioned conjugate gradients."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, TypeAlias

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .config import ConfigVar
from .types import Preconditioner, Vector

_LOGGER = logging.getLogger(__name__)

SparseMatrix: TypeAlias = sp.csr_array
Operator: TypeAlias = LinearOperator | sp.sparray | sp.spmatrix | np.ndarray

INNER_TOLERANCE_FACTOR = 0.01
INNER_TOLERANCE_FLOOR = 1e-12


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rel_tolerance: float = Field(default=1e-10, gt=0)
    max_iterations: int = Field(default=10000, ge=1)
    preconditioner: Preconditioner = Preconditioner.jacobi

    def inner(self) -> SolverConfig:
        tolerance = max(self.rel_tolerance * INNER_TOLERANCE_FACTOR, INNER_TOLERANCE_FLOOR)
        return self.model_copy(update={"rel_tolerance": tolerance})


solver_config: ConfigVar[SolverConfig] = ConfigVar(
    "solver_config",
    default=SolverConfig(),
)


class ConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int, tolerance: float) -> None:
        super().__init__(
            f"CG did not converge: relative residual {residual:.3e} after {iterations} iterations "
            f"(target {tolerance:.1e})",
        )
        self.residual = residual
        self.iterations = iterations
        self.tolerance = tolerance

    def __reduce__(self) -> tuple[type[ConvergenceError], tuple[float, int, float]]:
        return type(self), (self.residual, self.iterations, self.tolerance)


@dataclass(frozen=True)
class CGResult:
    solution: Vector
    iterations: int
    residual: float


def as_sparse(matrix: Any) -> SparseMatrix:
    """Canonical CSR copy: summed duplicates, sorted column indices."""
    A = sp.csr_array(matrix, dtype=np.float64)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A: SparseMatrix, x: Vector) -> Vector:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise ValueError(f"Dimension mismatch: matrix {A.shape} applied to vector of shape {x.shape}")

    return np.asarray(A @ x, dtype=np.float64)


def as_operator(A: Operator) -> LinearOperator:
    if isinstance(A, LinearOperator):
        return A
    return aslinearoperator(A)


def _diagonal(A: Operator) -> Vector | None:
    if sp.issparse(A):
        return np.asarray(A.diagonal(), dtype=np.float64)  # type: ignore[union-attr]
    if isinstance(A, np.ndarray):
        return np.diag(A).astype(np.float64)

    diag = getattr(A, "diagonal_estimate", None)
    if diag is not None:
        return np.asarray(diag, dtype=np.float64)
    return None


class InverseOperator(LinearOperator):
    """Applies A^{-1} of an SPD matrix through an inner CG solve."""

    def __init__(self, A: SparseMatrix, config: SolverConfig | None = None) -> None:
        super().__init__(dtype=np.float64, shape=A.shape)
        self.A = A
        self.config = solver_config.resolve(config)
        self.applications = 0
        self.inner_iterations = 0

    def _matvec(self, x: Vector) -> Vector:
        result = cg_solve_info(self.A, np.ravel(x), self.config)
        self.applications += 1
        self.inner_iterations += result.iterations
        return result.solution

    def _rmatvec(self, x: Vector) -> Vector:
        return self._matvec(x)


class RankOneUpdate(LinearOperator):
    """A + scale * u v^T, applied without forming the dense update."""

    def __init__(self, A: Operator, u: Vector, v: Vector, scale: float = 1.0) -> None:
        base = as_operator(A)
        super().__init__(dtype=np.float64, shape=base.shape)
        self.base = base
        self.u = np.asarray(u, dtype=np.float64)
        self.v = np.asarray(v, dtype=np.float64)
        self.scale = float(scale)
        self.diagonal_estimate = self._estimate_diagonal(A)

    def _estimate_diagonal(self, A: Operator) -> Vector | None:
        diag = _diagonal(A)
        if diag is None:
            return None
        return diag + self.scale * self.u * self.v

    def _matvec(self, x: Vector) -> Vector:
        x = np.ravel(x)
        return np.asarray(self.base.matvec(x)).ravel() + self.scale * float(self.v @ x) * self.u

    def _rmatvec(self, x: Vector) -> Vector:
        x = np.ravel(x)
        return np.asarray(self.base.rmatvec(x)).ravel() + self.scale * float(self.u @ x) * self.v


class SumOperator(LinearOperator):
    """Weighted sum of operators that keeps a diagonal estimate for Jacobi preconditioning."""

    def __init__(self, *terms: tuple[float, Operator], diagonal: Vector | None = None) -> None:
        ops = [(float(c), as_operator(op)) for c, op in terms]
        shape = ops[0][1].shape
        if any(op.shape != shape for _, op in ops):
            raise ValueError("All operators of a sum must share one shape")

        super().__init__(dtype=np.float64, shape=shape)
        self.terms = ops
        self.diagonal_estimate = diagonal

    def _matvec(self, x: Vector) -> Vector:
        x = np.ravel(x)
        out = np.zeros(self.shape[0], dtype=np.float64)
        for c, op in self.terms:
            out += c * np.asarray(op.matvec(x)).ravel()
        return out

    def _rmatvec(self, x: Vector) -> Vector:
        x = np.ravel(x)
        out = np.zeros(self.shape[1], dtype=np.float64)
        for c, op in self.terms:
            out += c * np.asarray(op.rmatvec(x)).ravel()
        return out


def _preconditioner(A: Operator, kind: Preconditioner) -> Vector | None:
    if kind is Preconditioner.none:
        return None

    diag = _diagonal(A)
    if diag is None:
        return None
    if np.any(diag <= 0):
        _LOGGER.debug("Jacobi preconditioner disabled: non-positive diagonal entries")
        return None
    return 1.0 / diag


def cg_solve_info(
    A: Operator,
    b: Vector,
    config: SolverConfig | None = None,
    x0: Vector | None = None,
) -> CGResult:
    config = solver_config.resolve(config)
    op = as_operator(A)
    b = np.asarray(b, dtype=np.float64).ravel()
    n = b.shape[0]
    if op.shape != (n, n):
        raise ValueError(f"Dimension mismatch: operator {op.shape} with right-hand side of length {n}")

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0)

    target = config.rel_tolerance * b_norm
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64).ravel()
    r = b - np.asarray(op.matvec(x)).ravel() if x0 is not None else b.copy()
    r_norm = float(np.linalg.norm(r))
    if r_norm <= target:
        return CGResult(x, 0, r_norm / b_norm)

    inv_diag = _preconditioner(A, config.preconditioner)
    z = r * inv_diag if inv_diag is not None else r.copy()
    d = z.copy()
    rz = float(r @ z)

    for k in range(1, config.max_iterations + 1):
        Ad = np.asarray(op.matvec(d)).ravel()
        curvature = float(d @ Ad)
        if curvature <= 0:
            raise ConvergenceError(r_norm / b_norm, k, config.rel_tolerance)

        alpha = rz / curvature
        x += alpha * d
        r -= alpha * Ad
        r_norm = float(np.linalg.norm(r))
        if r_norm <= target:
            # recurrence drift: confirm against the true residual
            r_true = b - np.asarray(op.matvec(x)).ravel()
            true_norm = float(np.linalg.norm(r_true))
            if true_norm <= target:
                _LOGGER.debug("CG converged in %d iterations (residual %.3e)", k, true_norm / b_norm)
                return CGResult(x, k, true_norm / b_norm)
            r = r_true
            r_norm = true_norm
            z = r * inv_diag if inv_diag is not None else r
            rz = float(r @ z)
            d = z.copy()
            continue

        z = r * inv_diag if inv_diag is not None else r
        rz_next = float(r @ z)
        d = z + (rz_next / rz) * d
        rz = rz_next

    raise ConvergenceError(r_norm / b_norm, config.max_iterations, config.rel_tolerance)


def cg_solve(
    A: Operator,
    b: Vector,
    config: SolverConfig | None = None,
    x0: Vector | None = None,
) -> Vector:
    return cg_solve_info(A, b, config, x0).solution


__all__ = [
    "INNER_TOLERANCE_FACTOR",
    "INNER_TOLERANCE_FLOOR",
    "CGResult",
    "ConvergenceError",
    "InverseOperator",
    "LinearOperator",
    "Operator",
    "RankOneUpdate",
    "SolverConfig",
    "SparseMatrix",
    "SumOperator",
    "as_operator",
    "as_sparse",
    "cg_solve",
    "cg_solve_info",
    "solver_config",
    "spmv",
]
