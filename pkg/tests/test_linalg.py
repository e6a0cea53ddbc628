import numpy as np
import pytest
import scipy.sparse as sp
from dirty_equals import IsPartialDict
from pydantic import ValidationError

from sla_caginalp.linalg import (
    INNER_TOLERANCE_FLOOR,
    ConvergenceError,
    InverseOperator,
    RankOneUpdate,
    SolverConfig,
    SumOperator,
    as_sparse,
    cg_solve,
    cg_solve_info,
    solver_config,
    spmv,
)
from sla_caginalp.types import Preconditioner


def _spd(rng, n=30):
    B = rng.normal(size=(n, n))
    return B @ B.T + n * np.eye(n)


def _laplacian_1d(n):
    return as_sparse(sp.diags_array([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], offsets=[-1, 0, 1]))


@pytest.mark.parametrize("preconditioner", list(Preconditioner), ids=lambda p: p.value)
def test_cg_matches_direct_solve(rng, preconditioner):
    A = _spd(rng)
    b = rng.normal(size=30)
    config = SolverConfig(rel_tolerance=1e-12, preconditioner=preconditioner)

    result = cg_solve_info(as_sparse(A), b, config)

    assert np.allclose(result.solution, np.linalg.solve(A, b), rtol=1e-9, atol=1e-12)
    assert result.residual <= 1e-12
    assert 0 < result.iterations <= 30 * 2


def test_cg_accepts_dense_and_operator(rng):
    A = _spd(rng, 10)
    b = rng.normal(size=10)
    expected = np.linalg.solve(A, b)

    assert np.allclose(cg_solve(A, b), expected)
    assert np.allclose(cg_solve(SumOperator((1.0, A)), b), expected)


def test_cg_zero_rhs():
    result = cg_solve_info(_laplacian_1d(5), np.zeros(5))

    assert result.iterations == 0
    assert np.array_equal(result.solution, np.zeros(5))


def test_cg_warm_start_at_solution(rng):
    A = _laplacian_1d(8)
    x = rng.normal(size=8)

    result = cg_solve_info(A, A @ x, SolverConfig(rel_tolerance=1e-8), x0=x)

    assert result.iterations == 0
    assert np.array_equal(result.solution, x)


def test_cg_dimension_mismatch():
    with pytest.raises(ValueError):
        cg_solve(_laplacian_1d(4), np.ones(5))


def test_cg_rejects_indefinite_matrix():
    with pytest.raises(ConvergenceError):
        cg_solve(-_laplacian_1d(6), np.ones(6))


def test_cg_iteration_limit():
    with pytest.raises(ConvergenceError) as exc:
        cg_solve(_laplacian_1d(200), np.ones(200), SolverConfig(max_iterations=3, preconditioner="none"))

    assert exc.value.iterations == 3
    assert exc.value.residual > exc.value.tolerance


def test_spmv(rng):
    A = as_sparse(_spd(rng, 6))
    x = rng.normal(size=6)

    assert np.allclose(spmv(A, x), A.toarray() @ x)
    with pytest.raises(ValueError):
        spmv(A, np.ones(5))


def test_as_sparse_is_canonical():
    A = as_sparse(sp.coo_array(([1.0, 2.0, 3.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2)))

    assert A.has_canonical_format
    assert A.toarray().tolist() == [[0.0, 3.0], [3.0, 0.0]]


def test_rank_one_update(rng):
    A = _spd(rng, 12)
    u = rng.normal(size=12)
    v = rng.normal(size=12)
    x = rng.normal(size=12)
    op = RankOneUpdate(as_sparse(A), u, v, scale=0.7)

    assert np.allclose(op.matvec(x), (A + 0.7 * np.outer(u, v)) @ x)
    assert np.allclose(op.rmatvec(x), (A + 0.7 * np.outer(u, v)).T @ x)
    assert np.allclose(op.diagonal_estimate, np.diag(A) + 0.7 * u * v)


def test_rank_one_update_sherman_morrison(rng):
    A = _spd(rng, 12)
    u = rng.normal(size=12)
    b = rng.normal(size=12)

    x = cg_solve(RankOneUpdate(A, u, u, scale=2.0), b, SolverConfig(rel_tolerance=1e-12))

    y_b = np.linalg.solve(A, b)
    y_u = np.linalg.solve(A, u)
    expected = y_b - 2.0 * (u @ y_b) / (1 + 2.0 * (u @ y_u)) * y_u
    assert np.allclose(x, expected, rtol=1e-9)


def test_inverse_operator_counts_solves():
    A = _laplacian_1d(10)
    inv = InverseOperator(A, SolverConfig(rel_tolerance=1e-12))
    b = np.arange(10.0)

    x = inv.matvec(b)

    assert np.allclose(A @ x, b)
    assert inv.applications == 1
    assert inv.inner_iterations > 0


def test_sum_operator(rng):
    A = _spd(rng, 5)
    B = _spd(rng, 5)
    x = rng.normal(size=5)

    op = SumOperator((2.0, A), (-0.5, B))

    assert np.allclose(op.matvec(x), (2 * A - 0.5 * B) @ x)
    with pytest.raises(ValueError):
        SumOperator((1.0, A), (1.0, np.eye(4)))


def test_solver_config_inner():
    assert SolverConfig(rel_tolerance=1e-8).inner().rel_tolerance == pytest.approx(1e-10)
    assert SolverConfig(rel_tolerance=1e-13).inner().rel_tolerance == INNER_TOLERANCE_FLOOR


def test_solver_config_validation():
    with pytest.raises(ValidationError) as exc:
        SolverConfig(rel_tolerance=0.0, unknown=1)

    assert exc.value.errors() == [
        IsPartialDict({"loc": ("rel_tolerance",), "type": "greater_than"}),
        IsPartialDict({"loc": ("unknown",), "type": "extra_forbidden"}),
    ]


def test_solver_config_context():
    custom = SolverConfig(max_iterations=5)

    with solver_config.set(custom):
        assert solver_config.resolve(None) is custom

    assert solver_config.get().max_iterations == 10000


@pytest.mark.parametrize("n", [10, 50, 200])
@pytest.mark.parametrize("kind", ["dense", "laplacian"])
def test_cg_iteration_count_on_spd(rng, n, kind):
    A = as_sparse(_spd(rng, n)) if kind == "dense" else _laplacian_1d(n)
    b = rng.normal(size=n)

    result = cg_solve_info(A, b, SolverConfig(rel_tolerance=1e-10, max_iterations=5 * n))

    assert result.iterations <= 5 * n
    assert np.linalg.norm(A @ result.solution - b) <= 1e-9 * np.linalg.norm(b)
