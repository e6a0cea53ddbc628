"""
First-order scalar-auxiliary-variable time stepping of the coupled phase-field / heat system.

The phase field and temperature are advanced by a linear, unconditionally energy-stable step;
the quasi-static displacement is recomputed from the new fields and feeds nothing back.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import aslinearoperator, spsolve

from . import elasticity
from .fem import (
    FemSpace,
    assemble_weighted_mass,
    integrate_composite,
    load_from_function,
    nodal_interpolate,
    ritz_project,
)
from .linalg import (
    ConvergenceError,
    InverseOperator,
    SolverConfig,
    SumOperator,
    as_sparse,
    cg_solve_info,
    solver_config,
)
from .model import MaterialLaws, ModelParams
from .source import SourceSpec, distance_to_path, evaluate
from .types import InitMode, SnapshotHook, SourceKind, SpatialField, SpatialGradient, StepAlgorithm, Vector
from .utils import count_steps

_LOGGER = logging.getLogger(__name__)

ENERGY_IDENTITY_TOLERANCE = 1e-8
AUXILIARY_QUADRATURE_ORDER = 4


@dataclass(frozen=True, eq=False)
class State:
    phi: Vector
    theta: Vector
    q: float
    u: Vector
    t: float
    theta_ref: Vector
    step_index: int = 0

    @property
    def n_nodes(self) -> int:
        return int(self.phi.shape[0])


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    energy: float
    dissipation: float
    previous_energy: float
    step_index: int = 0

    @property
    def identity_residual(self) -> float:
        return self.energy - self.previous_energy + self.dissipation


@dataclass(frozen=True)
class StepResiduals:
    phi: float
    theta: float
    q: float


class StepError(RuntimeError):
    def __init__(self, step_index: int, t: float, cause: BaseException) -> None:
        super().__init__(f"Time step {step_index} (t={t:.6g}) failed: {cause}")
        self.step_index = step_index
        self.t = t
        self.cause = cause

    def __reduce__(self) -> tuple[type[StepError], tuple[int, float, BaseException]]:
        return type(self), (self.step_index, self.t, self.cause)


@dataclass(frozen=True)
class StepLoads:
    heat: Vector | None = None
    phase: Vector | None = None
    body: Vector | None = None

    @property
    def unforced(self) -> bool:
        return self.heat is None and self.phase is None


class Forcing(Protocol):
    """Supplies the load vectors entering the step that ends at time t."""

    def loads(self, space: FemSpace, t: float) -> StepLoads:  # pragma: no cover
        pass


@dataclass(frozen=True)
class LaserForcing:
    spec: SourceSpec

    def loads(self, space: FemSpace, t: float) -> StepLoads:
        if self.spec.kind is SourceKind.none:
            return StepLoads()

        return StepLoads(heat=load_from_function(space, lambda x, y, s: evaluate(self.spec, x, y, s), t))


@dataclass(frozen=True)
class RunResult:
    final: State
    records: list[EnergyRecord]
    snapshots: list[State] = field(default_factory=list)

    @property
    def energies(self) -> Vector:
        return np.array([r.energy for r in self.records])


def auxiliary_value(space: FemSpace, params: ModelParams, laws: MaterialLaws, phi: Vector) -> float:
    """Q(φ) = sqrt(∫ W(φ) / ε + 1)."""
    bulk = integrate_composite(space, phi, laws.W, order=AUXILIARY_QUADRATURE_ORDER)
    return math.sqrt(bulk / params.epsilon + 1.0)


def auxiliary_drift(space: FemSpace, params: ModelParams, laws: MaterialLaws, state: State) -> float:
    return abs(state.q - auxiliary_value(space, params, laws, state.phi))


def discrete_energy(space: FemSpace, params: ModelParams, phi: Vector, theta: Vector, q: float) -> float:
    M, S = space.mass, space.stiffness
    excess = theta - params.theta_c
    return float(
        0.5 * params.lambda_c * params.epsilon * (phi @ (S @ phi))
        + params.lambda_c * q**2
        + 0.5 * params.delta * (excess @ (M @ excess)),
    )


def _dissipation(space: FemSpace, params: ModelParams, tau: float, prev: State, new: State) -> float:
    M, S = space.mass, space.stiffness
    d_phi = new.phi - prev.phi
    d_theta = new.theta - prev.theta
    d_q = new.q - prev.q
    return float(
        params.alpha / tau * (d_phi @ (M @ d_phi))
        + tau * (new.theta @ (S @ new.theta))
        + 0.5 * params.lambda_c * params.epsilon * (d_phi @ (S @ d_phi))
        + params.lambda_c * d_q**2
        + 0.5 * params.delta * (d_theta @ (M @ d_theta)),
    )


def _solve_elastic(
    space: FemSpace,
    params: ModelParams,
    laws: MaterialLaws,
    phi: Vector,
    theta: Vector,
    theta_ref: Vector,
    config: SolverConfig,
    body_load: Vector | None,
    x0: Vector | None,
) -> Vector:
    system = elasticity.assemble(space, params, laws, phi, theta, theta_ref, body_load=body_load)
    return elasticity.solve(system, config, x0=x0)


def initialize(
    space: FemSpace,
    params: ModelParams,
    laws: MaterialLaws,
    phi0: SpatialField,
    theta0: SpatialField,
    init_mode: InitMode = InitMode.ritz,
    config: SolverConfig | None = None,
    *,
    phi0_grad: SpatialGradient | None = None,
    theta0_grad: SpatialGradient | None = None,
    body_load: Vector | None = None,
    t0: float = 0.0,
) -> State:
    config = solver_config.resolve(config)

    if init_mode is InitMode.ritz:
        phi = ritz_project(space, phi0, config, grad=phi0_grad)
        theta = ritz_project(space, theta0, config, grad=theta0_grad)
    else:
        phi = nodal_interpolate(space, phi0)
        theta = nodal_interpolate(space, theta0)

    q = auxiliary_value(space, params, laws, phi)
    theta_ref = theta.copy() if params.theta0_field is None else np.full(space.n_dofs, params.theta0_field)
    u = _solve_elastic(space, params, laws, phi, theta, theta_ref, config, body_load, None)

    _LOGGER.debug("Initialized state (%s): q=%.6g", init_mode.value, q)
    return State(phi=phi, theta=theta, q=q, u=u, t=t0, theta_ref=theta_ref)


def _linearization(
    space: FemSpace,
    params: ModelParams,
    laws: MaterialLaws,
    state: State,
) -> tuple[Vector, sp.csr_array, Vector]:
    """Explicit data of the step: g = M b with b = λ W'(φ) / (ε Q), the weighted mass ℙ and the p-load."""
    Q = auxiliary_value(space, params, laws, state.phi)
    if Q < 1.0:
        raise RuntimeError(f"Auxiliary value Q={Q!r} below one; the bulk energy quadrature is broken")

    b = params.lambda_c * np.asarray(laws.W_prime(state.phi), dtype=np.float64) / (params.epsilon * Q)
    g = np.asarray(space.mass @ b, dtype=np.float64)
    P = assemble_weighted_mass(space, np.asarray(laws.p_fun(state.phi), dtype=np.float64))
    p_load = np.asarray(P @ np.ones(space.n_dofs), dtype=np.float64)
    return g, P, p_load


def _zero_if_none(v: Vector | None, n: int) -> Vector:
    return np.zeros(n) if v is None else np.asarray(v, dtype=np.float64)


def _schur_operator(
    space: FemSpace,
    params: ModelParams,
    tau: float,
    P: sp.csr_array,
    config: SolverConfig,
) -> tuple[SumOperator, sp.csr_array, InverseOperator]:
    """X = αM + λετS + τγ² ℙ A⁻¹ ℙ with A = δM + τS, the phase operator left after eliminating θ."""
    M, S = space.mass, space.stiffness
    alpha, lam, eps = params.alpha, params.lambda_c, params.epsilon

    A = as_sparse(params.delta * M + tau * S)
    A_inv = InverseOperator(A, config.inner())
    P_op = aslinearoperator(P)
    X = SumOperator(
        (alpha, M),
        (lam * eps * tau, S),
        (tau * params.gamma**2, P_op @ A_inv @ P_op),
        diagonal=alpha * M.diagonal() + lam * eps * tau * S.diagonal(),
    )
    return X, A, A_inv


def _eliminate(
    space: FemSpace,
    params: ModelParams,
    state: State,
    tau: float,
    g: Vector,
    P: sp.csr_array,
    p_load: Vector,
    heat: Vector,
    phase: Vector,
    config: SolverConfig,
    warm_start: bool,
) -> tuple[Vector, Vector, float]:
    M = space.mass
    alpha, lam = params.alpha, params.lambda_c
    gamma, delta = params.gamma, params.delta
    phi0, theta0, q0 = state.phi, state.theta, state.q

    X, A, A_inv = _schur_operator(space, params, tau, P, config)

    rank_scale = tau / (2.0 * lam)
    thermal_rhs = delta * (M @ theta0) - gamma * (P @ phi0) + tau * heat
    d = (
        alpha * (M @ phi0)
        - tau * q0 * g
        + rank_scale * float(g @ phi0) * g
        + tau * gamma * params.theta_c * p_load
        - tau * gamma * (P @ A_inv.matvec(thermal_rhs))
        + tau * phase
    )

    y_d = cg_solve_info(X, d, config, x0=phi0 if warm_start else None)
    y_g = cg_solve_info(X, g, config)
    g_phi = float(g @ y_d.solution) / (1.0 + rank_scale * float(g @ y_g.solution))
    phi = y_d.solution - rank_scale * g_phi * y_g.solution

    theta_result = cg_solve_info(
        A,
        delta * (M @ theta0) + gamma * (P @ (phi - phi0)) + tau * heat,
        config,
        x0=theta0 if warm_start else None,
    )
    q = q0 + float(g @ (phi - phi0)) / (2.0 * lam)

    _LOGGER.debug(
        "Elimination step: X-solves %d + %d iterations, %d inner solves (%d iterations), theta %d iterations",
        y_d.iterations,
        y_g.iterations,
        A_inv.applications,
        A_inv.inner_iterations,
        theta_result.iterations,
    )
    return phi, theta_result.solution, q


def _monolithic(
    space: FemSpace,
    params: ModelParams,
    state: State,
    tau: float,
    g: Vector,
    P: sp.csr_array,
    p_load: Vector,
    heat: Vector,
    phase: Vector,
) -> tuple[Vector, Vector, float]:
    M, S = space.mass, space.stiffness
    n = space.n_dofs
    lam, gamma = params.lambda_c, params.gamma
    phi0, theta0, q0 = state.phi, state.theta, state.q

    g_col = sp.csr_array(g.reshape(-1, 1))
    block = sp.block_array(
        [
            [params.alpha / tau * M + lam * params.epsilon * S, gamma * P, g_col],
            [-gamma / tau * P, params.delta / tau * M + S, None],
            [-g_col.T / (2.0 * lam), None, sp.csr_array(np.ones((1, 1)))],
        ],
        format="csc",
    )
    rhs = np.concatenate(
        (
            params.alpha / tau * (M @ phi0) + gamma * params.theta_c * p_load + phase,
            params.delta / tau * (M @ theta0) - gamma / tau * (P @ phi0) + heat,
            [q0 - float(g @ phi0) / (2.0 * lam)],
        ),
    )
    x = np.asarray(spsolve(block, rhs), dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ConvergenceError(float("nan"), 0, 0.0)

    return x[:n], x[n : 2 * n], float(x[2 * n])


def step(
    state: State,
    space: FemSpace,
    params: ModelParams,
    laws: MaterialLaws,
    tau: float,
    heat_load: Vector | None = None,
    config: SolverConfig | None = None,
    *,
    phase_load: Vector | None = None,
    body_load: Vector | None = None,
    algorithm: StepAlgorithm = StepAlgorithm.elimination,
    warm_start: bool = True,
    solve_elasticity: bool = True,
) -> tuple[State, EnergyRecord]:
    if not tau > 0:
        raise ValueError(f"Time step must be positive, got {tau!r}")
    n = space.n_dofs
    if state.phi.shape != (n,) or state.theta.shape != (n,):
        raise ValueError(f"State vectors do not match the {n}-node space")

    config = solver_config.resolve(config)
    heat = _zero_if_none(heat_load, n)
    phase = _zero_if_none(phase_load, n)
    g, P, p_load = _linearization(space, params, laws, state)

    if algorithm is StepAlgorithm.elimination:
        phi, theta, q = _eliminate(space, params, state, tau, g, P, p_load, heat, phase, config, warm_start)
    else:
        phi, theta, q = _monolithic(space, params, state, tau, g, P, p_load, heat, phase)

    if solve_elasticity:
        u = _solve_elastic(
            space,
            params,
            laws,
            phi,
            theta,
            state.theta_ref,
            config,
            body_load,
            state.u if warm_start else None,
        )
    else:
        u = state.u

    new = replace(state, phi=phi, theta=theta, q=q, u=u, t=state.t + tau, step_index=state.step_index + 1)
    record = EnergyRecord(
        t=new.t,
        energy=discrete_energy(space, params, phi, theta, q),
        dissipation=_dissipation(space, params, tau, state, new),
        previous_energy=discrete_energy(space, params, state.phi, state.theta, state.q),
        step_index=new.step_index,
    )
    return new, record


def step_residuals(
    prev: State,
    new: State,
    space: FemSpace,
    params: ModelParams,
    laws: MaterialLaws,
    tau: float,
    heat_load: Vector | None = None,
    *,
    phase_load: Vector | None = None,
) -> StepResiduals:
    """Relative residuals of the discrete φ, θ and q equations satisfied by a computed step."""
    M, S = space.mass, space.stiffness
    n = space.n_dofs
    heat = _zero_if_none(heat_load, n)
    phase = _zero_if_none(phase_load, n)
    g, P, p_load = _linearization(space, params, laws, prev)
    d_phi = new.phi - prev.phi

    def relative(terms: Iterable[Vector]) -> float:
        parts = [np.asarray(t, dtype=np.float64) for t in terms]
        scale = sum(float(np.linalg.norm(t)) for t in parts)
        return float(np.linalg.norm(sum(parts))) / scale if scale > 0 else 0.0

    phi_res = relative(
        (
            params.alpha / tau * (M @ d_phi),
            new.q * g,
            params.gamma * (P @ new.theta),
            -params.gamma * params.theta_c * p_load,
            params.lambda_c * params.epsilon * (S @ new.phi),
            -phase,
        ),
    )
    theta_res = relative(
        (
            params.delta / tau * (M @ (new.theta - prev.theta)),
            -params.gamma / tau * (P @ d_phi),
            S @ new.theta,
            -heat,
        ),
    )
    q_expected = prev.q + float(g @ d_phi) / (2.0 * params.lambda_c)
    q_res = abs(new.q - q_expected) / max(1.0, abs(q_expected))
    return StepResiduals(phi=phi_res, theta=theta_res, q=q_res)


def gel_fraction(state: State) -> float:
    """Fraction of nodes in the gel phase (φ > 0)."""
    return float(np.mean(state.phi > 0.0))


def track_coverage(
    state: State,
    coordinates: np.ndarray,
    spec: SourceSpec,
    radius: float,
    threshold: float = 0.5,
) -> float:
    """Fraction of nodes within `radius` of the laser track whose phase field exceeds `threshold`."""
    near = distance_to_path(spec, coordinates[:, 0], coordinates[:, 1]) <= radius
    if not near.any():
        return 0.0
    return float(np.mean(state.phi[near] > threshold))


def run(
    space: FemSpace,
    params: ModelParams,
    laws: MaterialLaws,
    initial: State,
    source: SourceSpec | Forcing,
    T_final: float,
    tau: float,
    hooks: Iterable[SnapshotHook] = (),
    config: SolverConfig | None = None,
    *,
    snapshot_stride: int = 1,
    elasticity_stride: int = 1,
    algorithm: StepAlgorithm = StepAlgorithm.elimination,
) -> RunResult:
    """
    Advance `initial` by T_final / tau steps.

    Hooks and the snapshot list see the initial state, every `snapshot_stride`-th state and the final
    state. The displacement is refreshed every `elasticity_stride` steps and always at the final step.
    """
    if snapshot_stride < 1 or elasticity_stride < 1:
        raise ValueError("Snapshot and elasticity strides must be positive")

    n_steps = count_steps(T_final, tau)
    forcing: Forcing = LaserForcing(source) if isinstance(source, SourceSpec) else source
    if isinstance(source, SourceSpec) and not source.covers(initial.t + tau, initial.t + T_final):
        raise ValueError(f"Source path window {source.window} does not cover the simulation interval")

    hooks = list(hooks)
    config = solver_config.resolve(config)

    state = initial
    snapshots = [state]
    records: list[EnergyRecord] = []
    for hook in hooks:
        hook(state, None)

    _LOGGER.info("Running %d steps of size %g on %d nodes", n_steps, tau, space.n_dofs)
    for n in range(1, n_steps + 1):
        t = initial.t + n * tau
        try:
            loads = forcing.loads(space, t)
            state, record = step(
                state,
                space,
                params,
                laws,
                tau,
                loads.heat,
                config,
                phase_load=loads.phase,
                body_load=loads.body,
                algorithm=algorithm,
                solve_elasticity=n % elasticity_stride == 0 or n == n_steps,
            )
        except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
            raise StepError(n, t, exc) from exc

        records.append(record)
        if loads.unforced and abs(record.identity_residual) > ENERGY_IDENTITY_TOLERANCE * max(
            1.0,
            record.previous_energy,
        ):
            _LOGGER.warning(
                "Energy identity drift %.3e at step %d (t=%.6g)",
                record.identity_residual,
                n,
                t,
            )

        if n % snapshot_stride == 0 or n == n_steps:
            snapshots.append(state)
            for hook in hooks:
                hook(state, record)

    _LOGGER.info("Run finished at t=%.6g, energy %.6g", state.t, records[-1].energy)
    return RunResult(final=state, records=records, snapshots=snapshots)


__all__ = [
    "ENERGY_IDENTITY_TOLERANCE",
    "EnergyRecord",
    "Forcing",
    "LaserForcing",
    "RunResult",
    "State",
    "StepError",
    "StepLoads",
    "StepResiduals",
    "auxiliary_drift",
    "auxiliary_value",
    "discrete_energy",
    "gel_fraction",
    "initialize",
    "run",
    "step",
    "step_residuals",
    "track_coverage",
]
