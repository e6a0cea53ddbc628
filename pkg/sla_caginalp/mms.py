"""Manufactured solutions, their forcing terms, and convergence sweeps with fitted orders."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any

import numpy as np

from .fem import FemSpace, create_space, load_from_function, nodal_interpolate, norms
from .linalg import ConvergenceError, SolverConfig, solver_config
from .mesh import build_uniform
from .model import MaterialLaws, ModelParams, lame_constants, laws_for
from .sav import State, StepError, StepLoads, initialize, run
from .types import InitMode, Vector
from .utils import fit_order

_LOGGER = logging.getLogger(__name__)

PI = math.pi

VARIABLES = ("phi", "theta", "u")
NORMS = ("l2", "h1")

SPATIAL_HS = (1 / 8, 1 / 16, 1 / 32, 1 / 64)
FULL_SPATIAL_HS = (1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128)
SPATIAL_TAUS = (1 / 100, 1 / 200)
TEMPORAL_HS = (1 / 100,)
FULL_TEMPORAL_HS = (1 / 100, 1 / 200)
TEMPORAL_TAUS = (1 / 10, 1 / 20, 1 / 40, 1 / 80, 1 / 160)

SOURCE_CHECK_TOLERANCE = 1e-6
FD_STEP = 1e-3


@dataclass(frozen=True)
class ManufacturedCase:
    """
    Closed-form fields solving the forced system for `params`, with their forcing terms.

    φ = cos t cos 2πx cos πy, θ = sin t cos πx cos 2πy,
    u = (sin t sin πx sin 2πy, cos t sin 2πx sin πy).
    """

    params: ModelParams

    @property
    def laws(self) -> MaterialLaws:
        return laws_for(self.params)

    def exact_phi(self, x: Any, y: Any, t: float) -> Any:
        return math.cos(t) * np.cos(2 * PI * x) * np.cos(PI * y)

    def exact_theta(self, x: Any, y: Any, t: float) -> Any:
        return math.sin(t) * np.cos(PI * x) * np.cos(2 * PI * y)

    def exact_u(self, x: Any, y: Any, t: float) -> tuple[Any, Any]:
        return (
            math.sin(t) * np.sin(PI * x) * np.sin(2 * PI * y),
            math.cos(t) * np.sin(2 * PI * x) * np.sin(PI * y),
        )

    def grad_phi(self, x: Any, y: Any, t: float) -> tuple[Any, Any]:
        c = math.cos(t)
        return (
            -2 * PI * c * np.sin(2 * PI * x) * np.cos(PI * y),
            -PI * c * np.cos(2 * PI * x) * np.sin(PI * y),
        )

    def grad_theta(self, x: Any, y: Any, t: float) -> tuple[Any, Any]:
        s = math.sin(t)
        return (
            -PI * s * np.sin(PI * x) * np.cos(2 * PI * y),
            -2 * PI * s * np.cos(PI * x) * np.sin(2 * PI * y),
        )

    def src_phi(self, x: Any, y: Any, t: float) -> Any:
        p, laws = self.params, self.laws
        phi = self.exact_phi(x, y, t)
        phi_t = -math.sin(t) * np.cos(2 * PI * x) * np.cos(PI * y)
        lap_phi = -5 * PI**2 * phi
        theta = self.exact_theta(x, y, t)
        return (
            p.alpha * phi_t
            - p.lambda_c * p.epsilon * lap_phi
            + p.lambda_c / p.epsilon * laws.W_prime(phi)
            + p.gamma * (theta - p.theta_c) * laws.p_fun(phi)
        )

    def src_theta(self, x: Any, y: Any, t: float) -> Any:
        p, laws = self.params, self.laws
        phi = self.exact_phi(x, y, t)
        phi_t = -math.sin(t) * np.cos(2 * PI * x) * np.cos(PI * y)
        theta_t = math.cos(t) * np.cos(PI * x) * np.cos(2 * PI * y)
        lap_theta = -5 * PI**2 * self.exact_theta(x, y, t)
        return p.delta * theta_t - p.gamma * laws.p_fun(phi) * phi_t - lap_theta

    def src_u(self, x: Any, y: Any, t: float) -> tuple[Any, Any]:
        """Body force -div(c(φ) σ(u, φ, θ)) with σ = ℂ(ℰ(u) - (m(φ) - β(θ - θ(·, 0))) I)."""
        p, laws = self.params, self.laws
        lam, mu = lame_constants(p.young_E, p.poisson_nu)
        st, ct = math.sin(t), math.cos(t)
        sx, cx = np.sin(PI * x), np.cos(PI * x)
        s2x, c2x = np.sin(2 * PI * x), np.cos(2 * PI * x)
        sy, cy = np.sin(PI * y), np.cos(PI * y)
        s2y, c2y = np.sin(2 * PI * y), np.cos(2 * PI * y)

        u1, u2 = self.exact_u(x, y, t)
        u1_x = PI * st * cx * s2y
        u1_y = 2 * PI * st * sx * c2y
        u2_x = 2 * PI * ct * c2x * sy
        u2_y = PI * ct * s2x * cy
        u1_xx, u1_yy = -(PI**2) * u1, -4 * PI**2 * u1
        u1_xy = 2 * PI**2 * st * cx * c2y
        u2_xx, u2_yy = -4 * PI**2 * u2, -(PI**2) * u2
        u2_xy = 2 * PI**2 * ct * c2x * cy

        div_u = u1_x + u2_y
        grad_div = (u1_xx + u2_xy, u1_xy + u2_yy)
        lap_u = (u1_xx + u1_yy, u2_xx + u2_yy)

        phi = self.exact_phi(x, y, t)
        theta = self.exact_theta(x, y, t)
        theta_ref = self.exact_theta(x, y, 0.0)
        phi_x, phi_y = self.grad_phi(x, y, t)
        theta_x, theta_y = self.grad_theta(x, y, t)
        ref_x, ref_y = self.grad_theta(x, y, 0.0)

        c = p.kappa + laws.k_fun(phi) * (1.0 - p.kappa)
        dc = (1.0 - p.kappa) * laws.k_prime(phi)
        s = laws.m_fun(phi) - p.beta * (theta - theta_ref)
        dm = laws.m_prime(phi)
        s_x = dm * phi_x - p.beta * (theta_x - ref_x)
        s_y = dm * phi_y - p.beta * (theta_y - ref_y)

        bulk = 2.0 * lam + 2.0 * mu
        trace_part = lam * div_u - bulk * s
        sigma_11 = trace_part + 2 * mu * u1_x
        sigma_22 = trace_part + 2 * mu * u2_y
        sigma_12 = mu * (u1_y + u2_x)

        div_sigma_1 = (lam + mu) * grad_div[0] + mu * lap_u[0] - bulk * s_x
        div_sigma_2 = (lam + mu) * grad_div[1] + mu * lap_u[1] - bulk * s_y

        f1 = -(c * div_sigma_1 + dc * (sigma_11 * phi_x + sigma_12 * phi_y))
        f2 = -(c * div_sigma_2 + dc * (sigma_12 * phi_x + sigma_22 * phi_y))
        return f1, f2


def build_case(params: ModelParams) -> ManufacturedCase:
    return ManufacturedCase(params=params)


def _d1(f: Callable[[float], Any], h: float) -> Any:
    return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)


def _d2(f: Callable[[float], Any], h: float) -> Any:
    return (-f(2 * h) + 16 * f(h) - 30 * f(0.0) + 16 * f(-h) - f(-2 * h)) / (12 * h**2)


def source_residuals(
    case: ManufacturedCase,
    x: Vector,
    y: Vector,
    t: float,
    step: float = FD_STEP,
) -> dict[str, float]:
    """
    Largest relative mismatch between each forcing term and a fourth-order finite-difference
    evaluation of the strong operator on the exact fields.
    """
    p, laws = case.params, case.laws
    lam, mu = lame_constants(p.young_E, p.poisson_nu)
    phi, theta = case.exact_phi, case.exact_theta

    def laplacian(f: Callable[[Any, Any, float], Any], x: Any, y: Any) -> Any:
        return _d2(lambda d: f(x + d, y, t), step) + _d2(lambda d: f(x, y + d, t), step)

    phi_v = phi(x, y, t)
    phi_t = _d1(lambda d: phi(x, y, t + d), step)
    theta_t = _d1(lambda d: theta(x, y, t + d), step)

    strong_phi = (
        p.alpha * phi_t
        - p.lambda_c * p.epsilon * laplacian(phi, x, y)
        + p.lambda_c / p.epsilon * laws.W_prime(phi_v)
        + p.gamma * (theta(x, y, t) - p.theta_c) * laws.p_fun(phi_v)
    )
    strong_theta = p.delta * theta_t - p.gamma * laws.p_fun(phi_v) * phi_t - laplacian(theta, x, y)

    def stress(x: Any, y: Any) -> tuple[Any, Any, Any]:
        def u(c: int) -> Callable[[Any, Any], Any]:
            return lambda a, b: case.exact_u(a, b, t)[c]

        e11 = _d1(lambda d: u(0)(x + d, y), step)
        e22 = _d1(lambda d: u(1)(x, y + d), step)
        e12 = 0.5 * (_d1(lambda d: u(0)(x, y + d), step) + _d1(lambda d: u(1)(x + d, y), step))
        ph = phi(x, y, t)
        s = laws.m_fun(ph) - p.beta * (theta(x, y, t) - theta(x, y, 0.0))
        c = p.kappa + laws.k_fun(ph) * (1.0 - p.kappa)
        trace_part = lam * (e11 + e22) - (2 * lam + 2 * mu) * s
        return c * (trace_part + 2 * mu * e11), c * (trace_part + 2 * mu * e22), c * 2 * mu * e12

    strong_u1 = -(_d1(lambda d: stress(x + d, y)[0], step) + _d1(lambda d: stress(x, y + d)[2], step))
    strong_u2 = -(_d1(lambda d: stress(x + d, y)[2], step) + _d1(lambda d: stress(x, y + d)[1], step))

    def mismatch(exact: Any, approx: Any) -> float:
        exact = np.asarray(exact, dtype=np.float64)
        return float(np.max(np.abs(exact - approx)) / max(1.0, float(np.max(np.abs(exact)))))

    f1, f2 = case.src_u(x, y, t)
    return {
        "phi": mismatch(case.src_phi(x, y, t), strong_phi),
        "theta": mismatch(case.src_theta(x, y, t), strong_theta),
        "u": max(mismatch(f1, strong_u1), mismatch(f2, strong_u2)),
    }


def _smooth_sample(case: ManufacturedCase, t: float, n: int = 64, seed: int = 0) -> tuple[Vector, Vector]:
    """Interior points away from the kinks of k(φ), where finite differences of the stress are accurate."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.05, 0.95, 8 * n)
    y = rng.uniform(0.05, 0.95, 8 * n)
    phi = case.exact_phi(x, y, t)
    margin = 20 * FD_STEP * 2 * PI
    keep = (np.abs(phi - case.params.phi_gel) > margin) & (np.abs(phi - 1.0) > margin)
    return x[keep][:n], y[keep][:n]


def verify_sources(case: ManufacturedCase, times: Iterable[float] = (0.25, 0.5, 1.0)) -> None:
    for t in times:
        x, y = _smooth_sample(case, t)
        for name, residual in source_residuals(case, x, y, t).items():
            if residual > SOURCE_CHECK_TOLERANCE:
                raise RuntimeError(
                    f"Manufactured {name} source disagrees with the finite-difference operator "
                    f"at t={t}: relative residual {residual:.3e}",
                )


@dataclass(frozen=True)
class ManufacturedForcing:
    case: ManufacturedCase

    def body(self, space: FemSpace, t: float) -> Vector:
        coords = space.mesh.coordinates
        f1, f2 = self.case.src_u(coords[:, 0], coords[:, 1], t)
        return np.column_stack((np.broadcast_to(f1, (space.n_dofs,)), np.broadcast_to(f2, (space.n_dofs,))))

    def loads(self, space: FemSpace, t: float) -> StepLoads:
        return StepLoads(
            heat=load_from_function(space, self.case.src_theta, t),
            phase=load_from_function(space, self.case.src_phi, t),
            body=self.body(space, t),
        )


@dataclass(frozen=True)
class ErrorEntry:
    h: float
    tau: float
    variable: str
    norm: str
    error: float


@dataclass(frozen=True)
class FittedOrder:
    variable: str
    norm: str
    direction: str
    fixed: float
    order: float


@dataclass
class ErrorReport:
    direction: str
    entries: list[ErrorEntry] = field(default_factory=list)
    orders: list[FittedOrder] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def errors(self, variable: str, norm: str, fixed: float) -> tuple[list[float], list[float]]:
        """Sweep parameter values (coarse to fine) and errors at one fixed value of the other parameter."""
        if self.direction == "space":
            rows = [e for e in self.entries if e.variable == variable and e.norm == norm and e.tau == fixed]
            rows.sort(key=lambda e: -e.h)
            return [e.h for e in rows], [e.error for e in rows]

        rows = [e for e in self.entries if e.variable == variable and e.norm == norm and e.h == fixed]
        rows.sort(key=lambda e: -e.tau)
        return [e.tau for e in rows], [e.error for e in rows]

    def order(self, variable: str, norm: str, fixed: float | None = None) -> float:
        for o in self.orders:
            if o.variable == variable and o.norm == norm and (fixed is None or o.fixed == fixed):
                return o.order
        raise KeyError(f"No fitted order for {variable}/{norm} at {fixed!r}")

    def fixed_values(self) -> list[float]:
        values = {e.tau if self.direction == "space" else e.h for e in self.entries}
        return sorted(values, reverse=True)

    def fit(self, last: int = 3) -> None:
        self.orders = []
        for fixed in self.fixed_values():
            for variable in VARIABLES:
                for norm in NORMS:
                    finite = [(p, e) for p, e in zip(*self.errors(variable, norm, fixed)) if math.isfinite(e)]
                    params, errors = [p for p, _ in finite], [e for _, e in finite]
                    if len(params) < 2:
                        continue
                    self.orders.append(
                        FittedOrder(variable, norm, self.direction, fixed, fit_order(params, errors, last)),
                    )

    def to_rows(self) -> list[dict[str, Any]]:
        return [
            {"h": e.h, "tau": e.tau, "variable": e.variable, "norm": e.norm, "error": e.error}
            for e in self.entries
        ]

    def table(self) -> str:
        lines = [f"{'h':>12} {'tau':>12} {'variable':>8} {'norm':>4} {'error':>14}"]
        lines.extend(
            f"{e.h:>12.6g} {e.tau:>12.6g} {e.variable:>8} {e.norm:>4} {e.error:>14.6e}" for e in self.entries
        )
        if self.orders:
            fixed_name = "tau" if self.direction == "space" else "h"
            lines.append("")
            lines.append(f"fitted {self.direction} orders (last points, least squares in log-log)")
            lines.extend(
                f"  {o.variable:>5} {o.norm:>2} at {fixed_name}={o.fixed:.6g}: {o.order:.3f}" for o in self.orders
            )
        if self.failures:
            lines.append("")
            lines.extend(f"  FAILED {f}" for f in self.failures)
        return "\n".join(lines)


def _nodal_vector_field(space: FemSpace, f: Callable[[Any, Any], tuple[Any, Any]]) -> Vector:
    coords = space.mesh.coordinates
    a, b = f(coords[:, 0], coords[:, 1])
    n = space.n_dofs
    return np.column_stack((np.broadcast_to(a, (n,)), np.broadcast_to(b, (n,))))


def run_manufactured(
    case: ManufacturedCase,
    n_per_side: int,
    tau: float,
    T_final: float = 1.0,
    config: SolverConfig | None = None,
    init_mode: InitMode = InitMode.nodal,
) -> dict[tuple[str, str], float]:
    """
    Solve the forced problem and return max-over-time errors against the nodal interpolants of the
    exact fields, keyed by (variable, norm) with norm in {"l2", "h1"}.
    """
    config = solver_config.resolve(config)
    laws = case.laws
    space = create_space(build_uniform(n_per_side))
    forcing = ManufacturedForcing(case)

    initial = initialize(
        space,
        case.params,
        laws,
        lambda x, y: case.exact_phi(x, y, 0.0),
        lambda x, y: case.exact_theta(x, y, 0.0),
        init_mode,
        config,
        phi0_grad=lambda x, y: case.grad_phi(x, y, 0.0),
        theta0_grad=lambda x, y: case.grad_theta(x, y, 0.0),
        body_load=forcing.body(space, 0.0),
    )

    worst: dict[tuple[str, str], float] = {(v, n): 0.0 for v in VARIABLES for n in NORMS}

    def measure(state: State, _record: object) -> None:
        t = state.t
        exact = {
            "phi": nodal_interpolate(space, lambda x, y: case.exact_phi(x, y, t)),
            "theta": nodal_interpolate(space, lambda x, y: case.exact_theta(x, y, t)),
            "u": _nodal_vector_field(space, lambda x, y: case.exact_u(x, y, t)),
        }
        computed = {"phi": state.phi, "theta": state.theta, "u": state.u}
        for variable in VARIABLES:
            err = norms(space, computed[variable] - exact[variable])
            worst[variable, "l2"] = max(worst[variable, "l2"], err.l2)
            worst[variable, "h1"] = max(worst[variable, "h1"], err.h1_semi)

    run(space, case.params, laws, initial, forcing, T_final, tau, hooks=[measure], config=config)
    return worst


def _run_pair(
    params: ModelParams,
    h: float,
    tau: float,
    T_final: float,
    config: SolverConfig,
) -> dict[tuple[str, str], float]:
    return run_manufactured(build_case(params), round(1.0 / h), tau, T_final, config)


def _sweep(
    case: ManufacturedCase,
    direction: str,
    pairs: Sequence[tuple[float, float]],
    T_final: float,
    config: SolverConfig | None,
    workers: int,
    verify: bool,
) -> ErrorReport:
    config = solver_config.resolve(config)
    if verify:
        verify_sources(case)

    report = ErrorReport(direction=direction)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_pair, case.params, h, tau, T_final, config) for h, tau in pairs]
            outcomes = [_outcome(f.result) for f in futures]
    else:
        outcomes = [
            _outcome(partial(_run_pair, case.params, h, tau, T_final, config))
            for h, tau in pairs
        ]

    for (h, tau), outcome in zip(pairs, outcomes):
        if isinstance(outcome, Exception):
            _LOGGER.warning("Manufactured run h=%g tau=%g failed: %s", h, tau, outcome)
            report.failures.append(f"h={h:.6g} tau={tau:.6g}: {outcome}")
            errors = {(v, n): math.nan for v in VARIABLES for n in NORMS}
        else:
            _LOGGER.info("Manufactured run h=%g tau=%g: phi l2 error %.3e", h, tau, outcome["phi", "l2"])
            errors = outcome

        report.entries.extend(ErrorEntry(h, tau, v, n, errors[v, n]) for v in VARIABLES for n in NORMS)

    report.fit()
    return report


def _outcome(
    thunk: Callable[[], dict[tuple[str, str], float]],
) -> dict[tuple[str, str], float] | Exception:
    try:
        return thunk()
    except (StepError, ConvergenceError) as exc:
        return exc


def spatial_sweep(
    case: ManufacturedCase,
    taus: Sequence[float] = SPATIAL_TAUS,
    hs: Sequence[float] = SPATIAL_HS,
    T_final: float = 1.0,
    config: SolverConfig | None = None,
    *,
    workers: int = 1,
    verify: bool = True,
) -> ErrorReport:
    hs = sorted(hs, reverse=True)
    return _sweep(case, "space", [(h, tau) for tau in taus for h in hs], T_final, config, workers, verify)


def temporal_sweep(
    case: ManufacturedCase,
    hs: Sequence[float] = TEMPORAL_HS,
    taus: Sequence[float] = TEMPORAL_TAUS,
    T_final: float = 1.0,
    config: SolverConfig | None = None,
    *,
    workers: int = 1,
    verify: bool = True,
) -> ErrorReport:
    taus = sorted(taus, reverse=True)
    return _sweep(case, "time", [(h, tau) for h in hs for tau in taus], T_final, config, workers, verify)


__all__ = [
    "FULL_SPATIAL_HS",
    "FULL_TEMPORAL_HS",
    "NORMS",
    "SPATIAL_HS",
    "SPATIAL_TAUS",
    "TEMPORAL_HS",
    "TEMPORAL_TAUS",
    "VARIABLES",
    "ErrorEntry",
    "ErrorReport",
    "FittedOrder",
    "ManufacturedCase",
    "ManufacturedForcing",
    "build_case",
    "run_manufactured",
    "source_residuals",
    "spatial_sweep",
    "temporal_sweep",
    "verify_sources",
]
