"""Physical parameters, nonlinear material laws and the checkable modelling assumptions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict

from .types import ScalarMap, Vector

# Voigt vectors hold tensor strains (ε11, ε22, ε12); the shear slot counts twice in a contraction
VOIGT_WEIGHTS = np.array([1.0, 1.0, 2.0])
VOIGT_IDENTITY = np.array([1.0, 1.0, 0.0])

W_SAMPLE_RANGE = (-3.0, 3.0)
PHYSICAL_RANGE = (-1.0, 1.0)
N_SAMPLES = 601


class ModelParams(BaseModel):
    """
    Nondimensional model constants.

    Construction does not enforce the modelling assumptions; use `validate` for a report.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float
    beta: float
    gamma: float
    delta: float
    epsilon: float
    lambda_c: float
    theta_c: float
    kappa: float
    phi_gel: float
    young_E: float
    poisson_nu: float
    zeta: float
    # uniform thermal-strain reference; None uses the discrete initial temperature
    theta0_field: float | None = None


def mms_params() -> ModelParams:
    return ModelParams(
        alpha=1.0,
        lambda_c=1.0,
        epsilon=0.1,
        gamma=1.0,
        theta_c=0.0,
        delta=1.2,
        kappa=0.01,
        phi_gel=0.5,
        young_E=1.0,
        poisson_nu=0.3,
        zeta=1.0,
        beta=0.5,
    )


def laser_params() -> ModelParams:
    return ModelParams(
        alpha=0.5,
        lambda_c=1.0,
        epsilon=5.0e-3,
        gamma=4.0e2,
        theta_c=1.0,
        delta=1.0e2,
        kappa=1e-6,
        phi_gel=0.5,
        young_E=1e4,
        poisson_nu=0.35,
        zeta=1e3,
        beta=5.0e2,
    )


@dataclass(frozen=True)
class MaterialLaws:
    W: ScalarMap
    W_prime: ScalarMap
    P_fun: ScalarMap
    p_fun: ScalarMap
    k_fun: ScalarMap
    m_fun: ScalarMap
    k_prime: ScalarMap
    m_prime: ScalarMap


def default_laws(*, phi_gel: float = 0.5, zeta: float = 1.0) -> MaterialLaws:
    ramp = 1.0 / (1.0 - phi_gel)

    def W(s: Any) -> Any:
        return 0.25 * (np.square(s) - 1.0) ** 2

    def W_prime(s: Any) -> Any:
        return s * (np.square(s) - 1.0)

    def P_fun(s: Any) -> Any:
        return 0.5 * (1.0 - np.asarray(s, dtype=np.float64))

    def p_fun(s: Any) -> Any:
        return np.full_like(np.asarray(s, dtype=np.float64), -0.5)

    def k_fun(s: Any) -> Any:
        return np.clip((np.asarray(s, dtype=np.float64) - phi_gel) * ramp, 0.0, 1.0)

    def k_prime(s: Any) -> Any:
        s = np.asarray(s, dtype=np.float64)
        return np.where((s > phi_gel) & (s < 1.0), ramp, 0.0)

    def m_fun(s: Any) -> Any:
        return 0.5 * zeta * (1.0 + np.asarray(s, dtype=np.float64))

    def m_prime(s: Any) -> Any:
        return np.full_like(np.asarray(s, dtype=np.float64), 0.5 * zeta)

    return MaterialLaws(
        W=W,
        W_prime=W_prime,
        P_fun=P_fun,
        p_fun=p_fun,
        k_fun=k_fun,
        m_fun=m_fun,
        k_prime=k_prime,
        m_prime=m_prime,
    )


def laws_for(params: ModelParams) -> MaterialLaws:
    return default_laws(phi_gel=params.phi_gel, zeta=params.zeta)


def lame_constants(young_E: float, poisson_nu: float) -> tuple[float, float]:
    lam = young_E * poisson_nu / ((1.0 + poisson_nu) * (1.0 - 2.0 * poisson_nu))
    mu = young_E / (2.0 * (1.0 + poisson_nu))
    return lam, mu


def gel_elasticity_tensor(params: ModelParams) -> Vector:
    """Plane-strain Voigt matrix of the gel phase, mapping (ε11, ε22, ε12) to (σ11, σ22, σ12)."""
    lam, mu = lame_constants(params.young_E, params.poisson_nu)
    return np.array(
        [
            [lam + 2.0 * mu, lam, 0.0],
            [lam, lam + 2.0 * mu, 0.0],
            [0.0, 0.0, 2.0 * mu],
        ],
    )


def stiffness_scale(params: ModelParams, k_value: Any) -> Any:
    k = np.asarray(k_value, dtype=np.float64)
    return (1.0 - k) * params.kappa + k


def elasticity_tensor_2d(params: ModelParams, k_value: float) -> Vector:
    if not 0.0 <= k_value <= 1.0:
        raise ValueError(f"k_value must lie in [0, 1], got {k_value!r}")

    return float(stiffness_scale(params, k_value)) * gel_elasticity_tensor(params)


@dataclass(frozen=True)
class Violation:
    assumption: str
    message: str

    def __str__(self) -> str:
        return f"{self.assumption}: {self.message}"


def _samples(bounds: tuple[float, float]) -> Vector:
    return np.linspace(bounds[0], bounds[1], N_SAMPLES)


def _check_constants(params: ModelParams) -> list[Violation]:
    found = [
        Violation("constants", f"{name} must be positive, got {value!r}")
        for name, value in (
            ("alpha", params.alpha),
            ("beta", params.beta),
            ("gamma", params.gamma),
            ("delta", params.delta),
            ("epsilon", params.epsilon),
            ("lambda_c", params.lambda_c),
        )
        if not value > 0
    ]
    if not params.theta_c >= 0:
        found.append(Violation("constants", f"theta_c must be non-negative, got {params.theta_c!r}"))

    if not 0.0 < params.kappa < 1.0:
        found.append(Violation("stiffness", f"kappa must lie in (0, 1), got {params.kappa!r}"))
    if not -1.0 < params.phi_gel < 1.0:
        found.append(Violation("stiffness", f"phi_gel must lie in (-1, 1), got {params.phi_gel!r}"))
    if not params.young_E > 0:
        found.append(Violation("stiffness", f"young_E must be positive, got {params.young_E!r}"))
    if not 0.0 < params.poisson_nu < 0.5:
        found.append(Violation("stiffness", f"poisson_nu must lie in (0, 1/2), got {params.poisson_nu!r}"))

    return found


def _check_laws(laws: MaterialLaws) -> list[Violation]:
    found: list[Violation] = []
    s = _samples(W_SAMPLE_RANGE)
    ds = s[1] - s[0]

    W = np.asarray(laws.W(s), dtype=np.float64)
    if np.any(W < 0):
        found.append(Violation("double_well", "W takes negative values"))
    W2 = (W[2:] - 2.0 * W[1:-1] + W[:-2]) / ds**2
    if np.any(W2 < -1.0 - 1e-6):
        found.append(Violation("double_well", "W'' is not bounded below by -1"))

    phys = _samples(PHYSICAL_RANGE)
    P = np.asarray(laws.P_fun(phys), dtype=np.float64)
    if np.any(P < 0) or not np.all(np.isfinite(P)):
        found.append(Violation("latent_heat", "P must be non-negative and bounded"))

    k = np.broadcast_to(np.asarray(laws.k_fun(phys), dtype=np.float64), phys.shape)
    if np.any(k < 0) or np.any(k > 1):
        found.append(Violation("stiffness", "k must take values in [0, 1]"))
    elif not (np.isclose(k[0], 0.0) and np.isclose(k[-1], 1.0)):
        found.append(Violation("stiffness", "k must satisfy k(-1) = 0 and k(1) = 1"))

    m = np.broadcast_to(np.asarray(laws.m_fun(s), dtype=np.float64), s.shape)
    if not np.all(np.isfinite(m)) or not np.all(np.isfinite(np.diff(m) / ds)):
        found.append(Violation("shrinkage", "m must be bounded with bounded difference quotients"))
    if not np.isclose(np.asarray(laws.m_fun(np.array([-1.0])))[0], 0.0):
        found.append(Violation("shrinkage", "eigenstrain must vanish in the sol phase, m(-1) = 0"))

    return found


def validate(params: ModelParams, laws: MaterialLaws) -> list[Violation]:
    return [*_check_constants(params), *_check_laws(laws)]


__all__ = [
    "VOIGT_IDENTITY",
    "VOIGT_WEIGHTS",
    "MaterialLaws",
    "ModelParams",
    "Violation",
    "default_laws",
    "elasticity_tensor_2d",
    "gel_elasticity_tensor",
    "lame_constants",
    "laser_params",
    "laws_for",
    "mms_params",
    "stiffness_scale",
    "validate",
]
