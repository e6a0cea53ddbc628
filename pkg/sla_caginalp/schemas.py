"""Declarative run configuration: TOML text in, validated `RunConfig` out."""

from __future__ import annotations

import sys
from collections.abc import Iterable
from importlib.resources import files
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .linalg import SolverConfig
from .mms import (
    FULL_SPATIAL_HS,
    FULL_TEMPORAL_HS,
    SPATIAL_HS,
    SPATIAL_TAUS,
    TEMPORAL_HS,
    TEMPORAL_TAUS,
    build_case,
)
from .model import ModelParams, laws_for, validate
from .source import SourceSpec
from .types import FieldFormat, InitMode, RunMode, SpatialField, SpatialGradient, StepAlgorithm
from .utils import count_steps

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PRESETS = ("mms", "fixed-laser", "y-laser", "stability")

NAMED_FIELDS = ("smooth", "mms")


class ConfigError(ValueError):
    def __init__(self, items: Iterable[tuple[str, str]]) -> None:
        self.items = list(items)
        super().__init__("Invalid configuration:\n" + "\n".join(f"  {loc}: {msg}" for loc, msg in self.items))


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class MeshSection(_Section):
    n_per_side: int = Field(ge=1)
    full_n_per_side: int | None = Field(default=None, ge=1)


class TimeSection(_Section):
    tau: float = Field(gt=0)
    T_final: float = Field(gt=0)


InitialField = float | Literal["smooth", "mms"]


class InitSection(_Section):
    mode: InitMode = InitMode.ritz
    phi: InitialField = -1.0
    theta: InitialField = 0.0
    seed: int = 0

    def initial_field(
        self,
        name: Literal["phi", "theta"],
        params: ModelParams,
    ) -> tuple[SpatialField, SpatialGradient]:
        value = getattr(self, name)
        if isinstance(value, (int, float)):
            return constant_field(float(value))
        if value == "mms":
            case = build_case(params)
            if name == "phi":
                return (lambda x, y: case.exact_phi(x, y, 0.0)), (lambda x, y: case.grad_phi(x, y, 0.0))
            return (lambda x, y: case.exact_theta(x, y, 0.0)), (lambda x, y: case.grad_theta(x, y, 0.0))

        return smooth_random_field(self.seed + (0 if name == "phi" else 1))


def constant_field(value: float) -> tuple[SpatialField, SpatialGradient]:
    return (lambda x, y: value), (lambda x, y: (0.0, 0.0))


def smooth_random_field(
    seed: int,
    modes: int = 3,
    amplitude: float = 0.5,
) -> tuple[SpatialField, SpatialGradient]:
    """Random cosine series Σ a_kl cos(kπx) cos(lπy), which has zero normal derivative on the boundary."""
    rng = np.random.default_rng(seed)
    k = np.arange(modes + 1)
    a = amplitude * rng.standard_normal((modes + 1, modes + 1)) / (1.0 + k[:, None] + k[None, :])

    def basis(x: Any, y: Any) -> tuple[Any, Any, Any, Any]:
        x = np.asarray(x, dtype=np.float64)[..., None]
        y = np.asarray(y, dtype=np.float64)[..., None]
        kx, ky = np.pi * k * x, np.pi * k * y
        return np.cos(kx), np.cos(ky), -np.pi * k * np.sin(kx), -np.pi * k * np.sin(ky)

    def f(x: Any, y: Any) -> Any:
        cx, cy, _, _ = basis(x, y)
        return np.einsum("...k,kl,...l->...", cx, a, cy)

    def grad(x: Any, y: Any) -> tuple[Any, Any]:
        cx, cy, dx, dy = basis(x, y)
        return np.einsum("...k,kl,...l->...", dx, a, cy), np.einsum("...k,kl,...l->...", cx, a, dy)

    return f, grad


class OutputSection(_Section):
    directory: Path | None = None
    snapshot_stride: int = Field(default=1, ge=1)
    formats: tuple[FieldFormat, ...] = (FieldFormat.csv,)
    fields: bool = True
    plots: bool = True


class MmsSection(_Section):
    sweeps: tuple[Literal["space", "time"], ...] = ("space", "time")
    T_final: float = Field(default=1.0, gt=0)
    space_taus: tuple[float, ...] = SPATIAL_TAUS
    space_hs: tuple[float, ...] = SPATIAL_HS
    time_hs: tuple[float, ...] = TEMPORAL_HS
    time_taus: tuple[float, ...] = TEMPORAL_TAUS
    full_space_hs: tuple[float, ...] = FULL_SPATIAL_HS
    full_time_hs: tuple[float, ...] = FULL_TEMPORAL_HS
    workers: int = Field(default=1, ge=1)
    min_space_order_l2: float = 1.75
    min_space_order_h1: float = 0.85
    min_time_order_l2: float = 0.85
    min_displacement_order: float = 0.8


class RunConfig(_Section):
    mode: RunMode
    elasticity_stride: int = Field(default=1, ge=1)
    algorithm: StepAlgorithm = StepAlgorithm.elimination
    mesh: MeshSection
    time: TimeSection
    params: ModelParams
    source: SourceSpec = SourceSpec()
    init: InitSection = InitSection()
    output: OutputSection = OutputSection()
    solver: SolverConfig = SolverConfig()
    mms: MmsSection = MmsSection()

    @property
    def n_steps(self) -> int:
        return count_steps(self.time.T_final, self.time.tau)

    def problems(self) -> list[tuple[str, str]]:
        """Cross-field checks that a single section cannot express."""
        found = [(f"params.{v.assumption}", v.message) for v in validate(self.params, laws_for(self.params))]

        try:
            count_steps(self.time.T_final, self.time.tau)
        except ValueError as exc:
            found.append(("time", str(exc)))

        if not self.source.covers(0.0, self.time.T_final):
            found.append(("source.segments", f"path window {self.source.window} does not cover [0, T_final]"))

        if self.mode is RunMode.mms_converge:
            found.extend(
                ("mms", f"T_final={self.mms.T_final!r} is not a multiple of tau={tau!r}")
                for tau in (*self.mms.space_taus, *self.mms.time_taus)
                if not _divides(self.mms.T_final, tau)
            )

        return found

    def full_scale(self) -> RunConfig:
        update: dict[str, Any] = {
            "mms": self.mms.model_copy(
                update={"space_hs": self.mms.full_space_hs, "time_hs": self.mms.full_time_hs},
            ),
        }
        if self.mesh.full_n_per_side is not None:
            update["mesh"] = self.mesh.model_copy(update={"n_per_side": self.mesh.full_n_per_side})
        return self.model_copy(update=update)


def _divides(T_final: float, tau: float) -> bool:
    try:
        count_steps(T_final, tau)
    except ValueError:
        return False
    return True


def _location(loc: tuple[int | str, ...]) -> str:
    return ".".join(str(part) for part in loc) or "<document>"


def config_from_mapping(data: dict[str, Any]) -> RunConfig:
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError((_location(err["loc"]), err["msg"]) for err in exc.errors()) from exc

    if problems := config.problems():
        raise ConfigError(problems)

    return config


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([("<document>", str(exc))]) from exc

    return config_from_mapping(data)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError([("<preset>", f"unknown preset {name!r}; available: {', '.join(PRESETS)}")])

    return files("sla_caginalp").joinpath("presets", f"{name}.toml").read_text(encoding="utf-8")


def load_config(source: str | Path) -> RunConfig:
    """Load a config file, or a shipped preset when `source` names one and no such file exists."""
    path = Path(source)
    if path.is_file():
        return parse_config(path.read_text(encoding="utf-8"))
    if str(source) in PRESETS:
        return parse_config(preset_text(str(source)))

    raise FileNotFoundError(f"No config file or preset named {str(source)!r}")


__all__ = [
    "NAMED_FIELDS",
    "PRESETS",
    "ConfigError",
    "InitSection",
    "MeshSection",
    "MmsSection",
    "OutputSection",
    "RunConfig",
    "TimeSection",
    "constant_field",
    "config_from_mapping",
    "load_config",
    "parse_config",
    "preset_text",
    "smooth_random_field",
]
