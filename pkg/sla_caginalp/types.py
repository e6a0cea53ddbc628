from collections.abc import Callable
from enum import Enum
from typing import (
    TYPE_CHECKING,
    Any,
    Protocol,
    TypeAlias,
)

import numpy as np
from numpy.typing import NDArray

if TYPE_CHECKING:
    from .sav import EnergyRecord, State

Vector: TypeAlias = NDArray[np.float64]
IndexArray: TypeAlias = NDArray[np.int64]
Point: TypeAlias = tuple[float, float]
ScalarMap: TypeAlias = Callable[[Any], Any]


class SpatialField(Protocol):
    """Vectorised scalar field f(x, y) on the unit square."""

    def __call__(self, x: Vector, y: Vector, /) -> Any:  # pragma: no cover
        pass


class SpaceTimeField(Protocol):
    def __call__(self, x: Vector, y: Vector, t: float, /) -> Any:  # pragma: no cover
        pass


class SpatialGradient(Protocol):
    def __call__(self, x: Vector, y: Vector, /) -> tuple[Any, Any]:  # pragma: no cover
        pass


class SnapshotHook(Protocol):
    def __call__(self, state: "State", record: "EnergyRecord | None", /) -> None:  # pragma: no cover
        pass


class _StrEnum(str, Enum):
    def __repr__(self) -> str:
        return f"{type(self).__name__}.{self.name}"


class Preconditioner(_StrEnum):
    none = "none"
    jacobi = "jacobi"


class InitMode(_StrEnum):
    ritz = "ritz"
    nodal = "nodal"


class StepAlgorithm(_StrEnum):
    elimination = "elimination"
    monolithic = "monolithic"


class SourceKind(_StrEnum):
    none = "none"
    fixed_gaussian = "fixed_gaussian"
    path_gaussian = "path_gaussian"


class FieldFormat(_StrEnum):
    csv = "csv"
    vtk_legacy = "vtk_legacy"


class RunMode(_StrEnum):
    simulate = "simulate"
    mms_converge = "mms-converge"
    stability = "stability"
    info = "info"


__all__ = [
    "FieldFormat",
    "IndexArray",
    "InitMode",
    "Point",
    "Preconditioner",
    "RunMode",
    "ScalarMap",
    "SnapshotHook",
    "SourceKind",
    "SpaceTimeField",
    "SpatialField",
    "SpatialGradient",
    "StepAlgorithm",
    "Vector",
]
