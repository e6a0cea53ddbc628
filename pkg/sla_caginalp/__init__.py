from .elasticity import ElasticSystem
from .fem import FemSpace, Norms, create_space
from .linalg import CGResult, ConvergenceError, SolverConfig, cg_solve
from .mesh import Mesh, build_uniform
from .mms import ErrorReport, ManufacturedCase, build_case, run_manufactured, spatial_sweep, temporal_sweep
from .model import MaterialLaws, ModelParams, default_laws, laser_params, laws_for, mms_params, validate
from .sav import EnergyRecord, RunResult, State, StepError, initialize, run, step
from .schemas import ConfigError, RunConfig, load_config, parse_config
from .source import SourceSpec, fixed_spot, y_path
from .types import FieldFormat, InitMode, Preconditioner, RunMode, SourceKind, StepAlgorithm

__all__ = [
    "CGResult",
    "ConfigError",
    "ConvergenceError",
    "ElasticSystem",
    "EnergyRecord",
    "ErrorReport",
    "FemSpace",
    "FieldFormat",
    "InitMode",
    "ManufacturedCase",
    "MaterialLaws",
    "Mesh",
    "ModelParams",
    "Norms",
    "Preconditioner",
    "RunConfig",
    "RunMode",
    "RunResult",
    "SolverConfig",
    "SourceKind",
    "SourceSpec",
    "State",
    "StepAlgorithm",
    "StepError",
    "build_case",
    "build_uniform",
    "cg_solve",
    "create_space",
    "default_laws",
    "fixed_spot",
    "initialize",
    "laser_params",
    "laws_for",
    "load_config",
    "mms_params",
    "parse_config",
    "run",
    "run_manufactured",
    "spatial_sweep",
    "step",
    "temporal_sweep",
    "validate",
    "y_path",
]
