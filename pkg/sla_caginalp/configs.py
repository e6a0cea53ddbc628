from .linalg import solver_config as solver
from .output import output_directory_config as output_directory

__all__ = [
    "output_directory",
    "solver",
]
