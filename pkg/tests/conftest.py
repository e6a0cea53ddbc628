import numpy as np
import pytest

import sla_caginalp.configs  # noqa: F401
from sla_caginalp.fem import create_space
from sla_caginalp.linalg import SolverConfig, solver_config
from sla_caginalp.mesh import build_uniform
from sla_caginalp.model import laws_for, mms_params

TIGHT = SolverConfig(rel_tolerance=1e-11)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tight_solver():
    with solver_config.set(TIGHT):
        yield TIGHT


@pytest.fixture
def params():
    return mms_params()


@pytest.fixture
def laws(params):
    return laws_for(params)


@pytest.fixture
def mesh2():
    return build_uniform(2)


@pytest.fixture
def mesh4():
    return build_uniform(4)


@pytest.fixture
def space2(mesh2):
    return create_space(mesh2)


@pytest.fixture
def space4(mesh4):
    return create_space(mesh4)
