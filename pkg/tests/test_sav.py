import logging
import math

import numpy as np
import pytest

from sla_caginalp.fem import create_space, integrate_composite
from sla_caginalp.linalg import SolverConfig, cg_solve_info
from sla_caginalp.mesh import build_uniform
from sla_caginalp.model import laser_params, laws_for
from sla_caginalp.sav import (
    State,
    StepError,
    StepLoads,
    _linearization,
    _schur_operator,
    auxiliary_drift,
    auxiliary_value,
    discrete_energy,
    gel_fraction,
    initialize,
    run,
    step,
    step_residuals,
    track_coverage,
)
from sla_caginalp.source import SourceSpec, y_path
from sla_caginalp.types import InitMode, StepAlgorithm

from .utils import relative_error


def _phi0(x, y):
    return 0.6 * np.cos(np.pi * x) * np.cos(np.pi * y) - 0.2


def _theta0(x, y):
    return 0.3 * np.sin(np.pi * x) * np.cos(2 * np.pi * y)


@pytest.fixture
def smooth_state(space4, params, laws, tight_solver):
    return initialize(space4, params, laws, _phi0, _theta0, InitMode.nodal)


def _uniform_state(space, params, laws, phi_value, theta_value):
    return initialize(
        space,
        params,
        laws,
        lambda x, y: phi_value,
        lambda x, y: theta_value,
        InitMode.nodal,
    )


@pytest.mark.parametrize("mode", list(InitMode), ids=lambda m: m.value)
def test_initial_auxiliary_variable_at_pure_phase(space4, params, laws, tight_solver, mode):
    state = initialize(space4, params, laws, lambda x, y: -1.0, lambda x, y: 0.0, mode)

    assert state.q == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(state.theta, 0.0, atol=1e-14)
    assert state.t == 0.0
    assert state.step_index == 0


def test_initial_auxiliary_variable_at_interface_value(space4, params, laws):
    state = _uniform_state(space4, params, laws, 0.0, 0.0)

    assert state.q == pytest.approx(math.sqrt(3.5), rel=1e-12)
    assert state.q == pytest.approx(1.870829, abs=1e-6)


def test_initial_displacement_solves_elasticity(space4, params, laws, smooth_state):
    assert smooth_state.u.shape == (space4.n_dofs, 2)
    assert np.any(smooth_state.u != 0)
    assert np.array_equal(smooth_state.theta_ref, smooth_state.theta)


def test_uniform_thermal_reference(space4, params, laws):
    shifted = params.model_copy(update={"theta0_field": 0.25})

    state = initialize(space4, shifted, laws, _phi0, _theta0, InitMode.nodal)

    assert np.array_equal(state.theta_ref, np.full(space4.n_dofs, 0.25))


@pytest.mark.parametrize("algorithm", list(StepAlgorithm), ids=lambda a: a.value)
def test_pure_phase_at_critical_temperature_is_stationary(space4, params, laws, tight_solver, algorithm):
    params = params.model_copy(update={"theta_c": 0.5})
    state = _uniform_state(space4, params, laws, -1.0, 0.5)

    new, record = step(state, space4, params, laws, 0.01, algorithm=algorithm)

    assert np.allclose(new.phi, state.phi, atol=1e-9)
    assert np.allclose(new.theta, state.theta, atol=1e-9)
    assert new.q == pytest.approx(state.q, abs=1e-12)
    assert np.allclose(new.u, 0.0)
    assert new.t == pytest.approx(0.01)
    assert new.step_index == 1
    assert record.dissipation == pytest.approx(0.0, abs=1e-15)


def test_step_satisfies_discrete_equations(space4, params, laws, smooth_state, rng):
    heat = rng.normal(size=space4.n_dofs)
    phase = rng.normal(size=space4.n_dofs)

    new, _ = step(smooth_state, space4, params, laws, 0.01, heat, phase_load=phase)
    residuals = step_residuals(smooth_state, new, space4, params, laws, 0.01, heat, phase_load=phase)

    assert residuals.phi <= 1e-9
    assert residuals.theta <= 1e-9
    assert residuals.q <= 1e-12


def _random_state(space, params, laws, rng):
    phi = rng.uniform(-1.2, 1.2, size=space.n_dofs)
    theta = rng.normal(size=space.n_dofs)
    return State(
        phi=phi,
        theta=theta,
        q=auxiliary_value(space, params, laws, phi),
        u=np.zeros((space.n_dofs, 2)),
        t=0.0,
        theta_ref=theta.copy(),
    )


@pytest.mark.parametrize("n", [2, 4], ids=["n2", "n4"])
def test_elimination_matches_monolithic_solve(params, laws, rng, tight_solver, n):
    space = create_space(build_uniform(n))

    for _ in range(20):
        state = _random_state(space, params, laws, rng)
        heat = rng.normal(size=space.n_dofs)

        eliminated, _ = step(state, space, params, laws, 0.05, heat, solve_elasticity=False)
        direct, _ = step(
            state,
            space,
            params,
            laws,
            0.05,
            heat,
            algorithm=StepAlgorithm.monolithic,
            solve_elasticity=False,
        )

        assert relative_error(eliminated.phi, direct.phi) <= 1e-8
        assert relative_error(eliminated.theta, direct.theta) <= 1e-8
        assert eliminated.q == pytest.approx(direct.q, rel=1e-8)


def test_elimination_matches_monolithic_with_laser_scales(space4, tight_solver):
    params = laser_params()
    laws = laws_for(params)
    state = initialize(space4, params, laws, lambda x, y: -1.0, lambda x, y: 0.0, InitMode.nodal)
    heat = np.linspace(0.0, 50.0, space4.n_dofs)

    eliminated, _ = step(state, space4, params, laws, 0.01, heat, solve_elasticity=False)
    direct, _ = step(
        state,
        space4,
        params,
        laws,
        0.01,
        heat,
        algorithm=StepAlgorithm.monolithic,
        solve_elasticity=False,
    )

    assert relative_error(eliminated.phi, direct.phi) <= 1e-7
    assert relative_error(eliminated.theta, direct.theta) <= 1e-7


@pytest.mark.parametrize("tau", [0.1, 0.01, 0.001])
def test_energy_identity_without_source(space4, params, laws, smooth_state, tau):
    new, record = step(smooth_state, space4, params, laws, tau)

    assert record.energy == pytest.approx(discrete_energy(space4, params, new.phi, new.theta, new.q))
    assert record.dissipation >= 0
    assert abs(record.identity_residual) <= 1e-8 * max(1.0, record.previous_energy)
    assert record.energy <= record.previous_energy


def test_energy_decreases_over_a_run(space4, params, laws, smooth_state):
    result = run(space4, params, laws, smooth_state, SourceSpec(), 0.5, 0.05)

    assert len(result.records) == 10
    assert np.all(np.diff(result.energies) <= 1e-12)
    assert result.records[0].previous_energy == pytest.approx(
        discrete_energy(space4, params, smooth_state.phi, smooth_state.theta, smooth_state.q),
    )


def test_scheme_is_affine_in_heat_load(space4, params, laws, smooth_state, rng):
    a = rng.normal(size=space4.n_dofs)
    b = rng.normal(size=space4.n_dofs)

    def advance(heat):
        new, _ = step(smooth_state, space4, params, laws, 0.02, heat, solve_elasticity=False)
        return np.concatenate((new.phi, new.theta, [new.q]))

    base = advance(None)
    combined = advance(a + 2.0 * b) - base
    separate = (advance(a) - base) + 2.0 * (advance(b) - base)

    assert np.allclose(combined, separate, atol=1e-8)


def test_warm_start_does_not_change_result(space4, params, laws, smooth_state, rng):
    heat = rng.normal(size=space4.n_dofs)

    warm, _ = step(smooth_state, space4, params, laws, 0.01, heat, warm_start=True)
    cold, _ = step(smooth_state, space4, params, laws, 0.01, heat, warm_start=False)

    assert np.allclose(warm.phi, cold.phi, atol=1e-8)
    assert np.allclose(warm.theta, cold.theta, atol=1e-8)
    assert np.allclose(warm.u, cold.u, atol=1e-8)


def test_step_without_elasticity_keeps_displacement(space4, params, laws, smooth_state):
    new, _ = step(smooth_state, space4, params, laws, 0.01, solve_elasticity=False)

    assert new.u is smooth_state.u


def test_step_rejects_bad_input(space4, space2, params, laws, smooth_state):
    with pytest.raises(ValueError):  # noqa: PT011
        step(smooth_state, space4, params, laws, 0.0)

    with pytest.raises(ValueError):  # noqa: PT011
        step(smooth_state, space2, params, laws, 0.01)


def test_run_counts_steps(space2, params, laws, tight_solver):
    state = _uniform_state(space2, params, laws, -1.0, 0.0)

    result = run(space2, params, laws, state, SourceSpec(), 1.0, 1 / 100)

    assert len(result.records) == 100
    assert result.final.step_index == 100
    assert result.final.t == pytest.approx(1.0)
    assert np.allclose(result.final.phi, state.phi, atol=1e-9)
    assert np.allclose(result.final.theta, state.theta, atol=1e-9)


def test_run_rejects_non_integral_step_count(space2, params, laws):
    state = _uniform_state(space2, params, laws, -1.0, 0.0)

    with pytest.raises(ValueError, match="multiple"):
        run(space2, params, laws, state, SourceSpec(), 1.0, 0.3)


def test_run_rejects_uncovered_source_window(space2, params, laws):
    state = _uniform_state(space2, params, laws, -1.0, 0.0)

    with pytest.raises(ValueError, match="window"):
        run(space2, params, laws, state, y_path(), 2.0, 0.5)


def test_run_hooks_and_snapshots(space2, params, laws):
    state = _uniform_state(space2, params, laws, -1.0, 0.0)
    seen = []

    result = run(
        space2,
        params,
        laws,
        state,
        SourceSpec(),
        1.0,
        0.1,
        hooks=[lambda s, r: seen.append((s.step_index, r is None))],
        snapshot_stride=3,
    )

    assert seen == [(0, True), (3, False), (6, False), (9, False), (10, False)]
    assert [s.step_index for s in result.snapshots] == [0, 3, 6, 9, 10]


def test_run_elasticity_stride(space4, params, laws, smooth_state):
    result = run(
        space4,
        params,
        laws,
        smooth_state,
        SourceSpec(),
        0.05,
        0.01,
        snapshot_stride=1,
        elasticity_stride=2,
    )

    u = [s.u for s in result.snapshots]
    assert u[1] is u[0]
    assert u[2] is not u[1]
    assert u[3] is u[2]
    assert u[5] is not u[4]


def test_run_with_laser_heats_the_spot(space4, params, laws, tight_solver):
    state = _uniform_state(space4, params, laws, -1.0, 0.0)
    spot = SourceSpec(kind="fixed_gaussian", I_m=10.0, w0=0.2, center=(0.5, 0.5))

    result = run(space4, params, laws, state, spot, 0.1, 0.05)

    center = space4.mesh.nearest_node((0.5, 0.5))
    corner = space4.mesh.nearest_node((0.0, 0.0))
    assert result.final.theta[center] > 0
    assert result.final.theta[center] > result.final.theta[corner]


def test_run_wraps_solver_failure(space4, params, laws, smooth_state):
    with pytest.raises(StepError) as exc:
        run(space4, params, laws, smooth_state, SourceSpec(), 0.1, 0.05, config=SolverConfig(max_iterations=1))

    assert exc.value.step_index == 1
    assert exc.value.t == pytest.approx(0.05)


def test_run_warns_about_identity_drift(space2, params, laws, caplog):
    state = _uniform_state(space2, params, laws, 0.3, 0.0)
    loose = SolverConfig(rel_tolerance=1e-2)

    class Forcing:
        def loads(self, space, t):
            return StepLoads()

    with caplog.at_level(logging.WARNING, logger="sla_caginalp.sav"):
        run(space2, params, laws, state, Forcing(), 0.1, 0.1, config=loose)

    assert any("Energy identity drift" in r.getMessage() for r in caplog.records)


def test_auxiliary_drift_vanishes_with_time_step(space4, params, laws, smooth_state):
    def drift(tau):
        result = run(space4, params, laws, smooth_state, SourceSpec(), 0.1, tau, elasticity_stride=1000)
        return auxiliary_drift(space4, params, laws, result.final)

    coarse = drift(0.02)
    fine = drift(0.005)

    assert auxiliary_drift(space4, params, laws, smooth_state) == 0.0
    assert fine < coarse


def test_auxiliary_value_matches_definition(space4, params, laws, smooth_state):
    bulk = integrate_composite(space4, smooth_state.phi, laws.W, order=4)

    assert auxiliary_value(space4, params, laws, smooth_state.phi) == pytest.approx(math.sqrt(bulk / 0.1 + 1))


def test_gel_fraction():
    phi = np.array([-1.0, -0.2, 0.0, 0.4, 0.9])
    state = State(phi=phi, theta=np.zeros(5), q=1.0, u=np.zeros((5, 2)), t=0.0, theta_ref=np.zeros(5))

    assert gel_fraction(state) == pytest.approx(0.4)


def test_track_coverage(space4):
    coordinates = space4.mesh.coordinates
    centre = space4.mesh.nearest_node((0.5, 0.5))
    phi = np.full(space4.n_dofs, -1.0)
    phi[[centre, space4.mesh.nearest_node((0.75, 0.5)), space4.mesh.nearest_node((0.0, 0.0))]] = 1.0
    state = State(phi=phi, theta=np.zeros_like(phi), q=1.0, u=np.zeros((space4.n_dofs, 2)), t=0.0, theta_ref=phi)

    spot = SourceSpec(kind="fixed_gaussian", I_m=1.0, w0=0.1, center=(0.5, 0.5))

    # the centre and its four axis neighbours lie within 0.3
    assert track_coverage(state, coordinates, spot, 0.3) == pytest.approx(2 / 5)
    assert track_coverage(state, coordinates, spot, 0.01) == 1.0
    assert track_coverage(state, coordinates, SourceSpec(), 0.3) == 0.0


def test_step_balances_enthalpy(space4, params, laws, smooth_state, rng):
    heat = np.abs(rng.normal(size=space4.n_dofs))
    ones = np.ones(space4.n_dofs)

    def enthalpy(state):
        return ones @ space4.mass @ (params.delta * state.theta + 0.5 * params.gamma * state.phi)

    new, _ = step(smooth_state, space4, params, laws, 0.01, heat)

    assert enthalpy(new) - enthalpy(smooth_state) == pytest.approx(0.01 * heat.sum(), rel=1e-8, abs=1e-10)


@pytest.mark.parametrize("scales", ["unit", "laser"])
def test_schur_operator_is_symmetric_positive(space4, params, laws, tight_solver, rng, scales):
    if scales == "laser":
        params = laser_params()
        laws = laws_for(params)
    state = _random_state(space4, params, laws, rng)
    _, P, _ = _linearization(space4, params, laws, state)

    X, _, _ = _schur_operator(space4, params, 0.01, P, tight_solver)

    for _ in range(10):
        x = rng.normal(size=space4.n_dofs)
        y = rng.normal(size=space4.n_dofs)
        scale = np.linalg.norm(x) * np.linalg.norm(y)
        assert abs(x @ X.matvec(y) - y @ X.matvec(x)) <= 1e-9 * scale
        assert x @ X.matvec(x) > 0

    b = rng.normal(size=space4.n_dofs)
    assert cg_solve_info(X, b, tight_solver).iterations <= 5 * space4.n_dofs
