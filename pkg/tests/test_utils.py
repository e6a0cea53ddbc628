import numpy as np
import pytest

from sla_caginalp.utils import as_field_values, count_steps, fit_order


def test_as_field_values_broadcasts_scalars():
    assert as_field_values(2.5, 3).tolist() == [2.5, 2.5, 2.5]


def test_as_field_values_copies_arrays():
    source = np.arange(4.0)
    values = as_field_values(source, 4)

    values[0] = 10.0
    assert source[0] == 0.0


@pytest.mark.parametrize(
    ("T_final", "tau", "steps"),
    [
        (1.0, 0.1, 10),
        (1.0, 1 / 160, 160),
        (2.0, 0.02, 100),
    ],
)
def test_count_steps(T_final, tau, steps):
    assert count_steps(T_final, tau) == steps


@pytest.mark.parametrize(
    ("T_final", "tau"),
    [
        (1.0, 0.3),
        (1.0, 0.0),
        (0.0, 0.1),
        (0.1, 1.0),
    ],
)
def test_count_steps_rejects(T_final, tau):
    with pytest.raises(ValueError):  # noqa: PT011
        count_steps(T_final, tau)


def test_fit_order_of_exact_power_law():
    hs = [1 / 8, 1 / 16, 1 / 32, 1 / 64]
    errors = [3.0 * h**2 for h in hs]

    assert fit_order(hs, errors) == pytest.approx(2.0)


def test_fit_order_uses_last_points():
    params = [1.0, 0.5, 0.25, 0.125]
    errors = [1.0, 0.5, 0.125, 0.03125]

    assert fit_order(params, errors, last=2) == pytest.approx(2.0)


def test_fit_order_needs_two_points():
    with pytest.raises(ValueError):  # noqa: PT011
        fit_order([0.1], [0.01])
