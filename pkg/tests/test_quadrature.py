import numpy as np
import pytest

from app.models.quadrature import cumulative, gk15, integrate, integrate_cells


def test_gk15_is_exact_on_low_degree_polynomials():
    est, err = gk15(lambda t: t ** 5, np.array([0.0]), np.array([1.0]))
    assert est[0] == pytest.approx(1.0 / 6.0, abs=1e-15)
    assert err[0] < 1e-14


def test_integrate_smooth():
    value, err = integrate(np.sin, 0.0, np.pi)
    assert value == pytest.approx(2.0, abs=1e-12)
    assert err < 1e-9


def test_integrate_kink_split_at_breakpoint():
    value, _ = integrate(lambda t: np.abs(t - 0.3), 0.0, 1.0, breakpoints=[0.3])
    assert value == pytest.approx(0.29, abs=1e-14)


def test_empty_interval_is_zero():
    assert integrate(np.exp, 1.0, 1.0) == (0.0, 0.0)


def test_integrate_cells_per_cell_values():
    values, errors = integrate_cells(lambda t: 2.0 * t, [0.0, 0.5, 1.0])
    assert values == pytest.approx([0.25, 0.75], abs=1e-14)
    assert np.all(errors >= 0.0)


def test_cumulative_matches_antiderivative():
    knots = np.linspace(0.0, 1.0, 5)
    running, err = cumulative(lambda t: 2.0 * t, knots)
    assert running == pytest.approx(knots ** 2, abs=1e-14)
    assert running[0] == 0.0
