import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.models.funcrep import make_func
from app.models.mollify import mollify, mollify_convergence_report
from app.models.star_engine import shared_jump_correction
from app.models.variation import total_variation
from app.utils.errors import DomainError, EpsTooLarge, InvariantError

EPS_GRID = (0.1, 0.05, 0.025)
FINE_GRID = (0.1, 0.05, 0.025, 0.0125)


def test_right_jump_becomes_forward_ramp(h05):
    y = mollify(h05, 0.1)
    assert not y.jumps
    np.testing.assert_allclose(y.value(np.array([0.3, 0.5, 0.55, 0.6, 0.9])), [0.0, 0.0, 0.5, 1.0, 1.0], atol=1e-12)


def test_left_jump_becomes_backward_ramp():
    y = mollify(make_func({"domain": [0, 1], "jumps": [{"t": "0.5", "left": 1}]}), 0.1)
    np.testing.assert_allclose(y.value(np.array([0.3, 0.4, 0.45, 0.5, 0.9])), [0.0, 0.0, 0.5, 1.0, 1.0], atol=1e-12)


def test_continuous_part_is_averaged_backward(ident):
    y = mollify(ident, 0.1)
    t = np.array([0.1, 0.4, 0.75, 1.0])
    np.testing.assert_allclose(y.value(t), t - 0.05, atol=1e-12)
    # end value extension to the left of a
    assert float(y.value(0.05)) == pytest.approx(0.0125, abs=1e-12)


def test_eps_bounds(h05):
    with pytest.raises(DomainError):
        mollify(h05, 0.0)
    with pytest.raises(DomainError):
        mollify(h05, -0.1)
    with pytest.raises(EpsTooLarge):
        mollify(h05, 0.5)


def test_isolated_values_are_dropped(ident):
    f = make_func({
        "domain": [0, 1],
        "continuous": [{"on": [0, 1], "expr": {"kind": "poly", "coeffs": [0, 1]}}],
        "overrides": [{"t": "0.5", "value": 3}],
    })
    y = mollify(f, 0.1)
    assert y.overrides == ()
    t = np.linspace(0, 1, 41)
    np.testing.assert_allclose(y.value(t), mollify(ident, 0.1).value(t), atol=1e-12)


def test_ramp_keeps_variation(h05):
    assert total_variation(mollify(h05, 0.1)).value == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.tuples(st.integers(1, 99), st.floats(-2, 2, allow_nan=False), st.floats(-2, 2, allow_nan=False)),
             max_size=4, unique_by=lambda j: j[0]),
    st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=3),
    st.floats(0.01, 0.4),
)
def test_averaging_does_not_increase_variation(jumps, coeffs, eps):
    y = make_func({
        "domain": [0, 1],
        "continuous": [{"on": [0, 1], "expr": {"kind": "poly", "coeffs": coeffs}}],
        "jumps": [{"t": f"0.{k:02d}", "left": l, "right": r} for k, l, r in jumps],
    })
    assert total_variation(mollify(y, eps)).value <= total_variation(y).value + 1e-9


# ================================
# Convergence report
# ================================

def test_report_for_smooth_integrand(t_squared, h05):
    rep = mollify_convergence_report(t_squared, h05, EPS_GRID, n_jobs=1)
    assert rep.reference == pytest.approx(0.25)
    assert rep.limit_correction == 0.0
    np.testing.assert_allclose(rep.int_dev, [e * e / 6.0 for e in EPS_GRID], rtol=1e-6)
    np.testing.assert_allclose(rep.var_dev, 0.0, atol=1e-9)
    assert np.all(np.diff(rep.sup_dev) < 0)


def test_report_for_shared_jump(h05):
    rep = mollify_convergence_report(h05, h05, EPS_GRID, n_jobs=1)
    assert rep.reference == 0.0
    assert rep.limit_correction == 0.5
    np.testing.assert_allclose(rep.int_dev, 0.5, atol=1e-9)
    np.testing.assert_allclose(rep.int_dev_corrected, 0.0, atol=1e-9)


def test_report_frame(t_squared, h05):
    frame = mollify_convergence_report(t_squared, h05, EPS_GRID, n_jobs=1).to_frame()
    assert list(frame.columns) == ["eps", "int_dev", "int_dev_corrected", "var_dev", "phi_var_dev", "sup_dev"]
    assert list(frame["eps"]) == list(EPS_GRID)


@pytest.mark.parametrize("grid", [(), (0.05, 0.1), (0.1, 0.1)])
def test_report_needs_decreasing_grid(t_squared, h05, grid):
    with pytest.raises(InvariantError):
        mollify_convergence_report(t_squared, h05, grid, n_jobs=1)


def _two_sided(left: float, right: float):
    return make_func({"domain": [0, 1], "jumps": [{"t": "0.3", "left": left}, {"t": "0.7", "right": right}]})


def test_shared_left_and_right_jumps():
    x, g = _two_sided(1.0, 1.0), _two_sided(2.0, 1.0)
    # left jumps meet on [c - eps, c], right jumps on [c, c + eps]; each product counts half
    assert shared_jump_correction(x, g, weight=0.5) == pytest.approx(0.5 * (1.0 * 1.0 - 1.0 * 2.0))
    rep = mollify_convergence_report(x, g, FINE_GRID, n_jobs=1)
    assert rep.reference == pytest.approx(3.0)
    assert rep.limit_correction == pytest.approx(-0.5)
    np.testing.assert_allclose(rep.int_dev, 0.5, atol=1e-9)
    np.testing.assert_allclose(rep.int_dev_corrected, 0.0, atol=1e-9)
    np.testing.assert_allclose(rep.var_dev, 0.0, atol=1e-9)


def test_left_jumps_alone_lose_half_their_product():
    x = make_func({"domain": [0, 1], "jumps": [{"t": "0.3", "left": 1.5}]})
    g = make_func({"domain": [0, 1], "jumps": [{"t": "0.3", "left": -2.0}]})
    assert shared_jump_correction(x, g, weight=0.5) == pytest.approx(1.5)
    rep = mollify_convergence_report(x, g, (0.1, 0.05), n_jobs=1)
    np.testing.assert_allclose(rep.int_dev_corrected, 0.0, atol=1e-9)


@pytest.mark.parametrize("pair", [("t_squared", "h05"), ("h05", "h05"), ("ident", "t_plus_h05")])
def test_deviations_do_not_grow_along_the_grid(request, pair):
    x, g = (request.getfixturevalue(name) for name in pair)
    rep = mollify_convergence_report(x, g, FINE_GRID, n_jobs=1)
    assert rep.eps_grid == FINE_GRID
    assert np.all(np.diff(rep.int_dev) <= 1e-9)
    assert np.all(np.diff(rep.var_dev) <= 1e-9)
