import math

import numpy as np
import pytest

from app.models.fixtures import chirp, damped_coefficients, impulse_coefficients
from app.models.funcrep import constant, identity_on, make_func
from app.models.qde import (
    CLASSICAL,
    CONTINUOUS_INTEGRATORS,
    REGULATED,
    SIGMA_CONTINUOUS,
    CoefficientSet,
    assemble_system,
    build_H,
    build_P,
    classify,
    delta_correctness,
    quasi_derivative_check,
    solve_cauchy,
    solve_classical,
    solve_problem,
    triangular_residual,
)
from app.services.document_loader import document_loader
from app.utils.errors import ConditionViolation, DomainMismatch, InvariantError, SchemaError
from tests.conftest import fixture_path

EPS_GRID = (0.1, 0.05, 0.025)


def _zero():
    return constant(0.0, 0.0, 1.0)


def _with_override():
    return make_func({"domain": [0, 1], "overrides": [{"t": "0.5", "value": 1}]})


# ================================
# Coefficients
# ================================

def test_condition_classes(h05):
    assert damped_coefficients().condition_class == CLASSICAL
    assert impulse_coefficients().condition_class == REGULATED
    assert classify([_zero(), chirp(), _zero()]) == CONTINUOUS_INTEGRATORS
    assert classify([_with_override(), h05, _zero()]) == SIGMA_CONTINUOUS


@pytest.mark.parametrize("p", [
    lambda: [chirp(), chirp(), constant(0.0, 0.0, 1.0)],
    lambda: [_with_override(), chirp(), constant(0.0, 0.0, 1.0)],
])
def test_condition_violation(p):
    with pytest.raises(ConditionViolation):
        classify(p())


def test_coefficient_set_validation():
    with pytest.raises(InvariantError):
        CoefficientSet.create([_zero(), _zero()])
    with pytest.raises(DomainMismatch):
        CoefficientSet.create([_zero(), constant(0.0, 0.0, 2.0), _zero()])


def test_coefficients_are_one_based(h05):
    coeffs = impulse_coefficients()
    assert coeffs.n == 2
    assert coeffs.coefficient(2).jump_at(0.5) == (0.0, 1.0)
    np.testing.assert_array_equal(coeffs.events(), [0.5])
    assert coeffs.mollified(0.1).condition_class == CLASSICAL


# ================================
# Quasi-derivatives
# ================================

@pytest.mark.parametrize("make", [damped_coefficients, impulse_coefficients])
def test_triangular_systems_are_solved(make):
    coeffs = make()
    H = build_H(coeffs)
    P = build_P(H, coeffs.n)
    assert triangular_residual(H, P, coeffs.n) < 1e-9
    assert float(P[0, 0].value(0.3)) == 1.0


def test_third_order_triangular_systems():
    coeffs = CoefficientSet.create([identity_on(0.0, 1.0), constant(0.0, 0.0, 1.0),
                                    identity_on(0.0, 1.0), constant(0.0, 0.0, 1.0)])
    H = build_H(coeffs)
    assert triangular_residual(H, build_P(H, 3), 3) < 1e-9


def test_quasi_derivatives_by_definition():
    coeffs = damped_coefficients()
    H = build_H(coeffs)
    P = build_P(H, coeffs.n)
    assert quasi_derivative_check(coeffs, P, H, [1.0, -2.0, 3.0]) < 1e-8


def test_quasi_derivative_check_needs_classical_coefficients():
    coeffs = impulse_coefficients()
    H = build_H(coeffs)
    with pytest.raises(ConditionViolation):
        quasi_derivative_check(coeffs, build_P(H, 2), H, [1.0])


# ================================
# Solutions
# ================================

def test_assembled_system_starts_at_gamma():
    coeffs = impulse_coefficients()
    H = build_H(coeffs)
    system = assemble_system(coeffs, H, build_P(H, 2), [1.0, 0.0])
    assert system.events == (0.5,)
    np.testing.assert_allclose(system.xi, [1.0, 0.0])
    np.testing.assert_allclose(system.recover(0.0, system.xi), [1.0, 0.0])
    traj = solve_cauchy(system)
    np.testing.assert_allclose(traj.x[0], [1.0, 0.0])


def test_impulse_kicks_the_derivative():
    traj = solve_problem(impulse_coefficients(), [1.0, 0.0])
    assert traj.events == (0.5,)
    np.testing.assert_allclose(traj.state_at(0.5, "-"), [1.0, 0.0], atol=1e-7)
    np.testing.assert_allclose(traj.state_at(0.5, "+"), [1.0, -1.0], atol=1e-7)
    np.testing.assert_allclose(traj.x[-1], [0.5, -1.0], atol=1e-7)


def test_forcing_jump_kicks_the_derivative_upward(h05):
    coeffs = CoefficientSet.create([_zero(), _zero(), h05])
    traj = solve_problem(coeffs, [0.0, 0.0])
    assert traj.events == (0.5,)
    np.testing.assert_allclose(traj.state_at(0.5, "-"), [0.0, 0.0], atol=1e-7)
    np.testing.assert_allclose(traj.state_at(0.5, "+"), [0.0, 1.0], atol=1e-7)
    np.testing.assert_allclose(traj.x[-1], [0.5, 1.0], atol=1e-7)


def test_zero_coefficients_give_a_line():
    coeffs = CoefficientSet.create([_zero(), _zero(), _zero()])
    traj = solve_problem(coeffs, [2.0, -1.0])
    t = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(traj.states(t), np.column_stack((2.0 - t, -np.ones_like(t))), atol=1e-8)


def test_damped_solution():
    traj = solve_problem(damped_coefficients(), [0.0, 1.0])
    t = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(traj.states(t)[:, 0], 1.0 - np.exp(-t), atol=1e-7)
    assert traj.x[-1, 0] == pytest.approx(1.0 - math.exp(-1.0), abs=1e-7)


def test_direct_solver_agrees_on_classical_problems():
    coeffs = damped_coefficients()
    direct = solve_classical(coeffs, [0.0, 1.0])
    quasi = solve_problem(coeffs, [0.0, 1.0])
    t = np.linspace(0.0, 1.0, 21)
    np.testing.assert_allclose(direct.states(t), quasi.states(t), atol=1e-7)
    with pytest.raises(ConditionViolation):
        solve_classical(impulse_coefficients(), [1.0, 0.0])


def test_trajectory_frame():
    frame = solve_problem(impulse_coefficients(), [1.0, 0.0]).to_frame()
    assert list(frame.columns) == ["t", "side", "y1", "y2", "x", "x1"]
    at_event = frame[frame["t"] == 0.5]
    assert set(at_event["side"]) == {"-", "+"}
    assert frame["t"].is_monotonic_increasing


def test_wrong_number_of_initial_values():
    with pytest.raises(InvariantError):
        solve_problem(impulse_coefficients(), [1.0])


# ================================
# Averaged coefficients
# ================================

def test_averaged_solutions_converge():
    rep = delta_correctness(impulse_coefficients(), [1.0, 0.0], EPS_GRID, samples=201)
    assert rep.events == (0.5,)
    assert np.all(np.diff(rep.deviation) < 0)
    assert all(d < eps for d, eps in zip(rep.deviation, rep.eps_grid))
    assert list(rep.to_frame().columns) == ["eps", "deviation"]


def test_averaging_needs_regulated_coefficients():
    coeffs = CoefficientSet.create([_zero(), chirp(), _zero()])
    with pytest.raises(ConditionViolation):
        delta_correctness(coeffs, [1.0, 0.0], EPS_GRID)


def test_averaging_needs_decreasing_grid():
    with pytest.raises(InvariantError):
        delta_correctness(impulse_coefficients(), [1.0, 0.0], (0.05, 0.1))


# ================================
# Documents
# ================================

def test_ode_document():
    coeffs, gamma, tol, sha = document_loader.load_ode(fixture_path("impulse_ode.json"))
    assert coeffs.condition_class == REGULATED
    assert gamma == (1.0, 0.0)
    assert tol is None
    assert len(sha) == 64


def test_ode_document_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2, "domain": [0, 1], "p": [{"domain": [0, 1]}], "gamma": [1, 0]}')
    with pytest.raises(InvariantError) as err:
        document_loader.load_ode(bad)
    assert err.value.pointer == "/p"

    bad.write_text('{"n": 1, "domain": [0, 1], "p": [], "gamma": []}')
    with pytest.raises(SchemaError) as err:
        document_loader.load_ode(bad)
    assert err.value.pointer == "/n"
