import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from app.models import expr as E
from app.models.fixtures import cantor_stage, chirp, harmonic_partition, harmonic_sum
from app.models.funcrep import from_expr, make_func, subtract
from app.models.variation import (
    INFINITE_SUSPECTED,
    Partition,
    ensure_increasing,
    g_measure_open,
    partition_sum,
    total_variation,
    total_variation_on,
    variation_function,
)
from app.utils.errors import DomainError, InfiniteVariation, InvariantError, NotIncreasing


def test_sine_over_a_period(sine):
    res = total_variation(sine)
    assert res.value == pytest.approx(4.0, abs=1e-9)
    assert res.lo <= 4.0 <= res.hi
    assert res.parts[1] == 0.0


def test_unit_function(h05):
    res = total_variation(h05)
    assert res.value == 1.0
    assert res.parts == (0.0, 1.0)


def test_opposite_one_sided_parts_count_separately():
    f = make_func({"domain": [0, 1], "jumps": [{"t": "0.3", "left": 1, "right": -0.5}]})
    res = total_variation(f)
    assert res.value == pytest.approx(1.5)
    assert res.simplified_jump_sum == pytest.approx(0.5)


def test_isolated_value_counts_twice():
    f = make_func({
        "domain": [0, 1],
        "continuous": [{"on": [0, 1], "expr": {"kind": "poly", "coeffs": [0, 1]}}],
        "overrides": [{"t": "0.5", "value": 1.5}],
    })
    assert total_variation(f).value == pytest.approx(1.0 + 2.0)


@pytest.mark.parametrize("n", [1, 2, 5, 20, 100])
def test_chirp_partition_sums_are_harmonic(n):
    assert partition_sum(chirp(), harmonic_partition(n)) == pytest.approx(harmonic_sum(n), rel=1e-9)


def test_chirp_is_reported_unbounded():
    res = total_variation(chirp())
    assert res.value == INFINITE_SUSPECTED
    assert res.infinite
    assert res.hi == float("inf")


def test_partition_must_span_the_domain(sine):
    with pytest.raises(InvariantError):
        partition_sum(sine, [0.0, 1.0])
    with pytest.raises(InvariantError):
        Partition((0.0, 0.0, 1.0))


def test_additivity_over_subintervals(sine):
    left = total_variation_on(sine, 0.0, np.pi).value
    right = total_variation_on(sine, np.pi, 2.0 * np.pi).value
    assert left + right == pytest.approx(total_variation(sine).value, abs=1e-9)


def test_additivity_across_a_jump(t_plus_h05):
    parts = total_variation_on(t_plus_h05, 0.0, 0.5).value + total_variation_on(t_plus_h05, 0.5, 1.0).value
    assert parts == pytest.approx(total_variation(t_plus_h05).value)
    assert parts == pytest.approx(2.0)


def test_variation_function_decomposition(sine):
    f_pi, f_nu = variation_function(sine)
    assert float(f_pi.value(sine.b)) == pytest.approx(4.0, abs=1e-9)
    t = np.linspace(0.0, sine.b, 101)
    assert np.all(np.diff(f_pi.value(t)) >= -1e-12)
    assert np.all(np.diff(f_nu.value(t)) >= -1e-12)
    assert subtract(f_pi, f_nu).value(t) == pytest.approx(sine.value(t), abs=1e-12)


def test_variation_function_needs_finite_variation():
    with pytest.raises(InfiniteVariation):
        variation_function(chirp())


def test_sine_is_not_increasing(sine):
    with pytest.raises(NotIncreasing):
        ensure_increasing(sine)


def test_g_measure_of_open_intervals(t_plus_h05):
    assert g_measure_open(t_plus_h05, [(0.4, 0.6)]) == pytest.approx(1.2)
    assert g_measure_open(t_plus_h05, [(0.0, 0.5), (0.5, 1.0)]) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        g_measure_open(t_plus_h05, [(0.1, 0.4), (0.3, 0.6)])


@pytest.mark.parametrize("k", [0, 1, 3, 5])
def test_cantor_stages_rise_by_one(k):
    g = cantor_stage(k)
    ensure_increasing(g)
    assert total_variation(g).value == pytest.approx(1.0, abs=1e-12)


def _jumpy(jumps, omega):
    return make_func({
        "domain": [0, 1],
        "continuous": [{"on": [0, 1], "expr": {"kind": "sum", "args": [
            {"kind": "poly", "coeffs": [0, 1, -2]},
            {"kind": "sin", "amp": 0.5, "omega": omega},
        ]}}],
        "jumps": [{"t": f"0.{k:02d}", "left": l, "right": r} for k, l, r in jumps],
    })


_jumps = st.lists(st.tuples(st.integers(1, 99), st.floats(-2, 2, allow_nan=False), st.floats(-2, 2, allow_nan=False)),
                  max_size=4, unique_by=lambda j: j[0])
_cuts = st.lists(st.floats(0.001, 0.999, allow_nan=False), min_size=1, max_size=30, unique=True)


@pytest.mark.slow
@settings(max_examples=100, deadline=None)
@given(_jumps, st.floats(0.5, 20.0), _cuts, _cuts)
def test_refined_partitions_never_lose_variation(jumps, omega, cuts, extra):
    f = _jumpy(jumps, omega)
    coarse = Partition(tuple([0.0] + sorted(cuts) + [1.0]))
    fine = Partition(tuple([0.0] + sorted(set(cuts) | set(extra)) + [1.0]))
    res = total_variation(f)
    assert partition_sum(f, coarse) <= partition_sum(f, fine) + 1e-12
    assert partition_sum(f, fine) <= res.hi + 1e-12


@settings(max_examples=30, deadline=None)
@given(_jumps, st.floats(0.5, 20.0), st.integers(1, 99), st.booleans())
def test_additivity_at_any_split_point(jumps, omega, k, on_jump):
    if on_jump and k not in {j[0] for j in jumps}:
        jumps = jumps + [(k, -1.0, 0.5)]
    f = _jumpy(jumps, omega)
    c = k / 100
    parts = total_variation_on(f, 0.0, c).value + total_variation_on(f, c, 1.0).value
    assert parts == pytest.approx(total_variation(f).value, abs=1e-9)


@pytest.mark.parametrize("omega,phase", [(1.0, 0.0), (2.5, 0.3), (7.0, -1.2), (12.0, 2.0)])
def test_variation_of_an_antiderivative_is_the_integral_of_its_modulus(omega, phase):
    f = from_expr(E.Sin(1.0 / omega, omega, phase), 0.0, 3.0)
    zeros = [(np.pi / 2 + j * np.pi - phase) / omega for j in range(-2, int(3.0 * omega / np.pi) + 3)]
    kinks = [z for z in zeros if 0.0 < z < 3.0]
    expected, _ = integrate.quad(lambda t: abs(np.cos(omega * t + phase)), 0.0, 3.0, points=kinks, limit=200,
                                 epsabs=1e-13)
    assert total_variation(f).value == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("n", [10, 100])
@pytest.mark.parametrize("jumps,omega", [
    ([], 3.0),
    ([(50, 0.0, 1.0)], 1.0),
    ([(13, 0.5, -1.5), (77, -2.0, 0.25)], 9.0),
])
def test_rectangle_rule_error_is_bounded_by_the_variation(n, jumps, omega):
    f = _jumpy(jumps, omega)
    kinks = [k / 100 for k, _, _ in jumps]
    exact, _ = integrate.quad(lambda t: float(f.value(t)), 0.0, 1.0, points=kinks or None, limit=200,
                              epsabs=1e-13)
    rectangles = float(np.mean(f.value(np.arange(1, n + 1) / n)))
    assert abs(exact - rectangles) <= total_variation(f).value / n + 1e-12


def test_variation_follows_a_pointwise_limit_from_below():
    # staircases with n right steps of 1/n tend to t and have variation 1 = V(t)
    limit = total_variation(from_expr(E.Poly((0.0, 1.0)), 0.0, 1.0)).value
    t = np.linspace(0.0, 1.0, 1001)
    for n in (4, 8, 16, 32):
        stairs = make_func({"domain": [0, 1],
                            "jumps": [{"t": repr(k / n), "right": 1.0 / n} for k in range(n)]})
        assert np.max(np.abs(stairs.value(t) - t)) <= 1.0 / n + 1e-12
        v = total_variation(stairs).value
        assert v <= limit + 1e-12
        assert v == pytest.approx(limit, abs=1e-12)
