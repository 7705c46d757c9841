import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.models import expr as E
from app.models.fixtures import chirp, nonexistent_pair
from app.models.funcrep import abs_of, add, constant, from_expr, identity_on, make_func, mul, scale, unit_step
from app.models.star_engine import (
    functional_norm_witness,
    holder_check,
    minkowski_check,
    shared_jump_correction,
    star_by_parts_residual,
    star_fubini,
    star_indefinite,
    star_integral,
    star_integral_on,
    variation_of_indefinite,
)
from app.models.variation import total_variation, variation_function
from app.services.document_loader import kernel_pairs
from app.schemas.requests import KernelDocument
from app.utils.errors import BadExponent, InfiniteVariation, InvariantError, UnsupportedKernel, UnsupportedPair
from tests.conftest import TWO_PI, load_doc


def _step(jumps, continuous=None):
    doc = {"domain": [0, 1], "jumps": [{"t": f"0.{k:02d}", "left": l, "right": r} for k, l, r in jumps]}
    if continuous:
        doc["continuous"] = [{"on": [0, 1], "expr": {"kind": "poly", "coeffs": list(continuous)}}]
    return make_func(doc)


_jump_lists = st.lists(
    st.tuples(st.integers(1, 99), st.floats(-2, 2, allow_nan=False), st.floats(-2, 2, allow_nan=False)),
    max_size=4, unique_by=lambda j: j[0])
_coeffs = st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=3)


# ================================
# Definite integral
# ================================

def test_identity_against_identity_plus_unit_function(ident, t_plus_h05):
    res = star_integral(ident, t_plus_h05)
    assert res.value == pytest.approx(1.0, abs=1e-12)
    assert res.role == "standard"


def test_square_against_unit_function(t_squared, h05):
    assert star_integral(t_squared, h05).value == pytest.approx(0.25, abs=1e-15)


def test_pair_without_riemann_stieltjes_integral_has_a_star_integral():
    f, g = nonexistent_pair()
    assert star_integral(f, g).value == 0.0
    assert star_integral(g, f).value == pytest.approx(1.0)


def test_endpoint_jumps_are_one_sided():
    g = make_func({"domain": [0, 1], "jumps": [{"t": "0", "right": 1}, {"t": "1", "left": 2}]})
    res = star_integral(identity_on(0.0, 1.0), g)
    assert res.value == pytest.approx(2.0)
    assert res.terms[1] == 0.0
    assert res.terms[3] == pytest.approx(2.0)


def test_regulated_integrand_against_unit_function(h05):
    assert star_integral(chirp(), h05).value == pytest.approx(-0.5, abs=1e-12)


def test_unbounded_integrator_swaps_roles(h05):
    res = star_integral(h05, chirp())
    assert res.role == "swapped"
    assert res.value == pytest.approx(0.5, abs=1e-9)


def test_both_unbounded_is_unsupported():
    with pytest.raises(UnsupportedPair):
        star_integral(chirp(), chirp())


def test_series_integrator(ident):
    g = make_func(load_doc("geometric_series.json"))
    locs = 1.0 - 0.5 * 0.5 ** np.arange(60)
    expected = 0.5 + float(np.sum(locs * 0.5 * 0.5 ** np.arange(60)))
    res = star_integral(ident, g)
    assert res.value == pytest.approx(expected, abs=1e-10)
    assert res.series_terms > 0


def test_additivity(ident, t_plus_h05):
    left = star_integral_on(ident, t_plus_h05, 0.0, 0.5)
    right = star_integral_on(ident, t_plus_h05, 0.5, 1.0)
    assert left.value == pytest.approx(0.125)
    assert right.value == pytest.approx(0.875)
    assert star_integral_on(ident, t_plus_h05, 0.3, 0.3).value == 0.0


@settings(max_examples=20, deadline=None)
@given(_jump_lists, _jump_lists, _coeffs, _coeffs, st.integers(1, 99), st.booleans())
def test_additivity_at_any_split_point(fj, gj, fc, gc, k, on_jump):
    if on_jump and k not in {j[0] for j in gj}:
        gj = gj + [(k, 0.75, -0.5)]
    f, g = _step(fj, fc), _step(gj, gc)
    c = k / 100
    whole = star_integral(f, g)
    left, right = star_integral_on(f, g, 0.0, c), star_integral_on(f, g, c, 1.0)
    bound = whole.error_bound + left.error_bound + right.error_bound + 1e-9
    assert left.value + right.value == pytest.approx(whole.value, abs=bound)


@settings(max_examples=50, deadline=None)
@given(_jump_lists, _jump_lists, _coeffs, _coeffs)
def test_estimates_chain(fj, gj, fc, gc):
    f, g = _step(fj, fc), _step(gj, gc)
    g_pi, _ = variation_function(g)
    direct = star_integral(f, g)
    weighted = star_integral(abs_of(f), g_pi)
    assert abs(direct.value) <= weighted.value + direct.error_bound + weighted.error_bound + 1e-9
    assert weighted.value <= f.sup_norm() * total_variation(g).value + weighted.error_bound + 1e-9


@settings(max_examples=50, deadline=None)
@given(_jump_lists, _coeffs, st.lists(st.tuples(st.integers(1, 99), st.floats(0, 2), st.floats(0, 2)),
                                      max_size=4, unique_by=lambda j: j[0]), st.floats(0, 2))
def test_mean_value_bounds_for_increasing_integrators(fj, fc, gj, slope):
    f, g = _step(fj, fc), _step(gj, (0.0, slope))
    m, M = f.cell_bounds(0.0, 1.0)
    rise = float(g.value(1.0) - g.value(0.0))
    res = star_integral(f, g)
    assert m * rise - res.error_bound - 1e-9 <= res.value <= M * rise + res.error_bound + 1e-9


@settings(max_examples=30, deadline=None)
@given(_jump_lists, _jump_lists, _jump_lists, _coeffs, _coeffs, st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(fj, hj, gj, fc, gc, alpha, beta):
    f, h, g = _step(fj, fc), _step(hj), _step(gj, gc)
    combined = star_integral(add(scale(f, alpha), scale(h, beta)), g).value
    assert combined == pytest.approx(alpha * star_integral(f, g).value + beta * star_integral(h, g).value,
                                     abs=1e-9)
    split = star_integral(f, add(g, h)).value
    assert split == pytest.approx(star_integral(f, g).value + star_integral(f, h).value, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(_jump_lists, _coeffs, _coeffs, _coeffs)
def test_product_rule_for_continuous_integrators(hj, hc, fc, gc):
    h, f, g = _step(hj, hc), _step([], fc), _step([], gc)
    lhs = star_integral(h, mul(g, f)).value
    rhs = star_integral(mul(h, g), f).value + star_integral(mul(h, f), g).value
    assert lhs == pytest.approx(rhs, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(_jump_lists, _coeffs, _coeffs, _coeffs)
def test_integrating_against_an_indefinite_integral(fj, fc, gc, hc):
    f, g, h = _step(fj, fc), _step([], gc), _step([], hc)
    phi = star_indefinite(g, f)
    assert star_integral(h, phi).value == pytest.approx(star_integral(mul(h, g), f).value, abs=1e-9)


# ================================
# Indefinite integral
# ================================

def test_indefinite_integral_carries_weighted_jumps(ident, t_plus_h05):
    phi = star_indefinite(ident, t_plus_h05)
    assert float(phi.value(0.0)) == 0.0
    assert float(phi.value(0.5)) == pytest.approx(0.125)
    assert float(phi.right_limit(0.5)) == pytest.approx(0.625)
    assert float(phi.value(1.0)) == pytest.approx(1.0)


def test_indefinite_integral_with_swapped_roles(h05):
    phi = star_indefinite(h05, chirp())
    assert float(phi.value(1.0)) == pytest.approx(star_integral(h05, chirp()).value, abs=1e-9)


def test_indefinite_integral_of_exponential_against_sine():
    f = from_expr(E.Exp(1.0), 0.0, 1.0)
    g = from_expr(E.Sin(), 0.0, 1.0)
    phi = star_indefinite(f, g)
    # int_0^1 e^t cos t dt = (e (sin 1 + cos 1) - 1) / 2
    assert float(phi.value(1.0)) == pytest.approx((math.e * (math.sin(1) + math.cos(1)) - 1) / 2, abs=1e-9)


@pytest.mark.slow
@settings(max_examples=50, deadline=None)
@given(_jump_lists, _coeffs, _coeffs)
def test_indefinite_integral_jumps_are_weighted(gj, fc, gc):
    f, g = _step([(50, 1.0, -0.5)], fc), _step(gj, gc)
    phi = star_indefinite(f, g)
    for k, left, right in gj:
        x = k / 100
        fx = float(f.value(x))
        assert phi.jump_at(x) == pytest.approx((fx * left, fx * right), abs=1e-12)


def test_variation_of_indefinite_integral(ident, t_plus_h05, sine):
    assert variation_of_indefinite(ident, t_plus_h05).value == pytest.approx(1.0)
    assert variation_of_indefinite(constant(1.0, 0.0, TWO_PI), sine).value == pytest.approx(4.0, abs=1e-9)
    with pytest.raises(InfiniteVariation):
        variation_of_indefinite(identity_on(0.0, 1.0), chirp())


@pytest.mark.slow
@settings(max_examples=50, deadline=None)
@given(_jump_lists, _jump_lists, _coeffs, _coeffs)
def test_variation_of_indefinite_integral_matches_its_total_variation(fj, gj, fc, gc):
    f, g = _step(fj, fc), _step(gj, gc)
    direct = total_variation(star_indefinite(f, g))
    law = variation_of_indefinite(f, g)
    assert direct.value == pytest.approx(law.value, abs=law.error_bound + (direct.hi - direct.lo) + 1e-8)


# ================================
# By parts, Fubini
# ================================

def test_shared_jumps_correct_integration_by_parts(h05):
    assert shared_jump_correction(h05, h05) == 1.0
    res = star_by_parts_residual(h05, h05)
    assert res.residual == pytest.approx(0.0, abs=1e-12)
    assert res.correction == 1.0


@pytest.mark.slow
@settings(max_examples=200, deadline=None)
@given(_jump_lists, _jump_lists, _coeffs, _coeffs)
def test_by_parts_residual_vanishes(fj, gj, fc, gc):
    f, g = _step(fj, fc), _step(gj, gc)
    res = star_by_parts_residual(f, g)
    assert abs(res.residual) <= res.error_bound + 1e-9


def test_fubini_separable_kernel(ident, t_plus_h05):
    kernel = kernel_pairs(KernelDocument.model_validate(load_doc("kernel_product.json")))
    res = star_fubini(kernel, t_plus_h05, ident)
    assert res.lhs == pytest.approx(4.0 / 3.0, abs=1e-9)
    assert res.rhs == pytest.approx(res.lhs, abs=res.error_bound + 1e-12)


@pytest.mark.slow
@settings(max_examples=100, deadline=None)
@given(_jump_lists, _jump_lists, _coeffs, _coeffs)
def test_fubini_iterated_integrals_agree(fj, gj, uc, vc):
    f, g = _step(fj, (0.0, 1.0)), _step(gj)
    u = _step([(25, 0.0, 1.0)], uc)
    v = _step([], vc)
    res = star_fubini([(u, v), (v, u)], f, g)
    assert abs(res.lhs - res.rhs) <= res.error_bound + 1e-9


def test_fubini_rejects_empty_or_misplaced_kernels(ident, h05):
    with pytest.raises(UnsupportedKernel):
        star_fubini([], ident, h05)
    with pytest.raises(UnsupportedKernel):
        star_fubini([(identity_on(0.0, 2.0), ident)], ident, h05)


# ================================
# Inequalities
# ================================

def test_holder_reference_triple(ident, one):
    res = holder_check(ident, one, ident, 2.0)
    assert res.lhs == pytest.approx(0.5)
    assert res.rhs == pytest.approx(math.sqrt(1.0 / 3.0))
    assert res.holds


def test_minkowski_sine_cosine(sine, cosine):
    g = identity_on(0.0, TWO_PI)
    res = minkowski_check(sine, cosine, g, 2.0)
    assert res.lhs == pytest.approx(math.sqrt(TWO_PI), abs=1e-9)
    assert res.rhs == pytest.approx(2.0 * math.sqrt(math.pi), abs=1e-9)
    assert res.holds


@pytest.mark.parametrize("p", [1.0, 0.5, float("inf")])
def test_exponent_must_exceed_one(ident, p):
    with pytest.raises(BadExponent):
        holder_check(ident, ident, ident, p)
    with pytest.raises(BadExponent):
        minkowski_check(ident, ident, ident, p)


@pytest.mark.slow
@settings(max_examples=500, deadline=None)
@given(_coeffs, _coeffs, st.floats(1.1, 6.0), st.floats(0.0, 3.0))
def test_inequalities_hold_for_increasing_integrators(xc, yc, p, height):
    x, y = _step([(40, 0.5, -0.25)], xc), _step([], yc)
    g = _step([(60, 0.0, height)], (0.0, 1.0))
    assert holder_check(x, y, g, p).holds
    assert minkowski_check(x, y, g, p).holds


# ================================
# Functional norm
# ================================

def test_norm_witness_for_smooth_integrator(sine):
    res = functional_norm_witness(sine, 1e-3)
    assert res.variation == pytest.approx(4.0, abs=1e-9)
    assert res.norm_est >= res.variation - 1e-3
    assert res.witness.sup_norm() == pytest.approx(1.0)


def test_norm_witness_for_jumps(h05):
    res = functional_norm_witness(h05, 1e-3)
    assert res.norm_est == pytest.approx(1.0)
    assert res.attainable == pytest.approx(1.0)


def test_opposite_one_sided_parts_cap_the_norm():
    g = make_func({"domain": [0, 1], "jumps": [{"t": "0.3", "left": 1, "right": -0.5}]})
    res = functional_norm_witness(g, 1e-3)
    assert res.variation == pytest.approx(1.5)
    assert res.attainable == pytest.approx(0.5)
    assert res.norm_est == pytest.approx(0.5)


def test_norm_witness_needs_zero_start():
    with pytest.raises(InvariantError):
        functional_norm_witness(constant(1.0, 0.0, 1.0), 1e-3)
    with pytest.raises(InvariantError):
        functional_norm_witness(unit_step("0.5", 0.0, 1.0), 0.0)


@pytest.mark.slow
@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 99), st.floats(-2, 2, allow_nan=False)),
                max_size=4, unique_by=lambda j: j[0]),
       st.floats(0.5, 6.0), st.floats(-2, 2))
def test_norm_estimate_reaches_the_variation(jumps, omega, amp):
    g = make_func({
        "domain": [0, 1],
        "continuous": [{"on": [0, 1], "expr": {"kind": "sin", "amp": amp, "omega": omega}}],
        "jumps": [{"t": f"0.{k:02d}", "right": s} for k, s in jumps],
    })
    res = functional_norm_witness(g, 1e-3)
    assert res.norm_est >= res.variation - 1e-3
    assert res.norm_est <= res.variation + 1e-9


# ================================
# Convergence of integrators
# ================================

def _wiggled(n: int):
    return make_func({
        "domain": [0, 1],
        "continuous": [{"on": [0, 1], "expr": {"kind": "sum", "args": [
            {"kind": "poly", "coeffs": [0, 1]},
            {"kind": "sin", "amp": 1.0 / n, "omega": n},
        ]}}],
        "jumps": [{"t": "0.5", "right": 1}],
    })


def test_integrators_with_bounded_variation_converge(t_plus_h05):
    f = from_expr(E.Poly((0.0, 0.0, 1.0, -2.0, 1.0)), 0.0, 1.0)
    limit = star_integral(f, t_plus_h05).value
    gaps = [abs(star_integral(f, _wiggled(n)).value - limit) for n in (8, 16, 32, 64)]
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 1e-4


def test_uniformly_convergent_integrands(t_plus_h05):
    f = from_expr(E.Poly((0.0, 0.0, 1.0)), 0.0, 1.0)
    limit = star_integral(f, t_plus_h05).value
    gaps = []
    for n in (4, 16, 64, 2048):
        f_n = make_func({
            "domain": [0, 1],
            "continuous": [{"on": [0, 1], "expr": {"kind": "poly", "coeffs": [0, 0, 1]}}],
            "jumps": [{"t": "0.25", "right": 1.0 / n ** 2}],
        })
        gaps.append(abs(star_integral(f_n, t_plus_h05).value - limit))
        # the step at 0.25 integrates to 0.75 against t and to 1 against the jump at 0.5
        assert gaps[-1] == pytest.approx(1.75 / n ** 2, rel=1e-9, abs=1e-12)
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 1e-6


def test_bounded_pointwise_convergent_integrands():
    g = make_func({"domain": [0, 1], "jumps": [
        {"t": "0.25", "right": 1}, {"t": "0.5", "left": 2}, {"t": "0.75", "right": -1},
    ]})
    limit_f = make_func({"domain": [0, 1], "jumps": [{"t": "1", "left": 1}]})
    limit = star_integral(limit_f, g).value
    assert limit == 0.0
    gaps = []
    for n in (10, 20, 40, 80):
        f_n = from_expr(E.Poly(tuple([0.0] * n + [1.0])), 0.0, 1.0)
        assert np.max(np.abs(f_n.value(np.linspace(0.0, 1.0, 101)))) <= 1.0
        gaps.append(abs(star_integral(f_n, g).value - limit))
        assert gaps[-1] == pytest.approx(abs(0.25 ** n + 2 * 0.5 ** n - 0.75 ** n), rel=1e-9)
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 1e-6


def test_jointly_convergent_integrands_and_integrators(t_plus_h05):
    f = from_expr(E.Poly((0.0, 0.0, 1.0, -2.0, 1.0)), 0.0, 1.0)
    limit = star_integral(f, t_plus_h05).value
    gaps = []
    for k in (1, 2, 4, 8, 16):
        omega = TWO_PI * k
        f_k = from_expr(E.Poly((0.0, omega ** -4, 1.0, -2.0, 1.0)), 0.0, 1.0)
        g_k = make_func({
            "domain": [0, 1],
            "continuous": [{"on": [0, 1], "expr": {"kind": "sum", "args": [
                {"kind": "poly", "coeffs": [0, 1]},
                {"kind": "sin", "amp": 1.0 / omega, "omega": omega},
            ]}}],
            "jumps": [{"t": "0.5", "right": 1}],
        })
        assert total_variation(g_k).value == pytest.approx(2.0, abs=1e-9)
        gaps.append(abs(star_integral(f_k, g_k).value - limit))
        # int t^2 (1 - t)^2 cos(omega t) dt = -24 / omega^4 and int t d g_k = 1
        assert gaps[-1] == pytest.approx(23.0 / omega ** 4, rel=1e-3, abs=1e-9)
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 1e-6
