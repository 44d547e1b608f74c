from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.expansion import AtLeast, Finite, Infinite, estimate_vanishing_order_numeric
from artifact.lines import IRRATIONAL, NODAL, SINGULAR, impedance, rational
from artifact.specfun import bessel_j
from artifact.vanishing import (
    ESTIMATE_RADII,
    CornerConfig,
    boundary_residual,
    check_case,
    construct_eigenfunction,
    low_order_coefficients,
    predict,
    recursion_residual,
    run_recursion,
    u0_forced_zero,
)

SQRT2 = math.sqrt(2) - 1


def test_rectangle_corner_prediction():
    v = predict(CornerConfig(NODAL, NODAL, Fraction(1, 2), 5.0))
    assert v.order == Finite(2)
    assert "3.1" in v.rationale


def test_irrational_predictions():
    assert predict(CornerConfig(NODAL, NODAL, SQRT2, 1.0, angle_class=IRRATIONAL)).order == Infinite()
    v = predict(CornerConfig(SINGULAR, SINGULAR, SQRT2, 1.0, 3.0, angle_class=IRRATIONAL))
    assert v.order == Finite(0)
    assert "2.8" in v.rationale
    imp = CornerConfig(impedance(1.0), impedance(2.0), SQRT2, 1.0, 0.0, angle_class=IRRATIONAL)
    assert predict(imp).order == Infinite()


def test_singular_irrational_local_form():
    # with u(0) = 3 the recursion keeps only the J_0 term
    cfg = CornerConfig(SINGULAR, SINGULAR, SQRT2, 2.0, 3.0, angle_class=IRRATIONAL)
    e, _ = construct_eigenfunction(cfg, 12)
    r = np.linspace(0, 0.8, 9)
    th = np.linspace(0, 2 * math.pi, 9)
    assert np.max(np.abs(e.eval(r, th) - 3 * bessel_j(0, math.sqrt(2.0) * r))) <= 1e-14


def test_mixed_predictions():
    n_s = lambda a: predict(CornerConfig(NODAL, SINGULAR, a, 1.0)).order  # noqa: E731
    assert n_s(Fraction(1, 4)) == Finite(2)
    assert n_s(Fraction(3, 8)) == Finite(4)
    assert n_s(Fraction(1, 3)) == Infinite()
    assert n_s(Fraction(1, 2)) == AtLeast(1)


def test_half_angle_lower_bounds():
    v = predict(CornerConfig(SINGULAR, SINGULAR, Fraction(1, 2), 1.0))
    assert v.order == AtLeast(2) and "Remark" in v.rationale


def test_no_applicable_rule():
    v = predict(CornerConfig(impedance(1.0), impedance(2.0), Fraction(2, 5), 1.0, 1.0))
    assert v.order == AtLeast(0)
    assert v.rationale == "no applicable rule"


def test_config_validation():
    with pytest.raises(ValueError):
        CornerConfig(NODAL, SINGULAR, 0.3, 1.0, 1.0)
    with pytest.raises(ValueError):
        CornerConfig(NODAL, NODAL, 0.3, -1.0)
    folded = CornerConfig(NODAL, NODAL, Fraction(5, 3), 1.0)
    assert folded.angle_class == rational(1, 3)


def test_recursion_nodal_first_singular_index():
    res = run_recursion(CornerConfig(NODAL, NODAL, Fraction(2, 5), 1.0), 8)
    assert res.first_singular == 5
    dets = [abs(1 - np.exp(2j * n * 2 * math.pi / 5)) for n in range(1, 9)]
    assert [d < 1e-9 for d in dets].index(True) + 1 == 5


def test_recursion_forced_zero_at_third_degree():
    cfg = CornerConfig(impedance(1.0), impedance(2.0), Fraction(1, 3), 5.0, 1.0)
    res = run_recursion(cfg, 10)
    assert res.forced_zero_at == 3
    assert res.order == AtLeast(0)


def test_recursion_zero_seed_stays_zero():
    cfg = CornerConfig(NODAL, NODAL, SQRT2, 1.0, angle_class=IRRATIONAL)
    res = run_recursion(cfg, 32)
    assert res.first_singular is None
    assert np.all(res.table == 0)


@pytest.mark.parametrize("q", range(2, 9))
def test_nodal_determinant_index_equals_degree(q):
    for p in range(1, q):
        if math.gcd(p, q) == 1:
            res = run_recursion(CornerConfig(NODAL, NODAL, Fraction(p, q), 2.0), 12)
            assert res.first_singular == q


def test_low_order_coefficients_zero_seed():
    assert all(c == 0 for c in low_order_coefficients(0.0, 2.0, math.pi / 4, 1.0, 2.0)[:6])


def test_low_order_coefficients_match_recursion():
    lam, th = 2.0, math.pi / 4
    coeffs = low_order_coefficients(1.0, lam, th, 1.0, 2.0)
    cfg = CornerConfig(impedance(1.0), impedance(2.0), Fraction(1, 4), lam, 1.0)
    table = np.zeros((4, 2), dtype=complex)
    table[0, 0] = 1.0
    for n in range(1, 4):
        table[n] = coeffs[2 * n - 2 : 2 * n]
    assert recursion_residual(cfg, table) <= 1e-11
    # sin(4 theta) = 0 at pi/4, so the fourth level is absent
    assert coeffs[6] is None and coeffs[7] is None


def test_low_order_coefficients_generic_angle():
    lam, th = 3.0, 0.37 * math.pi
    coeffs = low_order_coefficients(0.8 - 0.2j, lam, th, 0.6, 1.7)
    cfg = CornerConfig(impedance(0.6), impedance(1.7), 0.37, lam, 0.8 - 0.2j, angle_class=IRRATIONAL)
    table = np.zeros((5, 2), dtype=complex)
    table[0, 0] = 0.8 - 0.2j
    for n in range(1, 5):
        table[n] = coeffs[2 * n - 2 : 2 * n]
    assert recursion_residual(cfg, table) <= 1e-11


def test_literal_prefactors_break_recursion():
    lam, th = 3.0, 0.37 * math.pi
    lit = low_order_coefficients(1.0, lam, th, 0.6, 1.7, literal=True)
    cfg = CornerConfig(impedance(0.6), impedance(1.7), 0.37, lam, 1.0, angle_class=IRRATIONAL)
    table = np.zeros((5, 2), dtype=complex)
    table[0, 0] = 1.0
    for n in range(1, 5):
        table[n] = lit[2 * n - 2 : 2 * n]
    assert recursion_residual(cfg, table) > 1e-3


def test_low_order_levels_absent():
    out = low_order_coefficients(1.0, 2.0, math.pi / 2, 1.0, 2.0)
    assert out[0] is not None and out[2] is None and out[3] is None


def test_forced_zero_examples():
    assert u0_forced_zero(rational(1, 1), 1, 2, 5)
    f3 = u0_forced_zero(rational(1, 3), 1, 2, 5)
    assert f3.forced
    half = u0_forced_zero(rational(1, 2), 1, 2, 5)
    assert not half.forced and half.certificate == "consistency identity only"
    assert not u0_forced_zero(rational(1, 4), 1, 2, 5)


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["nodal", "singular", "imp"]),
    st.sampled_from(["nodal", "singular", "imp"]),
    st.integers(2, 8),
    st.integers(1, 7),
    st.floats(0.5, 8.0),
)
def test_constructed_jets_satisfy_both_conditions(k1, k2, q, p, lam):
    if p >= q or math.gcd(p, q) != 1:
        return
    cond = {"nodal": NODAL, "singular": SINGULAR, "imp": impedance(0.9)}
    cfg = CornerConfig(cond[k1], cond[k2], Fraction(p, q), lam)
    e, res = construct_eigenfunction(cfg, 24)
    # the truncated jet satisfies the conditions up to its truncation error
    r = np.linspace(1e-3, 0.05, 12)
    scale = max(1.0, float(np.abs(e.coeffs).max()))
    assert recursion_residual(cfg, e.coeffs) <= 1e-11 * scale
    assert boundary_residual(cfg, e, r) <= 1e-9


def test_constructed_eigenfunction_order_matches_prediction():
    for pair, a in [((NODAL, NODAL), Fraction(3, 7)), ((SINGULAR, impedance(0.7)), Fraction(2, 5))]:
        cfg = CornerConfig(*pair, a, 1.0)
        r = check_case(cfg)
        assert r.agree, r.row()
        e, _ = construct_eigenfunction(cfg)
        assert estimate_vanishing_order_numeric(e, (0, 0), ESTIMATE_RADII) == predict(cfg).order


def test_case_row_fields():
    r = check_case(CornerConfig(NODAL, NODAL, Fraction(1, 2), 5.0)).row()
    assert r["predicted"] == r["recursed"] == r["estimated"] == "Finite(2)"
    assert r["alpha"] == "1/2" and r["agree"]
