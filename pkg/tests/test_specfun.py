from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.specfun import N_ORDER_MAX, OrderError, bessel_j, bessel_j_all, bessel_j_prime

# 50-digit values, frozen from mpmath
J_TABLE = [
    (2, 1.0, 0.11490348493190048047),
    (0, 5.5, -0.006843869417819196824),
    (3, 2.0, 0.1289432494744020511),
    (5, 10.0, -0.23406152818679364044),
    (10, 25.0, -0.075179843948523283841),
    (1, 12.5, -0.16548380461475971846),
    (20, 15.0, 0.0073602340792234852583),
    (0, 31.7, 0.12399787757698107542),
    (7, 40.0, -0.1080234317357794287),
    (64, 50.0, 0.000063583833006752058569),
]


def test_values_at_zero():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert bessel_j(17, 0.0) == 0.0


@pytest.mark.parametrize("n,t,ref", J_TABLE)
def test_against_frozen_oracle(n, t, ref):
    got = bessel_j(n, t)
    if t <= 30:
        assert abs(got - ref) <= 1e-13 * abs(ref)
    else:
        assert abs(got - ref) <= 1e-12


def test_series_oracle_on_grid():
    mpmath.mp.dps = 30
    ts = np.linspace(0.05, 30.0, 200)
    for n in (0, 1, 4, 9):
        got = bessel_j_all(n, ts)[n]
        ref = np.array([float(mpmath.besselj(n, t)) for t in ts])
        scale = np.maximum(np.abs(ref), 1e-300)
        # relative accuracy except right at zeros of J_n
        err = np.abs(got - ref)
        assert np.all((err <= 1e-13 * scale) | (err <= 2e-16))


def test_derivative_examples():
    assert bessel_j_prime(0, 0.0) == 0.0
    assert bessel_j_prime(1, 0.0) == 0.5
    assert abs(bessel_j_prime(3, 2.0) - 0.1594191544040346425) <= 1e-14


def test_derivative_matches_central_difference():
    h = 1e-4
    for n in (0, 2, 5):
        for t in (0.7, 3.3, 14.0):
            fd = (bessel_j(n, t + h) - bessel_j(n, t - h)) / (2 * h)
            assert abs(fd - bessel_j_prime(n, t)) <= 1e-8


def test_order_limit():
    with pytest.raises(OrderError):
        bessel_j(N_ORDER_MAX + 1, 1.0)
    with pytest.raises(OrderError):
        bessel_j(-1, 1.0)
    assert bessel_j(5, 1.0, order_max=80) == bessel_j(5, 1.0)


def test_array_shapes():
    t = np.linspace(0, 40, 12).reshape(3, 4)
    assert bessel_j_all(6, t).shape == (7, 3, 4)
    assert bessel_j(2, t).shape == (3, 4)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.floats(0.1, 30.0))
def test_three_term_recurrence(n, t):
    j = bessel_j_all(n + 1, t)
    assert abs(j[n - 1] + j[n + 1] - 2 * n / t * j[n]) <= 1e-11


@settings(max_examples=60, deadline=None)
@given(st.integers(0, N_ORDER_MAX), st.floats(0.0, 200.0))
def test_bounded_by_one(n, t):
    assert abs(bessel_j(n, t)) <= 1.0


def test_neumann_sum_identity():
    # J_0 + 2 sum J_2k = 1
    for t in (0.3, 8.0, 11.99, 12.01, 27.0):
        j = bessel_j_all(N_ORDER_MAX, t)
        assert math.isclose(j[0] + 2 * j[2::2].sum(), 1.0, abs_tol=1e-14)
