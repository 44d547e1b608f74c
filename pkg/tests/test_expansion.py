from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.expansion import (
    N_TRUNC,
    AtLeast,
    EstimationFailed,
    Expansion,
    Finite,
    Infinite,
    estimate_vanishing_order_numeric,
    orders_agree,
    vanishing_order_from_coeffs,
)
from artifact.specfun import bessel_j, bessel_j_all

RADII = np.geomspace(0.1, 10**-2.5, 6)


def random_expansion(rng, n_trunc, lam):
    c = rng.normal(size=(n_trunc + 1, 2)) + 1j * rng.normal(size=(n_trunc + 1, 2))
    # unit l1 norm gives |u| <= 1, so the 5-point error is at most h^2 lam^2 / 12
    c /= np.abs(c).sum()
    return Expansion(lam, c)


def test_single_mode_examples():
    e = Expansion.single_mode(1, 4.0)
    r = np.linspace(0.0, 2.0, 9)
    assert np.max(np.abs(e.eval(r, 0.0))) <= 1e-16
    assert np.allclose(e.eval(r, math.pi / 2), bessel_j(1, 2 * r), rtol=0, atol=1e-15)


def test_value_at_center_and_canonical_form():
    e = Expansion(2.0, [[1.5, 2.0 - 1j], [0.3, 0.1]])
    assert e.coeffs[0, 1] == 0
    assert e.coeffs[0, 0] == 3.5 - 1j
    assert e.eval(0.0, 1.234) == 3.5 - 1j


def test_json_roundtrip():
    e = Expansion(3.0, [[1, 0], [0.5j, -0.25], [0, 2]], center=(0.1, -0.2))
    back = Expansion.from_json(json.dumps(e.to_json()))
    assert back.lam == e.lam and back.center == e.center
    assert np.array_equal(back.coeffs, e.coeffs)
    assert set(e.to_json()) == {"lambda", "coeffs", "center"}


def test_eval_xy_uses_center():
    e = Expansion(1.0, [[0, 0], [0.5, 0.5]], center=(1.0, 2.0))
    # J_1(r) cos(theta) about (1, 2)
    assert abs(e(1.5, 2.0) - bessel_j(1, 0.5)) <= 1e-15


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.floats(0.5, 10.0))
def test_helmholtz_residual(seed, n_trunc, lam):
    rng = np.random.default_rng(seed)
    e = random_expansion(rng, n_trunc, lam)
    h = 1e-3
    x, y = rng.uniform(-0.5, 0.5, size=(2, 5))
    lap = (e(x + h, y) + e(x - h, y) + e(x, y + h) + e(x, y - h) - 4 * e(x, y)) / h**2
    assert np.max(np.abs(lap + lam * e(x, y))) <= 1e-5


def test_ray_normal_derivative_examples():
    r = np.linspace(0.1, 1.0, 7)
    cos_series = Expansion(3.0, [[0.2, 0], [0.5, 0.5], [1.0, 1.0]])
    assert np.max(np.abs(cos_series.ray_normal_derivative(0.0, r, 1))) <= 1e-16
    zero = Expansion(3.0, np.zeros((4, 2)))
    assert np.all(zero.ray_normal_derivative(0.3, r, -1) == 0)


def test_ray_normal_derivative_matches_difference():
    e = Expansion.single_mode(1, 4.0)
    theta0, r, h = math.pi / 2, 1.0, 1e-5
    # the normal to the ray at pi/2 with sign +1 is the direction theta0 + pi/2
    nrm = np.array([math.cos(theta0 + math.pi / 2), math.sin(theta0 + math.pi / 2)])
    p = r * np.array([math.cos(theta0), math.sin(theta0)])
    fd = (e(*(p + h * nrm)) - e(*(p - h * nrm))) / (2 * h)
    assert abs(e.ray_normal_derivative(theta0, r, 1) - fd) <= 1e-9
    with pytest.raises(ValueError):
        e.ray_normal_derivative(theta0, 0.0, 1)


def test_gradient_matches_difference():
    rng = np.random.default_rng(3)
    e = random_expansion(rng, 8, 2.5)
    h = 1e-6
    for x, y in [(0.3, -0.2), (0.0, 0.0), (-0.7, 0.4)]:
        gx, gy = e.gradient_xy(x, y)
        fx = (e(x + h, y) - e(x - h, y)) / (2 * h)
        fy = (e(x, y + h) - e(x, y - h)) / (2 * h)
        assert abs(gx - fx) <= 1e-8 and abs(gy - fy) <= 1e-8


def test_order_from_coeffs_examples():
    rng = np.random.default_rng(0)
    c = rng.normal(size=(6, 2)).astype(complex)
    c[0] = (2.0, 3.0)
    assert vanishing_order_from_coeffs(Expansion(1.0, c)) == Finite(0)
    assert vanishing_order_from_coeffs(Expansion.single_mode(3, 1.0)) == Finite(3)
    zero = Expansion(1.0, np.zeros((N_TRUNC + 1, 2)))
    assert vanishing_order_from_coeffs(zero) == AtLeast(N_TRUNC + 1)


def test_numeric_estimator_examples():
    e = Expansion.single_mode(2, 3.0)
    assert estimate_vanishing_order_numeric(e, (0, 0), RADII) == Finite(2)
    one = lambda x, y: np.ones_like(x, dtype=complex)  # noqa: E731
    assert estimate_vanishing_order_numeric(one, (0, 0), RADII) == Finite(0)
    quartic = lambda x, y: ((x + 1j * y) ** 4).real  # noqa: E731
    assert estimate_vanishing_order_numeric(quartic, (0, 0), RADII) == Finite(4)
    zero = lambda x, y: np.zeros_like(x)  # noqa: E731
    assert estimate_vanishing_order_numeric(zero, (0, 0), RADII).kind == "at_least"


def test_numeric_estimator_preconditions():
    one = lambda x, y: np.ones_like(x)  # noqa: E731
    with pytest.raises(ValueError):
        estimate_vanishing_order_numeric(one, (0, 0), [0.1, 0.05, 0.02])
    with pytest.raises(ValueError):
        estimate_vanishing_order_numeric(one, (0, 0), [0.1, 0.08, 0.06, 0.04])
    # a field growing toward the centre is not a valid input
    spike = lambda x, y: 1 / np.hypot(x, y) ** 2.5  # noqa: E731
    with pytest.raises(EstimationFailed):
        estimate_vanishing_order_numeric(spike, (0, 0), RADII)


def test_sector_restriction():
    # r^3 sin(3 theta) on the upper half plane still has order 3
    f = lambda x, y: ((x + 1j * y) ** 3).imag  # noqa: E731
    assert estimate_vanishing_order_numeric(f, (0, 0), RADII, sector=(0.0, math.pi)) == Finite(3)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 6), st.floats(0.5, 8.0))
def test_coefficient_and_numeric_orders_agree(seed, lead, lam):
    rng = np.random.default_rng(seed)
    c = np.zeros((lead + 4, 2), dtype=complex)
    c[lead] = rng.normal(size=2) + 1j * rng.normal(size=2)
    if lead == 0:
        c[0] = (1.0 + rng.random(), 0)
    mask = rng.random((3, 2)) < 0.5
    c[lead + 1 :] = np.where(mask, rng.normal(size=(3, 2)), 0)
    e = Expansion(lam, c)
    assert vanishing_order_from_coeffs(e) == Finite(lead)
    assert estimate_vanishing_order_numeric(e, (0, 0), RADII) == Finite(lead)


def test_bessel_combination_identifiability():
    # on t in (0, 30) a degree-10 combination with sup-residual 1e-12 has coefficients below 1e-8
    t = np.linspace(0.075, 30.0, 400)
    A = bessel_j_all(10, t).T
    smin = np.linalg.svd(A, compute_uv=False).min()
    assert math.sqrt(t.size) * 1e-12 / smin <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bessel_combination_least_squares(seed):
    t = np.linspace(0.075, 30.0, 400)
    A = bessel_j_all(10, t).T
    rng = np.random.default_rng(seed)
    alpha = rng.normal(size=11)
    alpha *= 1e-12 / np.abs(A @ alpha).max()
    rec, *_ = np.linalg.lstsq(A, A @ alpha, rcond=None)
    assert np.abs(A @ rec).max() <= 1.01e-12
    assert np.abs(rec).max() <= 1e-8


def test_orders_agree_rules():
    assert orders_agree(Finite(3), Finite(3))
    assert not orders_agree(Finite(3), Finite(2))
    assert orders_agree(AtLeast(2), Finite(5))
    assert not orders_agree(AtLeast(2), Finite(1))
    assert orders_agree(AtLeast(33), Infinite())
    assert not orders_agree(Infinite(), Finite(4))
