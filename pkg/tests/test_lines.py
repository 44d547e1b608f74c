from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.expansion import Expansion
from artifact.lines import (
    IRRATIONAL,
    NODAL,
    SINGULAR,
    LineCondition,
    Segment,
    UnsupportedReflection,
    cascade,
    classify_angle,
    dense_line_witness,
    impedance,
    rational,
    reflect,
)


def test_impedance_zero_is_singular():
    assert impedance(0) == SINGULAR
    assert impedance(0.5).kind == "impedance"
    with pytest.raises(ValueError):
        LineCondition("dirichlet")


def test_condition_json_roundtrip():
    for c in (NODAL, SINGULAR, impedance(1 + 2j)):
        assert LineCondition.from_json(c.to_json()) == c


def test_segment_json_roundtrip():
    s = Segment((0.5, -1.0), 0.25, 2.0, impedance(3j))
    assert Segment.from_json(s.to_json()) == s
    with pytest.raises(ValueError):
        Segment((0, 0), 0.1, 0.0)


def test_classify_examples():
    assert classify_angle(0.5, 100, 1e-12) == rational(1, 2)
    assert classify_angle(2 / 3, 100, 1e-12) == rational(2, 3)
    # the convergent 470832/665857 is within 8e-13 of 1/sqrt(2)
    assert classify_angle(1 / math.sqrt(2), 10**6, 1e-12) == rational(470832, 665857)
    assert classify_angle(1 / math.sqrt(2), 10**6, 1e-13) == IRRATIONAL
    assert classify_angle(1 / math.sqrt(2)) == IRRATIONAL
    assert classify_angle(1.75) == rational(7, 4)
    with pytest.raises(ValueError):
        classify_angle(2.0)


def test_exact_rational_path_reduces():
    assert rational(4, 6) == rational(2, 3)
    assert rational(4, 6).p == 2


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 200), st.integers(1, 200), st.floats(-0.5, 0.5))
def test_classify_perturbed_rationals(p, q, shift):
    f = Fraction(p, q)
    if not 0 < f < 2:
        return
    eps = 1e-9
    got = classify_angle(float(f) + shift * eps, q_max=1000, eps=eps)
    assert got == rational(f.numerator, f.denominator)


def test_reflect_examples():
    target = Segment((0, 0), 0.0, 1.0)
    mirror = Segment((0, 0), 0.3, 1.0)
    assert math.isclose(reflect(target, mirror).angle_over_pi, 0.6)
    same = reflect(mirror, mirror)
    assert math.isclose(same.angle_over_pi, 0.3) and np.allclose(same.origin, (0, 0))
    wall = Segment((1.0, -1.0), 0.5, 2.0)
    img = reflect(target, wall)
    assert np.allclose(img.origin, (2.0, 0.0), atol=1e-15)
    assert math.isclose(img.angle_over_pi, 1.0)


def test_reflect_conditions():
    mirror_n = Segment((0, 0), 0.2, 1.0, NODAL)
    mirror_s = Segment((0, 0), 0.2, 1.0, SINGULAR)
    imp = Segment((0, 0), 0.7, 1.0, impedance(2.0))
    assert reflect(imp, mirror_n).condition == impedance(2.0)
    assert reflect(Segment((0, 0), 0.5, 1.0, SINGULAR), mirror_s).condition == SINGULAR
    with pytest.raises(UnsupportedReflection):
        reflect(imp, mirror_s)


@settings(max_examples=100, deadline=None)
@given(
    st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
    st.floats(0, 2),
    st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
    st.floats(0, 2),
)
def test_reflect_is_involution(o1, a1, o2, a2):
    t = Segment(o1, a1, 1.5)
    m = Segment(o2, a2, 1.0)
    back = reflect(reflect(t, m), m)
    assert np.allclose(back.origin, t.origin, atol=1e-13)
    d = (back.angle_over_pi - t.angle_over_pi) % 2.0
    assert min(d, 2 - d) <= 1e-13


def test_cascade_examples():
    assert cascade(1 / 3) == [1 / 3, 0.0]
    seq = cascade(1 / math.sqrt(2))
    assert abs(seq[1] - (1 - 1 / math.sqrt(2))) <= 1e-16
    assert cascade(Fraction(5, 13))[-1] == 0


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1 - 1e-3))
def test_cascade_decreasing_in_unit_interval(a):
    seq = cascade(a)
    assert all(0 <= x < 1 for x in seq)
    pos = [x for x in seq if x > 0]
    assert all(x > y for x, y in zip(pos, pos[1:]))


def test_dense_witness_gaps():
    plus = Segment((0, 0), 1 / math.sqrt(2), 1.0)
    minus = Segment((0, 0), 0.0, 1.0)
    lines = dense_line_witness(plus, minus, 0.1)
    ang = np.sort([s.angle for s in lines])
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * math.pi]]))
    assert gaps.max() < 0.1


def test_dense_witness_needs_irrational_angle():
    with pytest.raises(ValueError):
        dense_line_witness(Segment((0, 0), 0.25, 1.0), Segment((0, 0), 0.0, 1.0), 0.1)
    with pytest.raises(ValueError):
        dense_line_witness(Segment((0, 0), 0.3, 1.0, SINGULAR), Segment((0, 0), 0.0, 1.0), 0.1)


def test_reflected_nodal_lines_stay_nodal():
    # J_3(r) sin(3 theta) vanishes on the rays at multiples of pi/3
    u = Expansion.single_mode(3, 2.0)
    a = Segment((0, 0), 0.0, 1.0)
    b = Segment((0, 0), 1 / 3, 1.0)
    family = [a, b]
    for _ in range(3):
        family += [reflect(s, m) for s in family for m in (a, b)]
    for s in family:
        p = s.points(20)
        assert np.max(np.abs(u(p[:, 0], p[:, 1]))) <= 1e-12
