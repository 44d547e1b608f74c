from __future__ import annotations

import numpy as np
import pytest
from scipy.special import hankel1

from artifact.hankel import SWITCH, hankel1_01

# (z, H0, H1), frozen from mpmath at 50 digits
H_TABLE = [
    (0.01, 0.99997500015624956597 - 3.0054556370836459445j, 0.0049999375002604162282 - 63.678596282060655049j),
    (0.5, 0.93846980724081290423 - 0.44451873350670655715j, 0.24226845767487388638 - 1.4714723926702430692j),
    (3.0, -0.26005195490193343762 + 0.37685001001279038197j, 0.33905895852593645893 + 0.32467442479179997844j),
    (11.9, 0.02504944169958964508 - 0.22983321394337506407j, -0.22898324966192405505 - 0.034711498334030609833j),
    (12.1, 0.069666773606807311849 - 0.21843838055092548565j, -0.21574897337692480827 - 0.078736931451395745616j),
    (30.0, -0.086367983581040211336 - 0.11729573168666402525j, -0.11875106261662293652 + 0.084425570661747234891j),
    (200.0, -0.015437439930565091592 - 0.054265775249817910694j, -0.054304538182378222711 + 0.01530182458038998922j),
]


@pytest.mark.parametrize("z,h0,h1", H_TABLE)
def test_frozen_values(z, h0, h1):
    g0, g1 = hankel1_01(z)
    assert abs(g0 - h0) <= 1e-13 * abs(h0)
    assert abs(g1 - h1) <= 1e-13 * abs(h1)


def test_agrees_with_scipy_across_switch():
    z = np.concatenate([np.geomspace(1e-4, SWITCH, 300), np.linspace(SWITCH, 400, 300)])
    g0, g1 = hankel1_01(z)
    assert np.max(np.abs(g0 - hankel1(0, z)) / np.abs(hankel1(0, z))) <= 1e-13
    assert np.max(np.abs(g1 - hankel1(1, z)) / np.abs(hankel1(1, z))) <= 1e-13


def test_wronskian():
    # J_1 Y_0 - J_0 Y_1 = 2 / (pi z)
    z = np.linspace(0.2, 60, 400)
    h0, h1 = hankel1_01(z)
    w = h1.real * h0.imag - h0.real * h1.imag
    assert np.max(np.abs(w * np.pi * z / 2 - 1)) <= 1e-12


def test_rejects_nonpositive():
    with pytest.raises(ValueError):
        hankel1_01(0.0)
    with pytest.raises(ValueError):
        hankel1_01([1.0, -2.0])
