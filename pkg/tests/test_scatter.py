from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

from artifact.lines import IRRATIONAL, NODAL, SINGULAR, impedance, rational
from artifact.scatter import (
    FarFieldPattern,
    GeometryError,
    MeshConfig,
    PlaneWave,
    PointSource,
    PolygonalObstacle,
    classify_obstacle,
    mie_far_field,
    optical_theorem_defect,
    solve_forward,
    uniform_angles,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def load(name):
    return PolygonalObstacle.from_json(json.loads((CONFIGS / name).read_text()))


@pytest.fixture(scope="module")
def triangle_solution():
    return solve_forward(load("triangle_a.json"), PlaneWave.from_angle(2.0, 0.3))


def rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


@pytest.mark.parametrize("cond", [NODAL, impedance(2.0), impedance(1.0 + 0.5j)])
def test_disk_matches_series(cond):
    ob = PolygonalObstacle.disk(1.0, cond)
    sol = solve_forward(ob, PlaneWave.from_angle(2.0, 0.0))
    ff = sol.far_field(128)
    ref = mie_far_field(2.0, 1.0, cond, 0.0, ff.angles)
    assert rel(ff.values, ref) <= 1e-4


def test_sound_soft_disk_uses_combined_field():
    sol = solve_forward(PolygonalObstacle.disk(1.0, NODAL), PlaneWave.from_angle(2.0, 0.0))
    assert sol.formulation == "cfie"
    assert sol.boundary_residual() <= 1e-8


def test_reciprocity(triangle_solution):
    # u_inf(xhat; d) = u_inf(-d; -xhat)
    a, b = 0.3, 1.9
    other = solve_forward(load("triangle_a.json"), PlaneWave.from_angle(2.0, b + math.pi))
    lhs = triangle_solution.far_field_at([b])[0]
    rhs = other.far_field_at([a + math.pi])[0]
    assert abs(lhs - rhs) <= 1e-5 * abs(lhs)


def test_optical_theorem(triangle_solution):
    assert optical_theorem_defect(triangle_solution) <= 1e-4


def test_optical_theorem_impedance_real_eta():
    sol = solve_forward(load("triangle_a_impedance.json"), PlaneWave.from_angle(2.0, 1.0))
    assert sol.formulation == "direct"
    assert optical_theorem_defect(sol) <= 1e-4


def test_rellich_consistency(triangle_solution):
    # u^s(R xhat) sqrt(R) e^{-ikR} = u_inf + O(1/R); second-order Richardson over R, 2R, 4R
    k = 2.0
    ang = uniform_angles(16)
    xh = np.stack([np.cos(ang), np.sin(ang)], axis=1)

    def scaled(R):
        return triangle_solution.scattered(R * xh) * math.sqrt(R) * np.exp(-1j * k * R)

    def extrapolated(R):
        e1, e2, e4 = scaled(R), scaled(2 * R), scaled(4 * R)
        return (8 * e4 - 6 * e2 + e1) / 3

    ff = triangle_solution.far_field_at(ang)
    near = extrapolated(50 / k)
    far = extrapolated(100 / k)
    assert rel(near, far) <= 1e-5
    assert rel(far, ff) <= 1e-5


def test_self_convergence(triangle_solution):
    fine = solve_forward(load("triangle_a.json"), PlaneWave.from_angle(2.0, 0.3), MeshConfig().doubled())
    ang = uniform_angles(64)
    assert rel(triangle_solution.far_field_at(ang), fine.far_field_at(ang)) <= 1e-5


def test_worker_count_does_not_change_result(triangle_solution):
    par = solve_forward(load("triangle_a.json"), PlaneWave.from_angle(2.0, 0.3), workers=3)
    ang = uniform_angles(64)
    a, b = triangle_solution.far_field_at(ang), par.far_field_at(ang)
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


def test_mixed_square_boundary_residual():
    sol = solve_forward(load("square_mixed.json"), PlaneWave.from_angle(1.5, 0.7))
    assert sol.formulation == "direct"
    assert sol.boundary_residual() <= 1e-6
    assert np.isfinite(sol.condition)


def test_classify_obstacle_examples():
    square = PolygonalObstacle.polygon([(0, 0), (1, 0), (1, 1), (0, 1)], [NODAL] * 4)
    assert classify_obstacle(square) == rational(1, 2)
    h = math.sqrt(3) / 2
    equi = PolygonalObstacle.polygon([(0, 0), (1, 0), (0.5, h)], [NODAL] * 3)
    assert classify_obstacle(equi).q == 3
    # apex angle pi / sqrt(5), base angles split the rest evenly
    a = math.pi / math.sqrt(5)
    b = (math.pi - a) / 2
    apex = (0.5, 0.5 * math.tan(b))
    tri = PolygonalObstacle.polygon([(0, 0), (1, 0), apex], [NODAL] * 3)
    assert classify_obstacle(tri) == IRRATIONAL


def test_small_obstacle_far_field_is_small():
    tri = load("triangle_a.json")
    v = np.asarray(tri.components[0].vertices) * 1e-3
    small = PolygonalObstacle.polygon(v, [SINGULAR] * 3)
    ff = solve_forward(small, PlaneWave.from_angle(1.0, 0.0)).far_field(64)
    assert ff.l2_norm() <= 1e-2


def test_small_sound_soft_obstacle_decays_logarithmically():
    # in two dimensions a sound-soft scatterer of size a radiates like 1 / log(k a)
    tri = load("triangle_a.json")
    norms = []
    for scale in (1e-1, 1e-2, 1e-3):
        v = np.asarray(tri.components[0].vertices) * scale
        ob = PolygonalObstacle.polygon(v, [NODAL] * 3)
        norms.append(solve_forward(ob, PlaneWave.from_angle(1.0, 0.0)).far_field(64).l2_norm())
    assert norms[0] > norms[1] > norms[2] > 0.1
    disk = mie_far_field(1.0, 0.7e-3, NODAL, 0.0, uniform_angles(64))
    assert abs(norms[2] - np.sqrt(np.mean(np.abs(disk) ** 2) * 2 * math.pi)) <= 0.1 * norms[2]


def test_point_source_scattered_weaker_than_incident():
    tri = load("triangle_a.json")
    v = np.asarray(tri.components[0].vertices) * 0.05
    ob = PolygonalObstacle.polygon(v, [NODAL] * 3)
    src = PointSource(1.0, (3.0, 0.5))
    sol = solve_forward(ob, src)
    ang = np.linspace(0, 2 * math.pi, 24, endpoint=False)
    probe = 0.5 * np.stack([np.cos(ang), np.sin(ang)], axis=1) + v.mean(axis=0)
    assert np.all(np.abs(sol.scattered(probe)) < np.abs(src(probe)))


def test_point_source_inside_rejected():
    with pytest.raises(GeometryError):
        solve_forward(load("triangle_a.json"), PointSource(1.0, (0.5, 0.3)))


def test_geometry_errors():
    with pytest.raises(GeometryError):
        PolygonalObstacle.polygon([(0, 0), (1, 1), (1, 0), (0, 1)], [NODAL] * 4)
    with pytest.raises(GeometryError):
        PolygonalObstacle.polygon([(0, 0), (1, 0), (0, 1)], [NODAL, impedance(-1.0), NODAL])
    with pytest.raises(GeometryError):
        PolygonalObstacle.from_json({"components": [{"vertices": [[0, 0], [1, 0], [0, 1]], "edges": [{"kind": "robin"}]}]})


def test_obstacle_json_roundtrip():
    for name in ("disk_soft.json", "square_mixed.json", "triangle_a_impedance.json"):
        ob = load(name)
        assert PolygonalObstacle.from_json(json.loads(json.dumps(ob.to_json()))) == ob


def test_far_field_csv_roundtrip():
    ang = uniform_angles(64)
    vals = np.exp(1j * ang) * (1 + ang)
    pat = FarFieldPattern(2.0, {}, ang, vals)
    back = FarFieldPattern.from_csv(pat.to_csv(), 2.0)
    assert np.array_equal(back.angles, ang) and np.array_equal(back.values, vals)
    with pytest.raises(ValueError):
        FarFieldPattern(2.0, {}, ang[:10], vals[:10])


def test_singular_edges_are_sound_hard():
    ob = PolygonalObstacle.disk(1.0, SINGULAR)
    sol = solve_forward(ob, PlaneWave.from_angle(2.0, 0.0))
    ff = sol.far_field(128)
    assert rel(ff.values, mie_far_field(2.0, 1.0, SINGULAR, 0.0, ff.angles)) <= 1e-4
