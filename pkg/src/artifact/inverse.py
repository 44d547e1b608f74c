"""Two-incident-wave discrimination experiments and corner probes.

Fields are wrapped in :class:`Field`, a pair of callables returning values
(shape ``(n,)``) and gradients (shape ``(n, 2)``) at points of shape ``(n, 2)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import ConvexHull

from .expansion import EstimationFailed, VanishingOrder, estimate_vanishing_order_numeric, orders_agree
from .lines import AngleClass, LineCondition, classify_angle
from .scatter import (
    Disk,
    FarFieldPattern,
    MeshConfig,
    PlaneWave,
    Polygon,
    PolygonalObstacle,
    ScatterSolution,
    solve_forward,
)
from .vanishing import CornerConfig, predict

N_RADII = 5
RADIUS_RATIO = 0.5
ZERO_CASE_REL = 1e-8


@dataclass(frozen=True)
class Field:
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    both: Callable[[np.ndarray], tuple] | None = None  # value and gradient in one pass

    def __call__(self, pts) -> np.ndarray:
        return self.value(np.atleast_2d(np.asarray(pts, dtype=float)))

    def grad(self, pts) -> np.ndarray:
        if self.gradient is None:
            raise ValueError("this field has no gradient evaluator")
        return self.gradient(np.atleast_2d(np.asarray(pts, dtype=float)))

    def value_and_grad(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.both is not None:
            return self.both(pts)
        return self(pts), self.grad(pts)

    @classmethod
    def from_solution(cls, sol: ScatterSolution) -> "Field":
        return cls(sol.total, sol.total_gradient, sol.total_with_gradient)

    @classmethod
    def from_incident(cls, inc) -> "Field":
        return cls(inc, inc.gradient)

    @classmethod
    def zero(cls) -> "Field":
        return cls(lambda p: np.zeros(len(p), dtype=complex), lambda p: np.zeros((len(p), 2), dtype=complex))


def linear_combination(a1: complex, f1: Field, a2: complex, f2: Field) -> Field:
    if f1.gradient is None or f2.gradient is None:
        return Field(lambda p: a1 * f1(p) + a2 * f2(p))

    def both(p):
        v1, g1 = f1.value_and_grad(p)
        v2, g2 = f2.value_and_grad(p)
        return a1 * v1 + a2 * v2, a1 * g1 + a2 * g2

    return Field(lambda p: a1 * f1(p) + a2 * f2(p), lambda p: both(p)[1], both)


# ---------------------------------------------------------------- probes


@dataclass(frozen=True)
class CornerProbe:
    """Sectors ``{x_c + rho (cos t, sin t): rho < r, theta_lo < t < theta_hi}`` for decreasing ``r``."""

    x_c: tuple[float, float]
    theta_lo: float
    theta_hi: float
    radii: tuple[float, ...]

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.size < 2 or np.any(r <= 0) or np.any(np.diff(r) >= 0):
            raise ValueError("radii must be positive and strictly decreasing")
        if not 0 < self.theta_hi - self.theta_lo <= 2 * math.pi + 1e-12:
            raise ValueError("sector opening must lie in (0, 2 pi]")
        object.__setattr__(self, "x_c", (float(self.x_c[0]), float(self.x_c[1])))
        object.__setattr__(self, "radii", tuple(float(x) for x in r))

    @property
    def opening(self) -> float:
        return self.theta_hi - self.theta_lo

    @classmethod
    def disk(cls, x_c, r0: float, n: int = N_RADII, ratio: float = RADIUS_RATIO) -> "CornerProbe":
        return cls(tuple(x_c), 0.0, 2 * math.pi, tuple(r0 * ratio ** np.arange(n)))

    @classmethod
    def at_vertex(cls, polygon: Polygon, i: int, n: int = N_RADII, ratio: float = RADIUS_RATIO) -> "CornerProbe":
        """Exterior sector at vertex ``i``; radii start at a tenth of the shortest edge."""
        v = polygon.array
        m = len(v)
        prev, here, nxt = v[(i - 1) % m], v[i], v[(i + 1) % m]
        lo = math.atan2(*(prev - here)[::-1])
        hi = math.atan2(*(nxt - here)[::-1])
        while hi <= lo:
            hi += 2 * math.pi
        edges = np.hypot(*(np.roll(v, -1, axis=0) - v).T)
        r0 = edges.min() / 10
        return cls(tuple(here), lo, hi, tuple(r0 * ratio ** np.arange(n)))

    def to_json(self) -> dict:
        return {"x_c": list(self.x_c), "theta_lo": self.theta_lo, "theta_hi": self.theta_hi, "radii": list(self.radii)}


@dataclass
class LocalAverage:
    sequence: np.ndarray  # averages, one per radius (trailing axes follow the field)
    value: np.ndarray | None  # extrapolated limit, None if non-convergent
    converged: bool
    message: str = ""

    def to_json(self) -> dict:
        def enc(a):
            a = np.asarray(a)
            return {"re": a.real.tolist(), "im": a.imag.tolist()}

        return {
            "sequence": enc(self.sequence),
            "value": None if self.value is None else enc(self.value),
            "converged": self.converged,
            "message": self.message,
        }


def _sector_rule(probe: CornerProbe, r: float, n_radial: int, n_angular: int):
    # rho = r t^2 removes rho^(-1/2)-type endpoint behaviour
    t, wt = np.polynomial.legendre.leggauss(n_radial)
    t, wt = (t + 1) / 2, wt / 2
    a, wa = np.polynomial.legendre.leggauss(n_angular)
    th = probe.theta_lo + probe.opening * (a + 1) / 2
    wth = wa * probe.opening / 2
    rho = r * t**2
    w_rho = wt * 2 * r * t * rho
    pts = np.asarray(probe.x_c) + (rho[:, None, None] * np.stack([np.cos(th), np.sin(th)], axis=1)[None, :, :])
    w = (w_rho[:, None] * wth[None, :]).ravel()
    return pts.reshape(-1, 2), w


def sector_averages(f: Callable, probe: CornerProbe, n_radial: int = 10, n_angular: int = 16) -> np.ndarray:
    out = []
    for r in probe.radii:
        pts, w = _sector_rule(probe, r, n_radial, n_angular)
        vals = np.asarray(f(pts))
        area = 0.5 * probe.opening * r * r
        out.append(np.tensordot(w, vals, axes=(0, 0)) / area)
    return np.asarray(out)


def _richardson(seq: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Eliminate ``r, r^2, ...`` from the averages (Neville extrapolation to ``r = 0``)."""
    table = [np.asarray(x, dtype=complex) for x in seq]
    r = np.asarray(radii)
    n = len(table)
    for m in range(1, n):
        table = [
            (r[i] * table[i + 1] - r[i + m] * table[i]) / (r[i] - r[i + m]) for i in range(n - m)
        ]
    return table[0]


def local_average(f: Callable, probe: CornerProbe, scale: float = 0.0, **quad) -> LocalAverage:
    """Sector averages of ``f`` on the probe radii and their extrapolated limit.

    ``scale`` is the magnitude of the terms that make up ``f``; differences
    below ``1e-11`` of it count as rounding noise.
    """
    seq = sector_averages(f, probe, **quad)
    flat = seq.reshape(len(seq), -1)
    diffs = np.abs(np.diff(flat, axis=0)).max(axis=1)
    scale = max(float(np.abs(flat).max()), scale)
    noise = 1e-11 * max(scale, 1e-300)
    if diffs.max() <= noise:
        return LocalAverage(seq, seq[-1], True, "constant sequence")
    tail = diffs[-3:]
    ratios = tail[1:] / np.maximum(tail[:-1], 1e-300)
    if np.any((ratios > 0.8) & (tail[1:] > noise)):
        return LocalAverage(seq, None, False, "averages do not settle as the radius shrinks")
    return LocalAverage(seq, _richardson(seq, np.asarray(probe.radii)), True)


@dataclass
class Cc1Result:
    value: np.ndarray | None
    nonzero: bool
    average: LocalAverage
    tol: float

    def to_json(self) -> dict:
        return {
            "value": None if self.value is None else {"re": self.value.real.tolist(), "im": self.value.imag.tolist()},
            "nonzero": self.nonzero,
            "tol": self.tol,
            "average": self.average.to_json(),
        }


class NonConvergent(RuntimeError):
    pass


def check_cc1(u1: Field, u2: Field, probe: CornerProbe, tol: float = 1e-8) -> Cc1Result:
    """Extrapolated average of ``u2 grad u1 - u1 grad u2`` at the probe corner."""

    def w(pts):
        v1, g1 = u1.value_and_grad(pts)
        v2, g2 = u2.value_and_grad(pts)
        return v2[:, None] * g1 - v1[:, None] * g2

    x = np.asarray(probe.x_c)[None, :]
    (a1, b1), (a2, b2) = u1.value_and_grad(x), u2.value_and_grad(x)
    with np.errstate(all="ignore"):
        scale = float(max(np.abs(a2[0]) * np.abs(b1).max(), np.abs(a1[0]) * np.abs(b2).max()))
    if not np.isfinite(scale):
        scale = 0.0
    avg = local_average(w, probe, scale=scale)
    if not avg.converged:
        raise NonConvergent(avg.message)
    val = np.asarray(avg.value)
    return Cc1Result(val, bool(np.linalg.norm(val) > tol), avg, tol)


@dataclass
class CombinedField:
    alpha1: complex
    alpha2: complex
    v: Field
    degenerate: bool


def combined_field(u1: Field, u2: Field, x_c) -> CombinedField:
    """``v = u2(x_c) u1 - u1(x_c) u2``, which vanishes at ``x_c``."""
    x = np.asarray(x_c, dtype=float)[None, :]
    a1 = complex(u2(x)[0])
    a2 = -complex(u1(x)[0])
    if a1 == 0 and a2 == 0:
        return CombinedField(0j, 0j, u1, True)
    return CombinedField(a1, a2, linear_combination(a1, u1, a2, u2), False)


def fit_combination(fields: list[Field], target: Field, pts) -> tuple[np.ndarray, float]:
    """Least-squares coefficients of ``target`` in the span of ``fields`` on ``pts``, with the relative residual."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    A = np.stack([f(pts) for f in fields], axis=1)
    b = target(pts)
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    res = np.linalg.norm(A @ coef - b) / max(np.linalg.norm(b), 1e-300)
    return coef, float(res)


@dataclass
class VanishingProbeReport:
    estimated: VanishingOrder | None
    predicted: VanishingOrder
    rationale: str
    agree: bool | None
    message: str = ""

    def to_json(self) -> dict:
        return {
            "estimated": None if self.estimated is None else str(self.estimated),
            "predicted": str(self.predicted),
            "rationale": self.rationale,
            "agree": self.agree,
            "message": self.message,
        }


def corner_vanishing_probe(
    v: Field,
    probe: CornerProbe,
    corner_angle_class: AngleClass,
    eta_pair: tuple[LineCondition, LineCondition],
    lam: float,
    n_radii: int = 8,
    decades: float = 2.0,
) -> VanishingProbeReport:
    """Estimated vanishing order of ``v`` at the probe corner against the predicted one."""
    if corner_angle_class.rational:
        alpha = corner_angle_class.p / corner_angle_class.q
    else:
        alpha = (probe.theta_hi - probe.theta_lo) / math.pi
        alpha = 2 - alpha if alpha > 1 else alpha
    alpha = min(max(alpha, 1e-12), 2 - 1e-12)
    x0 = np.asarray(probe.x_c)
    u0 = complex(v(x0[None, :])[0])
    kinds = {c.kind for c in eta_pair}
    if "nodal" in kinds:
        u0 = 0j
    cfg = CornerConfig(eta_pair[0], eta_pair[1], alpha, lam, u0, corner_angle_class)
    verdict = predict(cfg)
    radii = probe.radii[0] * np.logspace(0, -decades, n_radii)

    def fn(x, y):
        pts = np.stack([np.ravel(x), np.ravel(y)], axis=1)
        return v(pts).reshape(np.shape(x))

    try:
        est = estimate_vanishing_order_numeric(fn, probe.x_c, radii, sector=(probe.theta_lo, probe.theta_hi))
    except EstimationFailed as exc:
        return VanishingProbeReport(None, verdict.order, verdict.rationale, None, f"inconclusive: {exc}")
    return VanishingProbeReport(est, verdict.order, verdict.rationale, orders_agree(est, verdict.order))


# ---------------------------------------------------------------- discrimination


def hull_vertices(obstacle: PolygonalObstacle) -> np.ndarray:
    pts = []
    for c in obstacle.components:
        if isinstance(c, Disk):
            ang = np.linspace(0, 2 * math.pi, 128, endpoint=False)
            pts.append(np.asarray(c.center) + c.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1))
        else:
            pts.append(c.array)
    p = np.concatenate(pts)
    return p[ConvexHull(p).vertices]


def _outside_hull(x: np.ndarray, hull: np.ndarray, tol: float = 1e-10) -> bool:
    eq = ConvexHull(hull).equations
    return bool(np.any(eq[:, :2] @ x + eq[:, 2] > tol))


def _corner_index(obstacle: PolygonalObstacle, x: np.ndarray):
    for c in obstacle.components:
        if isinstance(c, Polygon):
            d = np.hypot(*(c.array - x).T)
            i = int(np.argmin(d))
            if d[i] <= 1e-12:
                return c, i
    return None, None


def far_field_discrepancy(a: FarFieldPattern, b: FarFieldPattern) -> float:
    """L2(S^1) distance of two patterns sampled on the same uniform grid."""
    if len(a.angles) != len(b.angles) or not np.allclose(a.angles, b.angles, atol=1e-12):
        raise ValueError("far-field patterns must share their angular grid")
    return float(np.sqrt(np.sum(np.abs(a.values - b.values) ** 2) * 2 * math.pi / len(a.values)))


@dataclass
class CornerReport:
    owner: int  # which obstacle the corner belongs to (1 or 2)
    x_c: tuple[float, float]
    angle_class: str
    outside_other_hull: bool
    case: str  # "vanishing-field" or "combined-field"
    alpha: tuple[complex, complex] | None
    cc1: Cc1Result | None
    message: str = ""

    def to_json(self) -> dict:
        return {
            "owner": self.owner,
            "x_c": list(self.x_c),
            "angle_class": self.angle_class,
            "outside_other_hull": self.outside_other_hull,
            "case": self.case,
            "alpha": None if self.alpha is None else [[a.real, a.imag] for a in self.alpha],
            "cc1": None if self.cc1 is None else self.cc1.to_json(),
            "message": self.message,
        }


@dataclass
class DiscriminationReport:
    k: float
    directions: tuple[tuple[float, float], tuple[float, float]]
    discrepancies: tuple[float, float]
    relative_discrepancies: tuple[float, float]
    noise_floor: float | None
    hull1: np.ndarray
    hull2: np.ndarray
    verdict: str
    corners: list[CornerReport] = field(default_factory=list)
    condition_numbers: list[float] = field(default_factory=list)

    def separated(self, factor: float) -> bool:
        """Both discrepancies exceed ``factor`` times the noise floor."""
        if self.noise_floor is None:
            raise ValueError("no noise floor was measured")
        return all(d > factor * self.noise_floor for d in self.discrepancies)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "directions": [list(d) for d in self.directions],
            "discrepancies": list(self.discrepancies),
            "relative_discrepancies": list(self.relative_discrepancies),
            "noise_floor": self.noise_floor,
            "hull1": self.hull1.tolist(),
            "hull2": self.hull2.tolist(),
            "verdict": self.verdict,
            "corners": [c.to_json() for c in self.corners],
            "condition_numbers": self.condition_numbers,
        }


def _same_obstacle(a: PolygonalObstacle, b: PolygonalObstacle) -> bool:
    return a.to_json() == b.to_json()


def _hull_edge_conditions(obstacle: PolygonalObstacle, hull: np.ndarray) -> dict:
    """Conditions on polygon edges lying on the hull boundary, keyed by rounded endpoints."""
    out = {}
    hv = {tuple(np.round(p, 12)) for p in hull}
    for c in obstacle.components:
        if not isinstance(c, Polygon):
            continue
        v = c.array
        for i, cond in enumerate(c.conditions):
            a, b = tuple(np.round(v[i], 12)), tuple(np.round(v[(i + 1) % len(v)], 12))
            if a in hv and b in hv:
                out[frozenset((a, b))] = cond
    return out


def _probe_corner(owner, polygon, i, other_fields, other_obstacle, tol) -> CornerReport:
    probe = CornerProbe.at_vertex(polygon, i)
    x_c = np.asarray(probe.x_c)
    cls = classify_angle(float(polygon.interior_angles()[i]))
    u1, u2 = other_fields
    disk = CornerProbe.disk(probe.x_c, probe.radii[0])
    ring = x_c + probe.radii[0] * np.stack([np.cos(np.linspace(0, 2 * math.pi, 64)), np.sin(np.linspace(0, 2 * math.pi, 64))], 1)
    if other_obstacle.contains(np.vstack([x_c, ring])).any():
        return CornerReport(owner, probe.x_c, str(cls), True, "skipped", None, None, "probe meets the other obstacle")
    vals = np.array([u1(x_c[None, :])[0], u2(x_c[None, :])[0]])
    scale = max(np.abs(u1(ring)).max(), np.abs(u2(ring)).max())
    if np.any(np.abs(vals) <= ZERO_CASE_REL * scale):
        case, alpha = "vanishing-field", None
    else:
        comb = combined_field(u1, u2, x_c)
        case, alpha = "combined-field", (comb.alpha1, comb.alpha2)
    try:
        cc1 = check_cc1(u1, u2, disk, tol)
        msg = ""
    except NonConvergent as exc:
        cc1, msg = None, str(exc)
    return CornerReport(owner, probe.x_c, str(cls), True, case, alpha, cc1, msg)


def discrimination_experiment(
    omega1: PolygonalObstacle,
    omega2: PolygonalObstacle,
    k: float,
    d1,
    d2,
    M: int = 256,
    mesh: MeshConfig | None = None,
    workers: int = 1,
    noise_floor: bool = True,
    probe_corners: bool = True,
    cc1_tol: float = 1e-8,
) -> DiscriminationReport:
    """Far-field discrepancies of two obstacles under two plane waves, with the predicted verdict."""
    mesh = mesh or MeshConfig()
    inc = [PlaneWave(k, tuple(d1)), PlaneWave(k, tuple(d2))]
    if np.allclose(inc[0].d, inc[1].d, atol=1e-12):
        raise ValueError("the two incident directions must differ")
    jobs = [(o, w) for o in (omega1, omega2) for w in inc]
    pool = max(1, min(workers, len(jobs)))
    with ThreadPoolExecutor(max_workers=pool) as ex:
        sols = list(ex.map(lambda j: solve_forward(j[0], j[1], mesh), jobs))
    ff = [s.far_field(M) for s in sols]
    disc = tuple(far_field_discrepancy(ff[j], ff[2 + j]) for j in range(2))
    rel = tuple(disc[j] / max(ff[j].l2_norm(), ff[2 + j].l2_norm()) for j in range(2))
    floor = None
    if noise_floor:
        fine_jobs = [(omega1, inc[0])] if _same_obstacle(omega1, omega2) else [(omega1, inc[0]), (omega2, inc[0])]
        with ThreadPoolExecutor(max_workers=max(1, min(workers, len(fine_jobs)))) as ex:
            fine = list(ex.map(lambda j: solve_forward(j[0], j[1], mesh.doubled()).far_field(M), fine_jobs))
        coarse = [ff[0], ff[2]]
        floor = max(far_field_discrepancy(c, f) for c, f in zip(coarse, fine))
    h1, h2 = hull_vertices(omega1), hull_vertices(omega2)

    corners: list[CornerReport] = []
    out1 = [p for p in h1 if _outside_hull(p, h2)]
    out2 = [p for p in h2 if _outside_hull(p, h1)]
    predicted = False
    if probe_corners:
        fields1 = (Field.from_solution(sols[0]), Field.from_solution(sols[1]))
        fields2 = (Field.from_solution(sols[2]), Field.from_solution(sols[3]))
        for owner, pts, own, other, fields in ((1, out1, omega1, omega2, fields2), (2, out2, omega2, omega1, fields1)):
            for p in pts:
                poly, i = _corner_index(own, p)
                if poly is None:
                    continue
                rep = _probe_corner(owner, poly, i, fields, other, cc1_tol)
                corners.append(rep)
                cls = classify_angle(float(poly.interior_angles()[i]))
                if not cls.rational or (cls.q >= 3 and rep.cc1 is not None and rep.cc1.nonzero):
                    predicted = True
    if _same_obstacle(omega1, omega2):
        verdict = "identical obstacles: zero discrepancy expected"
    elif out1 or out2:
        if predicted or not probe_corners:
            verdict = "distinct: a hull corner of one obstacle lies outside the other hull"
        else:
            verdict = "hulls differ but no probed corner meets the angle or cc1 requirement"
    else:
        c1, c2 = _hull_edge_conditions(omega1, h1), _hull_edge_conditions(omega2, h2)
        if any(c1.get(e) != c2.get(e) for e in set(c1) | set(c2)):
            verdict = "distinct: boundary conditions differ on the shared hull boundary"
        else:
            verdict = "same hull and hull conditions: no prediction"
    return DiscriminationReport(
        k,
        (inc[0].d, inc[1].d),
        disc,
        rel,
        floor,
        h1,
        h2,
        verdict,
        corners,
        [s.condition for s in sols],
    )
