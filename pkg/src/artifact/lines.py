"""Line segments with boundary conditions, angle rationality and reflections.

Angles between lines are measured in units of pi: an intersecting angle
``alpha * pi`` has ``alpha`` in (0, 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

Q_MAX = 10_000
EPS_RAT = 1e-9
CASCADE_STOP = 1e-6
CASCADE_MAX_ITER = 500


class UnsupportedReflection(ValueError):
    """The reflection principle does not cover this combination."""


@dataclass(frozen=True)
class LineCondition:
    """``nodal`` (u = 0), ``singular`` (du/dnu = 0) or ``impedance`` (du/dnu + eta u = 0)."""

    kind: str
    eta: complex = 0j

    def __post_init__(self):
        if self.kind not in ("nodal", "singular", "impedance"):
            raise ValueError(f"unknown line condition {self.kind!r}")
        eta = complex(self.eta)
        if self.kind == "impedance" and eta == 0:
            object.__setattr__(self, "kind", "singular")
        if self.kind != "impedance":
            eta = 0j
        object.__setattr__(self, "eta", eta)

    def __str__(self) -> str:
        if self.kind == "impedance":
            return f"Impedance({self.eta:g})"
        return self.kind.capitalize()

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "impedance":
            out["eta"] = [self.eta.real, self.eta.imag]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "LineCondition":
        eta = data.get("eta", [0.0, 0.0])
        if not isinstance(eta, (list, tuple)):
            eta = [eta, 0.0]
        return cls(data["kind"], complex(eta[0], eta[1]))


NODAL = LineCondition("nodal")
SINGULAR = LineCondition("singular")


def impedance(eta: complex) -> LineCondition:
    return LineCondition("impedance", eta)


@dataclass(frozen=True)
class Segment:
    """Segment from ``origin`` of length ``length`` in direction ``angle_over_pi * pi``."""

    origin: tuple[float, float]
    angle_over_pi: float
    length: float
    condition: LineCondition = NODAL

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("segment length must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "angle_over_pi", float(self.angle_over_pi) % 2.0)

    @property
    def angle(self) -> float:
        return self.angle_over_pi * math.pi

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    @property
    def endpoint(self) -> np.ndarray:
        return np.asarray(self.origin) + self.length * self.direction

    def points(self, m: int) -> np.ndarray:
        t = np.linspace(0.0, self.length, m)
        return np.asarray(self.origin)[None, :] + t[:, None] * self.direction[None, :]

    def to_json(self) -> dict:
        return {
            "origin": list(self.origin),
            "angle_over_pi": self.angle_over_pi,
            "length": self.length,
            "condition": self.condition.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Segment":
        return cls(
            tuple(data["origin"]),
            float(data["angle_over_pi"]),
            float(data["length"]),
            LineCondition.from_json(data.get("condition", {"kind": "nodal"})),
        )


@dataclass(frozen=True)
class AngleClass:
    """``Rational(p, q)`` with gcd 1, or ``Irrational``."""

    p: int | None = None
    q: int | None = None

    @property
    def rational(self) -> bool:
        return self.q is not None

    def __str__(self) -> str:
        return f"Rational({self.p},{self.q})" if self.rational else "Irrational"

    def to_json(self) -> dict:
        return {"kind": "rational", "p": self.p, "q": self.q} if self.rational else {"kind": "irrational"}


IRRATIONAL = AngleClass()


def rational(p: int, q: int) -> AngleClass:
    """Exact-rational input path; reduces ``p/q``."""
    f = Fraction(p, q)
    return AngleClass(f.numerator, f.denominator)


def classify_angle(alpha: float, q_max: int = Q_MAX, eps: float = EPS_RAT) -> AngleClass:
    """Continued-fraction test for ``alpha`` being ``p/q`` with ``q <= q_max``."""
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    # convergents h/k of the continued fraction of alpha
    h_prev, h = 1, int(math.floor(alpha))
    k_prev, k = 0, 1
    x = alpha - math.floor(alpha)
    while k <= q_max:
        if abs(alpha - h / k) <= eps and h > 0:
            return AngleClass(h, k)
        if x < 1e-15:
            break
        x = 1.0 / x
        a = int(math.floor(x))
        x -= a
        h_prev, h = h, a * h + h_prev
        k_prev, k = k, a * k + k_prev
    return IRRATIONAL


def _reflect_point(p: np.ndarray, origin: np.ndarray, direction: np.ndarray) -> np.ndarray:
    v = p - origin
    return origin + 2 * (v @ direction) * direction - v


def reflect(target: Segment, mirror: Segment) -> Segment:
    """Mirror image of ``target`` across the full line through ``mirror``."""
    mk, tk = mirror.condition.kind, target.condition.kind
    if mk == "impedance":
        raise UnsupportedReflection("reflection across an impedance line is not covered")
    if tk == "impedance" and mk == "singular":
        raise UnsupportedReflection("impedance line reflected across a singular mirror")
    o = np.asarray(mirror.origin)
    d = mirror.direction
    new_origin = _reflect_point(np.asarray(target.origin), o, d)
    new_angle = (2 * mirror.angle_over_pi - target.angle_over_pi) % 2.0
    cond = target.condition
    if tk == "impedance":
        # u(R x) = -u(x) for a nodal mirror; the reflected line carries the same eta
        cond = impedance(target.condition.eta)
    return Segment(tuple(new_origin), new_angle, target.length, cond)


def cascade(alpha1: float, max_iter: int = CASCADE_MAX_ITER, stop: float = CASCADE_STOP) -> list[float]:
    """Iterate ``alpha_{n+1} = 1 - floor(1/alpha_n) alpha_n``.

    Exact rationals (``Fraction``) terminate at exactly zero.
    """
    if not 0 < alpha1 < 1:
        raise ValueError("alpha1 must lie in (0, 1)")
    seq = [alpha1]
    a = alpha1
    for _ in range(max_iter):
        if a == 0 or a < stop:
            break
        m = math.floor(1 / a)
        nxt = 1 - m * a
        if isinstance(a, float):
            # the float floor can overshoot when 1/a is an integer up to rounding
            if nxt < 0 or abs(nxt) <= 4 * m * 2.2e-16:
                nxt = 0.0
        seq.append(nxt)
        a = nxt
    return seq


def dense_line_witness(
    gamma_plus: Segment,
    gamma_minus: Segment,
    angular_resolution: float,
    max_lines: int = 100_000,
) -> list[Segment]:
    """Reflect two intersecting lines into each other until their directions are dense.

    Both lines must be nodal (or both singular) and meet at an irrational angle.
    """
    kinds = {gamma_plus.condition.kind, gamma_minus.condition.kind}
    if len(kinds) != 1 or kinds & {"impedance"}:
        raise ValueError("both segments must be nodal or both singular")
    if not np.allclose(gamma_plus.origin, gamma_minus.origin, atol=1e-12):
        raise ValueError("segments must share their intersection point")
    alpha = (gamma_plus.angle_over_pi - gamma_minus.angle_over_pi) % 2.0
    if alpha > 1:
        alpha = 2 - alpha
    if alpha == 0 or classify_angle(alpha).rational:
        raise ValueError("the intersecting angle must be irrational")
    # Lines through a point are closed under reflection.  The group generated
    # by two reflections at angle alpha*pi contains rotations by 2*alpha*pi,
    # whose orbit is dense when alpha is irrational.
    lines = [gamma_minus, gamma_plus]
    seen = {round(gamma_minus.angle_over_pi, 12), round(gamma_plus.angle_over_pi, 12)}
    frontier = list(lines)
    while len(lines) < max_lines:
        angs = np.sort(np.array([s.angle_over_pi for s in lines])) * math.pi
        gaps = np.diff(np.concatenate([angs, [angs[0] + 2 * math.pi]]))
        if gaps.max() < angular_resolution:
            return lines
        new = []
        for t in frontier:
            for m in (gamma_minus, gamma_plus):
                s = reflect(t, m)
                key = round(s.angle_over_pi, 12)
                if key not in seen:
                    seen.add(key)
                    new.append(s)
        if not new:
            break
        lines.extend(new)
        frontier = new
    raise RuntimeError("could not reach the requested angular resolution")
