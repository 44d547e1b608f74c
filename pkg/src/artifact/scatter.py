"""Time-harmonic acoustic scattering by polygonal obstacles in the plane.

Boundary-integral Nystrom solver on Gauss-Legendre panels, refined
geometrically toward corners.  Kernels near the target (including the
logarithmic self-interaction) are integrated against the Lagrange basis of
the source panel on subintervals that shrink dyadically toward the point of
the panel closest to the target.

Edge conditions use :class:`~artifact.lines.LineCondition` with the exterior
normal: ``nodal`` is sound-soft (u = 0), ``singular`` sound-hard
(du/dnu = 0) and ``impedance`` is ``du/dnu + eta u = 0``.

Formulations:

* all edges sound-soft: combined field ``u^s = (D - i k S) phi``;
* otherwise: the direct (Green) formulation for the total field,
  ``u/2 - K u + S du/dnu = u^i`` on the boundary.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .hankel import hankel1_01
from .lines import LineCondition, AngleClass, classify_angle

SCHEMA_KINDS = {"dirichlet": "nodal", "neumann": "singular", "impedance": "impedance"}
RCOND_MIN = 1e-13


class GeometryError(ValueError):
    """Invalid obstacle geometry."""


class SolverError(RuntimeError):
    """The discretised system could not be solved reliably."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


# ---------------------------------------------------------------- geometry


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]


def _edge_condition(cond: LineCondition) -> LineCondition:
    if cond.kind == "impedance" and (cond.eta.real < 0 or cond.eta.imag < 0):
        raise GeometryError("impedance edges need Re(eta) >= 0 and Im(eta) >= 0")
    return cond


@dataclass(frozen=True)
class _Piece:
    """A smooth boundary piece parametrised over t in [0, 1]."""

    kind: str  # "segment" | "arc"
    a: tuple[float, float]  # segment start, or arc centre
    b: tuple[float, float]  # segment end, or (radius, unused)
    cond: LineCondition
    corner_start: bool = False
    corner_end: bool = False

    def point(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "segment":
            a, b = np.asarray(self.a), np.asarray(self.b)
            return a + t[..., None] * (b - a)
        c = np.asarray(self.a)
        rad = self.b[0]
        ang = 2 * math.pi * t
        return c + rad * np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "segment":
            d = np.asarray(self.b) - np.asarray(self.a)
            return np.broadcast_to(d, t.shape + (2,)).copy()
        rad = self.b[0]
        ang = 2 * math.pi * t
        return 2 * math.pi * rad * np.stack([-np.sin(ang), np.cos(ang)], axis=-1)

    @property
    def length(self) -> float:
        if self.kind == "segment":
            return float(np.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1]))
        return 2 * math.pi * self.b[0]

    def closest_parameter(self, x: np.ndarray, ta: float, tb: float) -> tuple[float, float]:
        """Closest parameter in [ta, tb] to ``x`` and the distance."""
        if self.kind == "segment":
            a, b = np.asarray(self.a), np.asarray(self.b)
            d = b - a
            t = float(np.clip((x - a) @ d / (d @ d), ta, tb))
            return t, float(np.hypot(*(a + t * d - x)))
        c = np.asarray(self.a)
        frac = math.atan2(x[1] - c[1], x[0] - c[0]) / (2 * math.pi)
        cands = [f for f in (frac - 1, frac, frac + 1) if ta <= f <= tb] + [ta, tb]
        pts = self.point(np.asarray(cands))
        dist = np.hypot(pts[:, 0] - x[0], pts[:, 1] - x[1])
        i = int(np.argmin(dist))
        return float(cands[i]), float(dist[i])


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return o1 * o2 < 0 and o3 * o4 < 0


def _seg_distance(p1, p2, q1, q2) -> float:
    if _segments_intersect(p1, p2, q1, q2):
        return 0.0

    def pt_seg(p, a, b):
        d = b - a
        t = np.clip((p - a) @ d / (d @ d), 0, 1)
        return float(np.hypot(*(a + t * d - p)))

    return min(pt_seg(p1, q1, q2), pt_seg(p2, q1, q2), pt_seg(q1, p1, p2), pt_seg(q2, p1, p2))


@dataclass(frozen=True)
class Polygon:
    """Simple polygon; edge ``i`` runs from vertex ``i`` to vertex ``i + 1``.

    Clockwise input is reoriented to counter-clockwise (edge conditions follow
    their edges).
    """

    vertices: tuple[tuple[float, float], ...]
    conditions: tuple[LineCondition, ...]

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        conds = self.conditions
        if isinstance(conds, LineCondition):
            conds = (conds,) * len(v)
        conds = tuple(conds)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("a polygon needs at least three 2D vertices")
        if len(conds) != len(v):
            raise GeometryError("need one condition per edge")
        edges = np.roll(v, -1, axis=0) - v
        if np.any(np.hypot(edges[:, 0], edges[:, 1]) <= 1e-12):
            raise GeometryError("repeated vertex")
        area2 = float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))
        if abs(area2) <= 1e-12:
            raise GeometryError("degenerate polygon")
        n = len(v)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _seg_distance(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) <= 1e-12:
                    raise GeometryError("polygon is not simple")
        turn = _cross(edges, np.roll(edges, -1, axis=0))
        if np.any(np.abs(turn) <= 1e-14 * np.hypot(edges[:, 0], edges[:, 1]).max() ** 2):
            raise GeometryError("collinear consecutive edges")
        if area2 < 0:
            v, conds = _reorient(v, conds)
        object.__setattr__(self, "vertices", tuple(map(tuple, v)))
        object.__setattr__(self, "conditions", tuple(_edge_condition(c) for c in conds))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    def interior_angles(self) -> np.ndarray:
        """Interior angle at each vertex, in units of pi."""
        v = self.array
        e_in = v - np.roll(v, 1, axis=0)
        e_out = np.roll(v, -1, axis=0) - v
        turn = np.arctan2(_cross(e_in, e_out), np.einsum("ij,ij->i", e_in, e_out))
        return (math.pi - turn) / math.pi

    def pieces(self) -> list[_Piece]:
        v = self.array
        n = len(v)
        return [
            _Piece("segment", tuple(v[i]), tuple(v[(i + 1) % n]), self.conditions[i], True, True) for i in range(n)
        ]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Even-odd point-in-polygon test."""
        pts = np.atleast_2d(pts)
        v = self.array
        x, y = pts[:, 0], pts[:, 1]
        inside = np.zeros(len(pts), dtype=bool)
        for i in range(len(v)):
            (x1, y1), (x2, y2) = v[i], v[(i + 1) % len(v)]
            cross = (y1 > y) != (y2 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= cross & (x < xi)
        return inside


def _reorient(vertices, conditions):
    """Counter-clockwise vertex order with conditions kept on their edges."""
    v = np.asarray(vertices, dtype=float)
    conds = list(conditions) if not isinstance(conditions, LineCondition) else [conditions] * len(v)
    area2 = float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))
    if area2 < 0:
        n = len(v)
        # reversed polygon w_i = v_{n-1-i}; its edge i joins v_{n-1-i} and v_{n-2-i}, i.e. old edge n-2-i
        v = v[::-1]
        conds = [conds[(n - 2 - i) % n] for i in range(n)]
    return v, tuple(conds)


def make_polygon(vertices, conditions) -> Polygon:
    return Polygon(tuple(map(tuple, np.asarray(vertices, dtype=float))), conditions)


@dataclass(frozen=True)
class Disk:
    """Circular obstacle, used to validate the solver against series solutions."""

    center: tuple[float, float]
    radius: float
    condition: LineCondition

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("radius must be positive")
        _edge_condition(self.condition)

    def pieces(self) -> list[_Piece]:
        return [_Piece("arc", tuple(self.center), (self.radius, 0.0), self.condition)]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1]) < self.radius


@dataclass(frozen=True)
class PolygonalObstacle:
    """One or more disjoint components (polygons, or disks for validation)."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise GeometryError("an obstacle needs at least one component")
        for i in range(len(comps)):
            for j in range(i + 1, len(comps)):
                if _components_close(comps[i], comps[j]):
                    raise GeometryError("components must have disjoint closures")
        object.__setattr__(self, "components", comps)

    @classmethod
    def polygon(cls, vertices, conditions) -> "PolygonalObstacle":
        return cls((make_polygon(vertices, conditions),))

    @classmethod
    def disk(cls, radius: float, condition: LineCondition, center=(0.0, 0.0)) -> "PolygonalObstacle":
        return cls((Disk(tuple(center), radius, condition),))

    def pieces(self) -> list[_Piece]:
        return [p for c in self.components for p in c.pieces()]

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(len(pts), dtype=bool)
        for c in self.components:
            out |= c.contains(pts)
        return out

    @property
    def all_dirichlet(self) -> bool:
        return all(p.cond.kind == "nodal" for p in self.pieces())

    def bounding_radius(self, origin=(0.0, 0.0)) -> float:
        pts = []
        for c in self.components:
            if isinstance(c, Disk):
                pts.append(np.hypot(c.center[0] - origin[0], c.center[1] - origin[1]) + c.radius)
            else:
                v = c.array
                pts.append(np.hypot(v[:, 0] - origin[0], v[:, 1] - origin[1]).max())
        return float(max(pts))

    def diameter(self) -> float:
        pts = []
        for c in self.components:
            if isinstance(c, Disk):
                ang = np.linspace(0, 2 * math.pi, 64, endpoint=False)
                pts.append(np.asarray(c.center) + c.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1))
            else:
                pts.append(c.array)
        p = np.concatenate(pts)
        d = p[:, None, :] - p[None, :, :]
        return float(np.hypot(d[..., 0], d[..., 1]).max())

    def to_json(self) -> dict:
        inv = {v: k for k, v in SCHEMA_KINDS.items()}
        comps = []
        for c in self.components:
            if isinstance(c, Disk):
                comps.append({"disk": {"center": list(c.center), "radius": c.radius}, "edges": [_cond_json(c.condition, inv)]})
            else:
                comps.append({"vertices": [list(p) for p in c.vertices], "edges": [_cond_json(e, inv) for e in c.conditions]})
        return {"components": comps}

    @classmethod
    def from_json(cls, data: dict) -> "PolygonalObstacle":
        comps = []
        for c in data["components"]:
            edges = [_cond_from_json(e) for e in c["edges"]]
            if "disk" in c:
                comps.append(Disk(tuple(c["disk"].get("center", [0.0, 0.0])), float(c["disk"]["radius"]), edges[0]))
            else:
                if len(edges) == 1 and len(c["vertices"]) > 1:
                    edges = edges * len(c["vertices"])
                comps.append(make_polygon(c["vertices"], edges))
        return cls(tuple(comps))


def _cond_json(cond: LineCondition, inv: dict) -> dict:
    out = {"kind": inv[cond.kind]}
    if cond.kind == "impedance":
        out["eta"] = [cond.eta.real, cond.eta.imag]
    return out


def _cond_from_json(e: dict) -> LineCondition:
    kind = e["kind"]
    if kind not in SCHEMA_KINDS:
        raise GeometryError(f"unknown edge kind {kind!r}")
    eta = e.get("eta", [0.0, 0.0])
    if not isinstance(eta, (list, tuple)):
        eta = [eta, 0.0]
    return LineCondition(SCHEMA_KINDS[kind], complex(eta[0], eta[1]))


def _components_close(c1, c2) -> bool:
    def segs(c):
        if isinstance(c, Disk):
            ang = np.linspace(0, 2 * math.pi, 257)
            p = np.asarray(c.center) + c.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
            return [(p[i], p[i + 1]) for i in range(256)]
        v = c.array
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    s1, s2 = segs(c1), segs(c2)
    for a in s1:
        for b in s2:
            if _seg_distance(a[0], a[1], b[0], b[1]) <= 1e-9:
                return True
    # nested components
    p1 = np.asarray(s1[0][0])[None, :]
    p2 = np.asarray(s2[0][0])[None, :]
    return bool(c2.contains(p1)[0] or c1.contains(p2)[0])


def classify_obstacle(obstacle) -> AngleClass:
    """``Irrational`` if every corner angle is irrational, else ``Rational`` of the smallest degree."""
    comps = obstacle.components if isinstance(obstacle, PolygonalObstacle) else (obstacle,)
    best = None
    for c in comps:
        if isinstance(c, Disk):
            continue
        for a in c.interior_angles():
            cls = classify_angle(float(a))
            if cls.rational and (best is None or cls.q < best.q):
                best = cls
    return best if best is not None else AngleClass()


# ---------------------------------------------------------------- incident fields


@dataclass(frozen=True)
class PlaneWave:
    k: float
    d: tuple[float, float]

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("wavenumber must be positive")
        d = np.asarray(self.d, dtype=float)
        if abs(np.hypot(*d) - 1) > 1e-12:
            raise ValueError("direction must be a unit vector")
        object.__setattr__(self, "d", (float(d[0]), float(d[1])))

    @classmethod
    def from_angle(cls, k: float, angle: float) -> "PlaneWave":
        return cls(k, (math.cos(angle), math.sin(angle)))

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return np.exp(1j * self.k * (pts[..., 0] * self.d[0] + pts[..., 1] * self.d[1]))

    def gradient(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return (1j * self.k * self(pts))[..., None] * np.asarray(self.d)

    def to_json(self) -> dict:
        return {"kind": "plane_wave", "k": self.k, "d": list(self.d)}


@dataclass(frozen=True)
class PointSource:
    k: float
    z0: tuple[float, float]

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("wavenumber must be positive")
        object.__setattr__(self, "z0", (float(self.z0[0]), float(self.z0[1])))

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        r = np.hypot(pts[..., 0] - self.z0[0], pts[..., 1] - self.z0[1])
        return hankel1_01(self.k * r)[0]

    def gradient(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        d = pts - np.asarray(self.z0)
        r = np.hypot(d[..., 0], d[..., 1])
        return (-self.k * hankel1_01(self.k * r)[1] / r)[..., None] * d

    def to_json(self) -> dict:
        return {"kind": "point_source", "k": self.k, "z0": list(self.z0)}


def incident_from_json(data: dict):
    if data["kind"] == "plane_wave":
        if "angle" in data:
            return PlaneWave.from_angle(float(data["k"]), float(data["angle"]))
        return PlaneWave(float(data["k"]), tuple(data["d"]))
    if data["kind"] == "point_source":
        return PointSource(float(data["k"]), tuple(data["z0"]))
    raise ValueError(f"unknown incident kind {data['kind']!r}")


# ---------------------------------------------------------------- mesh


@dataclass(frozen=True)
class MeshConfig:
    """Panel layout.

    Each edge gets ``max(panels_per_edge, panels_per_wavelength * k L / 2 pi)``
    uniform panels; the panels touching a corner are split geometrically by
    ``corner_ratio`` until they are shorter than ``corner_min`` times the edge
    length.  ``grading="algebraic"`` instead places panel breakpoints at
    ``s^p / (s^p + (1 - s)^p)`` with ``p = grading_exponent``.
    """

    nodes_per_panel: int = 12
    panels_per_edge: int = 4
    panels_per_wavelength: float = 2.0
    corner_ratio: float = 0.5
    corner_min: float = 1e-6
    grading: str = "geometric"
    grading_exponent: float = 3.0
    algebraic_panels: int = 16
    near_factor: float = 0.5
    self_levels: int = 24
    sub_nodes: int = 10
    disk_panels: int = 16

    def __post_init__(self):
        if self.grading not in ("geometric", "algebraic"):
            raise ValueError("grading must be 'geometric' or 'algebraic'")
        if not 0 < self.corner_ratio < 1:
            raise ValueError("corner_ratio must lie in (0, 1)")

    def doubled(self) -> "MeshConfig":
        """Twice the panels along edges and twice the corner grading density."""
        return replace(
            self,
            panels_per_edge=2 * self.panels_per_edge,
            panels_per_wavelength=2 * self.panels_per_wavelength,
            corner_ratio=math.sqrt(self.corner_ratio),
            algebraic_panels=2 * self.algebraic_panels,
            disk_panels=2 * self.disk_panels,
        )

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _breakpoints(piece: _Piece, k: float, mesh: MeshConfig) -> np.ndarray:
    if piece.kind == "arc":
        n = max(mesh.disk_panels, math.ceil(mesh.panels_per_wavelength * k * piece.length / (2 * math.pi)))
        return np.linspace(0.0, 1.0, n + 1)
    if mesh.grading == "algebraic":
        n = max(mesh.algebraic_panels, math.ceil(mesh.panels_per_wavelength * k * piece.length / (2 * math.pi)))
        s = np.linspace(0.0, 1.0, n + 1)
        p = mesh.grading_exponent
        return s**p / (s**p + (1 - s) ** p)
    n = max(mesh.panels_per_edge, math.ceil(mesh.panels_per_wavelength * k * piece.length / (2 * math.pi)))
    base = np.linspace(0.0, 1.0, n + 1)
    h = base[1]
    levels = max(0, math.ceil(math.log(mesh.corner_min / h) / math.log(mesh.corner_ratio)))
    geo = h * mesh.corner_ratio ** np.arange(1, levels + 1)
    extra = []
    if piece.corner_start:
        extra.append(geo)
    if piece.corner_end:
        extra.append(1.0 - geo)
    return np.unique(np.concatenate([base] + extra))


@dataclass
class Discretization:
    """Panels and Nystrom nodes on the whole boundary."""

    pieces: list[_Piece]
    panel_piece: np.ndarray
    panel_t: np.ndarray  # (P, 2)
    gauss_x: np.ndarray
    gauss_w: np.ndarray
    points: np.ndarray  # (N, 2)
    normals: np.ndarray
    weights: np.ndarray
    kind: np.ndarray  # per node: 0 nodal, 1 singular, 2 impedance
    eta: np.ndarray
    panel_len: np.ndarray
    touches_corner: np.ndarray  # per panel

    @property
    def n_nodes(self) -> int:
        return len(self.points)

    @property
    def p(self) -> int:
        return len(self.gauss_x)

    def panel_nodes(self, i: int) -> slice:
        return slice(i * self.p, (i + 1) * self.p)


def discretize(obstacle: PolygonalObstacle, k: float, mesh: MeshConfig) -> Discretization:
    pieces = obstacle.pieces()
    gx, gw = np.polynomial.legendre.leggauss(mesh.nodes_per_panel)
    panel_piece, panel_t, touches = [], [], []
    for ip, pc in enumerate(pieces):
        bp = _breakpoints(pc, k, mesh)
        for a, b in zip(bp[:-1], bp[1:]):
            panel_piece.append(ip)
            panel_t.append((a, b))
            touches.append((pc.corner_start and a == 0.0) or (pc.corner_end and b == 1.0))
    panel_piece = np.asarray(panel_piece)
    panel_t = np.asarray(panel_t)
    pts, nrm, wts, kinds, etas, plen = [], [], [], [], [], []
    code = {"nodal": 0, "singular": 1, "impedance": 2}
    for ip, (a, b) in zip(panel_piece, panel_t):
        pc = pieces[ip]
        t = a + (b - a) * (gx + 1) / 2
        y = pc.point(t)
        dy = pc.deriv(t)
        speed = np.hypot(dy[:, 0], dy[:, 1])
        pts.append(y)
        nrm.append(np.stack([dy[:, 1], -dy[:, 0]], axis=1) / speed[:, None])
        w = gw * speed * (b - a) / 2
        wts.append(w)
        plen.append(w.sum())
        kinds.append(np.full(len(t), code[pc.cond.kind]))
        etas.append(np.full(len(t), pc.cond.eta, dtype=complex))
    return Discretization(
        pieces,
        panel_piece,
        panel_t,
        gx,
        gw,
        np.concatenate(pts),
        np.concatenate(nrm),
        np.concatenate(wts),
        np.concatenate(kinds),
        np.concatenate(etas),
        np.asarray(plen),
        np.asarray(touches),
    )


# ---------------------------------------------------------------- kernels


def _kernels(k: float, x: np.ndarray, y: np.ndarray, ny: np.ndarray):
    """Single-layer ``Phi(x, y)`` and double-layer ``dPhi/dnu_y`` for paired points."""
    dx = x[..., 0] - y[..., 0]
    dy = x[..., 1] - y[..., 1]
    r = np.hypot(dx, dy)
    # coincident points are always replaced by near-field weights
    zero = r == 0
    r = np.where(zero, 1.0, r)
    h0, h1 = hankel1_01(k * r)
    s = np.where(zero, 0.0, 0.25j * h0)
    d = np.where(zero, 0.0, 0.25j * k * h1 * (dx * ny[..., 0] + dy * ny[..., 1]) / r)
    return s, d


def _bary_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / diff.prod(axis=1)


def _lagrange_matrix(nodes: np.ndarray, x: np.ndarray, bary: np.ndarray | None = None) -> np.ndarray:
    """Values of the Lagrange basis on ``nodes`` at points ``x``: shape (len(x), len(nodes))."""
    w = _bary_weights(nodes) if bary is None else bary
    diff = x[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff = np.where(exact, 1.0, diff)
    tmp = w[None, :] / diff
    out = tmp / tmp.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    if rows.any():
        out[rows] = exact[rows].astype(float)
    return out


def _subdivided_rule(tau_star: float, levels: int, gx: np.ndarray, gw: np.ndarray):
    """Gauss rule on [-1, 1] with intervals shrinking dyadically toward ``tau_star``."""
    j = 0.5 ** np.arange(1, levels + 1)
    right, left = 1.0 - tau_star, tau_star + 1.0
    parts = [np.array([-1.0, 1.0, tau_star])]
    if right > 0:
        parts.append(tau_star + right * j)
    if left > 0:
        parts.append(tau_star - left * j)
    bps = np.unique(np.clip(np.concatenate(parts), -1.0, 1.0))
    a, b = bps[:-1], bps[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    nodes = (0.5 * (b - a)[:, None] * (gx[None, :] + 1) + a[:, None]).ravel()
    weights = (0.5 * (b - a)[:, None] * gw[None, :]).ravel()
    return nodes, weights


class _Assembler:
    """Single- and double-layer matrices from boundary nodes to arbitrary targets."""

    def __init__(self, disc: Discretization, k: float, mesh: MeshConfig):
        self.disc = disc
        self.k = k
        self.mesh = mesh
        self.sub_x, self.sub_w = np.polynomial.legendre.leggauss(mesh.sub_nodes)
        self.bary = _bary_weights(disc.gauss_x)
        P = len(disc.panel_piece)
        pts = disc.points.reshape(P, disc.p, 2)
        ends = np.asarray(
            [disc.pieces[ip].point(np.array([a, b])) for ip, (a, b) in zip(disc.panel_piece, disc.panel_t)]
        )
        self.centers = 0.5 * (ends[:, 0] + ends[:, 1])
        # coordinates carry rounding relative to the obstacle size, not the panel size
        self.scale = float(np.abs(disc.points).max() + disc.panel_len.sum())
        allp = np.concatenate([pts, ends], axis=1)
        self.radius = np.hypot(
            allp[..., 0] - self.centers[:, None, 0], allp[..., 1] - self.centers[:, None, 1]
        ).max(axis=1)

    def matrices(self, targets: np.ndarray, workers: int = 1):
        """Return ``(S, D)`` of shape (T, N) mapping node densities to target values."""
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        T = len(targets)
        blocks = [(i, min(i + 256, T)) for i in range(0, T, 256)]
        S = np.empty((T, self.disc.n_nodes), dtype=complex)
        D = np.empty_like(S)

        def run(block):
            i0, i1 = block
            S[i0:i1], D[i0:i1] = self._block(targets[i0:i1])

        if workers > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                list(ex.map(run, blocks))
        else:
            for blk in blocks:
                run(blk)
        return S, D

    def _block(self, x: np.ndarray):
        disc = self.disc
        S, D = _kernels(self.k, x[:, None, :], disc.points[None, :, :], disc.normals[None, :, :])
        S *= disc.weights[None, :]
        D *= disc.weights[None, :]
        dist_c = np.hypot(x[:, None, 0] - self.centers[None, :, 0], x[:, None, 1] - self.centers[None, :, 1])
        cand = dist_c < self.radius[None, :] + self.mesh.near_factor * disc.panel_len[None, :]
        for p in np.nonzero(cand.any(axis=0))[0]:
            ti = np.nonzero(cand[:, p])[0]
            res = self._near_panel(x[ti], p)
            if res is None:
                continue
            rows, s, d = res
            sl = disc.panel_nodes(p)
            S[ti[rows], sl] = s
            D[ti[rows], sl] = d
        return S, D

    def _near_rule(self, xs: np.ndarray, p: int):
        """Subdivided quadrature on panel ``p`` for the targets in ``xs`` that are close to it."""
        disc = self.disc
        pc = disc.pieces[disc.panel_piece[p]]
        a, b = disc.panel_t[p]
        plen = disc.panel_len[p]
        info = [pc.closest_parameter(x, a, b) for x in xs]
        t_star = np.array([i[0] for i in info])
        dist = np.array([i[1] for i in info])
        on_tol = 1e-13 * self.scale
        rows = np.nonzero(dist < self.mesh.near_factor * plen)[0]
        if rows.size == 0:
            return None
        taus, oms, owner = [], [], []
        for j, row in enumerate(rows):
            ts = 2 * (t_star[row] - a) / (b - a) - 1
            dd = dist[row]
            if dd <= on_tol:
                levels = self.mesh.self_levels
            else:
                levels = int(np.clip(math.ceil(math.log2(plen / dd)) + 3, 1, self.mesh.self_levels))
            tau, om = _subdivided_rule(ts, levels, self.sub_x, self.sub_w)
            taus.append(tau)
            oms.append(om)
            owner.append(np.full(len(tau), j))
        tau = np.concatenate(taus)
        om = np.concatenate(oms)
        owner = np.concatenate(owner)
        t = a + (b - a) * (tau + 1) / 2
        yq = pc.point(t)
        dyq = pc.deriv(t)
        speed = np.hypot(dyq[:, 0], dyq[:, 1])
        nq = np.stack([dyq[:, 1], -dyq[:, 0]], axis=1) / speed[:, None]
        diff = xs[rows][owner] - yq
        r = np.hypot(diff[:, 0], diff[:, 1])
        proj = diff[:, 0] * nq[:, 0] + diff[:, 1] * nq[:, 1]
        # targets on the piece: distances and normal projections without cancellation
        on = (dist[rows] <= on_tol)[owner]
        if on.any():
            dt = t[on] - t_star[rows][owner[on]]
            if pc.kind == "segment":
                r[on] = np.abs(dt) * pc.length
                proj[on] = 0.0
            else:
                half = math.pi * dt
                r[on] = 2 * pc.b[0] * np.abs(np.sin(half))
                proj[on] = -2 * pc.b[0] * np.sin(half) ** 2
        jac = om * speed * (b - a) / 2
        L = _lagrange_matrix(disc.gauss_x, tau, self.bary)
        return rows, owner, diff, r, proj, nq, jac, L, on.any()

    def _near_panel(self, xs: np.ndarray, p: int):
        """Product-integration weights of panel ``p`` for the targets that are close to it."""
        rule = self._near_rule(xs, p)
        if rule is None:
            return None
        rows, owner, _, r, proj, _, jac, L, _ = rule
        ok = r > 0
        s = np.zeros(len(r), dtype=complex)
        d = np.zeros(len(r), dtype=complex)
        h0, h1 = hankel1_01(self.k * r[ok])
        s[ok] = 0.25j * h0
        d[ok] = 0.25j * self.k * h1 * proj[ok] / r[ok]
        ws = np.zeros((len(rows), self.disc.p), dtype=complex)
        wd = np.zeros_like(ws)
        np.add.at(ws, owner, (s * jac)[:, None] * L)
        np.add.at(wd, owner, (d * jac)[:, None] * L)
        return rows, ws, wd

    def evaluate(self, targets: np.ndarray, sigma: np.ndarray, mu: np.ndarray):
        """Value and gradient of ``S sigma + D mu`` at off-boundary targets: shapes (T,) and (T, 2)."""
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        disc = self.disc
        k = self.k
        val = np.zeros(len(targets), dtype=complex)
        grad = np.zeros((len(targets), 2), dtype=complex)
        for i0 in range(0, len(targets), 256):
            x = targets[i0 : i0 + 256]
            ks, kd, gs, gd = _all_kernels(k, x[:, None, :], disc.points[None, :, :], disc.normals[None, :, :])
            w = disc.weights[None, :]
            ks, kd, gs, gd = ks * w, kd * w, gs * w[..., None], gd * w[..., None]
            dist_c = np.hypot(x[:, None, 0] - self.centers[None, :, 0], x[:, None, 1] - self.centers[None, :, 1])
            cand = dist_c < self.radius[None, :] + self.mesh.near_factor * disc.panel_len[None, :]
            for p in np.nonzero(cand.any(axis=0))[0]:
                ti = np.nonzero(cand[:, p])[0]
                rule = self._near_rule(x[ti], p)
                if rule is None:
                    continue
                rows, owner, diff, r, proj, nq, jac, L, on_piece = rule
                if on_piece:
                    raise ValueError("field points must not lie on the boundary")
                qs, qd, qgs, qgd = _all_kernels(k, diff, np.zeros_like(diff), nq)
                sl = disc.panel_nodes(p)
                for dest, kern in ((ks, qs), (kd, qd), (gs, qgs), (gd, qgd)):
                    kern = kern.reshape(len(kern), -1)
                    out = np.zeros((len(rows), disc.p, kern.shape[1]), dtype=complex)
                    for c in range(kern.shape[1]):
                        np.add.at(out[..., c], owner, (kern[:, c] * jac)[:, None] * L)
                    dest[ti[rows], sl] = out.reshape(dest[ti[rows], sl].shape)
            val[i0 : i0 + 256] = ks @ sigma + kd @ mu
            grad[i0 : i0 + 256] = np.einsum("tnc,n->tc", gs, sigma) + np.einsum("tnc,n->tc", gd, mu)
        return val, grad


def _all_kernels(k: float, x: np.ndarray, y: np.ndarray, ny: np.ndarray):
    """``Phi``, ``dPhi/dnu_y`` and their ``x``-gradients (last axis) for paired points."""
    d = x - y
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r == 0):
        raise ValueError("field points must not lie on the boundary")
    h0, h1 = hankel1_01(k * r)
    proj = (d * ny).sum(axis=-1)
    s = 0.25j * h0
    dl = 0.25j * k * h1 * proj / r
    gs = (-0.25j * k * h1 / r)[..., None] * d
    # grad of H1(kr)/r is (k H0 - 2 H1 / r) d / r^2
    gf = ((k * h0 - 2 * h1 / r) / r**2)[..., None] * d
    gd = 0.25j * k * (proj[..., None] * gf + (h1 / r)[..., None] * ny)
    return s, dl, gs, gd


# ---------------------------------------------------------------- solution


@dataclass
class FarFieldPattern:
    k: float
    incident: dict
    angles: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.angles) < 64:
            raise ValueError("a far-field pattern needs at least 64 samples")

    @property
    def directions(self) -> np.ndarray:
        return np.stack([np.cos(self.angles), np.sin(self.angles)], axis=1)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * 2 * math.pi / len(self.values)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["angle_rad", "re", "im"])
        for a, v in zip(self.angles, self.values):
            w.writerow([repr(float(a)), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, k: float, incident: dict | None = None) -> "FarFieldPattern":
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != ["angle_rad", "re", "im"]:
            raise ValueError("far-field CSV header must be angle_rad,re,im")
        data = np.array([[float(c) for c in r] for r in rows[1:] if r])
        return cls(k, incident or {}, data[:, 0], data[:, 1] + 1j * data[:, 2])


def uniform_angles(M: int) -> np.ndarray:
    return 2 * math.pi * np.arange(M) / M


FAR_CONST = lambda k: np.exp(0.25j * math.pi) / math.sqrt(8 * math.pi * k)  # noqa: E731


@dataclass
class ScatterSolution:
    obstacle: PolygonalObstacle
    incident: object
    mesh: MeshConfig
    disc: Discretization
    formulation: str  # "cfie" | "direct"
    density: np.ndarray | None  # CFIE density
    u_boundary: np.ndarray | None  # direct: total field on the boundary
    g_boundary: np.ndarray | None  # direct: its normal derivative
    condition: float
    workers: int = 1
    _assembler: _Assembler | None = field(default=None, repr=False)

    @property
    def k(self) -> float:
        return self.incident.k

    def _asm(self) -> _Assembler:
        if self._assembler is None:
            self._assembler = _Assembler(self.disc, self.k, self.mesh)
        return self._assembler

    def scattered(self, pts) -> np.ndarray:
        """Scattered field at exterior points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.obstacle.contains(pts).any():
            raise ValueError("field points must lie outside the obstacle")
        S, D = self._asm().matrices(pts, workers=self.workers)
        if self.formulation == "cfie":
            return (D - 1j * self.k * S) @ self.density
        # Green representation of the total field without its incident part
        return D @ self.u_boundary - S @ self.g_boundary

    def total(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.incident(pts) + self.scattered(pts)

    def scattered_gradient(self, pts) -> np.ndarray:
        """Gradient of the scattered field at exterior points, shape (n, 2)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.obstacle.contains(pts).any():
            raise ValueError("field points must lie outside the obstacle")
        return self._scattered_with_gradient(pts)[1]

    def _scattered_with_gradient(self, pts):
        if self.formulation == "cfie":
            return self._asm().evaluate(pts, -1j * self.k * self.density, self.density)
        return self._asm().evaluate(pts, -self.g_boundary, self.u_boundary)

    def total_gradient(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.incident.gradient(pts) + self.scattered_gradient(pts)

    def total_with_gradient(self, pts):
        """Total field and its gradient from one kernel evaluation."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.obstacle.contains(pts).any():
            raise ValueError("field points must lie outside the obstacle")
        v, g = self._scattered_with_gradient(pts)
        return self.incident(pts) + v, self.incident.gradient(pts) + g

    def far_field(self, M: int = 256) -> FarFieldPattern:
        ang = uniform_angles(M)
        return FarFieldPattern(self.k, self.incident.to_json(), ang, self.far_field_at(ang))

    def far_field_at(self, angles) -> np.ndarray:
        angles = np.asarray(angles, dtype=float)
        xh = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        disc = self.disc
        k = self.k
        phase = np.exp(-1j * k * xh @ disc.points.T)  # (M, N)
        ndot = xh @ disc.normals.T
        c = FAR_CONST(k)
        if self.formulation == "cfie":
            return c * ((-1j * k * ndot - 1j * k) * phase) @ (disc.weights * self.density)
        return c * (
            ((-1j * k * ndot) * phase) @ (disc.weights * self.u_boundary) - phase @ (disc.weights * self.g_boundary)
        )

    def boundary_residual(self, samples_per_panel: int = 3) -> float:
        """Relative residual of the boundary integral equation off the Nystrom nodes.

        Panels touching a corner are skipped.
        """
        disc = self.disc
        x = np.linspace(-0.8, 0.8, samples_per_panel)
        L = _lagrange_matrix(disc.gauss_x, x)
        pts, vals = [], []
        for p in range(len(disc.panel_piece)):
            if disc.touches_corner[p]:
                continue
            pc = disc.pieces[disc.panel_piece[p]]
            a, b = disc.panel_t[p]
            pts.append(pc.point(a + (b - a) * (x + 1) / 2))
            sl = disc.panel_nodes(p)
            if self.formulation == "cfie":
                vals.append(L @ self.density[sl])
            else:
                vals.append(np.stack([L @ self.u_boundary[sl], L @ self.g_boundary[sl]], axis=1))
        pts = np.concatenate(pts)
        S, D = self._asm().matrices(pts, workers=self.workers)
        ui = self.incident(pts)
        if self.formulation == "cfie":
            phi = np.concatenate(vals)
            res = 0.5 * phi + D @ self.density - 1j * self.k * (S @ self.density) + ui
        else:
            v = np.concatenate(vals)
            res = 0.5 * v[:, 0] - D @ self.u_boundary + S @ self.g_boundary - ui
        return float(np.abs(res).max() / np.abs(ui).max())


def solve_forward(
    obstacle: PolygonalObstacle,
    incident,
    mesh: MeshConfig | None = None,
    workers: int = 1,
) -> ScatterSolution:
    """Solve the exterior problem for ``obstacle`` and ``incident``."""
    mesh = mesh or MeshConfig()
    if isinstance(obstacle, (Polygon, Disk)):
        obstacle = PolygonalObstacle((obstacle,))
    if isinstance(incident, PointSource) and obstacle.contains(np.asarray(incident.z0)[None, :]).any():
        raise GeometryError("the point source must lie outside the obstacle")
    k = incident.k
    disc = discretize(obstacle, k, mesh)
    asm = _Assembler(disc, k, mesh)
    S, D = asm.matrices(disc.points, workers=workers)
    N = disc.n_nodes
    ui = incident(disc.points)
    if obstacle.all_dirichlet:
        A = 0.5 * np.eye(N) + D - 1j * k * S
        rhs = -ui
        formulation = "cfie"
    else:
        # unknown per node: g on sound-soft nodes, u elsewhere
        is_d = disc.kind == 0
        umap = np.where(is_d, 0.0, 1.0).astype(complex)
        gmap = np.where(is_d, 1.0, np.where(disc.kind == 2, -disc.eta, 0.0)).astype(complex)
        A = 0.5 * np.diag(umap) - D * umap[None, :] + S * gmap[None, :]
        rhs = ui
        formulation = "direct"
    lu = lu_factor(A)
    anorm = np.abs(A).sum(axis=0).max()
    rcond, info = lapack.zgecon(lu[0], anorm, norm="1")
    cond = float("inf") if rcond == 0 else 1.0 / float(rcond)
    if not np.isfinite(cond) or rcond < RCOND_MIN:
        raise SolverError("boundary integral system is numerically singular", cond)
    x = lu_solve(lu, rhs)
    if not np.all(np.isfinite(x)):
        raise SolverError("non-finite boundary density", cond)
    if formulation == "cfie":
        sol = ScatterSolution(obstacle, incident, mesh, disc, formulation, x, None, None, cond, workers, asm)
    else:
        sol = ScatterSolution(obstacle, incident, mesh, disc, formulation, None, umap * x, gmap * x, cond, workers, asm)
    return sol


def far_field(sol: ScatterSolution, M: int = 256) -> FarFieldPattern:
    return sol.far_field(M)


# ---------------------------------------------------------------- series solutions for a disk


def mie_coefficients(k: float, a: float, cond: LineCondition, nmax: int) -> np.ndarray:
    """Scattering coefficients ``c_n``, ``n = -nmax..nmax``, for a disk of radius ``a``."""
    from scipy.special import h1vp, hankel1, jv, jvp

    n = np.arange(-nmax, nmax + 1)
    ka = k * a
    if cond.kind == "nodal":
        return -jv(n, ka) / hankel1(n, ka)
    eta = cond.eta
    return -(k * jvp(n, ka) + eta * jv(n, ka)) / (k * h1vp(n, ka) + eta * hankel1(n, ka))


def mie_far_field(k: float, a: float, cond: LineCondition, incident_angle: float, angles, nmax: int | None = None):
    """Far field of a plane wave ``e^{ik x.d}`` scattered by a centred disk."""
    if nmax is None:
        nmax = int(k * a + 12 * (k * a) ** (1 / 3) + 20)
    c = mie_coefficients(k, a, cond, nmax)
    n = np.arange(-nmax, nmax + 1)
    psi = np.asarray(angles)[:, None] - incident_angle
    return math.sqrt(2 / (math.pi * k)) * np.exp(-0.25j * math.pi) * (c[None, :] * np.exp(1j * n[None, :] * psi)).sum(axis=1)


def optical_theorem_defect(sol: ScatterSolution, M: int = 512) -> float:
    """Relative defect of the optical theorem.

    For non-absorbing boundaries and a plane wave in direction ``d``:
    ``||u_inf||^2_{L2} = -2 sqrt(2 pi / k) Re(e^{i pi / 4} u_inf(d))``.
    """
    if not isinstance(sol.incident, PlaneWave):
        raise ValueError("the optical theorem needs a plane wave")
    ff = sol.far_field(M)
    k = sol.k
    fd = sol.far_field_at([math.atan2(sol.incident.d[1], sol.incident.d[0])])[0]
    lhs = ff.l2_norm() ** 2
    rhs = -2 * math.sqrt(2 * math.pi / k) * (np.exp(0.25j * math.pi) * fd).real
    return abs(lhs - rhs) / lhs


__all__ = [
    "Disk",
    "FarFieldPattern",
    "GeometryError",
    "MeshConfig",
    "PlaneWave",
    "PointSource",
    "Polygon",
    "PolygonalObstacle",
    "ScatterSolution",
    "SolverError",
    "classify_obstacle",
    "discretize",
    "far_field",
    "incident_from_json",
    "make_polygon",
    "mie_coefficients",
    "mie_far_field",
    "optical_theorem_defect",
    "solve_forward",
    "uniform_angles",
]
