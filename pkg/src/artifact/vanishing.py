"""Vanishing orders at the intersection of two nodal / singular / impedance lines.

Geometry: the first line runs along the positive x1-axis, the second along the
ray at angle ``theta0 = alpha * pi``.  Normals point out of the sector between
them, so ``du/dnu = -(1/r) du/dtheta`` on the first line and ``+(1/r) du/dtheta``
on the second.

In the expansion basis each line condition is a linear relation on
``A_n = a_n e^{in phi} - b_n e^{-in phi}`` and ``B_n = a_n e^{in phi} + b_n e^{-in phi}``:

* nodal:     ``B_n = 0``                       (n >= 0)
* singular:  ``A_n = 0``                       (n >= 1)
* impedance: ``A_n = (2 i eta / (s kappa)) B_{n-1} - A_{n-2}``   (n >= 1; last term for n >= 3)

The impedance relation follows from ``n J_n(t) / t = (J_{n-1}(t) + J_{n+1}(t)) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .expansion import (
    AtLeast,
    EstimationFailed,
    Expansion,
    Finite,
    Infinite,
    N_TRUNC,
    VanishingOrder,
    estimate_vanishing_order_numeric,
    orders_agree,
)
from .lines import IRRATIONAL, AngleClass, LineCondition, classify_angle, rational

ZERO_REL = 1e-10


@dataclass(frozen=True)
class CornerConfig:
    """Two line conditions meeting at angle ``alpha * pi``.

    ``cond_minus`` lies on the x1-axis, ``cond_plus`` on the ray at ``alpha * pi``.
    Angles in (1, 2) are folded to ``2 - alpha`` (the complementary sector).
    """

    cond_minus: LineCondition
    cond_plus: LineCondition
    alpha: float
    lam: float
    u_at_origin: complex = 0j
    angle_class: AngleClass | None = None

    def __post_init__(self):
        alpha = self.alpha
        if isinstance(alpha, Fraction):
            if not 0 < alpha < 2:
                raise ValueError("alpha must lie in (0, 2)")
            cls = rational(alpha.numerator, alpha.denominator)
            alpha = float(alpha)
        else:
            alpha = float(alpha)
            if not 0 < alpha < 2:
                raise ValueError("alpha must lie in (0, 2)")
            cls = self.angle_class if self.angle_class is not None else classify_angle(alpha)
        if alpha > 1:
            alpha = 2.0 - alpha
            if cls.rational:
                cls = rational(2 * cls.q - cls.p, cls.q)
        if not self.lam > 0:
            raise ValueError("eigenvalue must be positive")
        u0 = complex(self.u_at_origin)
        if u0 != 0 and "nodal" in (self.cond_minus.kind, self.cond_plus.kind):
            raise ValueError("a nodal line through the corner forces u(0) = 0")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "angle_class", cls)
        object.__setattr__(self, "u_at_origin", u0)

    @property
    def theta0(self) -> float:
        if self.angle_class.rational:
            return math.pi * self.angle_class.p / self.angle_class.q
        return math.pi * self.alpha

    @property
    def kappa(self) -> float:
        return math.sqrt(self.lam)

    @property
    def pair(self) -> tuple[str, str]:
        return self.cond_minus.kind, self.cond_plus.kind


@dataclass(frozen=True)
class Verdict:
    order: VanishingOrder
    rationale: str

    def to_json(self) -> dict:
        return {"order": self.order.to_json(), "order_str": str(self.order), "rationale": self.rationale}


def _mixed_index(cls: AngleClass) -> int | None:
    # smallest n with n * alpha = (2m + 1) / 2
    if cls.q % 2 == 0:
        return cls.q // 2
    return None


def predict(cfg: CornerConfig) -> Verdict:
    """Closed-form prediction of the vanishing order at the corner."""
    kinds = set(cfg.pair)
    cls = cfg.angle_class
    u0 = cfg.u_at_origin
    mixed = "nodal" in kinds and len(kinds) == 2
    if not cls.rational:
        if kinds == {"nodal"}:
            return Verdict(Infinite(), "Thm 2.1: two nodal lines at an irrational angle")
        if kinds == {"singular"}:
            if u0 != 0:
                return Verdict(Finite(0), "Thm 2.8: singular lines at an irrational angle, u(0) != 0")
            return Verdict(Infinite(), "Thm 2.8: singular lines at an irrational angle, u(0) = 0")
        if mixed:
            return Verdict(Infinite(), "Thms 4.2/4.4: nodal and (generalized) singular line at an irrational angle")
        if u0 != 0:
            return Verdict(Finite(0), "Thms 4.1/4.3: generalized singular lines at an irrational angle, u(0) != 0")
        return Verdict(Infinite(), "Thms 4.1/4.3: generalized singular lines at an irrational angle, u(0) = 0")

    q = cls.q
    if mixed:
        if q == 2:
            return Verdict(AtLeast(1), "Remark 3.8 partial: alpha = 1/2, nodal against (generalized) singular")
        n_star = _mixed_index(cls)
        name = "Thm 3.2" if "singular" in kinds else "Thm 3.4"
        if n_star is None:
            return Verdict(Infinite(), f"{name}: no n with alpha = (2m+1)/(2n)")
        return Verdict(Finite(n_star), f"{name}: first n with alpha = (2m+1)/(2n)")
    if kinds == {"nodal"}:
        return Verdict(Finite(q), "Thm 3.1: two nodal lines, order equals the rational degree")
    if u0 != 0:
        return Verdict(AtLeast(0), "no applicable rule")
    if q == 2:
        return Verdict(AtLeast(2), "Remark 3.8 partial: alpha = 1/2 gives a lower bound only")
    if kinds == {"singular"}:
        name = "Thm 3.6"
    elif kinds == {"impedance"}:
        name = "Thm 3.3"
    else:
        name = "Thm 3.5"
    return Verdict(Finite(q), f"{name}: order equals the rational degree (u(0) = 0)")


@dataclass
class RecursionResult:
    """Output of :func:`run_recursion`.

    ``first_singular`` is the first degree whose 2x2 system is singular and
    ``first_nonzero`` the lowest degree with a nonzero entry in ``table``.
    ``forced_zero_at`` is set when a singular system is inconsistent for every
    choice of the free coefficients, so ``u(0)`` itself must vanish.
    ``obstructions`` lists singular degrees that pinned an earlier free
    coefficient instead.  ``valid_through`` is the last degree of ``table``.
    """

    table: np.ndarray
    first_singular: int | None
    first_nonzero: int | None
    forced_zero_at: int | None = None
    free_indices: list[int] = field(default_factory=list)
    obstructions: list[int] = field(default_factory=list)
    determinants: list[complex] = field(default_factory=list)

    @property
    def valid_through(self) -> int:
        return self.table.shape[0] - 1

    @property
    def order(self) -> VanishingOrder:
        if self.forced_zero_at is not None:
            return AtLeast(0)
        if self.first_nonzero is None:
            return AtLeast(self.table.shape[0])
        return Finite(self.first_nonzero)

    def expansion(self, lam: float) -> Expansion:
        return Expansion(lam, self.table)


def _row(kind: str, n: int, phi: float) -> np.ndarray:
    ep, em = np.exp(1j * n * phi), np.exp(-1j * n * phi)
    if kind == "nodal":
        return np.array([ep, em])
    return np.array([ep, -em])


def _A(c: np.ndarray, n: int, phi: float):
    return c[n, 0] * np.exp(1j * n * phi) - c[n, 1] * np.exp(-1j * n * phi)


def _B(c: np.ndarray, n: int, phi: float):
    return c[n, 0] * np.exp(1j * n * phi) + c[n, 1] * np.exp(-1j * n * phi)


def _rhs(cond: LineCondition, c: np.ndarray, n: int, phi: float, s: int, kappa: float):
    # works on value tables (n, 2) and on parametrised tables (n, 2, P)
    if cond.kind != "impedance":
        return 0 * c[0, 0]
    val = 2j * cond.eta / (s * kappa) * _B(c, n - 1, phi)
    if n >= 3:
        val = val - _A(c, n - 2, phi)
    return val


def run_recursion(
    cfg: CornerConfig,
    n_max: int = N_TRUNC,
    free_value: complex = 1.0,
    on_obstruction: str = "eliminate",
) -> RecursionResult:
    """Solve the per-degree boundary-condition systems forward from ``u(0)``.

    Coefficients are carried as affine functions of ``u(0)`` and of one free
    parameter per singular degree (the null direction of that system).  A
    later singular system whose right-hand side is inconsistent is an
    obstruction.  With ``on_obstruction="eliminate"`` it fixes the most
    recent free parameter it involves; if it involves none, ``u(0)`` is forced
    to vanish and the table stops there.  With ``"truncate"`` the table stops
    at the first obstruction, so every free parameter keeps ``free_value``.
    Surviving free parameters are set to ``free_value``.
    """
    if n_max < 1:
        raise ValueError("n_max must be positive")
    if on_obstruction not in ("eliminate", "truncate"):
        raise ValueError("on_obstruction must be 'eliminate' or 'truncate'")
    kappa = cfg.kappa
    lines = ((cfg.cond_minus, 0.0, -1), (cfg.cond_plus, cfg.theta0, 1))
    # column 0 multiplies u(0); column k >= 1 multiplies the k-th free parameter
    c = np.zeros((n_max + 1, 2, 1), dtype=complex)
    c[0, 0, 0] = 1.0
    u0 = cfg.u_at_origin
    owners: list[int] = []
    first_singular = None
    forced = None
    obstructions: list[int] = []
    dets: list[complex] = []
    last = n_max

    def _scale() -> float:
        return max(float(np.abs(c).max()), 1e-300)

    for n in range(1, n_max + 1):
        M = np.array([_row(cond.kind, n, phi) for cond, phi, _ in lines])
        rhs = np.array([_rhs(cond, c, n, phi, s, kappa) for cond, phi, s in lines])
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        dets.append(det)
        if abs(det) > 1e-9:
            c[n] = np.linalg.solve(M, rhs)
            continue
        if first_singular is None:
            first_singular = n
        row = M[0]
        ratio = (M[1] @ row.conj()) / (row @ row.conj())
        resid = rhs[1] - ratio * rhs[0]
        tol = ZERO_REL * _scale()
        if u0 == 0:
            resid[0] = 0.0
        live = np.nonzero(np.abs(resid) > tol)[0]
        if live.size:
            params = live[live > 0]
            if on_obstruction == "truncate" or not params.size:
                if not params.size:
                    forced = n
                obstructions.append(n)
                last = n - 1
                break
            k = int(params[-1])
            # resid(u0, t) = 0 fixes t_k; substitute it everywhere
            sub = -resid / resid[k]
            sub[k] = 0.0
            c = c + c[:, :, k : k + 1] * sub[None, None, :]
            c = np.delete(c, k, axis=2)
            rhs = np.delete(rhs + rhs[:, k : k + 1] * sub[None, :], k, axis=1)
            del owners[k - 1]
            obstructions.append(n)
        part = np.linalg.lstsq(M, rhs, rcond=None)[0]
        null = np.array([-row[1], row[0]])
        null /= np.linalg.norm(null)
        c = np.concatenate([c, np.zeros(c.shape[:2] + (1,), dtype=complex)], axis=2)
        c[n, :, :-1] = part
        c[n, :, -1] = null
        owners.append(n)
    c = c[: last + 1]
    weights = np.array([u0] + [free_value] * (c.shape[2] - 1), dtype=complex)
    table = c @ weights
    # snap roundoff relative to the running scale of lower degrees
    running = abs(u0)
    for n in range(table.shape[0]):
        if n in owners:
            running = max(running, abs(free_value))
        running = max(running, float(np.abs(table[n]).max()))
        table[n] = np.where(np.abs(table[n]) <= ZERO_REL * running, 0.0, table[n])
    nz = np.nonzero(np.abs(table).max(axis=1) > 0)[0]
    first_nonzero = int(nz[0]) if nz.size else None
    return RecursionResult(table, first_singular, first_nonzero, forced, owners, obstructions, dets)


def recursion_residual(cfg: CornerConfig, table: np.ndarray) -> float:
    """Largest violation of the per-degree boundary relations by ``table``."""
    kappa = cfg.kappa
    th = cfg.theta0
    worst = 0.0
    for cond, phi, s in ((cfg.cond_minus, 0.0, -1), (cfg.cond_plus, th, 1)):
        for n in range(table.shape[0]):
            if cond.kind == "nodal":
                worst = max(worst, abs(_B(table, n, phi)))
            elif n >= 1:
                worst = max(worst, abs(_A(table, n, phi) - _rhs(cond, table, n, phi, s, kappa)))
    return worst


def boundary_residual(cfg: CornerConfig, e: Expansion, radii: np.ndarray) -> float:
    """Max boundary-condition residual of ``e`` sampled on both lines."""
    out = 0.0
    for cond, phi, s in ((cfg.cond_minus, 0.0, -1), (cfg.cond_plus, cfg.theta0, 1)):
        if cond.kind == "nodal":
            res = e.eval(radii, phi)
        else:
            res = e.ray_normal_derivative(phi, radii, s)
            if cond.kind == "impedance":
                res = res + cond.eta * e.eval(radii, phi)
        out = max(out, float(np.abs(res).max()))
    return out


def construct_eigenfunction(
    cfg: CornerConfig, n_max: int = N_TRUNC, on_obstruction: str = "truncate"
) -> tuple[Expansion, RecursionResult]:
    """Local eigenfunction jet realising ``cfg`` with every free coefficient set to one.

    By default the jet stops before the first obstruction, so the free
    coefficient at the first singular degree stays at one and the boundary
    relations hold exactly through ``res.valid_through``.
    """
    res = run_recursion(cfg, n_max, on_obstruction=on_obstruction)
    if res.forced_zero_at is not None:
        raise ValueError(f"no eigenfunction with this u(0): forced zero at degree {res.forced_zero_at}")
    return res.expansion(cfg.lam), res


def low_order_coefficients(
    u0: complex, lam: float, theta0: float, C1: complex, C2: complex, literal: bool = False
) -> list:
    """Closed-form ``(a1, b1, a2, b2, a3, b3, a4, b4)`` for two impedance lines.

    ``C1`` acts on the line along the x1-axis and ``C2`` on the ray at ``theta0``.
    Levels whose denominator ``sin(n theta0)`` vanishes are returned as ``None``
    (both entries); lower levels are still filled.

    Degrees 3 and 4 solve ``i k (a e^{in t} - b e^{-in t}) = -B1``,
    ``-i k (a - b) = -B2``, which gives the prefactor ``1 / (2 k sin(n t))``.
    ``literal=True`` uses the prefactors ``2`` and ``6`` instead; those
    coefficients do not satisfy the recursion and exist for comparison only.
    """
    k = math.sqrt(lam)
    E = lambda m: np.exp(1j * m * theta0)  # noqa: E731
    out: list = [None] * 8
    tiny = 1e-12
    s1, s2, s3, s4 = (math.sin(m * theta0) for m in (1, 2, 3, 4))
    if abs(s1) < tiny:
        return out
    a1 = (C1 * E(-1) + C2) * u0 / (k * s1)
    b1 = (C1 * E(1) + C2) * u0 / (k * s1)
    out[0:2] = [a1, b1]
    if abs(s2) < tiny:
        return out
    pre = 2 * u0 / (lam * s2 * s1)
    ct = math.cos(theta0)
    a2 = pre * (C1 * C2 + C1 * C2 * E(-2) + C2**2 * ct + C1**2 * ct * E(-2))
    b2 = pre * (C1 * C2 + C1 * C2 * E(2) + C2**2 * ct + C1**2 * ct * E(2))
    out[2:4] = [a2, b2]
    if abs(s3) < tiny:
        return out
    B1 = 2 * C2 * (a2 * E(2) + b2 * E(-2)) - 4 * C2 * u0 - 1j * (a1 * E(1) - b1 * E(-1)) * k
    B2 = 2 * C1 * (a2 + b2) - 4 * C1 * u0 + 1j * (a1 - b1) * k
    f3 = 2.0 if literal else 0.5
    a3 = f3 / (k * s3) * (B1 + B2 * E(-3))
    b3 = f3 / (k * s3) * (B1 + B2 * E(3))
    out[4:6] = [a3, b3]
    if abs(s4) < tiny:
        return out
    D1 = 2 * C2 * (a3 * E(3) + b3 * E(-3)) - 2j * k * (a2 * E(2) - b2 * E(-2)) - 6 * C2 * (a1 * E(1) + b1 * E(-1))
    D2 = 2 * C1 * (a3 + b3) + 2j * k * (a2 - b2) - 6 * C1 * (a1 + b1)
    f4 = 6.0 if literal else 0.5
    a4 = f4 / (k * s4) * (D1 + D2 * E(-4))
    b4 = f4 / (k * s4) * (D1 + D2 * E(4))
    out[6:8] = [a4, b4]
    return out


@dataclass(frozen=True)
class ForcedZero:
    forced: bool
    certificate: str

    def __bool__(self) -> bool:
        return self.forced


def u0_forced_zero(alpha: AngleClass, C1: complex, C2: complex, lam: float) -> ForcedZero:
    """Whether two impedance lines at the given rational angle force ``u(0) = 0``."""
    if not alpha.rational:
        return ForcedZero(False, "irrational angle: no forcing statement")
    a = Fraction(alpha.p, alpha.q)
    if a == 1:
        if C1 != C2:
            return ForcedZero(True, "alpha = 1 and C1 != C2")
        return ForcedZero(False, "alpha = 1 with C1 = C2")
    if a == Fraction(1, 3):
        bracket = 1 + 4 / (3 * lam) * (C1**2 + C1 * C2 + C2**2)
        if C1 != C2 and abs(bracket) > 1e-12:
            return ForcedZero(True, f"alpha = 1/3, C1 != C2, bracket = {complex(bracket):.6g}")
        return ForcedZero(False, "alpha = 1/3 degenerate: C1 = C2 or bracket = 0")
    if a in (Fraction(1, 2), Fraction(1, 4)):
        return ForcedZero(False, "consistency identity only")
    return ForcedZero(False, "no explicit forcing statement for this angle")


__all__ = [
    "CaseResult",
    "CornerConfig",
    "case_table",
    "check_case",
    "default_pairs",
    "recursed_order",
    "ForcedZero",
    "IRRATIONAL",
    "RecursionResult",
    "Verdict",
    "boundary_residual",
    "construct_eigenfunction",
    "low_order_coefficients",
    "predict",
    "recursion_residual",
    "run_recursion",
    "u0_forced_zero",
]


# ---------------------------------------------------------------- agreement table

ESTIMATE_RADII = tuple(np.geomspace(0.5, 0.5 * 10**-1.5, 6))
IRRATIONAL_SPOTS = tuple(math.sqrt(p) % 1 for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29))


@dataclass
class CaseResult:
    cfg: CornerConfig
    predicted: Verdict
    recursed: VanishingOrder
    estimated: VanishingOrder | None
    message: str = ""

    @property
    def agree(self) -> bool:
        if self.estimated is None:
            return False
        p = self.predicted.order
        return orders_agree(p, self.recursed) and orders_agree(p, self.estimated)

    def row(self) -> dict:
        c = self.cfg
        return {
            "cond_minus": str(c.cond_minus),
            "cond_plus": str(c.cond_plus),
            "alpha": f"{c.angle_class.p}/{c.angle_class.q}" if c.angle_class.rational else f"{c.alpha:.15g}",
            "lam": c.lam,
            "u0": f"{c.u_at_origin:g}",
            "predicted": str(self.predicted.order),
            "recursed": str(self.recursed),
            "estimated": str(self.estimated) if self.estimated is not None else "failed",
            "agree": self.agree,
            "note": self.message,
        }


def recursed_order(cfg: CornerConfig, res: RecursionResult, n_max: int) -> VanishingOrder:
    if res.forced_zero_at is not None:
        return AtLeast(0)
    if cfg.u_at_origin != 0:
        return res.order
    if res.first_singular is None:
        return AtLeast(n_max + 1)
    return Finite(res.first_singular)


def check_case(cfg: CornerConfig, n_max: int = N_TRUNC, radii=ESTIMATE_RADII) -> CaseResult:
    """Compare the prediction, the recursion and a numeric estimate on a constructed eigenfunction."""
    verdict = predict(cfg)
    res = run_recursion(cfg, n_max)
    rec = recursed_order(cfg, res, n_max)
    try:
        e, _ = construct_eigenfunction(cfg, n_max)
        est = estimate_vanishing_order_numeric(e, (0.0, 0.0), radii)
        msg = ""
    except (ValueError, EstimationFailed) as exc:
        est, msg = None, str(exc)
    return CaseResult(cfg, verdict, rec, est, msg)


def default_pairs() -> dict[str, tuple[LineCondition, LineCondition]]:
    n, s = LineCondition("nodal"), LineCondition("singular")
    i1, i2 = LineCondition("impedance", 1.3), LineCondition("impedance", 0.7 + 0.2j)
    return {
        "N-N": (n, n),
        "S-S": (s, s),
        "I-I": (i1, i2),
        "I-I equal": (i1, i1),
        "N-S": (n, s),
        "S-N": (s, n),
        "N-I": (n, i1),
        "I-N": (i1, n),
        "S-I": (s, i1),
        "I-S": (i2, s),
    }


def case_table(lam: float = 1.0, q_max: int = 8, irrational=IRRATIONAL_SPOTS, pairs=None) -> list[CornerConfig]:
    """Every pair at every coprime ``p/q`` in (0, 1) with ``q <= q_max``, plus irrational spot values.

    At irrational angles the non-nodal pairs are also run with ``u(0) = 1``.
    """
    pairs = pairs or default_pairs()
    out = []
    for cm, cp in pairs.values():
        for q in range(2, q_max + 1):
            for p in range(1, q):
                if math.gcd(p, q) == 1:
                    out.append(CornerConfig(cm, cp, Fraction(p, q), lam))
        for a in irrational:
            out.append(CornerConfig(cm, cp, a, lam, angle_class=IRRATIONAL))
            if "nodal" not in (cm.kind, cp.kind):
                out.append(CornerConfig(cm, cp, a, lam, 1.0, angle_class=IRRATIONAL))
    return out
