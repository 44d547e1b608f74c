"""The harmonic test function ``u0(x) = exp(-sqrt(r) e^{i theta/2})`` on a sector.

Used under the scaling ``x -> s x``: it decays like ``exp(-sqrt(s r) cos(theta/2))``
inside any sector ``0 <= theta_m < theta < theta_M < pi``.  This module gives
its exact sector and ray integrals, and checks the large-``s`` expansions of the
boundary integrals that pair it with a local eigenfunction near a corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expansion import Expansion

S_GRID = (500.0, 1000.0, 2000.0, 4000.0, 8000.0)
SLOPE_TOL = 0.15
GAMMA = 1.0
N_PANELS = 20
PANEL_RATIO = 0.5
N_GAUSS = 20
N_ANGULAR = 64


@dataclass(frozen=True)
class SectorW:
    """Open sector ``theta_m < arg x < theta_M``."""

    theta_m: float
    theta_M: float

    def __post_init__(self):
        if not 0 <= self.theta_m < self.theta_M < math.pi:
            raise ValueError("need 0 <= theta_m < theta_M < pi")

    @property
    def delta(self) -> float:
        # min of cos(theta/2) over the closed sector
        return math.cos(self.theta_M / 2)


@dataclass(frozen=True)
class CgoParams:
    s: float
    h: float = 1.0

    def __post_init__(self):
        if not (self.s > 0 and self.h > 0):
            raise ValueError("s and h must be positive")


def zeta(theta):
    return -np.exp(0.5j * np.asarray(theta))


def zeta_prime(theta):
    return -1j * np.exp(0.5j * np.asarray(theta))


def beta(theta, phi):
    """``(1/2) sin(phi - theta) zeta'(theta)`` for a line at ``theta`` with normal angle ``phi``."""
    return 0.5 * np.sin(np.asarray(phi) - np.asarray(theta)) * zeta_prime(theta)


def cgo_eval(s: float, r, theta):
    """``u0(s x)`` at polar ``(r, theta)``."""
    r = np.asarray(r, dtype=float)
    return np.exp(np.sqrt(s * r) * zeta(theta))


def cgo_normal_derivative(s: float, r, theta, phi):
    """Derivative of ``u0(s x)`` along the unit vector at angle ``phi``, on the ray ``theta``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("the normal derivative is singular at r = 0")
    return beta(theta, phi) * np.exp(np.sqrt(s * r) * zeta(theta)) * np.sqrt(s / r)


def cgo_gradient(s: float, x, y):
    """Cartesian gradient of ``u0(s x)``; valid off the negative real axis."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    th = np.arctan2(y, x)
    if np.any(r <= 0):
        raise ValueError("the gradient is singular at r = 0")
    u = cgo_eval(s, r, th)
    z = zeta(th)
    dr = 0.5 * z * np.sqrt(s / r) * u
    dth = 0.5 * zeta_prime(th) * np.sqrt(s * r) * u
    return np.cos(th) * dr - np.sin(th) * dth / r, np.sin(th) * dr + np.cos(th) * dth / r


def sector_integral_exact(W: SectorW, s: float) -> complex:
    """``int_W u0(s x) dx``."""
    if not s > 0:
        raise ValueError("s must be positive")
    return 6j * (np.exp(-2j * W.theta_M) - np.exp(-2j * W.theta_m)) / s**2


def sector_tail_bound(W: SectorW, s: float, h: float) -> float:
    """Upper bound for ``int_{W outside B_h} |u0(s x)| dx``.

    Uses ``|u0(s x)| <= exp(-delta sqrt(s r))`` and integrates exactly:
    ``2 (theta_M - theta_m) Gamma(4, x) / (s^2 delta^4)`` with ``x = delta sqrt(s h)``.
    """
    d = W.delta
    x = d * math.sqrt(h * s)
    gamma4 = math.exp(-x) * (x**3 + 3 * x**2 + 6 * x + 6)
    return 2 * (W.theta_M - W.theta_m) * gamma4 / (s**2 * d**4)


def sector_radius_for(W: SectorW, s: float, rel: float = 1e-14) -> float:
    """Smallest ``h`` in a doubling sequence whose tail bound is below ``rel`` times the full integral."""
    target = rel * abs(sector_integral_exact(W, s))
    h = 1.0
    while sector_tail_bound(W, s, h) > target:
        h *= 2
    return h


def line_integral_exact(ell: int, s: float, h: float, zeta_value: complex, with_sqrt_weight: bool = False) -> complex:
    """``int_0^h r^ell e^{sqrt(s r) zeta} dr`` (times ``sqrt(s/r)`` if weighted), in closed form."""
    z = complex(zeta_value)
    if z.real >= 0:
        raise ValueError("need Re(zeta) < 0")
    if ell < 0 or ell != int(ell):
        raise ValueError("ell must be a nonnegative integer")
    ell = int(ell)
    sh = s * h
    tail = np.exp(math.sqrt(sh) * z)
    if with_sqrt_weight:
        m = 2 * ell
        lead = -math.factorial(m) / z ** (m + 1)
        pref = 2 / s**ell
    else:
        m = 2 * ell + 1
        lead = math.factorial(m) / z ** (m + 1)
        pref = 2 / s ** (ell + 1)
    acc = 0j
    for j in range(m + 1):
        acc += (-1) ** j * math.factorial(m) / (math.factorial(m - j) * z ** (j + 1)) * sh ** ((m - j) / 2)
    return pref * (lead + tail * acc)


def line_integral_leading(ell: int, s: float, zeta_value: complex, with_sqrt_weight: bool = False) -> complex:
    """Large-``s`` leading term of :func:`line_integral_exact`."""
    z = complex(zeta_value)
    if with_sqrt_weight:
        return -2 / s**ell * math.factorial(2 * ell) / z ** (2 * ell + 1)
    return 2 / s ** (ell + 1) * math.factorial(2 * ell + 1) / z ** (2 * ell + 2)


def _graded_nodes(
    h: float,
    n_panels: int = N_PANELS,
    ratio: float = PANEL_RATIO,
    m: int = N_GAUSS,
    max_width: float | None = None,
):
    """Gauss nodes and weights on ``[0, h]`` with panels shrinking geometrically toward 0.

    Panels wider than ``max_width`` are split evenly (for oscillatory integrands).
    """
    x, w = np.polynomial.legendre.leggauss(m)
    edges = np.concatenate([[0.0], h * ratio ** np.arange(n_panels - 1, -1, -1)])
    if max_width is not None:
        parts = [edges[:1]]
        for a, b in zip(edges[:-1], edges[1:]):
            k = max(1, math.ceil((b - a) / max_width))
            parts.append(np.linspace(a, b, k + 1)[1:])
        edges = np.concatenate(parts)
    a, b = edges[:-1], edges[1:]
    nodes = (0.5 * (b - a)[:, None] * (x[None, :] + 1) + a[:, None]).ravel()
    weights = (0.5 * (b - a)[:, None] * w[None, :]).ravel()
    return nodes, weights


def ray_quadrature(h: float, s: float | None = None, **kw):
    """Nodes ``r`` and weights for ``int_0^h f(r) dr`` via ``r = t^2``.

    The substitution removes the ``sqrt(r)`` phase and the ``r^{-1/2}`` weight.
    Given ``s``, panels in ``t`` are capped at ``3/sqrt(s)`` so the phase
    ``sqrt(s) t`` advances at most 3 radians per panel.
    """
    if s is not None:
        kw.setdefault("max_width", 3.0 / math.sqrt(s))
    t, w = _graded_nodes(math.sqrt(h), **kw)
    return t * t, 2 * t * w


def line_integral_quad(ell: int, s: float, h: float, zeta_value: complex, with_sqrt_weight: bool = False) -> complex:
    r, w = ray_quadrature(h, s)
    f = r**ell * np.exp(np.sqrt(s * r) * zeta_value)
    if with_sqrt_weight:
        f = f * np.sqrt(s / r)
    return complex(np.sum(w * f))


def sector_quadrature(W: SectorW, h: float, n_angular: int = N_ANGULAR, s: float | None = None, **kw):
    """Polar product rule on ``W`` intersected with ``B_h``: returns ``(r, theta, weight)`` including the Jacobian."""
    r, wr = ray_quadrature(h, s, **kw)
    x, wa = np.polynomial.legendre.leggauss(n_angular)
    th = 0.5 * (W.theta_M - W.theta_m) * (x + 1) + W.theta_m
    wth = 0.5 * (W.theta_M - W.theta_m) * wa
    R, T = np.meshgrid(r, th, indexing="ij")
    return R, T, (wr * r)[:, None] * wth[None, :]


def sector_integral_quad(W: SectorW, s: float, h: float) -> complex:
    R, T, w = sector_quadrature(W, h, s=s)
    return complex(np.sum(w * cgo_eval(s, R, T)))


def c1(d: dict, theta: float) -> complex:
    return d["ux"] * math.cos(theta) + d["uy"] * math.sin(theta)


def c2(d: dict, theta: float) -> complex:
    return 0.5 * (d["uxx"] * math.cos(theta) ** 2 + d["uxy"] * math.sin(2 * theta) + d["uyy"] * math.sin(theta) ** 2)


def singular_line_identity(d: dict, theta: float, phi: float) -> complex:
    """Second-derivative combination that vanishes when the ray ``theta`` is a singular line."""
    return (
        math.cos(phi) * math.cos(theta) * d["uxx"]
        + math.sin(phi) * math.sin(theta) * d["uyy"]
        + math.sin(phi + theta) * d["uxy"]
    )


@dataclass
class CornerIntegrals:
    """Boundary and area integrals of the Green identity at one scale ``s``."""

    s: float
    I11_plus: complex
    I11_minus: complex
    I12_plus: complex
    I12_minus: complex
    I2: complex
    I3: complex
    area: complex  # int_{S_h} u0(s x) u(x) dx

    @property
    def I1_plus(self) -> complex:
        return -(self.I11_plus + self.I12_plus)

    @property
    def I1_minus(self) -> complex:
        return -(self.I11_minus + self.I12_minus)


def corner_integrals(u: Expansion, W: SectorW, s: float, h: float = 1.0) -> CornerIntegrals:
    """All integrals by quadrature; ``W`` must start at ``theta_m = 0`` (corner at the expansion centre)."""
    if W.theta_m != 0:
        raise ValueError("the corner sector must start at theta_m = 0")
    th0 = W.theta_M
    r, w = ray_quadrature(h, s)
    out = {}
    # on each ray: exterior normal angle and the sign of du/dnu = sign (1/r) du/dtheta
    for key, th, phi, sign in (("plus", th0, th0 + math.pi / 2, 1), ("minus", 0.0, -math.pi / 2, -1)):
        uval = u.eval(r, th)
        dnu = u.ray_normal_derivative(th, r, sign)
        out["I11_" + key] = complex(np.sum(w * uval * cgo_normal_derivative(s, r, th, phi)))
        out["I12_" + key] = complex(-np.sum(w * cgo_eval(s, r, th) * dnu))
    x, wa = np.polynomial.legendre.leggauss(N_ANGULAR)
    th = 0.5 * th0 * (x + 1)
    wth = 0.5 * th0 * wa
    dr, _ = u.polar_derivatives(np.full_like(th, h), th)
    u0 = cgo_eval(s, h, th)
    du0 = 0.5 * zeta(th) * math.sqrt(s / h) * u0
    out["I2"] = complex(h * np.sum(wth * (u0 * dr - u.eval(h, th) * du0)))
    R, T, wa2 = sector_quadrature(W, h, s=s)
    uu = u.eval(R, T)
    u0s = cgo_eval(s, R, T)
    out["area"] = complex(np.sum(wa2 * u0s * uu))
    out["I3"] = complex(np.sum(wa2 * u0s * (uu - u.coeffs[0, 0])))
    return CornerIntegrals(s=s, **out)


@dataclass
class SlopeCheck:
    name: str
    slope: float | None
    expected: float
    passed: bool
    note: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "slope": self.slope, "expected": self.expected, "pass": self.passed, "note": self.note}


@dataclass
class CornerReport:
    s_grid: list[float]
    gamma: float
    rows: list[dict] = field(default_factory=list)
    checks: list[SlopeCheck] = field(default_factory=list)
    green_closure: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "s_grid": self.s_grid,
            "gamma": self.gamma,
            "rows": self.rows,
            "checks": [c.to_json() for c in self.checks],
            "green_closure": self.green_closure,
            "pass": self.passed,
        }


def _fit_slope(s: np.ndarray, vals: np.ndarray) -> tuple[float | None, str]:
    mag = np.abs(vals)
    if np.any(mag == 0) or not np.all(np.isfinite(mag)):
        return None, "zero or non-finite remainder"
    if not np.all(np.diff(mag) < 0):
        return None, "remainder not monotone: inconclusive"
    return float(np.polyfit(np.log(s), np.log(mag), 1)[0]), ""


def i11_leading(d: dict, theta: float, phi: float, s: float) -> complex:
    """Three-term large-``s`` expansion of the ray integral of ``u dnu u0(s x)``."""
    b = complex(beta(theta, phi))
    z = complex(zeta(theta))
    return -2 * b / z * d["u"] - 4 * b * c1(d, theta) / (s * z**3) - 48 * b * c2(d, theta) / (s**2 * z**5)


def i12_leading(d: dict, theta: float, eta: complex, s: float) -> complex:
    """Two-term large-``s`` expansion of ``-int u0(s x) du/dnu`` for a constant impedance ``eta``."""
    z = complex(zeta(theta))
    return 2 * eta * d["u"] / (s * z**2) + 12 * eta * c1(d, theta) / (s**2 * z**4)


def verify_corner_expansions(
    u: Expansion,
    W: SectorW,
    etas: tuple[complex, complex],
    s_grid=S_GRID,
    h: float = 1.0,
    slope_tol: float = SLOPE_TOL,
    i2_max_slope: float = -6.0,
) -> CornerReport:
    """Fit log-log slopes of the expansion remainders over ``s_grid``.

    ``etas = (eta_minus, eta_plus)`` are the impedances on the rays at 0 and
    ``theta_M``.  Remainders subtract the finite-``h`` closed forms of the
    retained terms, so the exponentially small truncation tails of those terms
    do not pollute the fit at small ``s``.  The plain asymptotic terms are
    reported alongside.
    """
    s_arr = np.asarray(sorted(s_grid), dtype=float)
    if s_arr.size < 3 or s_arr[-1] / s_arr[0] < 10 - 1e-9:
        raise ValueError("s_grid needs at least 3 points spanning a decade")
    if s_arr[0] * h < 50:
        raise ValueError("need s_min * h >= 50")
    th0 = W.theta_M
    d = u.derivatives_at_center()
    lam = u.lam
    rays = {"plus": (th0, th0 + math.pi / 2, complex(etas[1])), "minus": (0.0, -math.pi / 2, complex(etas[0]))}
    rep = CornerReport(list(map(float, s_arr)), GAMMA)
    rem = {k: [] for k in ("I11_plus", "I11_minus", "I12_plus", "I12_minus", "I2")}
    for s in s_arr:
        ci = corner_integrals(u, W, s, h)
        row = {"s": float(s)}
        for key, (th, phi, eta) in rays.items():
            b = complex(beta(th, phi))
            z = complex(zeta(th))
            kept11 = b * (
                d["u"] * line_integral_exact(0, s, h, z, True)
                + c1(d, th) * line_integral_exact(1, s, h, z, True)
                + c2(d, th) * line_integral_exact(2, s, h, z, True)
            )
            kept12 = eta * (d["u"] * line_integral_exact(0, s, h, z) + c1(d, th) * line_integral_exact(1, s, h, z))
            v11 = getattr(ci, "I11_" + key)
            v12 = getattr(ci, "I12_" + key)
            rem["I11_" + key].append(v11 - kept11)
            rem["I12_" + key].append(v12 - kept12)
            row["I11_" + key] = [v11.real, v11.imag]
            row["I12_" + key] = [v12.real, v12.imag]
            row["I11_" + key + "_asymptotic"] = _pair(i11_leading(d, th, phi, s))
            row["I12_" + key + "_asymptotic"] = _pair(i12_leading(d, th, eta, s))
        rem["I2"].append(ci.I2)
        row["I2"] = _pair(ci.I2)
        row["I3"] = _pair(ci.I3)
        lhs = -lam * ci.area
        rhs = ci.I1_plus + ci.I1_minus + ci.I2
        rep.green_closure.append(abs(lhs - rhs))
        row["green_residual"] = abs(lhs - rhs)
        rep.rows.append(row)
    for name in ("I11_plus", "I11_minus"):
        _check(rep, name, s_arr, np.array(rem[name]), -3.0, slope_tol)
    for name in ("I12_plus", "I12_minus"):
        _check(rep, name, s_arr, np.array(rem[name]), -2.0 - GAMMA, slope_tol)
    slope, note = _fit_slope(s_arr, np.array(rem["I2"]))
    rep.checks.append(SlopeCheck("I2", slope, i2_max_slope, slope is not None and slope < i2_max_slope, note or "exponential decay"))
    return rep


def _pair(z: complex) -> list[float]:
    return [complex(z).real, complex(z).imag]


def _check(rep: CornerReport, name: str, s, vals, expected: float, tol: float) -> None:
    slope, note = _fit_slope(s, vals)
    ok = slope is not None and abs(slope - expected) <= tol
    rep.checks.append(SlopeCheck(name, slope, expected, ok, note))


__all__ = [
    "CgoParams",
    "CornerIntegrals",
    "CornerReport",
    "SectorW",
    "beta",
    "cgo_eval",
    "cgo_gradient",
    "cgo_normal_derivative",
    "corner_integrals",
    "line_integral_exact",
    "sector_radius_for",
    "line_integral_leading",
    "line_integral_quad",
    "sector_integral_exact",
    "sector_integral_quad",
    "sector_tail_bound",
    "singular_line_identity",
    "verify_corner_expansions",
    "zeta",
    "zeta_prime",
]
