"""Spherical wave expansions of Laplacian eigenfunctions and vanishing orders.

An expansion about a centre ``x0`` is

    u(x0 + r e^{i theta}) = sum_n (a_n e^{i n theta} + b_n e^{-i n theta}) J_n(kappa r),

with ``kappa = sqrt(lambda)``.  Coefficients are stored canonically with
``b_0 = 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .specfun import bessel_j_all

N_TRUNC = 32
ZERO_TOL = 1e-10
ABS_FLOOR = 1e-14

FieldFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class EstimationFailed(RuntimeError):
    """The numeric vanishing-order fit could not be trusted."""


@dataclass(frozen=True)
class VanishingOrder:
    """``finite`` (exact order ``n``), ``infinite``, or ``at_least`` (lower bound ``n``)."""

    kind: str
    n: int | None = None

    def __post_init__(self):
        if self.kind not in ("finite", "infinite", "at_least"):
            raise ValueError(f"unknown vanishing-order kind {self.kind!r}")
        if self.kind != "infinite" and (self.n is None or self.n < 0):
            raise ValueError("finite and at_least orders need a nonnegative n")

    def __str__(self) -> str:
        if self.kind == "finite":
            return f"Finite({self.n})"
        if self.kind == "at_least":
            return f"AtLeast({self.n})"
        return "Infinite"

    def to_json(self) -> dict:
        return {"kind": self.kind, "n": self.n}


def Finite(n: int) -> VanishingOrder:
    return VanishingOrder("finite", int(n))


def AtLeast(n: int) -> VanishingOrder:
    return VanishingOrder("at_least", int(n))


def Infinite() -> VanishingOrder:
    return VanishingOrder("infinite")


def orders_agree(a: VanishingOrder, b: VanishingOrder, cap: int | None = None) -> bool:
    """Compatibility of two order statements.

    ``AtLeast(m)`` is compatible with any order ``>= m``.  When ``cap`` is
    given, ``Infinite`` is compatible with ``AtLeast(m)`` for ``m >= cap``
    (a numerically zero field cannot be told apart from an infinite order).
    """
    if a.kind == "at_least" and b.kind == "at_least":
        return True
    if b.kind == "at_least":
        a, b = b, a
    if a.kind == "at_least":
        if b.kind == "infinite":
            return True
        return b.n >= a.n
    if a.kind == "infinite" or b.kind == "infinite":
        return a.kind == b.kind
    return a.n == b.n


@dataclass(frozen=True)
class Expansion:
    """Truncated spherical wave expansion; ``coeffs[n] = (a_n, b_n)``."""

    lam: float
    coeffs: np.ndarray
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("eigenvalue must be positive")
        c = np.array(self.coeffs, dtype=complex).reshape(-1, 2)
        if c.shape[0] == 0:
            c = np.zeros((1, 2), dtype=complex)
        c[0, 0] += c[0, 1]
        c[0, 1] = 0.0
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def kappa(self) -> float:
        return float(np.sqrt(self.lam))

    @property
    def n_trunc(self) -> int:
        return self.coeffs.shape[0] - 1

    @classmethod
    def single_mode(cls, n: int, lam: float, kind: str = "sin", n_trunc: int | None = None) -> "Expansion":
        """``J_n(kappa r) sin(n theta)`` (or ``cos``) as an expansion."""
        size = max(n, n_trunc if n_trunc is not None else n) + 1
        c = np.zeros((size, 2), dtype=complex)
        if kind == "sin":
            c[n] = (1 / 2j, -1 / 2j)
        elif kind == "cos":
            c[n] = (0.5, 0.5) if n else (1.0, 0.0)
        else:
            raise ValueError("kind must be 'sin' or 'cos'")
        return cls(lam, c)

    def _local(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        return np.hypot(dx, dy), np.arctan2(dy, dx)

    def eval(self, r, theta) -> np.ndarray:
        """Field value at polar coordinates ``(r, theta)`` about the centre."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        r, theta = np.broadcast_arrays(r, theta)
        nmax = self.n_trunc
        # polar grids repeat radii, and the Bessel factors depend on r alone
        ru, inv = np.unique(r.ravel(), return_inverse=True)
        jn = bessel_j_all(nmax, self.kappa * ru)[:, inv].reshape((nmax + 1,) + r.shape)
        e1 = np.exp(1j * theta)
        ep = np.ones(r.shape, dtype=complex)
        em = np.ones(r.shape, dtype=complex)
        acc = np.zeros(r.shape, dtype=complex)
        for n, (a, b) in enumerate(self.coeffs):
            if a != 0 or b != 0:
                acc += (a * ep + b * em) * jn[n]
            ep *= e1
            em /= e1
        return acc

    def eval_xy(self, x, y) -> np.ndarray:
        r, th = self._local(x, y)
        return self.eval(r, th)

    def __call__(self, x, y) -> np.ndarray:
        return self.eval_xy(x, y)

    def polar_derivatives(self, r, theta) -> tuple[np.ndarray, np.ndarray]:
        """``(du/dr, du/dtheta)`` at polar points."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        r, theta = np.broadcast_arrays(r, theta)
        nmax = self.n_trunc
        jall = bessel_j_all(nmax + 1, self.kappa * r, order_max=max(nmax + 1, 65))
        jn = jall[:-1]
        jm1 = np.concatenate([-jall[1:2], jall[:-2]], axis=0)
        jprime = (jm1 - jall[1:]) / 2
        n = np.arange(nmax + 1).reshape((-1,) + (1,) * r.ndim)
        a = self.coeffs[:, 0].reshape(n.shape)
        b = self.coeffs[:, 1].reshape(n.shape)
        ep = a * np.exp(1j * n * theta)
        em = b * np.exp(-1j * n * theta)
        dr = (self.kappa * jprime * (ep + em)).sum(axis=0)
        dth = (1j * n * (ep - em) * jn).sum(axis=0)
        return dr, dth

    def gradient_xy(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Cartesian gradient; exact at the centre via the Taylor data."""
        r, th = self._local(x, y)
        dr, dth = self.polar_derivatives(r, th)
        safe = np.where(r > 0, r, 1.0)
        gx = np.cos(th) * dr - np.sin(th) * dth / safe
        gy = np.sin(th) * dr + np.cos(th) * dth / safe
        if np.any(r == 0):
            d = self.derivatives_at_center()
            gx = np.where(r == 0, d["ux"], gx)
            gy = np.where(r == 0, d["uy"], gy)
        return gx, gy

    def derivatives_at_center(self) -> dict:
        """Value, gradient and Hessian of ``u`` at the centre."""
        k2 = self.lam
        k = self.kappa
        c = np.zeros((3, 2), dtype=complex)
        m = min(3, self.coeffs.shape[0])
        c[:m] = self.coeffs[:m]
        a0 = c[0, 0]
        (a1, b1), (a2, b2) = c[1], c[2]
        return {
            "u": a0,
            "ux": k / 2 * (a1 + b1),
            "uy": 1j * k / 2 * (a1 - b1),
            "uxx": -k2 * a0 / 2 + k2 * (a2 + b2) / 4,
            "uyy": -k2 * a0 / 2 - k2 * (a2 + b2) / 4,
            "uxy": 1j * k2 * (a2 - b2) / 4,
        }

    def ray_normal_derivative(self, theta0: float, r, sign: int) -> np.ndarray:
        """``sign * (1/r) du/dtheta`` along the ray at angle ``theta0``."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("ray normal derivative needs r > 0")
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        nmax = self.n_trunc
        # polar grids repeat radii, and the Bessel factors depend on r alone
        ru, inv = np.unique(r.ravel(), return_inverse=True)
        jn = bessel_j_all(nmax, self.kappa * ru)[:, inv].reshape((nmax + 1,) + r.shape)
        n = np.arange(nmax + 1).reshape((-1,) + (1,) * r.ndim)
        a = self.coeffs[:, 0].reshape(n.shape)
        b = self.coeffs[:, 1].reshape(n.shape)
        terms = 1j * n * (a * np.exp(1j * n * theta0) - b * np.exp(-1j * n * theta0)) * jn
        return sign * terms.sum(axis=0) / r

    def scaled(self, factor: complex) -> "Expansion":
        return Expansion(self.lam, self.coeffs * factor, self.center)

    def to_json(self) -> dict:
        rows = [[a.real, a.imag, b.real, b.imag] for a, b in self.coeffs]
        out = {"lambda": self.lam, "coeffs": rows}
        if self.center != (0.0, 0.0):
            out["center"] = list(self.center)
        return out

    @classmethod
    def from_json(cls, data: dict | str) -> "Expansion":
        if isinstance(data, str):
            data = json.loads(data)
        rows = np.asarray(data["coeffs"], dtype=float).reshape(-1, 4)
        coeffs = np.stack([rows[:, 0] + 1j * rows[:, 1], rows[:, 2] + 1j * rows[:, 3]], axis=1)
        return cls(float(data["lambda"]), coeffs, tuple(data.get("center", (0.0, 0.0))))


def vanishing_order_from_coeffs(e: Expansion, tol: float = ZERO_TOL) -> VanishingOrder:
    """Lowest degree carrying a nonzero coefficient."""
    mags = np.abs(e.coeffs)
    scale = mags.max()
    thresh = max(tol * scale, ABS_FLOOR)
    if scale <= ABS_FLOOR:
        return AtLeast(e.n_trunc + 1)
    for n in range(e.n_trunc + 1):
        if mags[n].max() > thresh:
            return Finite(n)
    return AtLeast(e.n_trunc + 1)


def _gauss01(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    return (x + 1) / 2, w / 2


def disk_abs_integrals(
    u: FieldFn,
    x0: Sequence[float],
    radii: Sequence[float],
    sector: tuple[float, float] | None = None,
    n_radial: int = 64,
    n_angular: int = 128,
) -> np.ndarray:
    """``int |u|`` over the disks (or sector pieces) ``B(x0, r)`` for every radius."""
    t, wt = _gauss01(n_radial)
    if sector is None:
        th = 2 * np.pi * np.arange(n_angular) / n_angular
        wth = np.full(n_angular, 2 * np.pi / n_angular)
    else:
        lo, hi = sector
        s, ws = _gauss01(n_angular)
        th = lo + (hi - lo) * s
        wth = (hi - lo) * ws
    out = []
    for r in radii:
        rho = r * t
        rr, tt = np.meshgrid(rho, th, indexing="ij")
        vals = np.abs(u(x0[0] + rr * np.cos(tt), x0[1] + rr * np.sin(tt)))
        w = np.outer(wt * r * rho, wth)
        out.append(float((vals * w).sum()))
    return np.asarray(out)


def estimate_vanishing_order_numeric(
    u: FieldFn,
    x0: Sequence[float],
    radii: Sequence[float],
    *,
    sector: tuple[float, float] | None = None,
    floor: float = ABS_FLOOR,
    cap: int = N_TRUNC + 1,
    tie_tol: float = 0.35,
) -> VanishingOrder:
    """Vanishing order from the growth rate of ``int_{B_r} |u|``.

    ``I_r ~ r^(N+2)`` for a field of order ``N``.  The slope of ``log I_r``
    against ``log r`` is fitted by least squares.  A field whose largest
    integral is below ``floor`` is reported as ``AtLeast(cap)``.
    """
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    if radii.size < 4:
        raise ValueError("need at least four radii")
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    if np.log10(radii[0] / radii[-1]) < 1.5 - 1e-12:
        raise ValueError("radii must span at least 1.5 decades")
    vals = disk_abs_integrals(u, x0, radii, sector=sector)
    if vals[0] <= floor:
        return AtLeast(cap)
    if np.any(vals <= 0):
        raise EstimationFailed("integral vanished at an intermediate radius")
    if np.any(np.diff(vals) > 1e-9 * vals[:-1]):
        raise EstimationFailed("disk integrals are not monotone in the radius")
    slope = np.polyfit(np.log(radii), np.log(vals), 1)[0]
    order = int(round(slope)) - 2
    if abs(slope - 2 - order) > tie_tol:
        raise EstimationFailed(f"fitted slope {slope:.3f} is not near an integer")
    if order < 0:
        raise EstimationFailed(f"fitted slope {slope:.3f} below the constant-field rate")
    return Finite(order)
