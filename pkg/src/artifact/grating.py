"""Rayleigh modes, flat-grating reference fields and mode-independence checks.

Everything is 2 pi periodic in ``x1``.  The boundary condition on a flat
profile ``x2 = 0`` is ``du/dnu + eta u = 0`` with ``nu = e2``, the normal
pointing into the region above the grating.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

AMPLIFICATION_MAX = 1e8
DISTINCT_TOL = 1e-12


class DegenerateParameter(ValueError):
    pass


def _check_theta(theta: float) -> None:
    if not -math.pi / 2 < theta < math.pi / 2:
        raise ValueError("theta must lie in (-pi/2, pi/2)")


@dataclass(frozen=True)
class RayleighMode:
    n: int
    alpha_n: float
    beta_n: complex
    propagating: bool

    @property
    def xi(self) -> np.ndarray:
        return np.array([self.alpha_n, self.beta_n])


def rayleigh_mode(k: float, theta: float, n: int) -> RayleighMode:
    alpha = n + k * math.sin(theta)
    if abs(alpha) <= k:
        return RayleighMode(n, alpha, complex(math.sqrt(k * k - alpha * alpha)), True)
    return RayleighMode(n, alpha, 1j * math.sqrt(alpha * alpha - k * k), False)


def rayleigh_modes(k: float, theta: float, n_range: Iterable[int]) -> list[RayleighMode]:
    if not k > 0:
        raise ValueError("wavenumber must be positive")
    _check_theta(theta)
    return [rayleigh_mode(k, theta, int(n)) for n in n_range]


def mode_range(n_max: int) -> range:
    return range(-n_max, n_max + 1)


@dataclass(frozen=True)
class FlatGratingConfig:
    """Plane wave from angle ``theta`` onto the line ``x2 = 0``.

    ``eta = math.inf`` is the sound-soft limit and ``eta = 0`` the sound-hard one.
    """

    k: float
    theta: float
    eta: complex
    b: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("wavenumber must be positive")
        _check_theta(self.theta)
        if not self.b > 0:
            raise ValueError("the measurement line must lie above the profile")

    @property
    def dirichlet(self) -> bool:
        return isinstance(self.eta, float) and math.isinf(self.eta)

    @property
    def alpha(self) -> float:
        return self.k * math.sin(self.theta)


def reflection_coefficient(cfg: FlatGratingConfig) -> complex:
    if cfg.dirichlet:
        return -1.0 + 0j
    eta = complex(cfg.eta)
    ikc = 1j * cfg.k * math.cos(cfg.theta)
    den = ikc + eta
    if abs(den) <= 1e-14 * max(1.0, abs(eta)):
        raise DegenerateParameter("eta = -i k cos(theta) makes the reflection coefficient singular")
    return (ikc - eta) / den


def incident_field(cfg: FlatGratingConfig, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    s, c = math.sin(cfg.theta), math.cos(cfg.theta)
    return np.exp(1j * cfg.k * (s * x[..., 0] - c * x[..., 1]))


def flat_grating_field(cfg: FlatGratingConfig, x) -> np.ndarray:
    """Total field above a flat grating at points ``x`` (last axis of length 2)."""
    x = np.asarray(x, dtype=float)
    if np.any(x[..., 1] < 0):
        raise ValueError("points must satisfy x2 >= 0")
    s, c = math.sin(cfg.theta), math.cos(cfg.theta)
    R = reflection_coefficient(cfg)
    return incident_field(cfg, x) + R * np.exp(1j * cfg.k * (s * x[..., 0] + c * x[..., 1]))


def flat_boundary_residual(cfg: FlatGratingConfig, x1) -> float:
    """Largest ``|du/dx2 + eta u|`` (or ``|u|`` when sound-soft) on ``x2 = 0``."""
    x1 = np.asarray(x1, dtype=float)
    pts = np.stack([x1, np.zeros_like(x1)], axis=-1)
    u = flat_grating_field(cfg, pts)
    if cfg.dirichlet:
        return float(np.abs(u).max())
    s, c = math.sin(cfg.theta), math.cos(cfg.theta)
    R = reflection_coefficient(cfg)
    e = np.exp(1j * cfg.k * s * x1)
    du = 1j * cfg.k * c * (R - 1) * e
    return float(np.abs(du + complex(cfg.eta) * u).max())


# ---------------------------------------------------------------- Rayleigh coefficients


@dataclass
class RayleighCoefficients:
    n: np.ndarray
    values: np.ndarray  # nan where unrecoverable
    recoverable: np.ndarray

    def get(self, n: int) -> complex:
        return complex(self.values[int(np.nonzero(self.n == n)[0][0])])


def sample_points(m: int) -> np.ndarray:
    return 2 * math.pi * np.arange(m) / m


def extract_rayleigh(samples, k: float, theta: float, b: float, n_range: Iterable[int]) -> RayleighCoefficients:
    """Rayleigh coefficients of a scattered field sampled uniformly on ``x2 = b`` over one period."""
    u = np.asarray(samples, dtype=complex)
    m = len(u)
    modes = rayleigh_modes(k, theta, n_range)
    n = np.array([md.n for md in modes])
    if m < 4 * max(1, int(np.abs(n).max())):
        raise ValueError("need at least 4 max|n| samples")
    x1 = sample_points(m)
    v = u * np.exp(-1j * k * math.sin(theta) * x1)
    c = np.exp(-1j * np.outer(n, x1)) @ v / m
    vals = np.empty(len(n), dtype=complex)
    ok = np.ones(len(n), dtype=bool)
    for i, md in enumerate(modes):
        if md.beta_n.imag * b > math.log(AMPLIFICATION_MAX):
            ok[i] = False
            vals[i] = np.nan
        else:
            vals[i] = np.exp(-1j * md.beta_n * b) * c[i]
    return RayleighCoefficients(n, vals, ok)


def synthesize(coeffs: dict[int, complex], k: float, theta: float, x) -> np.ndarray:
    """``sum u_n exp(i xi_n . x)`` at points ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1], dtype=complex)
    for n, un in coeffs.items():
        md = rayleigh_mode(k, theta, n)
        out += un * np.exp(1j * (md.alpha_n * x[..., 0] + md.beta_n * x[..., 1]))
    return out


def write_samples_csv(values, k: float, theta: float, b: float) -> str:
    values = np.asarray(values, dtype=complex)
    buf = io.StringIO()
    buf.write(f"# k={k!r}, theta={theta!r}, b={b!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x1", "re", "im"])
    for x, v in zip(sample_points(len(values)), values):
        w.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()


def read_samples_csv(text: str) -> tuple[np.ndarray, dict]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing metadata line")
    meta = dict(re.findall(r"(\w+)=([^,\s]+)", lines[0]))
    meta = {key: float(val) for key, val in meta.items()}
    rows = list(csv.reader(lines[1:]))
    if rows[0] != ["x1", "re", "im"]:
        raise ValueError("sample CSV header must be x1,re,im")
    data = np.array([[float(c) for c in r] for r in rows[1:] if r])
    if not np.allclose(data[:, 0], sample_points(len(data)), atol=1e-12):
        raise ValueError("samples must be uniform over one period")
    return data[:, 1] + 1j * data[:, 2], meta


# ---------------------------------------------------------------- independence


def _gram(xis: np.ndarray, domain) -> np.ndarray:
    a1, b1, a2, b2 = domain
    d = xis[:, None, :] - xis[None, :, :]

    def avg(w, a, b):
        # mean of exp(i w t) over [a, b]
        return np.exp(0.5j * w * (a + b)) * np.sinc(w * (b - a) / (2 * math.pi))

    return avg(d[..., 0], a1, b1) * avg(d[..., 1], a2, b2)


def exponential_independence(xis, domain=(0.0, 2 * math.pi, 0.0, 2 * math.pi), grid: int | None = None) -> float:
    """Smallest singular value of the normalized Gram matrix of ``exp(i xi . x)`` on a rectangle.

    The Gram entries are exact integrals; with ``grid`` they are midpoint sums
    on a ``grid x grid`` lattice instead.
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    for i, j in combinations(range(len(xis)), 2):
        if np.abs(xis[i] - xis[j]).max() <= DISTINCT_TOL:
            raise ValueError("wave vectors must be pairwise distinct")
    if grid is None:
        G = _gram(xis, domain)
    else:
        a1, b1, a2, b2 = domain
        s = (np.arange(grid) + 0.5) / grid
        X, Y = np.meshgrid(a1 + (b1 - a1) * s, a2 + (b2 - a2) * s, indexing="ij")
        E = np.exp(1j * (np.outer(xis[:, 0], X.ravel()) + np.outer(xis[:, 1], Y.ravel())))
        G = E @ E.conj().T / X.size
    return float(np.linalg.eigvalsh(0.5 * (G + G.conj().T)).min())


@dataclass
class Distinctness:
    distinct: bool
    witness: tuple[str, str] | None
    count: int


def grating_mode_distinctness(k: float, theta1: float, theta2: float, n_range: Iterable[int]) -> Distinctness:
    """Pairwise distinctness of ``k d_l`` and the mode vectors ``xi_n(theta_l)`` for both angles."""
    _check_theta(theta1)
    _check_theta(theta2)
    if theta1 == theta2:
        raise ValueError("the two incident angles must differ")
    n_range = list(n_range)
    vecs: list[tuple[str, np.ndarray]] = []
    for ell, th in ((1, theta1), (2, theta2)):
        m0 = rayleigh_mode(k, th, 0)
        vecs.append((f"k d_{ell}", np.array([m0.alpha_n, -m0.beta_n])))
        for md in rayleigh_modes(k, th, n_range):
            vecs.append((f"xi_{md.n}(theta_{ell})", md.xi))
    for (na, va), (nb, vb) in combinations(vecs, 2):
        if np.abs(va - vb).max() <= DISTINCT_TOL * max(1.0, k):
            return Distinctness(False, (na, nb), len(vecs))
    return Distinctness(True, None, len(vecs))


def flat_discrepancy(cfg1: FlatGratingConfig, cfg2: FlatGratingConfig) -> float:
    """Difference of the single propagating reflected amplitude for two flat gratings."""
    if (cfg1.k, cfg1.theta) != (cfg2.k, cfg2.theta):
        raise ValueError("compare gratings under the same incident wave")
    return abs(reflection_coefficient(cfg1) - reflection_coefficient(cfg2))
