"""Hankel functions H_0^(1) and H_1^(1) for positive real argument.

Ascending series (extended precision) up to ``SWITCH``.  Between ``SWITCH``
and ``ASYMPTOTIC_FROM`` the Neumann series of ``Y_0`` over normalised
``J_{2k}`` is used, since neither the ascending series nor the asymptotic one
keeps full precision there.  Hankel's asymptotic expansion covers the rest.
"""

from __future__ import annotations

import numpy as np

from .specfun import bessel_j_all

SWITCH = 12.0
ASYMPTOTIC_FROM = 25.0
_LD = np.longdouble
_EULER = _LD("0.577215664901532860606512090082402431")
_PI = _LD("3.14159265358979323846264338327950288")


def _series01(z: np.ndarray):
    z = z.astype(_LD)
    half = z / 2
    q = half * half
    logt = np.log(half) + _EULER
    # J0, J1 and the harmonic-number sums of Y0, Y1
    t0 = np.ones_like(z)  # (z/2)^(2p) / (p!)^2
    t1 = half.copy()  # (z/2)^(2p+1) / (p! (p+1)!)
    j0 = t0.copy()
    j1 = t1.copy()
    s0 = np.zeros_like(z)
    s1 = t1 * 1  # H_0 + H_1 = 1 at p = 0
    hp = _LD(0)
    for p in range(1, 80):
        hp = hp + _LD(1) / p
        t0 = -t0 * q / (p * p)
        t1 = -t1 * q / (p * (p + 1))
        j0 += t0
        j1 += t1
        s0 -= t0 * hp  # (-1)^(p+1) H_p x^p/(p!)^2 : t0 already carries (-1)^p
        s1 += t1 * (hp + hp + _LD(1) / (p + 1))
        if np.all(np.abs(t0) < 1e-24) and np.all(np.abs(t1) < 1e-24):
            break
    y0 = (2 / _PI) * (logt * j0 + s0)
    y1 = (2 / _PI) * logt * j1 - 2 / (_PI * z) - s1 / _PI
    return j0, j1, y0, y1


def _neumann01(z: np.ndarray):
    # Y0 = (2/pi)(log(z/2) + gamma) J0 - (4/pi) sum (-1)^k J_2k / k, and Y1 = -Y0'
    nmax = int(z.max()) + 40
    j = bessel_j_all(nmax, z, order_max=nmax)
    log_t = np.log(z / 2) + np.euler_gamma
    k = np.arange(1, nmax // 2)
    c = ((-1.0) ** k / k)[:, None]
    s0 = (c * j[2 * k]).sum(axis=0)
    ds0 = (c * (j[2 * k - 1] - j[2 * k + 1]) / 2).sum(axis=0)
    y0 = 2 / np.pi * log_t * j[0] - 4 / np.pi * s0
    y1 = -(2 / np.pi * j[0] / z - 2 / np.pi * log_t * j[1] - 4 / np.pi * ds0)
    return j[0] + 1j * y0, j[1] + 1j * y1


def _asymptotic(nu: int, z: np.ndarray) -> np.ndarray:
    mu = 4.0 * nu * nu
    total = np.ones_like(z, dtype=complex)
    term = np.ones_like(z, dtype=complex)
    best = np.ones_like(z)
    for k in range(1, 60):
        term = term * 1j * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        mag = np.abs(term)
        grow = mag > best
        if np.all(grow | (mag < 1e-17)):
            break
        total = np.where(grow, total, total + term)
        best = np.where(grow, best, mag)
        term = np.where(grow, 0.0, term)
    phase = z - nu * np.pi / 2 - np.pi / 4
    return np.sqrt(2 / (np.pi * z)) * np.exp(1j * phase) * total


def hankel1_01(z) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(H_0^(1)(z), H_1^(1)(z))`` for real ``z > 0`` (any array shape)."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("Hankel functions need a positive argument")
    flat = z.ravel()
    h0 = np.empty(flat.shape, dtype=complex)
    h1 = np.empty(flat.shape, dtype=complex)
    small = flat <= SWITCH
    if small.any():
        j0, j1, y0, y1 = _series01(flat[small])
        h0[small] = j0.astype(float) + 1j * y0.astype(float)
        h1[small] = j1.astype(float) + 1j * y1.astype(float)
    mid = ~small & (flat <= ASYMPTOTIC_FROM)
    if mid.any():
        h0[mid], h1[mid] = _neumann01(flat[mid])
    big = flat > ASYMPTOTIC_FROM
    if big.any():
        h0[big] = _asymptotic(0, flat[big])
        h1[big] = _asymptotic(1, flat[big])
    return h0.reshape(z.shape), h1.reshape(z.shape)
