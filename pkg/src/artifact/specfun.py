"""Bessel functions of the first kind for integer order and real argument.

Small arguments use the power series summed in extended precision.  Larger
arguments use Miller's downward recurrence, normalised with the identity
``J_0 + 2 * sum(J_2k) = 1``.
"""

from __future__ import annotations

import math

import numpy as np

N_ORDER_MAX = 64
SERIES_SWITCH = 12.0

_LD = np.longdouble


class OrderError(ValueError):
    """Requested order exceeds the configured maximum."""


def _check_order(nmax: int, order_max: int) -> None:
    if nmax < 0:
        raise OrderError(f"order must be nonnegative, got {nmax}")
    if nmax > order_max:
        raise OrderError(f"order {nmax} exceeds N_ORDER_MAX={order_max}")


def _series_all(nmax: int, t: np.ndarray) -> np.ndarray:
    # J_n(t) = sum_p (-1)^p (t/2)^(2p+n) / (p! (n+p)!)
    half = t.astype(_LD) / 2
    q = half * half
    out = np.empty((nmax + 1, t.size), dtype=_LD)
    lead = np.ones(t.size, dtype=_LD)
    for n in range(nmax + 1):
        if n > 0:
            lead = lead * half / n
        term = lead.copy()
        acc = lead.copy()
        for p in range(1, 200):
            term = -term * q / (p * (n + p))
            acc += term
            if np.all(np.abs(term) <= 1e-21 * np.abs(acc)):
                break
        out[n] = acc
    return out


def _miller_all(nmax: int, t: np.ndarray) -> np.ndarray:
    tl = t.astype(_LD)
    top = max(nmax, int(t.max()))
    start = top + 30 + int(4 * math.sqrt(top + 1))
    start += start % 2
    out = np.zeros((nmax + 1, t.size), dtype=_LD)
    nxt = np.zeros(t.size, dtype=_LD)
    cur = np.full(t.size, _LD(1e-30))
    norm = np.zeros(t.size, dtype=_LD)
    for m in range(start, 0, -1):
        # cur holds J_m, nxt holds J_{m+1}
        if m <= nmax:
            out[m] = cur
        if m % 2 == 0:
            norm += 2 * cur
        prev = (2 * m) / tl * cur - nxt
        nxt, cur = cur, prev
    out[0] = cur
    norm += cur
    return out / norm


def bessel_j_all(nmax: int, t, order_max: int = N_ORDER_MAX) -> np.ndarray:
    """Return ``J_0..J_nmax`` at every point of ``t`` as an array of shape (nmax+1, *t.shape)."""
    _check_order(nmax, order_max)
    t = np.asarray(t, dtype=float)
    flat = np.abs(t.ravel())
    out = np.empty((nmax + 1, flat.size), dtype=_LD)
    small = flat <= SERIES_SWITCH
    if small.any():
        out[:, small] = _series_all(nmax, flat[small])
    if (~small).any():
        out[:, ~small] = _miller_all(nmax, flat[~small])
    # J_n(-t) = (-1)^n J_n(t)
    neg = t.ravel() < 0
    if neg.any():
        out[1::2, neg] *= -1
    return out.astype(float).reshape((nmax + 1,) + t.shape)


def bessel_j(n: int, t, order_max: int = N_ORDER_MAX):
    """First-kind Bessel function ``J_n(t)``; scalar in, scalar out."""
    vals = bessel_j_all(n, t, order_max)[n]
    return float(vals) if np.ndim(vals) == 0 else vals


def bessel_j_prime(n: int, t, order_max: int = N_ORDER_MAX):
    """Derivative ``J_n'(t) = (J_{n-1}(t) - J_{n+1}(t)) / 2`` with ``J_{-1} = -J_1``."""
    _check_order(n, order_max)
    allv = bessel_j_all(n + 1, t, order_max + 1)
    lower = allv[n - 1] if n > 0 else -allv[1]
    vals = (lower - allv[n + 1]) / 2
    return float(vals) if np.ndim(vals) == 0 else vals
