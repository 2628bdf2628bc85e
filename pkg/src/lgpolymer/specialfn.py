"""Scalar special functions: log-gamma (real and complex), polygamma up to
order 2, and overflow-free log-sum-exp.

Everything accepts numpy arrays as well as scalars; the array paths are what
the contour and quadrature code lean on.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np
from scipy import special as _sp

LOG_2PI = math.log(2.0 * math.pi)
EULER_GAMMA = 0.57721566490153286061

# B_2k for k = 1..10
_BERNOULLI = np.array([
    1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6,
    -3617 / 510, 43867 / 798, -174611 / 330,
])

# thresholds beyond which the asymptotic series is used directly
_PSI_SHIFT_TO = 12.0
_STIRLING_RADIUS = 15.0
_STIRLING_SHIFT = 16


class DomainError(ValueError):
    pass


class PoleError(ValueError):
    pass


def ln_gamma(x):
    """log Gamma(x) for real x > 0."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"ln_gamma needs finite x > 0, got {x!r}")
    out = _sp.gammaln(arr)
    return float(out) if out.ndim == 0 else out


def _stirling(z):
    # valid for |z| >= 15, Re z > 0
    inv = 1.0 / z
    inv2 = inv * inv
    series = np.zeros_like(z)
    for k in range(len(_BERNOULLI), 0, -1):
        b = _BERNOULLI[k - 1]
        series = series * inv2 + b / (2 * k * (2 * k - 1))
    series = series * inv
    return (z - 0.5) * np.log(z) - z + 0.5 * LOG_2PI + series


def _lgamma_right(z):
    """Complex log-gamma for Re z >= 0.5 (continuous branch)."""
    out = np.empty_like(z)
    far = np.abs(z) >= _STIRLING_RADIUS
    out[far] = _stirling(z[far])
    near = ~far
    if np.any(near):
        zn = z[near]
        acc = np.zeros_like(zn)
        for k in range(_STIRLING_SHIFT):
            acc += np.log(zn + k)
        out[near] = _stirling(zn + _STIRLING_SHIFT) - acc
    return out


def _log_sin_pi(z):
    """log sin(pi z) without overflow for large |Im z| (any branch)."""
    w = np.pi * z
    upper = w.imag >= 0
    ww = np.where(upper, w, np.conj(w))
    val = -1j * ww + np.log1p(-np.exp(2j * ww)) + np.log(0.5j)
    return np.where(upper, val, np.conj(val))


def complex_ln_gamma(z):
    """log Gamma(z) for complex z away from the poles.

    For Re z >= 1/2 the branch is the one continuous from the positive real
    axis; left of that the reflection formula fixes the value only modulo
    2*pi*i, which is irrelevant once exponentiated.
    """
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    if not np.all(np.isfinite(arr)):
        raise DomainError("complex_ln_gamma needs finite input")
    poles = (arr.imag == 0) & (arr.real <= 0) & (arr.real == np.round(arr.real))
    if np.any(poles):
        raise PoleError(f"Gamma has a pole at {arr[poles][0]}")
    out = np.empty_like(arr)
    right = arr.real >= 0.5
    out[right] = _lgamma_right(arr[right])
    left = ~right
    if np.any(left):
        zl = arr[left]
        out[left] = math.log(math.pi) - _log_sin_pi(zl) - _lgamma_right(1.0 - zl)
    if np.ndim(z) == 0:
        return complex(out[0])
    return out.reshape(np.shape(z))


def polygamma(order: int, x):
    """psi^(order)(x) for order in {0, 1, 2} and real x > 0."""
    if order not in (0, 1, 2):
        raise DomainError(f"polygamma order must be 0, 1 or 2, got {order!r}")
    arr = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"polygamma needs finite x > 0, got {x!r}")

    # recurrence up to the asymptotic region; collect the correction terms
    corr = np.zeros_like(arr)
    while True:
        low = arr < _PSI_SHIFT_TO
        if not np.any(low):
            break
        xl = arr[low]
        if order == 0:
            corr[low] -= 1.0 / xl
        elif order == 1:
            corr[low] += 1.0 / (xl * xl)
        else:
            corr[low] -= 2.0 / (xl * xl * xl)
        arr[low] = xl + 1.0

    inv = 1.0 / arr
    inv2 = inv * inv
    ks = np.arange(len(_BERNOULLI), 0, -1)
    series = np.zeros_like(arr)
    if order == 0:
        for k in ks:
            series = series * inv2 + _BERNOULLI[k - 1] / (2 * k)
        val = np.log(arr) - 0.5 * inv - series * inv2
    elif order == 1:
        for k in ks:
            series = series * inv2 + _BERNOULLI[k - 1]
        val = inv + 0.5 * inv2 + series * inv2 * inv
    else:
        for k in ks:
            series = series * inv2 + (2 * k + 1) * _BERNOULLI[k - 1]
        val = -inv2 - inv2 * inv - series * inv2 * inv2
    out = val + corr
    if np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(np.shape(x))


def digamma(x):
    return polygamma(0, x)


def trigamma(x):
    return polygamma(1, x)


def tetragamma(x):
    return polygamma(2, x)


def log_sum_exp(values: Iterable[float]) -> float:
    """log(sum(exp(v))) by shifting with the maximum."""
    vals = np.asarray(list(values), dtype=float)
    if vals.size == 0:
        raise ValueError("log_sum_exp of an empty list")
    top = vals.max()
    if top == -np.inf:
        return -math.inf
    return float(top + math.log(np.exp(vals - top).sum()))
