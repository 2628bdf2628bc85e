"""Independent reference computations used only by the tests."""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special


def airy_fredholm_gue(s: float, nodes: int = 80, length: float = 16.0) -> float:
    """det(1 - K_Airy) on L^2(s, inf), Nystrom with Gauss-Legendre on [s, s + length]."""
    x, w = leggauss(nodes)
    x = s + (x + 1) * length / 2
    w = w * length / 2
    ai, aip, _, _ = special.airy(x)
    dx = x[:, None] - x[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        k = (ai[:, None] * aip[None, :] - aip[:, None] * ai[None, :]) / dx
    np.fill_diagonal(k, aip ** 2 - x * ai ** 2)
    sw = np.sqrt(w)
    return float(np.linalg.det(np.eye(nodes) - sw[:, None] * k * sw[None, :]))


def inverse_gamma_laplace(s: float, theta: float) -> float:
    """E[exp(-s W)] for W ~ Gamma^{-1}(theta)."""
    if s == 0:
        return 1.0
    return 2 * s ** (theta / 2) * special.kv(theta, 2 * math.sqrt(s)) / special.gamma(theta)


def product_laplace(theta1: float, theta2: float, r: float) -> float:
    """E[exp(-r W1 W2)] for independent inverse gammas, by 1-D quadrature over W2's density."""
    def integrand(b):
        dens = math.exp(-(theta2 + 1) * math.log(b) - 1 / b - special.gammaln(theta2))
        return inverse_gamma_laplace(r * b, theta1) * dens
    val, _ = integrate.quad(integrand, 0, np.inf, epsabs=0, epsrel=1e-12, limit=500)
    return val


def brute_force_paths(domain, log_w: dict, target) -> float:
    """Sum over all up-right paths from (1,1) to target, by explicit enumeration."""
    cells = set(domain.cells)
    total = 0.0

    def walk(i, j, acc):
        nonlocal total
        acc += log_w[(i, j)]
        if (i, j) == tuple(target):
            total += math.exp(acc)
            return
        for nxt in ((i + 1, j), (i, j + 1)):
            if nxt in cells and nxt[0] <= target[0] and nxt[1] <= target[1]:
                walk(*nxt, acc)

    walk(1, 1, 0.0)
    return total


def psi2_series(x: float, terms: int = 2_000_000) -> float:
    """psi''(x) = -2 sum 1/(k+x)^3 with an integral tail correction."""
    k = np.arange(terms, dtype=float)
    head = np.sum(1.0 / (k + x) ** 3)
    tail = 1 / (2 * (terms + x) ** 2) + 1 / (2 * (terms + x) ** 3)
    return -2 * (head + tail)


def airy_fredholm_bbp(s: float, b: float, nodes: int = 120, length: float = 16.0) -> float:
    """Rank-one perturbed Airy determinant det(1 - K_b) on L^2(0, inf), b < 0, with
    K_b(x, y) = int_0^inf (-Ai'(s+x+u) - b Ai(s+x+u)) g(s+y+u) du and
    g(y) = int_0^inf e^{b r} Ai(y - r) dr."""
    if not b < 0:
        raise ValueError("oracle needs b < 0")
    x, w = leggauss(nodes)
    x = (x + 1) * length / 2
    w = w * length / 2
    rho_len = 40.0 / abs(b)
    r, wr = leggauss(200)
    r = (r + 1) * rho_len / 2
    wr = wr * rho_len / 2

    def g(y):
        ai = special.airy(np.asarray(y)[..., None] - r)[0]
        return (ai * np.exp(b * r) * wr).sum(-1)

    # K(x_i, x_j) = sum_k wu_k h(s + x_i + u_k) g(s + x_j + u_k), u on the same grid
    h = lambda z: -special.airy(z)[1] - b * special.airy(z)[0]
    H = h(s + x[:, None] + x[None, :])          # (i, k)
    G = g(s + x[:, None] + x[None, :])          # (j, k)
    k = (H * w[None, :]) @ G.T
    sw = np.sqrt(w)
    return float(np.linalg.det(np.eye(nodes) - sw[:, None] * k * sw[None, :]))
