"""Phase-transition constants and the limit laws (GUE Tracy-Widom, BBP, Gaussian).

F_GUE and F_BBP are Fredholm determinants det(1 + K) on a wedge contour C
(from e^{5 pi i/4} inf to e^{3 pi i/4} inf through c0) with

    K(v, v') = 1/(2 pi i) int_D exp(w^3/3 - v^3/3 + t v - t w)
               / ((v - w)(w - v')) prod_k (w - b_k)/(v - b_k) dw,

D a wedge from e^{-pi i/4} inf to e^{pi i/4} inf through d0 > c0.  K factors
as A B, so the determinant is computed as det(I + B A) on the D nodes.
The determinant on L^2(C) is taken with respect to dv / (2 pi i), the
measure under which det(1 + K) equals det(1 - K_Airy) on L^2(t, inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .specialfn import polygamma


class ConfigError(ValueError):
    pass


class AccuracyError(RuntimeError):
    pass


# -------------------------------------------------------------- constants

def solve_theta_c(theta: float, p: float, max_iter: int = 200) -> float:
    """Root in (0, theta) of psi'(x) - p psi'(theta - x), by bisection."""
    if not (theta > 0 and p > 0):
        raise ConfigError("need theta > 0 and p > 0")
    lo, hi = 0.0, float(theta)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g = polygamma(1, mid) - p * polygamma(1, theta - mid)
        if g == 0:
            return mid
        if g > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class AsymptoticConfig:
    theta: float
    theta0: float
    n: int = 1
    m: int = 1
    p: float | None = None

    @property
    def ratio(self) -> float:
        return self.p if self.p is not None else self.m / self.n


@dataclass(frozen=True)
class PhaseConstants:
    theta_c: float
    f: float
    f_bar: float | None
    sigma: float
    gaussian_scale: float | None     # sqrt(psi'(theta0) - p psi'(theta - theta0))


def phase_constants(config: AsymptoticConfig) -> PhaseConstants:
    """Constants of the scaling regime.  f_bar and the Gaussian scale need
    0 < theta0 < theta and are None at the homogeneous boundary theta0 = theta."""
    th, th0, p = config.theta, config.theta0, config.ratio
    if not 0 < th0 <= th:
        raise ConfigError(f"theta0 = {th0} must lie in (0, theta]")
    tc = solve_theta_c(th, p)
    f = -polygamma(0, tc) - p * polygamma(0, th - tc)
    s3 = (-polygamma(2, tc) - p * polygamma(2, th - tc)) / 2
    sigma = s3 ** (1 / 3)
    f_bar = scale = None
    if 0 < th0 < th:
        f_bar = -polygamma(0, th0) - p * polygamma(0, th - th0)
        v = polygamma(1, th0) - p * polygamma(1, th - th0)
        scale = math.sqrt(v) if v > 0 else None
    return PhaseConstants(tc, f, f_bar, sigma, scale)


def f_bar(theta: float, theta0: float, p: float) -> float:
    if not 0 < theta0 < theta:
        raise ConfigError("f_bar needs 0 < theta0 < theta")
    return -polygamma(0, theta0) - p * polygamma(0, theta - theta0)


# ------------------------------------------------------------ limit laws

@dataclass(frozen=True)
class FredholmSpec:
    c0: float | None = None     # None: -1 for GUE, max(-1, max(b) + 1/2) for BBP
    gap: float = 0.5            # d0 = c0 + gap
    L: float = 12.0
    nodes: int = 128            # Gauss-Legendre nodes per leg
    check: bool = True          # redo with doubled nodes and compare
    check_tol: float = 1e-7
    max_nodes: int = 512        # node doubling stops here

    def anchors(self, b: Sequence[float]) -> tuple[float, float]:
        if self.c0 is not None:
            c0 = self.c0
        elif len(b):
            c0 = max(-1.0, max(b) + 0.5)
        else:
            c0 = -1.0
        if len(b) and not c0 > max(b):
            raise ConfigError(f"contour anchor c0 = {c0} must lie right of every b_k (max {max(b)})")
        if not self.gap > 0:
            raise ConfigError("D must lie strictly right of C")
        return c0, c0 + self.gap


def _wedge(anchor: float, angle: float, L: float, nodes: int):
    """Nodes and signed complex weights of the contour anchor + s e^{+-i angle},
    running from the lower ray inward and out along the upper ray."""
    s, w = leggauss(nodes)
    s = (s + 1) * L / 2
    w = w * L / 2
    up = np.exp(1j * angle)
    down = np.exp(-1j * angle)
    pts = np.concatenate([anchor + s * down, anchor + s * up])
    wts = np.concatenate([-w * down, w * up])
    return pts, wts


def _det(t: float, b: Sequence[float], c0: float, d0: float, L: float, nodes: int) -> complex:
    v, dv = _wedge(c0, 3 * math.pi / 4, L, nodes)
    w, dw = _wedge(d0, math.pi / 4, L, nodes)
    b = np.asarray(b, float)
    # A(v, w) on C x D and B(w, v') on D x C
    log_a = (w[None, :] ** 3 / 3 - t * w[None, :]) - (v[:, None] ** 3 / 3 - t * v[:, None])
    if b.size:
        log_a = log_a + np.log(w[None, :, None] - b).sum(-1) - np.log(v[:, None, None] - b).sum(-1)
    A = np.exp(log_a) / (v[:, None] - w[None, :])
    B = 1.0 / (w[:, None] - v[None, :])
    M = (dw / (2j * math.pi))[:, None] * B * (dv / (2j * math.pi))[None, :]
    return np.linalg.det(np.eye(len(w)) + M @ A)


def _fredholm(t: float, b: Sequence[float], spec: FredholmSpec) -> float:
    """Nystrom determinant; with ``check`` set, nodes are doubled until two
    successive values agree to check_tol, and the finer value is returned."""
    c0, d0 = spec.anchors(b)
    nodes = spec.nodes
    val = _det(t, b, c0, d0, spec.L, nodes)
    if spec.check:
        cap = max(spec.max_nodes, 2 * spec.nodes)
        while True:
            ref = _det(t, b, c0, d0, spec.L, 2 * nodes)
            gap = abs(ref - val)
            nodes, val = 2 * nodes, ref
            if gap <= spec.check_tol:
                break
            if 2 * nodes > cap:
                raise AccuracyError(f"determinant moved by {gap:.2e} under node doubling at t={t} "
                                    f"with {nodes} nodes per leg")
    return float(min(1.0, max(0.0, val.real)))


def f_gue(t: float, spec: FredholmSpec | None = None) -> float:
    return _fredholm(float(t), (), spec or FredholmSpec())


def f_bbp(t: float, b: Sequence[float], spec: FredholmSpec | None = None) -> float:
    b = [float(x) for x in b]
    if not all(math.isfinite(x) for x in b):
        raise ConfigError("BBP parameters must be finite")
    return _fredholm(float(t), b, spec or FredholmSpec())


def gaussian_cdf(t: float) -> float:
    return 0.5 * math.erfc(-t / math.sqrt(2.0))


class TabulatedCdf:
    """Monotone piecewise-linear interpolation of a CDF on a fine grid;
    0 left of the grid and 1 right of it."""

    def __init__(self, func, lo: float = -8.0, hi: float = 6.0, step: float = 0.02):
        self.t = np.arange(lo, hi + step / 2, step)
        vals = np.array([func(x) for x in self.t])
        self.F = np.maximum.accumulate(np.clip(vals, 0.0, 1.0))

    def __call__(self, x):
        return np.interp(x, self.t, self.F, left=0.0, right=1.0)


def gue_cdf_table(lo: float = -8.0, hi: float = 6.0, step: float = 0.02,
                  spec: FredholmSpec | None = None, check_every: int = 25) -> TabulatedCdf:
    """F_GUE tabulated on a grid; the node-doubling check runs on every
    ``check_every``-th point rather than all of them."""
    spec = spec or FredholmSpec()
    fast = FredholmSpec(spec.c0, spec.gap, spec.L, spec.nodes, False, spec.check_tol)
    counter = iter(range(10 ** 9))

    def func(x):
        return f_gue(x, spec if next(counter) % check_every == 0 else fast)

    return TabulatedCdf(func, lo, hi, step)
