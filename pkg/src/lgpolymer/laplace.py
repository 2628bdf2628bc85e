"""Laplace transform E[exp(-r Z)] of the point-to-line partition function:
Mellin-Barnes contour integrals over (mu + iR)^n, and a Monte Carlo estimator.

The contour integrand is

    r^{sum(alpha - lam)} prod_{i,j} Gamma(lam_i - alpha_j)
        prod_i prod_{a in hat} Gamma(lam_i + a) / Gamma(alpha_i + a)  s_n(lam)

where hat = (alpha_circ, alpha, beta).  The trapezoid variant builds the
three Gamma groups separately; the full-space variant loops over the
concatenated vector.  All Gamma products are summed in log space and
exponentiated once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .polymer import ModelSpec, ParameterSet, simulate_log_partition
from .specialfn import complex_ln_gamma, ln_gamma

VARIANTS = ("trapezoid-contour", "fullspace-contour")


class QueryError(ValueError):
    pass


class AccuracyError(RuntimeError):
    pass


def sklyanin_weight(lam) -> complex:
    """(2 pi i)^{-n} (n!)^{-1} prod_{j != k} 1/Gamma(lam_j - lam_k)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    n = len(lam)
    log_w = -n * math.log(2 * math.pi) - math.lgamma(n + 1)
    out = complex(math.exp(log_w)) * (1j) ** (-n)
    acc = 0j
    for j in range(n):
        for k in range(n):
            if j == k:
                continue
            d = lam[j] - lam[k]
            if d.imag == 0 and d.real <= 0 and d.real == round(d.real):
                return 0j     # 1/Gamma vanishes at the poles
            acc -= complex_ln_gamma(d)
    return out * complex(np.exp(acc))


@dataclass(frozen=True)
class LaplaceQuery:
    r: float
    params: ParameterSet
    mu: float | None = None
    variant: str = "trapezoid-contour"

    def __post_init__(self):
        if not self.r > 0:
            raise QueryError("r must be positive")
        if self.variant not in VARIANTS:
            raise QueryError(f"unknown variant {self.variant!r}")
        n, m = self.params.n, self.params.m
        if self.variant == "trapezoid-contour" and m < n - 1:
            raise QueryError(f"trapezoid contour formula needs m >= n - 1, got n={n}, m={m}")
        if self.mu is None:
            object.__setattr__(self, "mu", max(self.params.alpha) + 0.5)
        bounds = self.constraints()
        name, bound = max(bounds.items(), key=lambda kv: kv[1])
        if not self.mu > bound:
            raise QueryError(f"mu = {self.mu} must exceed {name} = {bound}")

    def constraints(self) -> dict:
        """Lower bounds on mu: right of the poles of Gamma(lam - alpha_j) and of
        Gamma(lam + hat_j)."""
        return {"max alpha_i": max(self.params.alpha), "max -hat_j": max(-a for a in self.params.hat())}

    def binding_constraint(self) -> str:
        b = self.constraints()
        return max(b, key=b.get)


@dataclass(frozen=True)
class ContourGrid:
    T: float = 40.0
    nodes_per_panel: int = 32
    panel_width: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise QueryError("truncation T must be positive")

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        npan = max(1, int(round(2 * self.T / self.panel_width)))
        x, w = leggauss(self.nodes_per_panel)
        edges = np.linspace(-self.T, self.T, npan + 1)
        half = np.diff(edges) / 2
        mid = (edges[:-1] + edges[1:]) / 2
        y = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        wy = (half[:, None] * w[None, :]).ravel()
        return y, wy


@dataclass
class ContourResult:
    value: float
    imag: float
    tail: float
    nodes: int
    binding: str


def _log_factor_trapezoid(lam: np.ndarray, p: ParameterSet, r: float) -> np.ndarray:
    """Per-variable log factor, three Gamma groups kept apart."""
    out = -lam * math.log(r)
    for a in p.alpha:
        out = out + complex_ln_gamma(lam - a)
    out = out + complex_ln_gamma(lam + p.alpha_circ)
    for a in p.alpha:
        out = out + complex_ln_gamma(lam + a)
    for b in p.beta:
        out = out + complex_ln_gamma(lam + b)
    return out


def _log_const_trapezoid(p: ParameterSet, r: float) -> float:
    c = sum(p.alpha) * math.log(r)
    for ai in p.alpha:
        c -= ln_gamma(ai + p.alpha_circ)
        c -= sum(ln_gamma(ai + aj) for aj in p.alpha)
        c -= sum(ln_gamma(ai + b) for b in p.beta)
    return c


def _log_factor_fullspace(lam: np.ndarray, p: ParameterSet, r: float) -> np.ndarray:
    hat = p.hat()
    out = -lam * math.log(r)
    for a in p.alpha:
        out = out + complex_ln_gamma(lam - a)
    for a in hat:
        out = out + complex_ln_gamma(lam + a)
    return out


def _log_const_fullspace(p: ParameterSet, r: float) -> float:
    hat = p.hat()
    return sum(p.alpha) * math.log(r) - sum(ln_gamma(ai + a) for ai in p.alpha for a in hat)


def contour_integrand(query: LaplaceQuery, lam) -> np.ndarray:
    """Integrand (including s_n) at points lam of shape (k, n); n <= 2."""
    lam = np.atleast_2d(np.asarray(lam, dtype=complex))
    p = query.params
    if query.variant == "trapezoid-contour":
        f, c = _log_factor_trapezoid, _log_const_trapezoid(p, query.r)
    else:
        f, c = _log_factor_fullspace, _log_const_fullspace(p, query.r)
    total = np.full(lam.shape[0], c, dtype=complex)
    for i in range(lam.shape[1]):
        total = total + f(lam[:, i], p, query.r)
    s = np.array([sklyanin_weight(row) for row in lam])
    return np.exp(total) * s


def laplace_contour(query: LaplaceQuery, grid: ContourGrid | None = None, tail_tol: float = 1e-14,
                    imag_tol: float = 1e-8) -> ContourResult:
    """E[exp(-r Z)] by Gauss-Legendre quadrature along mu + i[-T, T] per variable."""
    grid = grid or ContourGrid()
    n = query.params.n
    if n > 2:
        raise QueryError("contour quadrature is capped at n = 2")
    y, wy = grid.nodes()
    lam = query.mu + 1j * y
    p = query.params
    if query.variant == "trapezoid-contour":
        g = np.exp(_log_factor_trapezoid(lam, p, query.r) + _log_const_trapezoid(p, query.r) / n)
    else:
        g = np.exp(_log_factor_fullspace(lam, p, query.r) + _log_const_fullspace(p, query.r) / n)
    # d lam = i dy per variable; the prefactor of s_n is (2 pi i)^{-n} / n!
    pref = (1j) ** n * (2j * math.pi) ** (-n) / math.factorial(n)
    if n == 1:
        vals = g * wy
        total = pref * vals.sum()
        edge = max(abs(g[0]), abs(g[-1]))
        peak = np.abs(g).max()
    else:
        # on the vertical line lam_1 - lam_2 = i y, and 1/(Gamma(iy) Gamma(-iy)) = y sinh(pi y) / pi
        d = y[:, None] - y[None, :]
        coupling = d * np.sinh(math.pi * d) / math.pi
        gw = g * wy
        total = pref * (gw[:, None] * coupling * gw[None, :]).sum()
        mag = np.abs(g[:, None] * coupling * g[None, :])
        peak = mag.max()
        edge = max(mag[0].max(), mag[-1].max(), mag[:, 0].max(), mag[:, -1].max())
    tail = float(edge / peak)
    if tail > tail_tol:
        raise AccuracyError(f"integrand at |Im lam| = T is {tail:.2e} of its peak; increase T")
    val, im = float(total.real), float(total.imag)
    if abs(im) > imag_tol * abs(val):
        raise AccuracyError(f"imaginary residual {im:.2e} exceeds {imag_tol} x value {val:.3e}")
    return ContourResult(val, im, tail, len(y) ** n, query.binding_constraint())


# ------------------------------------------------------------ Monte Carlo

def laplace_estimate(log_z: np.ndarray, r: float) -> tuple[float, float]:
    """Sample mean and standard error of exp(-r Z) from log Z samples."""
    log_z = np.asarray(log_z, float)
    if r == 0:
        return 1.0, 0.0
    with np.errstate(over="ignore"):
        y = np.exp(-r * np.exp(log_z))
    if len(y) < 2:
        return float(y.mean()), 0.0
    return float(y.mean()), float(y.std(ddof=1) / math.sqrt(len(y)))


def laplace_mc(model: ModelSpec, r: float, replicas: int, rng: np.random.Generator,
               chunk: int = 65536) -> tuple[float, float]:
    if replicas < 100:
        raise QueryError("need at least 100 replicas")
    field = model.field()
    parts = []
    done = 0
    while done < replicas:
        k = min(chunk, replicas - done)
        parts.append(simulate_log_partition(field, rng, k))
        done += k
    return laplace_estimate(np.concatenate(parts), r)
