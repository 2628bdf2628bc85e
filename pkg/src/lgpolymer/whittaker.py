"""Whittaker functions (gl_n and so_{2n+1}) and the T function by quadrature.

All integrals are taken in logarithmic coordinates z = exp(u), where the
measure dz/z becomes du and the integrands decay double-exponentially.  The
engine integrates exp(log_f(u)) over a box found by probing: the box grows
until the integrand on every face is below ``tail`` times the peak, then is
trimmed to the region that matters.  Composite Gauss-Legendre rules are run
at N and 2N nodes per dimension; the difference is the error estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .specialfn import ln_gamma

DEFAULT_NODES = {1: 96, 2: 64, 3: 40, 4: 32}
# minimum coarse-pass nodes per unit of box width in u
NODE_DENSITY = {1: 4.0, 2: 2.0, 3: 2.0, 4: 2.0}
PROBE_POINTS = {1: 241, 2: 81, 3: 31, 4: 15}
MAX_DIM = 4
CHUNK = 1 << 19


class CapabilityError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


@dataclass
class QuadratureSpec:
    method: str = "tensor-gauss"      # tensor-gauss | monte-carlo
    nodes: int | None = None          # per dimension, coarse pass; fine pass doubles it
    u_min: float = -12.0
    u_max: float = 12.0
    mc_samples: int = 200_000
    seed: int = 0
    panel: int = 16
    tail: float = 1e-16
    max_extend: int = 12

    def __post_init__(self):
        if self.method not in ("tensor-gauss", "monte-carlo"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if self.nodes is not None and self.nodes < 8:
            raise ValueError("need at least 8 nodes per dimension")
        if not (math.isfinite(self.u_min) and math.isfinite(self.u_max) and self.u_min < self.u_max):
            raise ValueError("truncation must be a finite interval")

    def doubled(self, dim: int) -> "QuadratureSpec":
        return QuadratureSpec(self.method, 2 * self.nodes_for(dim), self.u_min, self.u_max,
                              2 * self.mc_samples, self.seed, self.panel, self.tail, self.max_extend)

    def nodes_for(self, dim: int) -> int:
        return self.nodes or DEFAULT_NODES[dim]


@dataclass
class QuadResult:
    log_value: float
    rel_error: float
    nodes: int
    dim: int
    box: list = field(default_factory=list)

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


LogIntegrand = Callable[[np.ndarray], np.ndarray]


def _safe(log_f: LogIntegrand, pts: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = np.asarray(log_f(pts), dtype=float)
    return np.where(np.isnan(out), -np.inf, out)


def _grid(lo, hi, g):
    axes = [np.linspace(a, b, g) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return axes, np.stack([m.ravel() for m in mesh], axis=1)


def find_box(log_f: LogIntegrand, dim: int, spec: QuadratureSpec):
    lo = np.full(dim, spec.u_min, float)
    hi = np.full(dim, spec.u_max, float)
    g = PROBE_POINTS[dim]
    cut = math.log(spec.tail)
    for _ in range(spec.max_extend):
        axes, pts = _grid(lo, hi, g)
        vals = _safe(log_f, pts).reshape((g,) * dim)
        peak = vals.max()
        if not np.isfinite(peak):
            raise PreconditionError("integrand vanishes on the whole probe box")
        grown = False
        for d in range(dim):
            width = hi[d] - lo[d]
            first = np.take(vals, 0, axis=d).max()
            last = np.take(vals, g - 1, axis=d).max()
            if first > peak + cut:
                lo[d] -= max(width / 2, 6.0)
                grown = True
            if last > peak + cut:
                hi[d] += max(width / 2, 6.0)
                grown = True
        if not grown:
            break
    else:
        raise PreconditionError("integrand tail did not decay inside the extended box")
    # trim to the region within 1e-17 of the peak, keeping one probe step of margin
    keep = vals > peak + cut - 2.5
    new_lo, new_hi = lo.copy(), hi.copy()
    for d in range(dim):
        other = tuple(k for k in range(dim) if k != d)
        idx = np.nonzero(keep.any(axis=other) if other else keep)[0]
        new_lo[d] = axes[d][max(idx[0] - 1, 0)]
        new_hi[d] = axes[d][min(idx[-1] + 1, g - 1)]
    return new_lo, new_hi


def _rule(a: float, b: float, nodes: int, panel: int):
    q = min(panel, nodes)
    npan = max(1, nodes // q)
    x, w = leggauss(q)
    edges = np.linspace(a, b, npan + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, np.log(wts)


def _tensor(log_f: LogIntegrand, lo, hi, nodes: Sequence[int], panel: int) -> float:
    dim = len(lo)
    rules = [_rule(lo[d], hi[d], nodes[d], panel) for d in range(dim)]
    pts_axes = [r[0] for r in rules]
    lw_axes = [r[1] for r in rules]
    rest_pts = np.stack([m.ravel() for m in np.meshgrid(*pts_axes[1:], indexing="ij")], axis=1) \
        if dim > 1 else np.empty((1, 0))
    rest_lw = sum(np.meshgrid(*lw_axes[1:], indexing="ij")).ravel() if dim > 1 else np.zeros(1)
    per = max(1, CHUNK // len(rest_lw))
    parts = []
    first, first_lw = pts_axes[0], lw_axes[0]
    for s in range(0, len(first), per):
        head = first[s:s + per]
        pts = np.concatenate([np.repeat(head, len(rest_lw))[:, None],
                              np.tile(rest_pts, (len(head), 1))], axis=1)
        lw = np.repeat(first_lw[s:s + per], len(rest_lw)) + np.tile(rest_lw, len(head))
        vals = _safe(log_f, pts) + lw
        top = vals.max()
        if np.isfinite(top):
            parts.append(top + math.log(np.exp(vals - top).sum()))
    if not parts:
        return -math.inf
    parts = np.array(parts)
    top = parts.max()
    return float(top + math.log(np.exp(parts - top).sum()))


def integrate(log_f: LogIntegrand, dim: int, spec: QuadratureSpec | None = None) -> QuadResult:
    """Integral of exp(log_f(u)) du over R^dim."""
    spec = spec or QuadratureSpec()
    if dim == 0:
        return QuadResult(float(_safe(log_f, np.empty((1, 0)))[0]), 0.0, 0, 0)
    if dim > MAX_DIM:
        raise CapabilityError(f"integral dimension {dim} exceeds the cap of {MAX_DIM}")
    lo, hi = find_box(log_f, dim, spec)
    box = [(float(a), float(b)) for a, b in zip(lo, hi)]
    if spec.method == "monte-carlo":
        return _monte_carlo(log_f, lo, hi, spec, box)
    base = spec.nodes_for(dim)
    nodes = []
    for a, b in box:
        want = max(base, math.ceil((b - a) * NODE_DENSITY[dim]))
        nodes.append(spec.panel * math.ceil(want / spec.panel))
    coarse = _tensor(log_f, lo, hi, nodes, spec.panel)
    fine = _tensor(log_f, lo, hi, [2 * k for k in nodes], spec.panel)
    err = abs(math.expm1(coarse - fine))
    return QuadResult(fine, err, 2 * max(nodes), dim, box)


def _monte_carlo(log_f, lo, hi, spec, box) -> QuadResult:
    rng = np.random.default_rng(spec.seed)
    dim = len(lo)
    pts = rng.uniform(lo, hi, size=(spec.mc_samples, dim))
    vals = _safe(log_f, pts)
    top = vals.max()
    y = np.exp(vals - top)
    vol = float(np.prod(hi - lo))
    mean = y.mean()
    se = y.std(ddof=1) / math.sqrt(len(y))
    return QuadResult(top + math.log(mean * vol), se / mean, spec.mc_samples, dim, box)


# ------------------------------------------------------------- integrands

def gl_variables(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(1, n) for j in range(1, i + 1)]


def gl_log_integrand(alpha: Sequence[float], logx, logz) -> np.ndarray:
    """log of type(z)^alpha * exp(-sum (z_{i+1,j+1} + z_{i-1,j}) / z_{i,j})."""
    n = len(alpha)
    L = {c: logz[:, k] for k, c in enumerate(gl_variables(n))}
    for j in range(1, n + 1):
        L[(n, j)] = logx[:, j - 1]
    out = 0.0
    for i in range(1, n + 1):
        row = sum(L[(i, j)] for j in range(1, i + 1))
        prev = sum(L[(i - 1, j)] for j in range(1, i)) if i > 1 else 0.0
        out = out + alpha[i - 1] * (row - prev)
    for i in range(1, n + 1):
        for j in range(1, i + 1):
            for nb in ((i + 1, j + 1), (i - 1, j)):
                if nb in L:
                    out = out - np.exp(L[nb] - L[(i, j)])
    return out


def so_variables(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(1, 2 * n) for j in range(1, (i + 1) // 2 + 1)]


def so_log_integrand(alpha: Sequence[float], logx, logz) -> np.ndarray:
    """log of type(z)^{alpha+-} * exp(-sum z_{i+1,j+1}/z_{i,j} + z_{i,j}/z_{i+1,j}),
    with z_{i,j} = 1 beyond the half-triangle."""
    n = len(alpha)
    L = {c: logz[:, k] for k, c in enumerate(so_variables(n))}
    for j in range(1, n + 1):
        L[(2 * n, j)] = logx[:, j - 1]

    def get(i, j):
        return L[(i, j)] if j <= (i + 1) // 2 else 0.0

    signed = [s * a for a in alpha for s in (1.0, -1.0)]
    out = 0.0
    for i in range(1, 2 * n + 1):
        row = sum(L[(i, j)] for j in range(1, (i + 1) // 2 + 1))
        prev = sum(L[(i - 1, j)] for j in range(1, i // 2 + 1)) if i > 1 else 0.0
        out = out + signed[i - 1] * (row - prev)
    for i in range(1, 2 * n):
        for j in range(1, (i + 1) // 2 + 1):
            out = out - np.exp(get(i + 1, j + 1) - L[(i, j)]) - np.exp(L[(i, j)] - get(i + 1, j))
    return out


def t_variables(n: int, m: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(1, n + 1) for j in range(i, i + m)]


def t_log_integrand(alpha_circ: float, beta: Sequence[float], r: float, logx, logt) -> np.ndarray:
    """log integrand of the T function; t_{i,i+m} is pinned to x_i."""
    n = logx.shape[1]
    m = len(beta)
    L = {c: logt[:, k] for k, c in enumerate(t_variables(n, m))}
    for i in range(1, n + 1):
        L[(i, i + m)] = logx[:, i - 1]
    lr = math.log(r)
    out = alpha_circ * sum((-1) ** (n - i) * (lr + L[(i, i)]) for i in range(1, n + 1))
    for j in range(1, m + 1):
        out = out + beta[j - 1] * sum(L[(i, i + j)] - L[(i, i + j - 1)] for i in range(1, n + 1))
    out = out - r * np.exp(L[(1, 1)])
    for i in range(2, n + 1):
        for j in range(i, i + m):
            out = out - np.exp(L[(i, j)] - L[(i - 1, j)])
    for i in range(1, n + 1):
        for j in range(i, i + m):
            out = out - np.exp(L[(i, j + 1)] - L[(i, j)])
    return out


# ------------------------------------------------------------ public API

def _check_x(x) -> np.ndarray:
    x = np.asarray(x, float)
    if x.ndim != 1 or np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise PreconditionError("evaluation point must be a vector of positive reals")
    return x


def whittaker_gl(alpha: Sequence[float], x: Sequence[float], spec: QuadratureSpec | None = None) -> QuadResult:
    """Psi^{gl_n}_alpha(x) for n <= 3."""
    alpha = [float(a) for a in alpha]
    x = _check_x(x)
    n = len(alpha)
    if len(x) != n:
        raise PreconditionError("alpha and x must have the same length")
    if n > 3:
        raise CapabilityError(f"gl_{n} Whittaker integral has dimension {n * (n - 1) // 2} > 3")
    logx = np.log(x)[None, :]
    if n == 1:
        return QuadResult(alpha[0] * float(logx[0, 0]), 0.0, 0, 0)
    return integrate(lambda u: gl_log_integrand(alpha, logx, u), n * (n - 1) // 2, spec)


def whittaker_so(alpha: Sequence[float], x: Sequence[float], spec: QuadratureSpec | None = None) -> QuadResult:
    """Psi^{so_{2n+1}}_alpha(x) for n <= 2."""
    alpha = [float(a) for a in alpha]
    x = _check_x(x)
    n = len(alpha)
    if len(x) != n:
        raise PreconditionError("alpha and x must have the same length")
    if n > 2:
        raise CapabilityError(f"so_{2 * n + 1} Whittaker integral has dimension {n * n} > 4")
    logx = np.log(x)[None, :]
    return integrate(lambda u: so_log_integrand(alpha, logx, u), n * n, spec)


@dataclass(frozen=True)
class TFunctionQuery:
    alpha_circ: float
    beta: tuple[float, ...]
    r: float
    x: tuple[float, ...]

    def __post_init__(self):
        if not self.r > 0:
            raise PreconditionError("r must be positive")


def t_function(query: TFunctionQuery, spec: QuadratureSpec | None = None) -> QuadResult:
    x = _check_x(query.x)
    n, m = len(x), len(query.beta)
    logx = np.log(x)[None, :]
    if m == 0:
        val = t_log_integrand(query.alpha_circ, (), query.r, logx, np.empty((1, 0)))
        return QuadResult(float(val[0]), 0.0, 0, 0)
    if n * m > MAX_DIM:
        raise CapabilityError(f"T function integral has dimension {n * m} > {MAX_DIM}")
    return integrate(lambda u: t_log_integrand(query.alpha_circ, query.beta, query.r, logx, u), n * m, spec)


# ----------------------------------------------------- transform identities

@dataclass
class TransformReport:
    identity: str
    params: dict
    lhs: float
    rhs: float
    discrepancy: float
    lhs_error: float
    nodes: int
    dim: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.discrepancy <= self.tol

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def _gamma_sum(args) -> float:
    return sum(ln_gamma(a) for a in args)


def verify_transform(identity: str, params: dict, spec: QuadratureSpec | None = None,
                     tol: float = 1e-3) -> TransformReport:
    """Compare a transform identity's quadrature side with its Gamma product.

    stade:          params alpha, alpha_circ, r
    t-transform:    params alpha, alpha_circ, beta, r
    so-transform:   params alpha (so parameters), lam (real slice), mu
    """
    alpha = [float(a) for a in params["alpha"]]
    n = len(alpha)
    if identity in ("stade", "t-transform"):
        ac = float(params["alpha_circ"])
        beta = [float(b) for b in params.get("beta", ())] if identity == "t-transform" else []
        r = float(params.get("r", 1.0))
        if r <= 0:
            raise PreconditionError("r must be positive")
        for i in range(n):
            if not alpha[i] + ac > 0:
                raise PreconditionError(f"alpha_{i + 1} + alpha_circ must be > 0")
            for j in range(i + 1, n):
                if not alpha[i] + alpha[j] > 0:
                    raise PreconditionError(f"alpha_{i + 1} + alpha_{j + 1} must be > 0")
            for k, b in enumerate(beta):
                if not alpha[i] + b > 0:
                    raise PreconditionError(f"alpha_{i + 1} + beta_{k + 1} must be > 0")
        m = len(beta)
        ng, nt = n * (n - 1) // 2, n * m
        dim = n + nt + ng
        if dim > MAX_DIM:
            raise CapabilityError(f"{identity} at n={n}, m={m} needs a {dim}-dimensional integral")

        def log_f(u):
            logx, logt, logz = u[:, :n], u[:, n:n + nt], u[:, n + nt:]
            return t_log_integrand(ac, beta, r, logx, logt) + gl_log_integrand(alpha, logx, logz)

        res = integrate(log_f, dim, spec)
        log_rhs = -sum(alpha) * math.log(r) + _gamma_sum(
            [a + ac for a in alpha]
            + [alpha[i] + alpha[j] for i in range(n) for j in range(i + 1, n)]
            + [a + b for a in alpha for b in beta])
    elif identity == "so-transform":
        lam = [float(v) for v in params["lam"]]
        mu = float(params["mu"])
        if len(lam) != n:
            raise PreconditionError("lam and alpha must have the same length")
        if not mu > max(abs(a) for a in alpha):
            raise PreconditionError("need mu > max |alpha_j|")
        for l in lam:
            if not mu - l > max(abs(a) for a in alpha):
                raise PreconditionError("real slice needs mu - lam_i > max |alpha_j| for convergence")
        ns, ng = n * n, n * (n - 1) // 2
        dim = n + ns + ng
        if dim > MAX_DIM:
            raise CapabilityError(f"so-transform at n={n} needs a {dim}-dimensional integral")

        def log_f(u):
            logx, logs, logz = u[:, :n], u[:, n:n + ns], u[:, n + ns:]
            return (-mu * logx.sum(axis=1) + so_log_integrand(alpha, logx, logs)
                    + gl_log_integrand(lam, logx, logz))

        res = integrate(log_f, dim, spec)
        log_rhs = _gamma_sum([mu - l + s * a for l in lam for a in alpha for s in (1, -1)])
        log_rhs -= _gamma_sum([2 * mu - lam[i] - lam[j] for i in range(n) for j in range(i + 1, n)])
    else:
        raise PreconditionError(f"unknown identity {identity!r}")

    disc = abs(math.expm1(res.log_value - log_rhs))
    return TransformReport(identity, dict(params), math.exp(res.log_value), math.exp(log_rhs),
                           disc, res.rel_error, res.nodes, res.dim, tol)
