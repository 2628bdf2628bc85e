"""Geometric RSK on polygonal arrays, built from the local moves a and b.

Arrays live in linear space here (moves mix sums and reciprocals).  The
recursion peels outer indices shell by shell: the innermost shell is
transformed first, then each outer index (i, j) of the next shell is
absorbed by the composite move

    rho_{i,j} = a_{i,j} . b_{i-1,j-1} . ... . b_{i-k+1,j-k+1},   k = min(i, j),

whose rightmost factor acts first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .polymer import PolygonalDomain, WeightArray, build_domain, log_partition_table


class MoveError(ValueError):
    pass


@dataclass
class PolygonalArray:
    domain: PolygonalDomain
    values: dict

    @classmethod
    def from_log(cls, weights: WeightArray) -> "PolygonalArray":
        return cls(weights.domain, {c: math.exp(v) for c, v in zip(weights.domain.cells, weights.log_w)})

    @classmethod
    def constant(cls, domain: PolygonalDomain, value: float = 1.0) -> "PolygonalArray":
        return cls(domain, {c: float(value) for c in domain.cells})

    def copy(self) -> "PolygonalArray":
        return PolygonalArray(self.domain, dict(self.values))

    def __getitem__(self, cell) -> float:
        return self.values[tuple(cell)]

    def log_weights(self) -> WeightArray:
        return WeightArray(self.domain, np.log(np.array([self.values[c] for c in self.domain.cells])))

    def is_symmetric(self) -> bool:
        return self.domain.is_transpose_closed() and all(
            self.values[(i, j)] == self.values[(j, i)] for i, j in self.domain.cells)


@dataclass
class GrskOutput:
    t: PolygonalArray
    tau: dict                                   # q -> log tau_q
    border: dict                                # border cell -> log t
    trace: list = field(default_factory=list)   # applied moves, ("a"|"b", (i, j))
    flagged: list = field(default_factory=list)  # moves with a vanishing denominator

    def diagonal(self) -> list[float]:
        cells = sorted(c for c in self.t.domain.cells if c[0] == c[1])
        return [self.t.values[c] for c in cells]


# ------------------------------------------------------------------ moves

class _Engine:
    """Applies moves in place.  With ``mirror`` set, reads below the diagonal
    are redirected to the transpose so only the i <= j half is stored."""

    def __init__(self, values: dict, cells: set, mirror: bool = False):
        self.w = values
        self.cells = cells
        self.mirror = mirror
        self.trace: list = []
        self.flagged: list = []

    def get(self, i: int, j: int) -> float:
        if (i, j) not in self.cells:
            return 0.0
        if self.mirror and i > j:
            i, j = j, i
        return self.w[(i, j)]

    def incoming(self, i: int, j: int) -> float:
        if (i, j) == (1, 1):
            return 1.0    # w_{0,1} + w_{1,0} = 1
        return self.get(i - 1, j) + self.get(i, j - 1)

    def a(self, i: int, j: int) -> None:
        if (i, j) not in self.cells:
            raise MoveError(f"a-move at ({i}, {j}) outside the domain")
        s = self.incoming(i, j)
        if s == 0.0:
            self.flagged.append(("a", (i, j)))
        self.w[(i, j)] = self.w[(i, j)] * s
        self.trace.append(("a", (i, j)))

    def b(self, i: int, j: int) -> None:
        if (i, j) not in self.cells:
            raise MoveError(f"b-move at ({i}, {j}) outside the domain")
        if (i + 1, j + 1) not in self.cells:
            raise MoveError(f"b-move at border index ({i}, {j})")
        s = self.incoming(i, j)
        down, right = self.get(i + 1, j), self.get(i, j + 1)
        if s == 0.0 or down == 0.0 or right == 0.0:
            self.flagged.append(("b", (i, j)))
            raise MoveError(f"b-move at ({i}, {j}) has a vanishing denominator")
        self.w[(i, j)] = s / (self.w[(i, j)] * (1.0 / down + 1.0 / right))
        self.trace.append(("b", (i, j)))

    def rho(self, i: int, j: int) -> None:
        k = min(i, j)
        for s in range(k - 1, 0, -1):
            self.b(i - s, j - s)
        self.a(i, j)


def local_move_a(array: PolygonalArray, i: int, j: int) -> PolygonalArray:
    out = array.copy()
    _Engine(out.values, set(out.domain.cells)).a(i, j)
    return out


def local_move_b(array: PolygonalArray, i: int, j: int) -> PolygonalArray:
    out = array.copy()
    _Engine(out.values, set(out.domain.cells)).b(i, j)
    return out


# -------------------------------------------------------------- recursion

def _outer(cells: set) -> list[tuple[int, int]]:
    return [(i, j) for i, j in cells
            if (i + 1, j) not in cells and (i, j + 1) not in cells and (i + 1, j + 1) not in cells]


def shells(domain: PolygonalDomain) -> list[list[tuple[int, int]]]:
    """Outer-index shells, outermost first, each in row-major order."""
    cur = set(domain.cells)
    out = []
    while cur:
        ring = sorted(_outer(cur))
        if not ring:
            raise MoveError("domain has no outer index; it is not polygonal")
        out.append(ring)
        cur -= set(ring)
    return out


def _run(values: dict, domain: PolygonalDomain, mirror: bool,
         order: Callable[[list], list] | None) -> _Engine:
    if not domain.is_closed():
        raise MoveError("gRSK needs a down-left closed (polygonal) domain")
    rings = shells(domain)
    cells: set = set()
    engine = _Engine(values, cells, mirror)
    for ring in reversed(rings):
        cells.update(ring)          # the engine sees the growing domain
        seq = order(ring) if order else ring
        for i, j in seq:
            if mirror and i > j:
                continue
            engine.rho(i, j)
    return engine


def _package(t: PolygonalArray, engine: _Engine) -> GrskOutput:
    dom = t.domain
    tau: dict = {}
    for (i, j), v in t.values.items():
        tau[j - i] = tau.get(j - i, 0.0) + math.log(v)
    border = {c: math.log(t.values[c]) for c in dom.border_cells()}
    return GrskOutput(t, tau, border, engine.trace, engine.flagged)


def grsk(array: PolygonalArray, order: Callable[[list], list] | None = None) -> GrskOutput:
    """gRSK by literal shell recursion.  ``order`` may permute each shell's
    outer indices (default row-major)."""
    vals = dict(array.values)
    engine = _run(vals, array.domain, False, order)
    return _package(PolygonalArray(array.domain, vals), engine)


def grsk_symmetric(array: PolygonalArray) -> GrskOutput:
    """gRSK of a symmetric array, computed on the i <= j half and mirrored."""
    if not array.is_symmetric():
        raise MoveError("grsk_symmetric needs a symmetric array on a transpose-closed domain")
    half = {(i, j): v for (i, j), v in array.values.items() if i <= j}
    engine = _run(half, array.domain, True, None)
    full = {(i, j): half[(min(i, j), max(i, j))] for i, j in array.domain.cells}
    return _package(PolygonalArray(array.domain, full), engine)


# ----------------------------------------------------------- verification

@dataclass
class Tolerances:
    rel: float = 1e-10
    jacobian: float = 1e-5
    step: float = 1e-6
    max_jacobian_cells: int = 30


@dataclass
class CheckResult:
    name: str
    passed: bool
    error: float
    detail: str = ""


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def energy_sides(w: PolygonalArray, t: PolygonalArray) -> tuple[float, float]:
    lhs = sum(1.0 / v for v in w.values.values())
    rhs = 1.0 / t.values[(1, 1)]
    for (i, j), v in t.values.items():
        if (i, j) != (1, 1):
            rhs += (t.values.get((i - 1, j), 0.0) + t.values.get((i, j - 1), 0.0)) / v
    return lhs, rhs


def log_jacobian_det(array: PolygonalArray, symmetric: bool = False, h: float = 1e-6) -> float:
    """log |det| of u -> log gRSK(exp u) by central differences.

    In the symmetric case the coordinates are the i <= j entries and the map
    extends them symmetrically.
    """
    dom = array.domain
    coords = [c for c in dom.cells if not symmetric or c[0] <= c[1]]
    u0 = np.array([math.log(array.values[c]) for c in coords])

    def f(u):
        vals = {c: math.exp(x) for c, x in zip(coords, u)}
        if symmetric:
            vals = {(i, j): vals[(min(i, j), max(i, j))] for i, j in dom.cells}
            out = grsk_symmetric(PolygonalArray(dom, vals))
        else:
            out = grsk(PolygonalArray(dom, vals))
        return np.array([math.log(out.t.values[c]) for c in coords])

    jac = np.empty((len(coords), len(coords)))
    for k in range(len(coords)):
        e = np.zeros(len(coords))
        e[k] = h
        jac[:, k] = (f(u0 + e) - f(u0 - e)) / (2 * h)
    return float(np.linalg.slogdet(jac)[1])


def verify_grsk_properties(array: PolygonalArray, tol: Tolerances | None = None,
                           jacobian: bool = True) -> list[CheckResult]:
    """Check the gRSK identities on one array; failures are entries, not errors."""
    tol = tol or Tolerances()
    dom = array.domain
    sym = array.is_symmetric()
    out = grsk_symmetric(array) if sym else grsk(array)
    t = out.t
    res: list[CheckResult] = []

    lhs, rhs = energy_sides(array, t)
    err = _rel(lhs, rhs)
    res.append(CheckResult("energy", err <= tol.rel, err, f"{lhs!r} vs {rhs!r}"))

    table = log_partition_table(array.log_weights())
    errs = [abs(math.expm1(math.log(t.values[c]) - table[dom.index[c]])) for c in dom.border_cells()]
    err = max(errs)
    res.append(CheckResult("border-partition", err <= tol.rel, err, f"{len(errs)} border cells"))

    logw = {c: math.log(v) for c, v in array.values.items()}
    errs = []
    for n, m in dom.border_cells():
        block = sum(logw[(i, j)] for i in range(1, n + 1) for j in range(1, m + 1))
        errs.append(abs(math.expm1(block - out.tau[m - n])))
    for n, m in dom.outer_cells():
        col = sum(logw[(i, m)] for i in range(1, n + 1))
        row = sum(logw[(n, j)] for j in range(1, m + 1))
        lower = out.tau.get(m - n - 1, 0.0)
        upper = out.tau.get(m - n + 1, 0.0)
        errs.append(abs(math.expm1(col - (out.tau[m - n] - lower))))
        errs.append(abs(math.expm1(row - (out.tau[m - n] - upper))))
    err = max(errs)
    res.append(CheckResult("tau-products", err <= tol.rel, err, f"{len(errs)} identities"))

    if sym:
        diag = sorted(c[0] for c in dom.cells if c[0] == c[1])
        ell = len(diag)
        left = (ell // 2) * math.log(4.0) + sum(logw[(k, k)] for k in diag)
        right = sum((-1) ** (ell - k) * math.log(t.values[(k, k)]) for k in diag)
        err = abs(math.expm1(left - right))
        res.append(CheckResult("symmetric-diagonal", err <= tol.rel, err, f"diagonal length {ell}"))
        asym = max(abs(math.log(t.values[(i, j)]) - math.log(t.values[(j, i)])) for i, j in dom.cells)
        res.append(CheckResult("symmetry", asym == 0.0, asym))

    ncoords = sum(1 for c in dom.cells if not sym or c[0] <= c[1])
    if jacobian and ncoords <= tol.max_jacobian_cells:
        ld = log_jacobian_det(array, sym, tol.step)
        err = abs(math.expm1(ld))
        res.append(CheckResult("jacobian", err <= tol.jacobian, err, f"{ncoords} coordinates"))

    if out.flagged:
        res.append(CheckResult("denominators", False, float(len(out.flagged)), repr(out.flagged[:3])))
    return res


def random_array(domain: PolygonalDomain, rng: np.random.Generator, spread: float = 3.0,
                 symmetric: bool = False) -> PolygonalArray:
    """Log-uniform entries in [e^-spread, e^spread], clamped to [1e-6, 1e6]."""
    vals = {}
    for i, j in domain.cells:
        key = (min(i, j), max(i, j)) if symmetric else (i, j)
        if key not in vals:
            vals[key] = float(np.clip(math.exp(rng.uniform(-spread, spread)), 1e-6, 1e6))
        vals[(i, j)] = vals[key]
    return PolygonalArray(domain, {c: vals[c] for c in domain.cells})


def suite_domains(rng: np.random.Generator, count: int) -> list[tuple[PolygonalDomain, bool]]:
    """Mixed shapes for the identity suite: rectangles up to 5x7, staircase
    trapezoids and symmetric unions with n <= 4, m <= 3."""
    out = []
    for k in range(count):
        kind = k % 3
        if kind == 0:
            dom = build_domain("rectangle", int(rng.integers(1, 6)), int(rng.integers(1, 8)))
            out.append((dom, False))
        elif kind == 1:
            dom = build_domain("staircase", int(rng.integers(1, 5)), int(rng.integers(0, 4)))
            out.append((dom, False))
        else:
            dom = build_domain("symmetric-union", int(rng.integers(1, 5)), int(rng.integers(0, 4)))
            out.append((dom, True))
    return out
