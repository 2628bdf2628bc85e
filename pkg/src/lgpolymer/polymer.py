"""Lattice domains, parameter schemes, inverse-gamma weights and log-space
partition functions.

Cells are 1-based pairs (i, j).  Every domain stores its cells in
anti-diagonal order (sorted by i + j, then i), and all per-cell arrays
(theta, log-weights) are aligned with that order.  The dynamic program walks
the anti-diagonals; only the previous diagonal is kept, so memory stays
O(replicas * n) even for large domains.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

KINDS = ("rectangle", "trapezoid", "symmetric-union", "stationary-quadrant", "staircase", "custom")
LOG2 = math.log(2.0)
PATH_COUNT_MAX_CELLS = 24


class DomainError(ValueError):
    pass


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class _Diagonal:
    level: int            # i + j
    cells: np.ndarray     # global cell indices, shape (k,)
    up: np.ndarray        # position of (i-1, j) in previous diagonal, or len(prev)
    left: np.ndarray      # position of (i, j-1) in previous diagonal, or len(prev)


class PolygonalDomain:
    """A finite set of lattice cells containing (1, 1)."""

    def __init__(self, cells: Iterable[tuple[int, int]], kind: str = "custom", n: int = 0, m: int = 0):
        if kind not in KINDS:
            raise DomainError(f"unknown domain kind {kind!r}")
        uniq = sorted(set((int(i), int(j)) for i, j in cells), key=lambda c: (c[0] + c[1], c[0]))
        if not uniq or uniq[0] != (1, 1):
            raise DomainError("domain must contain the cell (1, 1)")
        if any(i < 1 or j < 1 for i, j in uniq):
            raise DomainError("cell indices are 1-based")
        self.kind = kind
        self.n = n
        self.m = m
        self.cells: tuple[tuple[int, int], ...] = tuple(uniq)
        self.index = {c: k for k, c in enumerate(self.cells)}
        self._diagonals: list[_Diagonal] | None = None

    def __len__(self) -> int:
        return len(self.cells)

    def __contains__(self, cell) -> bool:
        return tuple(cell) in self.index

    def __iter__(self):
        return iter(self.cells)

    def __eq__(self, other) -> bool:
        return isinstance(other, PolygonalDomain) and set(self.cells) == set(other.cells)

    def __hash__(self) -> int:
        return hash(frozenset(self.cells))

    def __repr__(self) -> str:
        return f"PolygonalDomain(kind={self.kind!r}, n={self.n}, m={self.m}, cells={len(self)})"

    def is_closed(self) -> bool:
        """Down-left closure: (i+1, j) or (i, j+1) present implies (i, j) present."""
        for i, j in self.cells:
            if i > 1 and (i - 1, j) not in self.index:
                return False
            if j > 1 and (i, j - 1) not in self.index:
                return False
        return True

    def is_transpose_closed(self) -> bool:
        return all((j, i) in self.index for i, j in self.cells)

    def transpose_index(self) -> np.ndarray:
        return np.array([self.index[(j, i)] for i, j in self.cells])

    def is_border(self, i: int, j: int) -> bool:
        return (i, j) in self.index and (i + 1, j + 1) not in self.index

    def is_outer(self, i: int, j: int) -> bool:
        return (i, j) in self.index and not any(
            c in self.index for c in ((i + 1, j), (i, j + 1), (i + 1, j + 1)))

    def border_cells(self) -> list[tuple[int, int]]:
        return [c for c in self.cells if self.is_border(*c)]

    def outer_cells(self) -> list[tuple[int, int]]:
        return sorted(c for c in self.cells if self.is_outer(*c))

    def without(self, cells: Iterable[tuple[int, int]]) -> "PolygonalDomain":
        drop = set(cells)
        return PolygonalDomain([c for c in self.cells if c not in drop], kind="custom")

    @property
    def diagonals(self) -> list[_Diagonal]:
        if self._diagonals is None:
            self._diagonals = self._plan()
        return self._diagonals

    def _plan(self) -> list[_Diagonal]:
        groups: dict[int, list[int]] = {}
        for k, (i, j) in enumerate(self.cells):
            groups.setdefault(i + j, []).append(k)
        out = []
        prev_pos: dict[tuple[int, int], int] = {}
        prev_len = 0
        for level in sorted(groups):
            ks = groups[level]
            up = np.array([prev_pos.get((self.cells[k][0] - 1, self.cells[k][1]), prev_len) for k in ks])
            left = np.array([prev_pos.get((self.cells[k][0], self.cells[k][1] - 1), prev_len) for k in ks])
            if level > 2 and np.all(up == prev_len) and np.all(left == prev_len):
                raise DomainError(f"anti-diagonal {level} is unreachable from (1, 1)")
            out.append(_Diagonal(level, np.array(ks), up, left))
            prev_pos = {self.cells[k]: p for p, k in enumerate(ks)}
            prev_len = len(ks)
        return out


def build_domain(kind: str, n: int, m: int) -> PolygonalDomain:
    """Construct one of the named domains.

    rectangle / stationary-quadrant: {1..n} x {1..m}
    trapezoid: {(i, j): 1 <= i <= n, i <= j <= 2n + m - i + 1}
    symmetric-union: trapezoid united with its transpose
    staircase: partition shape with row i of length 2n + m - i + 1
    """
    if not isinstance(n, (int, np.integer)) or not isinstance(m, (int, np.integer)):
        raise DomainError("sizes must be integers")
    if kind in ("rectangle", "stationary-quadrant"):
        if n < 1 or m < 1:
            raise DomainError(f"{kind} needs n >= 1 and m >= 1")
        cells = [(i, j) for i in range(1, n + 1) for j in range(1, m + 1)]
    elif kind in ("trapezoid", "symmetric-union", "staircase"):
        if n < 1 or m < 0:
            raise DomainError(f"{kind} needs n >= 1 and m >= 0")
        lo = (lambda i: 1) if kind == "staircase" else (lambda i: i)
        cells = [(i, j) for i in range(1, n + 1) for j in range(lo(i), 2 * n + m - i + 2)]
        if kind == "symmetric-union":
            cells = cells + [(j, i) for i, j in cells]
    else:
        raise DomainError(f"unknown domain kind {kind!r}")
    return PolygonalDomain(cells, kind=kind, n=int(n), m=int(m))


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class ParameterSet:
    """Inhomogeneity triple (alpha_circ, alpha, beta)."""

    alpha_circ: float
    alpha: tuple[float, ...]
    beta: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "alpha_circ", float(self.alpha_circ))
        if not self.alpha:
            raise ParameterError("alpha must have at least one entry")
        self.validate()

    @property
    def n(self) -> int:
        return len(self.alpha)

    @property
    def m(self) -> int:
        return len(self.beta)

    def validate(self) -> None:
        a, ac, b = self.alpha, self.alpha_circ, self.beta
        for i, ai in enumerate(a, 1):
            if not ai + ac > 0:
                raise ParameterError(f"alpha_{i} + alpha_circ = {ai + ac} must be > 0")
            for j, aj in enumerate(a, 1):
                if not ai + aj > 0:
                    raise ParameterError(f"alpha_{i} + alpha_{j} = {ai + aj} must be > 0")
            for k, bk in enumerate(b, 1):
                if not ai + bk > 0:
                    raise ParameterError(f"alpha_{i} + beta_{k} = {ai + bk} must be > 0")

    def hat(self) -> tuple[float, ...]:
        """Concatenation (alpha_circ) + alpha + beta used by the full-space picture."""
        return (self.alpha_circ,) + self.alpha + self.beta


@dataclass(frozen=True)
class BoundaryParams:
    """Homogeneous bulk shape theta with boundary shape theta0."""

    theta: float
    theta0: float

    def __post_init__(self):
        if not (self.theta > 0 and self.theta0 > 0):
            raise ParameterError(f"theta = {self.theta} and theta0 = {self.theta0} must be > 0")


@dataclass
class ParameterField:
    domain: PolygonalDomain
    theta: np.ndarray                  # aligned with domain.cells; nan on unit cells
    unit: np.ndarray                   # boolean mask of deterministic weight-1 cells
    halve_diagonal: bool = False
    classes: tuple[str, ...] | None = None
    scheme: str = ""

    def theta_at(self, cell) -> float:
        return float(self.theta[self.domain.index[tuple(cell)]])

    def is_symmetric(self) -> bool:
        return self.domain.kind == "symmetric-union"


def _half_theta(p: ParameterSet, i: int, j: int) -> tuple[float, str]:
    n, m = p.n, p.m
    a = p.alpha
    if i == j:
        return a[i - 1] + p.alpha_circ, "diagonal"
    if j <= n:
        return a[i - 1] + a[j - 1], "bulk"
    if j <= n + m:
        return a[i - 1] + p.beta[j - n - 1], "beta"
    return a[i - 1] + a[2 * n + m - j], "reflected"


def _full_theta(p: ParameterSet, i: int, j: int) -> tuple[float, str]:
    n = p.n
    a = p.alpha
    if j == 1:
        return a[i - 1] + p.alpha_circ, "boundary"
    if j <= n + 1:
        return a[i - 1] + a[j - 2], "bulk"
    return a[i - 1] + p.beta[j - n - 2], "beta"


def assign_parameters(scheme: str, params, n: int | None = None, m: int | None = None) -> ParameterField:
    """Build the inverse-gamma shape field of a named scheme.

    scheme       params           domain
    full         ParameterSet     rectangle n x (n+m+1)
    half         ParameterSet     trapezoid(n, m)
    half-symmetric ParameterSet   symmetric-union(n, m), diagonal halved
    gue-full     BoundaryParams   rectangle n x m, column 1 carries theta0
    gue-trapezoid BoundaryParams  {1<=i<=n, i<=j<=n+m-i} = trapezoid(n, m-n-1),
                                  diagonal carries theta0
    stationary   BoundaryParams   n x m quadrant with unit corner
    """
    if scheme in ("full", "half", "half-symmetric"):
        if not isinstance(params, ParameterSet):
            raise ParameterError(f"scheme {scheme!r} needs a ParameterSet")
        params.validate()
        pn, pm = params.n, params.m
        if scheme == "full":
            dom = build_domain("rectangle", pn, pn + pm + 1)
            rule = _full_theta
        else:
            dom = build_domain("trapezoid" if scheme == "half" else "symmetric-union", pn, pm)
            rule = _half_theta
        vals, labels = [], []
        for i, j in dom.cells:
            th, lab = rule(params, min(i, j), max(i, j)) if scheme == "half-symmetric" else rule(params, i, j)
            vals.append(th)
            labels.append(lab)
        return ParameterField(dom, np.array(vals), np.zeros(len(dom), bool),
                              halve_diagonal=scheme == "half-symmetric",
                              classes=tuple(labels), scheme=scheme)

    if scheme in ("gue-full", "gue-trapezoid", "stationary"):
        if not isinstance(params, BoundaryParams):
            raise ParameterError(f"scheme {scheme!r} needs BoundaryParams")
        if n is None or m is None:
            raise ParameterError(f"scheme {scheme!r} needs sizes n and m")
        th, th0 = params.theta, params.theta0
        unit = None
        if scheme == "gue-full":
            if m < n:
                raise ParameterError(f"gue-full needs m >= n, got n={n}, m={m}")
            dom = build_domain("rectangle", n, m)
            vals = [th0 if j == 1 else th for i, j in dom.cells]
        elif scheme == "gue-trapezoid":
            if m < n + 1:
                raise ParameterError(f"gue-trapezoid needs m >= n + 1, got n={n}, m={m}")
            dom = build_domain("trapezoid", n, m - n - 1)
            vals = [th0 if i == j else th for i, j in dom.cells]
        else:
            if not th0 < th:
                raise ParameterError(f"stationary scheme needs 0 < theta0 < theta, got theta0={th0}, theta={th}")
            dom = build_domain("stationary-quadrant", n, m)
            vals, unit = [], []
            for i, j in dom.cells:
                unit.append(i == 1 and j == 1)
                if i == 1 and j == 1:
                    vals.append(np.nan)
                elif j == 1:
                    vals.append(th0)
                elif i == 1:
                    vals.append(th - th0)
                else:
                    vals.append(th)
        unit_mask = np.zeros(len(dom), bool) if unit is None else np.array(unit)
        return ParameterField(dom, np.array(vals, float), unit_mask, scheme=scheme)

    raise ParameterError(f"unknown scheme {scheme!r}")


# ------------------------------------------------------------------- weights

@dataclass
class WeightArray:
    domain: PolygonalDomain
    log_w: np.ndarray   # aligned with domain.cells

    def __getitem__(self, cell) -> float:
        return float(self.log_w[self.domain.index[tuple(cell)]])

    def is_symmetric(self) -> bool:
        if not self.domain.is_transpose_closed():
            return False
        return bool(np.array_equal(self.log_w, self.log_w[self.domain.transpose_index()]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "log_w"])
        for (i, j), v in zip(self.domain.cells, self.log_w):
            w.writerow([i, j, repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, kind: str = "custom", n: int = 0, m: int = 0) -> "WeightArray":
        rows = list(csv.DictReader(io.StringIO(text)))
        cells = [(int(r["i"]), int(r["j"])) for r in rows]
        dom = PolygonalDomain(cells, kind=kind, n=n, m=m)
        vals = {(int(r["i"]), int(r["j"])): float(r["log_w"]) for r in rows}
        return cls(dom, np.array([vals[c] for c in dom.cells]))

    @classmethod
    def from_values(cls, domain: PolygonalDomain, values: dict) -> "WeightArray":
        """Linear-space values keyed by cell."""
        return cls(domain, np.log(np.array([float(values[c]) for c in domain.cells])))


class _DiagonalSampler:
    """Per-diagonal draw schedule shared by materialised and streaming paths.

    Each anti-diagonal consumes one ``standard_gamma`` call of shape
    (replicas, fresh cells on that diagonal).  Mirrored cells of a symmetric
    domain reuse the draw of their transpose, which lies on the same
    anti-diagonal.
    """

    def __init__(self, field: ParameterField):
        dom = field.domain
        self.plan = []
        sym = field.is_symmetric()
        for diag in dom.diagonals:
            fresh, src, offset = [], [], []
            pos_of = {}
            for p, k in enumerate(diag.cells):
                i, j = dom.cells[k]
                if field.unit[k]:
                    src.append(-1)
                elif sym and i > j:
                    src.append(None)
                else:
                    pos_of[(i, j)] = len(fresh)
                    src.append(len(fresh))
                    fresh.append(k)
                offset.append(-LOG2 if (field.halve_diagonal and i == j) else 0.0)
            for p, k in enumerate(diag.cells):
                if src[p] is None:
                    i, j = dom.cells[k]
                    src[p] = pos_of[(j, i)]
            nf = len(fresh)
            src_arr = np.array([nf if s == -1 else s for s in src])
            self.plan.append((field.theta[np.array(fresh, dtype=int)] if fresh else np.empty(0),
                              src_arr, np.array(offset)))

    def draw(self, rng: np.random.Generator, size: int):
        """Yield log-weights (size, cells on diagonal) in diagonal order."""
        tiny = np.finfo(float).tiny
        for theta, src, offset in self.plan:
            if theta.size:
                g = rng.standard_gamma(theta, size=(size, theta.size))
                lw = -np.log(np.maximum(g, tiny))
            else:
                lw = np.empty((size, 0))
            lw = np.concatenate([lw, np.zeros((size, 1))], axis=1)[:, src]
            if offset.any():
                lw = lw + offset
            yield lw


def sample_weights(field: ParameterField, rng: np.random.Generator) -> WeightArray:
    """One replica of independent inverse-gamma weights on the field's domain."""
    return WeightArray(field.domain, sample_log_weight_batch(field, rng, 1)[0])


def sample_log_weight_batch(field: ParameterField, rng: np.random.Generator, size: int) -> np.ndarray:
    dom = field.domain
    out = np.empty((size, len(dom)))
    for diag, lw in zip(dom.diagonals, _DiagonalSampler(field).draw(rng, size)):
        out[:, diag.cells] = lw
    return out


# --------------------------------------------------------- dynamic programme

def _sweep(domain: PolygonalDomain, source: Iterable[np.ndarray],
           keep: Callable[[_Diagonal, np.ndarray], None] | None = None) -> np.ndarray:
    """Run log Z(i,j) = log W(i,j) + lse(log Z(i-1,j), log Z(i,j-1)) over all
    diagonals; ``source`` yields log-weights per diagonal.  Returns the last
    diagonal's values; ``keep`` sees every diagonal on the way."""
    prev = None
    for diag, lw in zip(domain.diagonals, source):
        if prev is None:
            cur = lw
        else:
            ext = np.concatenate([prev, np.full((prev.shape[0], 1), -np.inf)], axis=1)
            cur = lw + np.logaddexp(ext[:, diag.up], ext[:, diag.left])
        if keep is not None:
            keep(diag, cur)
        prev = cur
    return prev


def log_partition_table(weights: WeightArray) -> np.ndarray:
    """log Z(i, j) for every cell, aligned with the domain's cell order."""
    dom = weights.domain
    lw = weights.log_w[None, :]
    table = np.empty(len(dom))

    def keep(diag, cur):
        table[diag.cells] = cur[0]

    _sweep(dom, (lw[:, d.cells] for d in dom.diagonals), keep)
    return table


def path_counts(domain: PolygonalDomain) -> dict:
    counts: dict[tuple[int, int], int] = {}
    for i, j in domain.cells:
        if (i, j) == (1, 1):
            counts[(i, j)] = 1
        else:
            counts[(i, j)] = counts.get((i - 1, j), 0) + counts.get((i, j - 1), 0)
    return counts


@dataclass
class PartitionResult:
    log_z: float
    endpoint: object            # a cell, or ("line", n, m) / ("symmetrized", n, m)
    path_count: int | None = None

    @property
    def z(self) -> float:
        return math.exp(self.log_z)


def _count(domain: PolygonalDomain, targets: Sequence[tuple[int, int]]) -> int | None:
    if len(domain) > PATH_COUNT_MAX_CELLS:
        return None
    c = path_counts(domain)
    return sum(c[t] for t in targets)


def partition_point_to_point(weights: WeightArray, target: tuple[int, int]) -> PartitionResult:
    dom = weights.domain
    target = tuple(target)
    if target not in dom:
        raise DomainError(f"target {target} is not a cell of the domain")
    table = log_partition_table(weights)
    return PartitionResult(float(table[dom.index[target]]), target, _count(dom, [target]))


def line_endpoints(n: int, m: int) -> list[tuple[int, int]]:
    return [(k, 2 * n - k + m + 1) for k in range(1, n + 1)]


def _lse_cells(table: np.ndarray, dom: PolygonalDomain, cells) -> float:
    vals = table[[dom.index[c] for c in cells]]
    top = vals.max()
    return float(top + math.log(np.exp(vals - top).sum()))


def partition_point_to_line(weights: WeightArray, n: int, m: int) -> PartitionResult:
    dom = weights.domain
    if dom != build_domain("trapezoid", n, m):
        raise DomainError(f"point-to-line partition needs the trapezoid({n}, {m}) domain")
    ends = line_endpoints(n, m)
    table = log_partition_table(weights)
    return PartitionResult(_lse_cells(table, dom, ends), ("line", n, m), _count(dom, ends))


def partition_symmetrized(weights: WeightArray, n: int, m: int) -> PartitionResult:
    """Sum over paths to the endpoint line of both halves of the symmetric domain.

    ``weights`` must already carry the halved diagonal.
    """
    dom = weights.domain
    if dom != build_domain("symmetric-union", n, m):
        raise DomainError(f"symmetrized partition needs the symmetric-union({n}, {m}) domain")
    if not weights.is_symmetric():
        raise DomainError("symmetrized partition needs symmetric weights")
    ends = line_endpoints(n, m)
    ends = ends + [(j, i) for i, j in ends]
    table = log_partition_table(weights)
    return PartitionResult(_lse_cells(table, dom, ends), ("symmetrized", n, m), _count(dom, ends))


def symmetrize(weights: WeightArray) -> WeightArray:
    """Reflect trapezoid weights to the symmetric union, halving the diagonal."""
    dom = weights.domain
    if dom.kind != "trapezoid":
        raise DomainError("symmetrize expects trapezoid weights")
    sym = build_domain("symmetric-union", dom.n, dom.m)
    vals = []
    for i, j in sym.cells:
        v = weights[(min(i, j), max(i, j))]
        vals.append(v - LOG2 if i == j else v)
    return WeightArray(sym, np.array(vals))


def partition_stationary(theta: float, theta0: float, n: int, m: int,
                         rng: np.random.Generator) -> PartitionResult:
    field = assign_parameters("stationary", BoundaryParams(theta, theta0), n, m)
    w = sample_weights(field, rng)
    return partition_point_to_point(w, (n, m))


# ------------------------------------------------------------ batched engine

@dataclass(frozen=True)
class ModelSpec:
    """Scheme plus sizes; the observable follows from the scheme.

    full, gue-full, stationary  -> point-to-point at the far corner
    half, gue-trapezoid         -> point-to-line
    half-symmetric              -> symmetrized point-to-line
    """

    scheme: str
    params: object
    n: int | None = None
    m: int | None = None

    def field(self) -> ParameterField:
        return assign_parameters(self.scheme, self.params, self.n, self.m)

    def to_dict(self) -> dict:
        p = self.params
        if isinstance(p, ParameterSet):
            pd = {"alpha_circ": p.alpha_circ, "alpha": list(p.alpha), "beta": list(p.beta)}
        else:
            pd = {"theta": p.theta, "theta0": p.theta0}
        return {"scheme": self.scheme, "params": pd, "n": self.n, "m": self.m}


def _endpoint_positions(field: ParameterField) -> tuple[int, np.ndarray]:
    """(diagonal level, positions on that diagonal) of the observable's endpoints."""
    dom = field.domain
    last = dom.diagonals[-1]
    if field.scheme in ("full", "gue-full", "stationary"):
        corner = max(dom.cells, key=lambda c: (c[0] + c[1], c[0]))
        pos = [p for p, k in enumerate(last.cells) if dom.cells[k] == corner]
    else:
        # every endpoint of the trapezoid (and of its mirror) is on the last diagonal
        pos = list(range(len(last.cells)))
    return last.level, np.array(pos)


def simulate_log_partition(field: ParameterField, rng: np.random.Generator, size: int) -> np.ndarray:
    """log of the scheme's partition function for ``size`` fresh replicas.

    Weights are drawn diagonal by diagonal in exactly the order used by
    ``sample_log_weight_batch``, so both routes agree on the same stream.
    """
    dom = field.domain
    last = _sweep(dom, _DiagonalSampler(field).draw(rng, size))
    _, pos = _endpoint_positions(field)
    sel = last[:, pos]
    if sel.shape[1] == 1:
        return sel[:, 0].copy()
    top = sel.max(axis=1, keepdims=True)
    return (top + np.log(np.exp(sel - top).sum(axis=1, keepdims=True)))[:, 0]


def log_partition_of_weights(field: ParameterField, log_w: np.ndarray) -> np.ndarray:
    """Same observable as ``simulate_log_partition`` for given weights (batch, cells)."""
    log_w = np.atleast_2d(log_w)
    dom = field.domain
    last = _sweep(dom, (log_w[:, d.cells] for d in dom.diagonals))
    _, pos = _endpoint_positions(field)
    sel = last[:, pos]
    top = sel.max(axis=1, keepdims=True)
    return (top + np.log(np.exp(sel - top).sum(axis=1, keepdims=True)))[:, 0]
