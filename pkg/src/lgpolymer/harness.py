"""Monte Carlo experiment orchestration: keyed seeding, replica blocks,
empirical distributions and Kolmogorov-Smirnov statistics.

Replicas are grouped into fixed-size blocks; block k of a plan always draws
from the stream keyed by (master seed, stream prefix, k), so the assembled
sample is bitwise identical for any worker count or scheduling order.
"""

from __future__ import annotations

import csv
import functools
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import asymptotics as asy
from .polymer import BoundaryParams, ModelSpec, ParameterSet, simulate_log_partition

KS_CONSTANTS = {0.01: 1.628, 0.05: 1.358}
# one-sample KS with mean and variance estimated from the data
LILLIEFORS_CONSTANTS = {0.01: 1.031, 0.05: 0.886}


class PlanError(ValueError):
    pass


def derive_seed(master_seed: int, index: int, stream: Sequence[int] = ()) -> np.random.Generator:
    """Independent reproducible generator keyed by (master, stream..., index)."""
    if index < 0:
        raise PlanError("replica/block index must be >= 0")
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(*stream, int(index)))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class EmpiricalDistribution:
    samples: np.ndarray     # sorted ascending

    def __post_init__(self):
        s = np.asarray(self.samples, float)
        if s.ndim != 1 or len(s) < 1:
            raise PlanError("empirical distribution needs a nonempty 1-d sample")
        object.__setattr__(self, "samples", np.sort(s))

    @property
    def count(self) -> int:
        return len(self.samples)

    def cdf(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.count

    def mean(self) -> float:
        return float(self.samples.mean())

    def std(self) -> float:
        return float(self.samples.std(ddof=1))


@dataclass(frozen=True)
class ExperimentPlan:
    model: ModelSpec
    replicas: int
    seed: int
    center: float = 0.0
    scale: float = 1.0
    block_size: int = 512
    stream: tuple = ()

    def __post_init__(self):
        if not self.scale > 0:
            raise PlanError("scale must be positive")
        if self.replicas < 100:
            raise PlanError("need at least 100 replicas")
        if self.block_size < 1:
            raise PlanError("block size must be positive")
        if self.seed is None or self.seed < 0:
            raise PlanError("a nonnegative master seed is required")

    def blocks(self) -> list[tuple[int, int]]:
        return [(k, min(self.block_size, self.replicas - s))
                for k, s in enumerate(range(0, self.replicas, self.block_size))]

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "replicas": self.replicas, "seed": self.seed,
                "center": self.center, "scale": self.scale, "block_size": self.block_size,
                "stream": list(self.stream)}


def sample_log_z(plan: ExperimentPlan, threads: int = 1, order: Sequence[int] | None = None) -> np.ndarray:
    """Raw log Z samples in replica order.  ``order`` permutes block evaluation
    (a testing hook); the result does not depend on it."""
    field_ = plan.model.field()
    blocks = plan.blocks()
    if order is not None:
        blocks = [blocks[k] for k in order]

    def work(block):
        k, size = block
        return k, simulate_log_partition(field_, derive_seed(plan.seed, k, plan.stream), size)

    if threads <= 1:
        done = [work(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(work, blocks))
    done.sort(key=lambda kv: kv[0])
    return np.concatenate([v for _, v in done])


def standardize(plan: ExperimentPlan, log_z: np.ndarray) -> np.ndarray:
    return (np.asarray(log_z) - plan.center) / plan.scale


def run_experiment(plan: ExperimentPlan, threads: int = 1) -> EmpiricalDistribution:
    return EmpiricalDistribution(standardize(plan, sample_log_z(plan, threads)))


def samples_csv(plan: ExperimentPlan, log_z: np.ndarray, header: dict | None = None) -> str:
    buf = io.StringIO()
    if header is not None:
        buf.write("# " + _json(header) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replica", "log_z", "standardized"])
    for k, (x, y) in enumerate(zip(log_z, standardize(plan, log_z))):
        w.writerow([k, repr(float(x)), repr(float(y))])
    return buf.getvalue()


def _json(obj) -> str:
    import json
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# ------------------------------------------------------------------ KS tests

@dataclass(frozen=True)
class KsReport:
    statistic: float
    sizes: tuple
    level: float
    critical: float
    passed: bool
    test: str = "ks"

    def to_dict(self) -> dict:
        return {"test": self.test, "statistic": self.statistic, "sizes": list(self.sizes),
                "level": self.level, "critical": self.critical, "passed": self.passed}


def _constant(table: dict, level: float) -> float:
    if level not in table:
        raise PlanError(f"level must be one of {sorted(table)}")
    return table[level]


def ks_two_sample(a: EmpiricalDistribution, b: EmpiricalDistribution, level: float = 0.01) -> KsReport:
    x, y = a.samples, b.samples
    n1, n2 = len(x), len(y)
    grid = np.concatenate([x, y])
    d = np.abs(np.searchsorted(x, grid, side="right") / n1 - np.searchsorted(y, grid, side="right") / n2)
    stat = float(d.max())
    crit = _constant(KS_CONSTANTS, level) * math.sqrt((n1 + n2) / (n1 * n2))
    return KsReport(stat, (n1, n2), level, crit, stat < crit, "ks-two-sample")


def _one_sample_stat(x: np.ndarray, cdf: Callable) -> float:
    f = np.asarray(cdf(x), float)
    if f.shape != x.shape:
        f = np.array([float(cdf(v)) for v in x])
    if np.any(~np.isfinite(f)) or f.min() < 0 or f.max() > 1:
        raise PlanError("cdf returned values outside [0, 1]")
    n = len(x)
    i = np.arange(1, n + 1)
    return float(max((i / n - f).max(), (f - (i - 1) / n).max()))


def ks_one_sample(a: EmpiricalDistribution, cdf: Callable, level: float = 0.01) -> KsReport:
    stat = _one_sample_stat(a.samples, cdf)
    crit = _constant(KS_CONSTANTS, level) / math.sqrt(a.count)
    return KsReport(stat, (a.count,), level, crit, stat < crit, "ks-one-sample")


def lilliefors_normal(a: EmpiricalDistribution, level: float = 0.01) -> KsReport:
    """KS against the normal law with the sample's own mean and variance."""
    z = (a.samples - a.mean()) / a.std()
    stat = _one_sample_stat(z, normal_cdf)
    crit = _constant(LILLIEFORS_CONSTANTS, level) / math.sqrt(a.count)
    return KsReport(stat, (a.count,), level, crit, stat < crit, "lilliefors")


def normal_cdf(x):
    from scipy.special import ndtr
    return ndtr(x)


@functools.lru_cache(maxsize=None)
def gue_table() -> asy.TabulatedCdf:
    return asy.gue_cdf_table()


# ------------------------------------------------------- identity suite

IDENTITY_CASES = ((1, 0), (2, 0), (2, 1), (3, 0), (3, 2))


def generic_parameters(n: int, m: int) -> ParameterSet:
    """A fixed inhomogeneous parameter set with distinct entries."""
    alpha = (1.3, 0.9, 1.6, 1.1, 0.7)
    beta = (0.8, 1.4, 0.6, 1.2)
    if not (1 <= n <= len(alpha) and 0 <= m <= len(beta)):
        raise PlanError(f"generic parameters cover 1 <= n <= {len(alpha)}, 0 <= m <= {len(beta)}")
    return ParameterSet(0.7, alpha[:n], beta[:m])


@dataclass
class IdentityResult:
    n: int
    m: int
    report: KsReport
    trapezoid: np.ndarray
    fullspace: np.ndarray

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, **self.report.to_dict()}


def identity_test(params: ParameterSet, replicas: int, seed: int, threads: int = 1,
                  level: float = 0.01) -> IdentityResult:
    """Two-sample KS between the point-to-line trapezoid partition function and
    the point-to-point partition function on n x (n+m+1), independent streams."""
    half = ExperimentPlan(ModelSpec("half", params), replicas, seed, stream=(0,))
    full = ExperimentPlan(ModelSpec("full", params), replicas, seed, stream=(1,))
    a = sample_log_z(half, threads)
    b = sample_log_z(full, threads)
    rep = ks_two_sample(EmpiricalDistribution(a), EmpiricalDistribution(b), level)
    return IdentityResult(params.n, params.m, rep, a, b)


# ------------------------------------------------------- phase experiments

PHASES = ("gaussian", "gue")


def trapezoid_size(n: int, p: float) -> int:
    """Second size m' of the trapezoid experiment: round(p n), at least n + 1."""
    return max(int(round(p * n)), n + 1)


def classify_phase(theta: float, theta0: float, p: float) -> str:
    tc = asy.solve_theta_c(theta, p)
    if theta0 < tc:
        return "gaussian"
    if theta0 > tc:
        return "gue"
    return "critical"


def phase_plan(theta: float, theta0: float, p: float, n: int, replicas: int, seed: int,
               standardization: str | None = None, block_size: int = 512) -> ExperimentPlan:
    """Plan for log Z of the boundary-perturbed trapezoid, standardized either
    as (log Z - n f) / (n^{1/3} sigma) ("gue") or (log Z - n fbar) / (n^{1/2} s) ("gaussian").

    The trapezoid is the one equal in law to Z(n, m') with m' = trapezoid_size(n, p);
    constants use the realized ratio m'/n.
    """
    if n < 1:
        raise PlanError("n must be >= 1")
    mp = trapezoid_size(n, p)
    ratio = mp / n
    pc = asy.phase_constants(asy.AsymptoticConfig(theta, theta0, p=ratio))
    kind = standardization or classify_phase(theta, theta0, p)
    if kind == "gue":
        center, scale = n * pc.f, n ** (1 / 3) * pc.sigma
    elif kind == "gaussian":
        if pc.f_bar is None or pc.gaussian_scale is None:
            raise PlanError("gaussian standardization needs 0 < theta0 < theta_c")
        center, scale = n * pc.f_bar, math.sqrt(n) * pc.gaussian_scale
    else:
        raise PlanError(f"unknown standardization {kind!r}")
    model = ModelSpec("gue-trapezoid", BoundaryParams(theta, theta0), n, mp)
    return ExperimentPlan(model, replicas, seed, center, scale, block_size, stream=(n,))
