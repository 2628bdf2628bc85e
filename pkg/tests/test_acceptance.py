"""End-to-end acceptance checks at their stated tolerances and desk-scale sizes.
Each criterion records one pass/fail line, printed in the terminal summary."""

import json
import math
import time

import numpy as np
import pytest

from acceptance_log import record
from oracles import airy_fredholm_gue, product_laplace
from lgpolymer import asymptotics as asy
from lgpolymer import harness as hs
from lgpolymer import laplace as lp
from lgpolymer import polymer as pm
from lgpolymer.cli import cmd_verify_grsk, main, whittaker_suite

SEED = 20240611


def _check(number, limit, body):
    """Run body() -> (passed, summary), record the line, then assert."""
    start = time.perf_counter()
    try:
        passed, summary = body()
    except Exception as exc:
        record(number, False, f"raised {type(exc).__name__}: {exc}")
        raise
    elapsed = time.perf_counter() - start
    ok = passed and elapsed < limit
    record(number, ok, f"{summary} [{elapsed:.1f}s, limit {limit:.0f}s]")
    assert ok, summary


def test_criterion_1_grsk_identities():
    def body():
        rep = cmd_verify_grsk({"seed": SEED, "trials": 200, "jacobian_trials": 100, "shape": None})
        worst = ", ".join(f"{k} {v:.1e}" for k, v in sorted(rep["max_error"].items()))
        ok = rep["passed"] and rep["jacobian_trials"] == 100
        return ok, f"200 arrays, {rep['jacobian_trials']} jacobians; worst {worst}"
    _check(1, 60, body)


def test_criterion_2_identity_in_law():
    def body():
        # n = 1, m = 0: both sides are W_11 W_12 with the same two inverse-gamma parameters
        p = hs.generic_parameters(1, 0)
        half, full = pm.ModelSpec("half", p).field(), pm.ModelSpec("full", p).field()
        exact = sorted(half.theta) == sorted(full.theta) and len(half.theta) == 2
        lw = np.random.default_rng(0).normal(size=(50, 2))
        for f in (half, full):
            exact &= np.allclose(pm.log_partition_of_weights(f, lw), lw.sum(1), rtol=0, atol=1e-14)
        parts = [f"n=1 exact {exact}"]
        ok = exact
        for n, m in ((2, 0), (2, 1), (3, 0), (3, 2)):
            rep = hs.identity_test(hs.generic_parameters(n, m), 100_000, SEED).report
            ok &= rep.passed and rep.statistic < 0.0073
            parts.append(f"({n},{m}) D={rep.statistic:.4f}")
        return ok, "; ".join(parts) + " (critical 0.0073)"
    _check(2, 300, body)


def test_criterion_3_laplace():
    def body():
        ok = True
        parts = []
        p1 = pm.ParameterSet(0.5, (1.0,), ())
        c = lp.laplace_contour(lp.LaplaceQuery(1.0, p1)).value
        direct = product_laplace(1.5, 2.0, 1.0)
        rel = abs(c - direct) / direct
        ok &= rel <= 1e-5
        parts.append(f"n=1 vs density rel {rel:.1e}")
        worst_z, worst_var = 0.0, 0.0
        for k, p in enumerate((p1, pm.ParameterSet(0.7, (1.3, 0.9), (0.8,)))):
            plan = hs.ExperimentPlan(pm.ModelSpec("half", p), 10 ** 6, SEED, block_size=65536, stream=(k,))
            log_z = hs.sample_log_z(plan)
            for r in (0.1, 1.0, 10.0):
                tr = lp.laplace_contour(lp.LaplaceQuery(r, p, variant="trapezoid-contour")).value
                fs = lp.laplace_contour(lp.LaplaceQuery(r, p, variant="fullspace-contour")).value
                est, se = lp.laplace_estimate(log_z, r)
                worst_z = max(worst_z, abs(est - tr) / se)
                worst_var = max(worst_var, abs(tr - fs) / abs(tr))
        ok &= worst_z <= 3 and worst_var <= 1e-9
        parts.append(f"MC worst {worst_z:.2f} se (limit 3)")
        parts.append(f"variants rel {worst_var:.1e}")
        return ok, "; ".join(parts)
    _check(3, 600, body)


def test_criterion_4_whittaker():
    def body():
        rows = whittaker_suite()
        want = {("stade", 1): 1e-8, ("stade", 2): 1e-3, ("t-transform", 0): 1e-8,
                ("t-transform", 1): 1e-3, ("so-transform", 1): 1e-3, ("translation", 2): 1e-6}
        seen = {}
        for r in rows:
            prm = r["params"]
            size = len(prm.get("beta", [])) if r["identity"] == "t-transform" else len(prm.get("alpha", []))
            seen[(r["identity"], size)] = r
        ok = set(seen) == set(want)
        ok &= all(seen[k]["discrepancy"] <= tol for k, tol in want.items() if k in seen)
        desc = ", ".join(f"{a}/{b} {seen[(a, b)]['discrepancy']:.1e}" for a, b in sorted(seen))
        return ok, desc
    _check(4, 300, body)


LIMIT_T = (-4.0, -2.0, 0.0, 2.0)


def test_criterion_5_limit_laws():
    start = time.perf_counter()
    oracle_gap = max(abs(asy.f_gue(t) - airy_fredholm_gue(t)) for t in LIMIT_T)
    empty_gap = max(abs(asy.f_bbp(t, []) - asy.f_gue(t)) for t in LIMIT_T)
    bbp_gap = max(abs(asy.f_bbp(t, [-8.0]) - asy.f_gue(t)) for t in LIMIT_T)
    elapsed = time.perf_counter() - start
    attainable = oracle_gap <= 1e-5 and empty_gap <= 1e-10 and elapsed < 120
    # the b=-8 sub-check cannot hold (the gap decays like 1/U), so the line reads
    # FAIL; it is tracked as a strict xfail below and the rest is asserted here
    record(5, attainable and bbp_gap <= 1e-3,
           f"F_GUE vs Airy oracle {oracle_gap:.1e}; empty b {empty_gap:.1e}; "
           f"b=-8 vs F_GUE {bbp_gap:.3f} (limit 1e-3, unattainable at U=8) [{elapsed:.1f}s, limit 120s]")
    assert attainable


@pytest.mark.xfail(strict=True, reason="F_BBP;-U approaches F_GUE only at rate 1/U; at U=8 the gap is ~0.05")
def test_criterion_5_bbp_minus_8_within_1e3():
    assert max(abs(asy.f_bbp(t, [-8.0]) - asy.f_gue(t)) for t in LIMIT_T) <= 1e-3


def test_criterion_6_phase_transition():
    def body():
        gue = hs.gue_table()
        gauss = hs.run_experiment(hs.phase_plan(2.0, 0.3, 1.0, 128, 10_000, SEED))
        d_gauss = hs.ks_one_sample(gauss, hs.normal_cdf).statistic
        R = 20_000
        ds = []
        gue_256 = None
        for n in (32, 64, 128, 256):
            dist = hs.run_experiment(hs.phase_plan(2.0, 2.0, 1.0, n, R, SEED))
            ds.append(hs.ks_one_sample(dist, gue).statistic)
            gue_256 = dist
        noise = hs.KS_CONSTANTS[0.05] / math.sqrt(R)
        trend = all(b <= a + noise for a, b in zip(ds, ds[1:]))
        # distinguishability at n = 256: Gaussian-phase samples under the GUE
        # standardization against F_GUE, GUE-phase samples against the normal family
        cross = hs.run_experiment(hs.phase_plan(2.0, 0.3, 1.0, 256, 10_000, SEED, standardization="gue"))
        g_fails = not hs.ks_one_sample(cross, gue).passed
        n_fails = not hs.lilliefors_normal(gue_256).passed
        ok = d_gauss < 0.05 and trend and ds[-1] < 0.15 and g_fails and n_fails
        return ok, (f"gaussian D={d_gauss:.4f}; gue D={', '.join(f'{d:.3f}' for d in ds)} "
                    f"trend {trend}; gaussian-vs-F_GUE rejected {g_fails}; gue-vs-normal rejected {n_fails}")
    _check(6, 1800, body)


def _artifacts(tmp, threads):
    out = tmp / f"t{threads}"
    out.mkdir()
    runs = {
        "grsk.json": ["verify", "grsk", "--seed", "7", "--trials", "20", "--jacobian-trials", "5"],
        "identity.json": ["verify", "identity", "--seed", "7", "--n", "3", "--m", "2", "--samples", "5000"],
        "laplace.json": ["verify", "laplace", "--seed", "7", "--samples", "20000"],
        "whittaker.json": ["verify", "whittaker", "--quick"],
        "gue.csv": ["dist", "gue", "--t-grid", "-3:1:1"],
        "bbp.csv": ["dist", "bbp", "--b", "-1,0.2", "--t-grid", "-3:1:1"],
    }
    for name, argv in runs.items():
        main(argv + ["--threads", str(threads), "--out", str(out / name)])
    main(["experiment", "phase", "--seed", "7", "--theta", "2", "--theta0", "0.3", "--n", "8,16",
          "--replicas", "2000", "--max-d", "1", "--threads", str(threads), "--out", str(out / "phase")])
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


def test_criterion_7_reproducibility(tmp_path):
    def body():
        a = _artifacts(tmp_path, 1)
        b = _artifacts(tmp_path, 4)
        c = _artifacts(tmp_path, 3)
        differ = sorted(k for k in set(a) | set(b) | set(c) if not a.get(k) == b.get(k) == c.get(k))
        same = not differ and len(a) == 9
        cfg = json.loads(a["identity.json"])["config"]
        detail = "byte-identical" if same else f"differing {differ}"
        return same and "threads" not in cfg, f"{len(a)} artifacts across 1, 3 and 4 threads: {detail}"
    _check(7, 600, body)
