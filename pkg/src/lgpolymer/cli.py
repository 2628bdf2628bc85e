"""Command-line front end.

    lgpolymer verify {grsk|identity|laplace|whittaker} [options]
    lgpolymer dist {gue|bbp|normal} --t-grid a:b:step [--b ...]
    lgpolymer experiment phase --theta .. --theta0 .. --p .. --n 32,64 --replicas R --seed S

Options may also come from a JSON file (--config); flags override it.
Artifacts embed the effective configuration and seed, never the thread
count, so they are byte-identical across worker counts.  Output goes to
--out, else into the directory named by LGPOLYMER_OUT, else to stdout.
Exit codes: 0 success, 1 check failure or accuracy error, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from . import grsk as gr
from . import harness as hs
from . import laplace as lp
from . import polymer as pm
from . import whittaker as wh

OUT_ENV = "LGPOLYMER_OUT"
# not part of any artifact: they do not change results
NON_CONFIG = {"out", "threads", "config", "command", "kind"}


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ parsing

def _float_list(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


def parse_grid(text: str) -> np.ndarray:
    """'a:b:step' -> a, a+step, ..., up to b inclusive."""
    try:
        a, b, step = (float(x) for x in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"t-grid must be a:b:step, got {text!r}")
    if not step > 0 or b < a:
        raise ConfigError("t-grid needs step > 0 and b >= a")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return np.round(a + step * np.arange(count), 12)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    p.add_argument("--threads", type=int, default=None, help="worker threads")
    p.add_argument("--out", default=None, help="output file (directory for experiment)")
    p.add_argument("--config", default=None, help="JSON config; flags override it")


IDENTITIES = ("stade", "t-transform", "so-transform", "translation")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lgpolymer", description="log-gamma polymer verification tools")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification suite")
    vs = v.add_subparsers(dest="kind", required=True)
    g = vs.add_parser("grsk")
    _common(g)
    g.add_argument("--shape", default=None, help="NxM rectangle; default mixes shapes")
    g.add_argument("--trials", type=int, default=None)
    g.add_argument("--jacobian-trials", type=int, default=None)
    i = vs.add_parser("identity")
    _common(i)
    i.add_argument("--n", type=int, default=None)
    i.add_argument("--m", type=int, default=None)
    i.add_argument("--samples", type=int, default=None)
    i.add_argument("--alpha-circ", type=float, default=None)
    i.add_argument("--alpha", type=_float_list, default=None)
    i.add_argument("--beta", type=_float_list, default=None)
    la = vs.add_parser("laplace")
    _common(la)
    la.add_argument("--alpha-circ", type=float, default=None)
    la.add_argument("--alpha", type=_float_list, default=None)
    la.add_argument("--beta", type=_float_list, default=None)
    la.add_argument("--r", type=_float_list, default=None)
    la.add_argument("--samples", type=int, default=None)
    w = vs.add_parser("whittaker")
    _common(w)
    w.add_argument("--tol", type=float, default=None)
    w.add_argument("--quick", action="store_const", const=True, default=None,
                   help="skip the 3- and 4-dimensional identities")
    w.add_argument("--identity", choices=IDENTITIES, default=None, help="run one identity family only")

    d = sub.add_parser("dist", help="tabulate a limit law")
    d.add_argument("kind", choices=("gue", "bbp", "normal"))
    _common(d)
    d.add_argument("--t-grid", default=None)
    d.add_argument("--b", type=_float_list, default=None)

    e = sub.add_parser("experiment", help="standardized free-energy sampling")
    e.add_argument("kind", choices=("phase",))
    _common(e)
    e.add_argument("--theta", type=float, default=None)
    e.add_argument("--theta0", type=float, default=None)
    e.add_argument("--p", type=float, default=None)
    e.add_argument("--n", type=_int_list, default=None)
    e.add_argument("--replicas", type=int, default=None)
    e.add_argument("--standardization", choices=hs.PHASES, default=None)
    e.add_argument("--max-d", type=float, default=None)
    return ap


DEFAULTS = {
    ("verify", "grsk"): {"trials": 200, "jacobian_trials": 100, "shape": None},
    ("verify", "identity"): {"n": 2, "m": 0, "samples": 100000, "alpha_circ": None, "alpha": None, "beta": None},
    ("verify", "laplace"): {"alpha_circ": 0.5, "alpha": [1.0], "beta": [], "r": [0.1, 1.0, 10.0],
                            "samples": 1000000},
    ("verify", "whittaker"): {"tol": 1e-3, "quick": False, "identity": None},
    ("dist", "gue"): {"t_grid": None, "b": None},
    ("dist", "bbp"): {"t_grid": None, "b": None},
    ("dist", "normal"): {"t_grid": None, "b": None},
    ("experiment", "phase"): {"theta": None, "theta0": None, "p": 1.0, "n": None, "replicas": None,
                              "standardization": None, "max_d": None},
}
STOCHASTIC = {("verify", "grsk"), ("verify", "identity"), ("verify", "laplace"), ("experiment", "phase")}


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < flags; validate the seed requirement."""
    key = (args.command, args.kind)
    cfg = dict(DEFAULTS[key])
    cfg.update({"seed": None, "threads": 1, "out": None})
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        for k, v in loaded.items():
            k = k.replace("-", "_")
            if k not in cfg:
                raise ConfigError(f"unknown config key {k!r}")
            cfg[k] = v
    for k, v in vars(args).items():
        if k in cfg and v is not None:
            cfg[k] = v
    if key in STOCHASTIC and cfg["seed"] is None:
        raise ConfigError("a --seed is required for stochastic runs")
    if cfg["seed"] is not None and not 0 <= int(cfg["seed"]) < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if int(cfg["threads"]) < 1:
        raise ConfigError("threads must be >= 1")
    return cfg


def artifact_config(cfg: dict, command: str, kind: str) -> dict:
    out = {"command": command, "kind": kind}
    out.update({k: v for k, v in cfg.items() if k not in NON_CONFIG})
    return out


# ------------------------------------------------------------------ output

def _target(cfg: dict, default_name: str) -> Path | None:
    if cfg.get("out"):
        return Path(cfg["out"])
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env) / default_name
    return None


def emit(text: str, cfg: dict, default_name: str) -> None:
    path = _target(cfg, default_name)
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def _fmt(x: float) -> str:
    return f"{x:.10g}"


# ------------------------------------------------------------------ commands

def cmd_verify_grsk(cfg: dict) -> dict:
    trials, jtrials = int(cfg["trials"]), int(cfg["jacobian_trials"])
    if trials < 1 or jtrials < 0:
        raise ConfigError("trials must be positive")
    rng = hs.derive_seed(int(cfg["seed"]), 0)
    if cfg["shape"]:
        try:
            n, m = (int(x) for x in str(cfg["shape"]).lower().split("x"))
        except ValueError:
            raise ConfigError(f"shape must be NxM, got {cfg['shape']!r}")
        if n < 1 or m < 1:
            raise ConfigError("shape sizes must be positive")
        doms = [(pm.build_domain("rectangle", n, m), False)] * trials
    else:
        doms = gr.suite_domains(rng, trials)
    worst: dict[str, float] = {}
    failures = []
    jac_done = 0
    tol = gr.Tolerances()
    for k, (dom, sym) in enumerate(doms):
        arr = gr.random_array(dom, rng, symmetric=sym)
        ncoords = sum(1 for c in dom.cells if not sym or c[0] <= c[1])
        want_jac = jac_done < jtrials and ncoords <= tol.max_jacobian_cells
        checks = gr.verify_grsk_properties(arr, tol, jacobian=want_jac)
        jac_done += any(c.name == "jacobian" for c in checks)
        for c in checks:
            worst[c.name] = max(worst.get(c.name, 0.0), c.error)
            if not c.passed:
                failures.append({"trial": k, "domain": dom.kind, "n": dom.n, "m": dom.m,
                                 "check": c.name, "error": c.error, "detail": c.detail})
    return {"trials": trials, "jacobian_trials": jac_done, "max_error": worst,
            "failures": failures, "passed": not failures}


def _params_from(cfg: dict, n: int | None = None, m: int | None = None) -> pm.ParameterSet:
    if cfg.get("alpha") is not None:
        return pm.ParameterSet(float(cfg.get("alpha_circ") or 0.5), tuple(cfg["alpha"]), tuple(cfg.get("beta") or ()))
    return hs.generic_parameters(n, m)


def cmd_verify_identity(cfg: dict) -> dict:
    n, m, R = int(cfg["n"]), int(cfg["m"]), int(cfg["samples"])
    if n < 1 or m < 0:
        raise ConfigError("need n >= 1 and m >= 0")
    if R < 100:
        raise ConfigError("need at least 100 samples")
    try:
        params = _params_from(cfg, n, m)
    except hs.PlanError as exc:
        raise ConfigError(str(exc))
    if (params.n, params.m) != (n, m):
        raise ConfigError("alpha/beta lengths disagree with --n/--m")
    res = hs.identity_test(params, R, int(cfg["seed"]), int(cfg["threads"]))
    out = res.to_dict()
    out["params"] = {"alpha_circ": params.alpha_circ, "alpha": list(params.alpha), "beta": list(params.beta)}
    out["passed"] = res.report.passed
    return out


def cmd_verify_laplace(cfg: dict) -> dict:
    params = pm.ParameterSet(float(cfg["alpha_circ"]), tuple(cfg["alpha"]), tuple(cfg["beta"] or ()))
    if params.n > 2:
        raise ConfigError("contour quadrature covers n <= 2")
    R = int(cfg["samples"])
    rows = []
    for k, r in enumerate(cfg["r"]):
        tr = lp.laplace_contour(lp.LaplaceQuery(float(r), params, variant="trapezoid-contour"))
        fs = lp.laplace_contour(lp.LaplaceQuery(float(r), params, variant="fullspace-contour"))
        rng = hs.derive_seed(int(cfg["seed"]), k)
        mc, se = lp.laplace_mc(pm.ModelSpec("half", params), float(r), R, rng)
        variant_gap = abs(tr.value - fs.value) / abs(tr.value)
        rows.append({"r": r, "trapezoid_contour": tr.value, "fullspace_contour": fs.value,
                     "variant_rel_gap": variant_gap, "mc": mc, "mc_se": se,
                     "mc_within_3se": abs(mc - tr.value) <= 3 * se,
                     "variants_agree": variant_gap <= 1e-9})
    ok = all(r["mc_within_3se"] and r["variants_agree"] for r in rows)
    return {"params": {"alpha_circ": params.alpha_circ, "alpha": list(params.alpha),
                       "beta": list(params.beta)}, "rows": rows, "passed": ok}


def whittaker_suite(tol: float = 1e-3, quick: bool = False, only: str | None = None) -> list[dict]:
    rows = []
    cases = [("stade", {"alpha": [0.6], "alpha_circ": 0.4, "r": 1.3}, 1e-8),
             ("t-transform", {"alpha": [0.6], "alpha_circ": 0.4, "beta": [], "r": 0.8}, 1e-8),
             ("t-transform", {"alpha": [0.6], "alpha_circ": 0.4, "beta": [0.9], "r": 1.0}, tol),
             ("so-transform", {"alpha": [0.4], "lam": [0.2], "mu": 1.0}, tol)]
    if not quick:
        cases.append(("stade", {"alpha": [0.6, 0.9], "alpha_circ": 0.4, "r": 1.0}, tol))
    for name, params, t in cases:
        if only is not None and name != only:
            continue
        rep = wh.verify_transform(name, params, tol=t)
        rows.append(rep.to_dict())
    if only not in (None, "translation"):
        return rows
    # shifting every alpha by c multiplies the function by (prod x)^c
    alpha, x, c = [0.3, -0.2], [1.4, 0.7], 0.7
    base = wh.whittaker_gl(alpha, x)
    shifted = wh.whittaker_gl([a + c for a in alpha], x)
    gap = abs(math.expm1(shifted.log_value - base.log_value - c * sum(math.log(v) for v in x)))
    rows.append({"identity": "translation", "params": {"alpha": alpha, "x": x, "c": c},
                 "discrepancy": gap, "tolerance": 1e-6, "passed": gap <= 1e-6})
    return rows


def cmd_verify_whittaker(cfg: dict) -> dict:
    if cfg["identity"] not in (None, *IDENTITIES):
        raise ConfigError(f"identity must be one of {IDENTITIES}")
    rows = whittaker_suite(float(cfg["tol"]), bool(cfg["quick"]), cfg["identity"])
    return {"identities": rows, "passed": all(r["passed"] for r in rows)}


def cmd_dist(kind: str, cfg: dict) -> tuple[str, list]:
    if cfg["t_grid"] is None:
        raise ConfigError("--t-grid is required")
    grid = parse_grid(cfg["t_grid"])
    if kind == "gue":
        vals = [asy.f_gue(t) for t in grid]
    elif kind == "bbp":
        if cfg["b"] is None:
            raise ConfigError("--b is required for bbp")
        vals = [asy.f_bbp(t, cfg["b"]) for t in grid]
    else:
        vals = [asy.gaussian_cdf(t) for t in grid]
    lines = ["t,F"] + [f"{_fmt(t)},{_fmt(v)}" for t, v in zip(grid, vals)]
    return "\n".join(lines) + "\n", vals


def cmd_experiment(cfg: dict, out_dir: Path | None) -> dict:
    for k in ("theta", "theta0", "n", "replicas"):
        if cfg[k] is None:
            raise ConfigError(f"--{k} is required")
    theta, theta0, p = float(cfg["theta"]), float(cfg["theta0"]), float(cfg["p"])
    if not (theta > 0 and 0 < theta0 <= theta and p > 0):
        raise ConfigError("need theta > 0, 0 < theta0 <= theta, p > 0")
    ns = [int(n) for n in cfg["n"]]
    if not ns or min(ns) < 1:
        raise ConfigError("n list must contain positive sizes")
    R, seed, threads = int(cfg["replicas"]), int(cfg["seed"]), int(cfg["threads"])
    kind = cfg["standardization"] or hs.classify_phase(theta, theta0, p)
    if kind not in hs.PHASES:
        raise ConfigError(f"theta0 sits at the critical point; pass --standardization explicitly")
    max_d = float(cfg["max_d"]) if cfg["max_d"] is not None else (0.05 if kind == "gaussian" else 0.15)
    law = hs.normal_cdf if kind == "gaussian" else hs.gue_table()
    header = artifact_config(cfg, "experiment", "phase")
    rows = []
    for n in ns:
        plan = hs.phase_plan(theta, theta0, p, n, R, seed, kind)
        log_z = hs.sample_log_z(plan, threads)
        dist = hs.EmpiricalDistribution(hs.standardize(plan, log_z))
        rep = hs.ks_one_sample(dist, law)
        rows.append({"n": n, "m_prime": plan.model.m, "center": plan.center, "scale": plan.scale,
                     "mean": dist.mean(), "std": dist.std(), **rep.to_dict()})
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / f"samples_n{n}.csv").write_text(hs.samples_csv(plan, log_z, {**header, "n": n}))
    noise = hs.KS_CONSTANTS[0.05] / math.sqrt(R)
    d = [r["statistic"] for r in rows]
    trend = all(d[k + 1] <= d[k] + noise for k in range(len(d) - 1))
    passed = trend and d[-1] < max_d
    return {"config": header, "limit_law": "normal" if kind == "gaussian" else "gue",
            "rows": rows, "trend_noise": noise, "trend_ok": trend, "max_d": max_d, "passed": passed}


# ------------------------------------------------------------------ entry

USER_ERRORS = (ConfigError, pm.ParameterError, pm.DomainError, hs.PlanError, lp.QueryError,
               wh.PreconditionError, wh.CapabilityError, asy.ConfigError)
ACCURACY_ERRORS = (asy.AccuracyError, lp.AccuracyError)


def _glue_values(argv: list[str]) -> list[str]:
    """Attach values that start with '-' (grids like -4:2:0.5, lists like -8,-2)
    to their flag so argparse does not read them as options."""
    out, k = [], 0
    while k < len(argv):
        a = argv[k]
        if a in ("--t-grid", "--b", "--alpha", "--beta") and k + 1 < len(argv):
            out.append(f"{a}={argv[k + 1]}")
            k += 2
            continue
        out.append(a)
        k += 1
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = _glue_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
        header = artifact_config(cfg, args.command, args.kind)
        if args.command == "verify":
            fn = {"grsk": cmd_verify_grsk, "identity": cmd_verify_identity,
                  "laplace": cmd_verify_laplace, "whittaker": cmd_verify_whittaker}[args.kind]
            report = {"config": header, **fn(cfg)}
            emit(dumps(report), cfg, f"verify_{args.kind}.json")
            return 0 if report["passed"] else 1
        if args.command == "dist":
            text, _ = cmd_dist(args.kind, cfg)
            emit("# " + json.dumps(header, sort_keys=True) + "\n" + text, cfg, f"dist_{args.kind}.csv")
            return 0
        out_dir = _target(cfg, "phase")
        summary = cmd_experiment(cfg, out_dir)
        if out_dir is None:
            sys.stdout.write(dumps(summary))
        else:
            (out_dir / "summary.json").write_text(dumps(summary))
        return 0 if summary["passed"] else 1
    except USER_ERRORS as exc:
        print(f"lgpolymer: error: {exc}", file=sys.stderr)
        return 2
    except ACCURACY_ERRORS as exc:
        print(f"lgpolymer: accuracy: {exc}", file=sys.stderr)
        return 1
