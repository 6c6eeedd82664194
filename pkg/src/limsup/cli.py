"""Command-line front end: ``limsup check | build | dimension``.

The configuration is a YAML file, for example::

    space: {kind: interval}
    sequence: {kind: rational, tau: 3}
    f: {kappa: 1.0, s: 0.6667, t: 0.0}
    C: [1, 10, 100]
    N: 1
    Q: 2000
    B0: [0.5, 0.5]
    depth: 3
    samples: 10000
    seed: 0

Reports are JSON with sorted keys and no timings, so identical inputs give
byte-identical files; wall times go to ``timings.txt``.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .cantortree import (
    BracketError,
    TreeBuildError,
    build_tree,
    check_tree_invariants,
    dimension_bisect,
    mass_distribution_bound,
)
from .covering import greedy_select
from .dimfn import DimensionFunction, InvalidDimensionFunction, cantelli_upper_check, check_dimension_function
from .geometry import Ball, make_space
from .localmeasure import RadiiTooLarge, adjusted_N, build_local_measure, verify_star_hypothesis
from .oracle import band_box_dimension
from .sequences import RationalSequence, make_sequence

EXIT_OK, EXIT_USAGE, EXIT_STAGE = 0, 1, 2


class UsageError(ValueError):
    pass


DEFAULTS = {
    "space": {"kind": "interval", "depth": 20},
    "sequence": {"kind": "rational", "tau": 3.0},
    "f": {"kappa": 1.0, "s": 2.0 / 3.0, "t": 0.0},
    "C": [1.0],
    "N": 1,
    "Q": 2000,
    "i_max": None,
    "B0": [0.5, 0.5],
    "depth": 1,
    "samples": 10000,
    "seed": 0,
    "theta": 1.0 / 3.0,
    "max_nodes": 200000,
    "s_range": None,
    "tol": 0.01,
    "dimension_C": 10.0,
    "dimension_depth": 0,
    "oracle_q0": 50,
    "oracle_Q": 5000,
}


def _num(cfg, key, kind=float, lo=None):
    v = cfg[key]
    try:
        v = kind(v)
    except (TypeError, ValueError):
        raise UsageError(f"config field {key!r}: expected {kind.__name__}, got {cfg[key]!r}") from None
    if isinstance(v, float) and not math.isfinite(v):
        raise UsageError(f"config field {key!r} must be finite")
    if lo is not None and v < lo:
        raise UsageError(f"config field {key!r} must be >= {lo}")
    return v


def load_config(path: str | None, args: argparse.Namespace) -> dict:
    cfg = {k: (dict(v) if isinstance(v, dict) else v) for k, v in DEFAULTS.items()}
    if path:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if not isinstance(raw, dict):
            raise UsageError("config must be a mapping")
        unknown = set(raw) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        for k, v in raw.items():
            if isinstance(DEFAULTS[k], dict) and isinstance(v, dict):
                cfg[k] = {**DEFAULTS[k], **v} if k != "sequence" else dict(v)
            else:
                cfg[k] = v
    if args.seed is not None:
        cfg["seed"] = args.seed
    if getattr(args, "depth", None) is not None:
        cfg["depth"] = args.depth
    if getattr(args, "c_list", None) is not None:
        try:
            cfg["C"] = [float(c) for c in args.c_list.split(",") if c.strip()]
        except ValueError:
            raise UsageError(f"--c-list: cannot parse {args.c_list!r}") from None
    if getattr(args, "samples", None) is not None:
        cfg["samples"] = args.samples
    return validate(cfg)


def validate(cfg: dict) -> dict:
    if not isinstance(cfg["C"], list):
        cfg["C"] = [cfg["C"]]
    try:
        cfg["C"] = [float(c) for c in cfg["C"]]
    except (TypeError, ValueError):
        raise UsageError(f"config field 'C': expected numbers, got {cfg['C']!r}") from None
    if not cfg["C"] or any(not (c > 0 and math.isfinite(c)) for c in cfg["C"]):
        raise UsageError("config field 'C' must hold positive numbers")
    cfg["N"] = _num(cfg, "N", int, 1)
    cfg["Q"] = _num(cfg, "Q", int, 1)
    cfg["depth"] = _num(cfg, "depth", int)
    cfg["samples"] = _num(cfg, "samples", int, 1)
    cfg["seed"] = _num(cfg, "seed", int, 0)
    if cfg["seed"] >= 2**64:
        raise UsageError("config field 'seed' must fit in 64 bits")
    cfg["theta"] = _num(cfg, "theta", float)
    if not 0 < cfg["theta"] <= 1:
        raise UsageError("config field 'theta' must lie in (0, 1]")
    cfg["tol"] = _num(cfg, "tol", float)
    cfg["max_nodes"] = _num(cfg, "max_nodes", int, 1)
    for key in ("dimension_C",):
        cfg[key] = _num(cfg, key, float)
    for key in ("dimension_depth", "oracle_q0", "oracle_Q"):
        cfg[key] = _num(cfg, key, int, 0)
    f = cfg["f"]
    for key in ("kappa", "s", "t"):
        try:
            f[key] = float(f[key])
        except (TypeError, ValueError, KeyError):
            raise UsageError(f"config field 'f.{key}': expected a number, got {f.get(key)!r}") from None
    try:
        b0 = [float(v) for v in cfg["B0"]]
    except (TypeError, ValueError):
        raise UsageError(f"config field 'B0': expected [centre, radius], got {cfg['B0']!r}") from None
    if len(b0) != 2 or not b0[1] > 0:
        raise UsageError("config field 'B0' must be [centre, radius > 0]")
    cfg["B0"] = b0
    if cfg["s_range"] is not None:
        try:
            sr = [float(v) for v in cfg["s_range"]]
        except (TypeError, ValueError):
            raise UsageError(f"config field 's_range': expected two numbers, got {cfg['s_range']!r}") from None
        if len(sr) != 2:
            raise UsageError("config field 's_range' must have two entries")
        cfg["s_range"] = sr
    try:
        cfg["_space"] = make_space(cfg["space"].get("kind", "interval"), int(cfg["space"].get("depth", 20)))
        cfg["_sequence"] = make_sequence(cfg["sequence"], cfg["_space"])
        cfg["_f"] = DimensionFunction(**f)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"config: {exc}") from None
    if cfg["i_max"] is None:
        seq = cfg["_sequence"]
        cfg["i_max"] = seq.count(cfg["Q"]) if isinstance(seq, RationalSequence) else cfg["Q"]
    else:
        cfg["i_max"] = _num(cfg, "i_max", int, 1)
    return cfg


def config_echo(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def _clean(obj):
    """Make values JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_report(out: Path, report: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(json.dumps(_clean(report), sort_keys=True, indent=2) + "\n")


def write_timings(out: Path, timings: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "timings.txt").write_text("".join(f"{k}\t{v:.3f}\n" for k, v in timings.items()))


def cmd_check(cfg: dict, out: Path | None = None) -> tuple[dict, int]:
    f, space = cfg["_f"], cfg["_space"]
    try:
        v = check_dimension_function(f, space.delta)
    except InvalidDimensionFunction as exc:
        rep = {"command": "check", "f": f.to_dict(), "delta": space.delta, "verdict": f"invalid: {exc}"}
        return rep, EXIT_STAGE
    verdict = "valid" if v.valid else "fails " + ", ".join(x.split(":")[0] for x in v.failures())
    tails = cantelli_upper_check(f, cfg["_sequence"], cfg["i_max"])
    rep = {
        "command": "check",
        "version": __version__,
        "f": f.to_dict(),
        "delta": space.delta,
        "verdict": verdict,
        "lambda": v.lam,
        "cantelli": {
            "n_terms": tails.n_terms,
            "total": tails.total,
            "N": tails.N.tolist(),
            "tails": tails.tails.tolist(),
            "condensation_ratio": tails.condensation_ratio(),
        },
        "config": config_echo(cfg),
    }
    return rep, EXIT_OK if v.valid else EXIT_STAGE


def _build_one(cfg: dict, C: float, stream: int, out: Path, timings: dict, traces: list) -> dict:
    f, space, seq = cfg["_f"], cfg["_space"], cfg["_sequence"]
    B0 = Ball(*cfg["B0"])
    res: dict = {"C": C}
    t = time.perf_counter()
    balls = seq.generate(cfg["i_max"])
    try:
        n_prime = adjusted_N(balls, f, space.delta, C, cfg["N"])
    except RadiiTooLarge as exc:
        res["error"] = {"stage": "local-measure", "message": str(exc), "C": C}
        return res
    sel = greedy_select(balls, f, space.delta, C, B0, n_prime, space)
    mu = build_local_measure(balls, f, space.delta, C, B0, cfg["N"], space, allow_partial=True, selection=sel)
    timings[f"C={C:g} selection+measure"] = time.perf_counter() - t
    res["selection"] = sel.summary()
    with open(out / f"selection_C{C:g}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "status", "blocker"])
        keep = sel.trace_status != 4
        w.writerows(zip(sel.trace_index[keep].tolist(), sel.trace_status[keep].tolist(), sel.trace_blocker[keep].tolist()))
    res["local_measure"] = mu.summary()
    if not sel.success:
        res["error"] = {"stage": "selection", "message": f"greedy selection captured only {sel.fraction:.6f} of B0", "C": C}

    t = time.perf_counter()
    rep = verify_star_hypothesis(mu, cfg["samples"], cfg["seed"], stream=stream)
    timings[f"C={C:g} star"] = time.perf_counter() - t
    res["bound_report"] = rep.to_dict()

    # log-log traces of mu(B(x, rho)) for a few centres
    rng = np.random.default_rng([cfg["seed"], stream, 1])
    xs = mu.sample(rng, 8)
    rhos = np.logspace(math.log10(max(float(mu.radii.min()), 1e-300)), math.log10(B0.diam), 40)
    for x in xs.tolist():
        m = mu.mass(x - rhos, x + rhos)
        traces.extend((C, x, float(np.log(r)), float(np.log(v)) if v > 0 else "-inf") for r, v in zip(rhos.tolist(), m.tolist()))

    if "error" in res:
        return res
    t = time.perf_counter()
    try:
        tree = build_tree(seq, f, space.delta, C, cfg["depth"], B0, cfg["i_max"], space, theta=cfg["theta"], max_nodes=cfg["max_nodes"])
    except TreeBuildError as exc:
        res["error"] = {"stage": "tree", "message": str(exc), "C": C}
        if exc.tree is not None:
            res["tree"] = exc.tree.diagnostics()
        return res
    timings[f"C={C:g} tree"] = time.perf_counter() - t
    res["tree"] = tree.diagnostics()
    res["tree_invariants"] = check_tree_invariants(tree, seq)
    mdp = mass_distribution_bound(tree, f, C, cfg["samples"], cfg["seed"], stream=stream)
    res["mdp"] = mdp.to_dict()
    res["lower_bound"] = mdp.lower_bound
    with open(out / "tree.dump", "a") as fh:
        fh.write(f"## C={C:g}\n")
        fh.write(tree.dump())
    return res


def cmd_build(cfg: dict, out: Path) -> tuple[dict, int]:
    if cfg["depth"] < 1:
        raise UsageError("depth must be >= 1 for build")
    f, space = cfg["_f"], cfg["_space"]
    try:
        v = check_dimension_function(f, space.delta)
    except InvalidDimensionFunction as exc:
        raise UsageError(f"config field 'f': {exc}") from None
    if not v.valid:
        raise UsageError("config field 'f': " + "; ".join(v.failures()))
    out.mkdir(parents=True, exist_ok=True)
    (out / "tree.dump").write_text("")
    timings: dict = {}
    traces: list = []
    runs = [_build_one(cfg, C, k, out, timings, traces) for k, C in enumerate(cfg["C"])]
    with open(out / "mu_traces.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["C", "center", "log_rho", "log_mu"])
        w.writerows(traces)
    write_timings(out, timings)
    errors = [r["error"] for r in runs if "error" in r]
    rep = {"command": "build", "version": __version__, "lambda": v.lam, "runs": runs, "errors": errors, "config": config_echo(cfg)}
    return rep, EXIT_STAGE if errors else EXIT_OK


def cmd_dimension(cfg: dict, out: Path) -> tuple[dict, int]:
    seq, space = cfg["_sequence"], cfg["_space"]
    if not isinstance(seq, RationalSequence):
        raise UsageError("dimension needs a rational sequence")
    sr = cfg["s_range"] or [1.5 / seq.tau, 2.6 / seq.tau]
    timings: dict = {}
    t = time.perf_counter()
    try:
        res = dimension_bisect(seq, space.delta, cfg["dimension_C"], cfg["dimension_depth"], tuple(sr), cfg["tol"], i_max=cfg["i_max"], B0=Ball(*cfg["B0"]), space=space, seed=cfg["seed"])
    except BracketError as exc:
        rep = {"command": "dimension", "version": __version__, "error": {"stage": "dimension", "message": str(exc)}, "config": config_echo(cfg)}
        write_timings(out, {"dimension": time.perf_counter() - t})
        return rep, EXIT_STAGE
    timings["dimension"] = time.perf_counter() - t
    t = time.perf_counter()
    oracle = band_box_dimension(seq, cfg["oracle_q0"], cfg["oracle_Q"])
    timings["oracle"] = time.perf_counter() - t
    write_timings(out, timings)
    rep = {
        "command": "dimension",
        "version": __version__,
        "s_star": res.s_star,
        "bisect": res.to_dict(),
        "oracle": oracle.to_dict(),
        "oracle_slope": oracle.slope,
        "agree": abs(res.s_star - oracle.slope) <= 0.1,
        "config": config_echo(cfg),
    }
    return rep, EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="limsup", description="Hausdorff measure lower bounds for limsup sets of balls")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in (("check", "validate the dimension function"), ("build", "run selection, local measure and tree"), ("dimension", "locate the dimension by bisection")):
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--seed", type=int, help="64-bit seed")
        sp.add_argument("--out", default="limsup-out", help="output directory")
        sp.add_argument("--depth", type=int, help="tree depth")
        sp.add_argument("--c-list", dest="c_list", help="comma-separated C values")
        sp.add_argument("--samples", type=int, help="test balls per C")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    out = Path(args.out)
    try:
        cfg = load_config(args.config, args)
        if args.command == "check":
            rep, code = cmd_check(cfg)
        elif args.command == "build":
            rep, code = cmd_build(cfg, out)
        else:
            rep, code = cmd_dimension(cfg, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_report(out, rep)
    if args.command == "check":
        print(rep["verdict"])
    for err in rep.get("errors", []) + ([rep["error"]] if "error" in rep else []):
        print(f"stage {err['stage']} failed: {err['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
