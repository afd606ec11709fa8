"""Command-line interface: density grids, chain sampling, coefficient tables, verification.

Exit codes: 0 success, 1 verification failure, 2 usage/parameter error,
3 numerical-convergence abort.  Every output file is accompanied by (or, for
JSON, embeds) a manifest holding the subcommand, full parameter set, seed,
tool version, resolved defaults, and timestamp; data files contain no
timestamps, so a rerun from the manifest reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

import numpy as np

from . import __version__
from .errors import (
    BadIndexSet,
    DegenerateDenominator,
    IllConditioned,
    OutOfSupport,
    ParamOutOfRange,
    QNormalError,
    SingularSystem,
    SlowConvergence,
    ToleranceNotMet,
    TooManyRejections,
)
from .config import Defaults, load_defaults
from .densities import Support, aw_conditional, f_CN, f_MCN, f_MN, f_N
from .multivariate import MVQNormalSpec, covariance, marginal, spec_from_dict, spec_to_dict
from .expansions import conjecture_probe, solve_A
from .sampling import SamplerConfig, sample_chain
from .verify import check_names, run_checks

USAGE_ERROR = 2
VERIFY_FAILURE = 1
NUMERICAL_ABORT = 3

_USAGE_ERRORS = (ParamOutOfRange, OutOfSupport, BadIndexSet, KeyError, ValueError)
_NUMERICAL_ERRORS = (
    SlowConvergence,
    ToleranceNotMet,
    TooManyRejections,
    DegenerateDenominator,
    IllConditioned,
    SingularSystem,
)


def _manifest(subcommand: str, params: dict, defaults: Defaults, seed=None) -> dict:
    return {
        "subcommand": subcommand,
        "parameters": params,
        "seed": seed,
        "tool_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "defaults": defaults.as_dict(),
    }


def _write_manifest(out_path: str, manifest: dict):
    with open(out_path + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str, header: list, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row))
            fh.write("\n")


def _write_json_doc(path: str, doc: dict):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _grid(q: float, points: int) -> np.ndarray:
    sup = Support.from_q(q)
    if q == 1.0:
        return np.linspace(-4.5, 4.5, points)
    return np.linspace(sup.lo, sup.hi, points)


def _cmd_density(args, defaults: Defaults) -> int:
    q = args.q
    pol = defaults.policy()
    points = args.points or defaults.points
    rho = args.rho or []
    family = args.family
    if family == "qn":
        xs = _grid(q, points)
        cols, rows = ["x", "density"], zip(xs.tolist(), f_N(xs, q, pol).tolist())
    elif family == "cn":
        _need(len(rho) == 1, "family cn needs exactly one --rho")
        _need(args.y is not None, "family cn needs --y")
        xs = _grid(q, points)
        cols, rows = ["x", "density"], zip(
            xs.tolist(), f_CN(xs, args.y, rho[0], q, pol).tolist()
        )
    elif family == "mn":
        _need(args.t is not None, "family mn needs --t")
        xs = _grid(q, points)
        cols, rows = ["x", "density"], zip(xs.tolist(), f_MN(xs, args.t, q, pol).tolist())
    elif family == "mcn":
        _need(len(rho) == 1 and args.y is not None and args.t is not None,
              "family mcn needs --rho, --y and --t")
        xs = _grid(q, points)
        cols, rows = ["x", "density"], zip(
            xs.tolist(), f_MCN(xs, args.t, args.y, rho[0], q, pol).tolist()
        )
    elif family == "aw":
        _need(len(rho) == 2, "family aw needs two --rho values (left, right)")
        _need(args.y is not None and args.z is not None, "family aw needs --y and --z")
        xs = _grid(q, points)
        cols, rows = ["x", "density"], zip(
            xs.tolist(), aw_conditional(xs, args.y, args.z, rho[0], rho[1], q, pol).tolist()
        )
    elif family == "joint2d":
        _need(len(rho) == 1, "family joint2d needs exactly one --rho")
        xs = _grid(q, points)
        ys = _grid(q, points)
        fy = f_N(ys, q, pol)
        rows = []
        for j, yv in enumerate(ys):
            dens = f_CN(xs, float(yv), rho[0], q, pol) * fy[j]
            rows.extend((float(x), float(yv), float(d)) for x, d in zip(xs, dens))
        cols = ["x", "y", "density"]
    else:  # pragma: no cover - argparse restricts choices
        raise ParamOutOfRange(f"unknown family {family}")
    params = {
        "family": family, "q": q, "rho": rho, "y": args.y, "z": args.z, "t": args.t,
        "points": points,
    }
    manifest = _manifest("density", params, defaults)
    if args.format == "json":
        _write_json_doc(args.out, {"manifest": manifest, "columns": cols,
                                   "rows": [list(r) for r in rows]})
    else:
        _write_csv(args.out, cols, rows)
        _write_manifest(args.out, manifest)
    return 0


def _spec_from_args(args) -> MVQNormalSpec:
    if args.spec_file:
        with open(args.spec_file) as fh:
            return spec_from_dict(json.load(fh))
    _need(args.d is not None, "--d (or --spec-file) is required")
    d = args.d
    rho = args.rho or []
    _need(len(rho) == d - 1, f"need {d - 1} --rho values for d={d}")
    m = args.m or [0.0] * d
    sigma2 = args.sigma2 or [1.0] * d
    _need(len(m) == d and len(sigma2) == d, "--m and --sigma2 must appear d times")
    return MVQNormalSpec(d=d, m=tuple(m), sigma2=tuple(sigma2), rho=tuple(rho),
                         q=args.q, t=args.t)


def _cmd_sample(args, defaults: Defaults) -> int:
    spec = _spec_from_args(args)
    config = SamplerConfig(
        seed=args.seed,
        grid_size=defaults.grid_size,
        max_rejections=defaults.max_rejections,
    )
    batch = sample_chain(spec, args.n, config, defaults.policy())
    batch.to_csv(args.out)
    analytic = {"mean": list(spec.m), "variance": list(spec.sigma2)}
    if spec.t is None:
        analytic["correlation"] = covariance(spec).tolist()
    else:
        analytic["mean"] = [
            spec.t * float(np.prod(spec.rho[:i])) for i in range(spec.d)
        ]
        analytic["variance"] = [1.0] * spec.d
    manifest = _manifest(
        "sample",
        {"spec": spec_to_dict(spec), "n": args.n},
        defaults,
        seed=args.seed,
    )
    sidecar = {
        "manifest": manifest,
        "config": dataclasses.asdict(config),
        "stats": batch.stats_payload(),
        "analytic": analytic,
    }
    _write_json_doc(args.out + ".stats.json", sidecar)
    print(f"wrote {args.n} chains of length {spec.d} to {args.out}")
    return 0


def _cmd_coeffs(args, defaults: Defaults) -> int:
    rho = args.rho or []
    _need(len(rho) == 2, "coeffs needs two --rho values (left, right)")
    rl, rr = rho
    if args.conjecture_probe:
        report = conjecture_probe(args.n, rl, rr, args.q)
        doc = {
            "manifest": _manifest("coeffs", {"n": args.n, "rho": rho, "q": args.q,
                                             "conjecture_probe": True}, defaults),
            "report": {
                **{k: v for k, v in report.items() if k != "cells"},
                "cells": {f"{r},{s}": v for (r, s), v in report["cells"].items()},
            },
        }
        if args.out:
            _write_json_doc(args.out, doc)
        print(f"conjecture probe n={args.n}: all cells factor as "
              f"(rho_l rho_r)^r * Q(q): {report['all_factor']}")
        return 0
    routes = (
        ["linear_system", "interpolation_oracle"] if args.route == "both" else [args.route]
    )
    tables = {route: solve_A(args.n, rl, rr, args.q, route=route) for route in routes}
    doc = {
        "manifest": _manifest(
            "coeffs", {"n": args.n, "rho": rho, "q": args.q, "route": args.route}, defaults
        )
    }
    for route, table in tables.items():
        doc[route] = table.to_doc()
    if len(tables) == 2:
        t1, t2 = tables["linear_system"], tables["interpolation_oracle"]
        diff = max(abs(t1.entries[k] - t2.entries[k]) for k in t1.entries)
        doc["max_discrepancy"] = diff
        print(f"A^({args.n}) dual-route max discrepancy: {diff:.3e}")
    for route, table in tables.items():
        print(f"[{route}]")
        for (r, s), v in sorted(table.entries.items()):
            print(f"  A[{r},{s}] = {v:+.12f}")
    if args.out:
        _write_json_doc(args.out, doc)
    return 0


def _cmd_verify(args, defaults: Defaults) -> int:
    tol_override = {}
    for item in args.tol or []:
        _need("=" in item, "--tol must look like name=value")
        name, val = item.split("=", 1)
        tol_override[name] = float(val)
    names = args.only or None
    results = run_checks(names=names, q_override=args.q, defaults=defaults,
                         tol_override=tol_override)
    for res in results:
        print(res.line())
    if args.out:
        doc = {
            "manifest": _manifest(
                "verify", {"only": names, "q": args.q, "tol": tol_override}, defaults
            ),
            "results": [r.payload() for r in results],
        }
        _write_json_doc(args.out, doc)
    n_fail = sum(1 for r in results if r.skipped is None and not r.passed)
    n_skip = sum(1 for r in results if r.skipped is not None)
    print(f"{len(results) - n_fail - n_skip} passed, {n_fail} failed, {n_skip} skipped")
    return VERIFY_FAILURE if n_fail else 0


def _need(cond: bool, message: str):
    if not cond:
        raise ParamOutOfRange(message)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnormal",
        description="Compactly supported q-deformed normal laws: densities, "
        "sampling, expansion coefficients, and identity verification.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, with_points=True):
        p.add_argument("--q", type=float, required=True, help="deformation parameter in (-1, 1]")
        p.add_argument("--rho", type=float, action="append",
                       help="link correlation; repeatable")
        p.add_argument("--t", type=float, default=None, help="tilt parameter")
        p.add_argument("--tol", action="append",
                       help="tolerance override (verify: name=value)")
        p.add_argument("--out", help="output file path")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        if with_points:
            p.add_argument("--points", type=int, default=None, help="grid resolution")

    p_density = sub.add_parser("density", help="evaluate a density on a grid")
    common(p_density)
    p_density.add_argument("--family", required=True,
                           choices=["qn", "cn", "mn", "mcn", "aw", "joint2d"])
    p_density.add_argument("--y", type=float, default=None, help="left conditioning value")
    p_density.add_argument("--z", type=float, default=None, help="right conditioning value")
    p_density.set_defaults(func=_cmd_density, needs_out=True)

    p_sample = sub.add_parser("sample", help="simulate chains of the d-dimensional law")
    common(p_sample, with_points=False)
    p_sample.add_argument("--d", type=int, default=None, help="dimension")
    p_sample.add_argument("--m", type=float, action="append", help="shift; repeat d times")
    p_sample.add_argument("--sigma2", type=float, action="append",
                          help="scale^2; repeat d times")
    p_sample.add_argument("--n", type=int, required=True, help="number of chains")
    p_sample.add_argument("--seed", type=int, required=True, help="RNG seed")
    p_sample.add_argument("--spec-file", default=None,
                          help="JSON file with d, m[], sigma2[], rho[], q, optional t")
    p_sample.set_defaults(func=_cmd_sample, needs_out=True)

    p_coeffs = sub.add_parser("coeffs", help="two-sided regression coefficient tables")
    common(p_coeffs, with_points=False)
    p_coeffs.add_argument("--n", type=int, required=True, help="expansion order (1..4; probe to 6)")
    p_coeffs.add_argument("--route", choices=["both", "linear_system", "interpolation_oracle"],
                          default="both")
    p_coeffs.add_argument("--conjecture-probe", action="store_true",
                          help="emit the factorization report instead of a table")
    p_coeffs.set_defaults(func=_cmd_coeffs, needs_out=False)

    p_verify = sub.add_parser("verify", help="run the identity-verification suite")
    p_verify.add_argument("--q", type=float, default=None, help="override the default q set")
    p_verify.add_argument("--only", action="append", metavar="NAME",
                          help=f"run a subset; known: {', '.join(check_names())}")
    p_verify.add_argument("--tol", action="append", help="override: name=value")
    p_verify.add_argument("--out", help="JSON report path")
    p_verify.add_argument("--format", choices=["csv", "json"], default="json")
    p_verify.set_defaults(func=_cmd_verify, needs_out=False)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        defaults = load_defaults()
        if getattr(args, "needs_out", False) and not args.out:
            raise ParamOutOfRange("--out is required for this subcommand")
        return args.func(args, defaults)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return NUMERICAL_ABORT
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except QNormalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
