"""Command-line front end.

Subcommands: frd, rkd, sensitivity, rot, viz-bounds, simulate.  Primary
results are printed as versioned JSON on stdout; file-writing commands
also emit a run manifest.  Exit codes: 0 success, 2 usage, 3 data
validation, 4 numeric/degenerate, 5 classification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .data import AnalysisConfig, FitSpec, Sample, SmoothnessBounds, \
    apply_donut, load_sample
from .dm import dm_ci_bias_aware
from .errors import ClassificationError, DataError, RdcsError
from .inversion import compute_cs, srd_ci
from .rkd import RkdSpec, rkd_cs
from .simulate import ALL_METHODS, PRESETS, DgpSpec, coverage_study
from .smoothness import extreme_function, rot1, rot2
from .svgplot import line_plot

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_CLASSIFY = 5


def _file_digest(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _manifest(args, started: float, outputs, config: dict) -> dict:
    return {
        "command": " ".join(sys.argv[1:]),
        "config": config,
        "input_digest": _file_digest(args.data) if getattr(args, "data", None) else None,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "wall_time_s": round(time.time() - started, 3),
        "outputs": list(outputs),
    }


def _add_data_flags(parser):
    parser.add_argument("--data", required=True, help="CSV/TSV file with header")
    parser.add_argument("--x", required=True, help="running variable column")
    parser.add_argument("--y", required=True, help="outcome column")
    parser.add_argument("--t", required=True, help="treatment column")
    parser.add_argument("--cutoff", type=float, default=0.0)
    parser.add_argument("--donut", default=None,
                        help="comma-separated raw x values to exclude")


def _add_inference_flags(parser):
    parser.add_argument("--by", type=float, required=True,
                        help="curvature bound for the outcome")
    parser.add_argument("--bt", type=float, required=True,
                        help="curvature bound for the treatment probability")
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument("--eta", type=float, default=0.075,
                        help="Lindeberg cap on the max normalized weight")
    parser.add_argument("--neighbors", type=int, default=5)
    parser.add_argument("--kernel", default="triangular",
                        choices=("triangular", "epanechnikov", "uniform"))
    parser.add_argument("--c-range", default=None,
                        help="LO,HI search range for the ratio parameter")
    parser.add_argument("--grid", type=int, default=100,
                        help="number of grid intervals for the root search")
    parser.add_argument("--fixed-h", type=float, default=None)
    parser.add_argument("--seed", type=int, default=0)


def _load(args) -> Sample:
    sample = load_sample(args.data, {"x": args.x, "y": args.y, "t": args.t},
                         cutoff=args.cutoff)
    if args.donut:
        raw = [float(v) for v in args.donut.split(",")]
        normalized = [v - args.cutoff for v in raw]
        sample, removed = apply_donut(sample, normalized)
        print(f"donut exclusion removed {removed} row(s)", file=sys.stderr)
    return sample


def _config(args, p=1, v=0) -> AnalysisConfig:
    c_grid = None
    if args.c_range:
        lo, hi = (float(s) for s in args.c_range.split(","))
        c_grid = (lo, hi, args.grid)
    return AnalysisConfig(
        alpha=args.alpha,
        bounds=SmoothnessBounds(b_y=args.by, b_t=args.bt),
        fit=FitSpec(kernel=args.kernel, p=p, v=v),
        eta=args.eta,
        r_neighbors=args.neighbors,
        c_grid=c_grid,
        fixed_bandwidth=args.fixed_h,
    )


def _config_dict(cfg: AnalysisConfig) -> dict:
    return {
        "alpha": cfg.alpha,
        "b_y": cfg.bounds.b_y,
        "b_t": cfg.bounds.b_t,
        "kernel": cfg.fit.kernel,
        "p": cfg.fit.p,
        "v": cfg.fit.v,
        "eta": cfg.eta,
        "r_neighbors": cfg.r_neighbors,
        "c_grid": list(cfg.c_grid) if cfg.c_grid else None,
        "fixed_bandwidth": cfg.fixed_bandwidth,
    }


def cmd_frd(args) -> int:
    started = time.time()
    sample = _load(args)
    cfg = _config(args)
    cs = compute_cs(sample, cfg)
    payload = {"schema_version": SCHEMA_VERSION, **cs.to_dict(),
               "manifest": _manifest(args, started, [], _config_dict(cfg))}
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_rkd(args) -> int:
    started = time.time()
    sample = _load(args)
    cfg = _config(args, p=args.p, v=args.v)
    spec = RkdSpec(v=args.v, p=args.p,
                   bounds=SmoothnessBounds(b_y=args.by, b_t=args.bt))
    cs = rkd_cs(sample, cfg, spec)
    payload = {"schema_version": SCHEMA_VERSION, **cs.to_dict(),
               "v": args.v, "p": args.p,
               "manifest": _manifest(args, started, [], _config_dict(cfg))}
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    sample = _load(args)
    by_grid = [float(s) for s in args.by_grid.split(",")]
    bt_grid = [float(s) for s in args.bt_grid.split(",")]
    if not by_grid or not bt_grid:
        raise DataError("empty bound grid")
    rows = []
    for bt in bt_grid:
        for by in by_grid:
            ns = argparse.Namespace(**vars(args), by=by, bt=bt)
            cfg = _config(ns)
            try:
                cs = compute_cs(sample, cfg)
                cell = {"shape": cs.shape, "endpoints": list(cs.endpoints)}
            except RdcsError as exc:
                cell = {"shape": "error", "error": str(exc)}
            rows.append({"b_y": by, "b_t": bt, **cell})
    writer = csv.writer(sys.stdout)
    writer.writerow(["b_t", "b_y", "shape", "lo", "hi"])
    for row in rows:
        endpoints = row.get("endpoints", [])
        lo = endpoints[0] if len(endpoints) > 0 else ""
        hi = endpoints[1] if len(endpoints) > 1 else ""
        writer.writerow([row["b_t"], row["b_y"], row["shape"], lo, hi])
    return EXIT_OK


def cmd_rot(args) -> int:
    sample = _load(args)
    payload = {"schema_version": SCHEMA_VERSION}
    for dep in ("y", "t"):
        one = rot1(sample, dep)
        two = rot2(sample, dep)
        payload[dep] = {
            "rot1": one.value, "rot1_r2": one.fit_r2,
            "rot2": two.value, "rot2_r2": two.fit_r2,
        }
    payload["lower_bound_ci"] = (
        "not available: the one-sided lower-bound estimate is out of scope"
    )
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_viz_bounds(args) -> int:
    started = time.time()
    sample = _load(args)
    b_list = [float(s) for s in args.b_list.split(",")]
    outputs = []
    for b in b_list:
        fit = extreme_function(sample, args.dep, b, x0=args.x0,
                               knots=args.knots)
        tag = f"{args.out_prefix}_b{b:g}"
        csv_path = f"{tag}.csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "fitted"])
            for row in fit.evaluations:
                writer.writerow([f"{row[0]:.10g}", f"{row[1]:.10g}"])
        svg_path = f"{tag}.svg"
        dep_vals = sample.dep(args.dep)
        line_plot(svg_path,
                  [(f"curvature bound {b:g}", fit.evaluations[:, 0],
                    fit.evaluations[:, 1])],
                  point_series=[("data", sample.x, dep_vals)],
                  title=f"extreme fit, bound {b:g}", xlabel="x",
                  ylabel=args.dep)
        outputs.extend([csv_path, svg_path])
    manifest = _manifest(args, started, outputs,
                         {"b_list": b_list, "x0": args.x0, "knots": args.knots})
    manifest_path = f"{args.out_prefix}.manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(json.dumps({"schema_version": SCHEMA_VERSION,
                      "outputs": outputs, "manifest": manifest}, indent=2))
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.time()
    if args.preset:
        if args.preset not in PRESETS:
            raise DataError(f"unknown preset {args.preset!r}; "
                            f"choose from {sorted(PRESETS)}")
        spec = PRESETS[args.preset]
    else:
        spec = DgpSpec(runvar=args.runvar, tau_y=args.tau_y, tau_t=args.tau_t,
                       b_y=args.by, b_t=args.bt, n=args.n)
    methods = tuple(args.methods.split(","))
    theta_grid = ([float(s) for s in args.theta_grid.split(",")]
                  if args.theta_grid else None)
    report = coverage_study(spec, methods=methods, reps=args.reps,
                            theta_grid=theta_grid, seed=args.seed,
                            alpha=args.alpha, workers=args.workers)
    outputs = []
    if args.out:
        csv_path = f"{args.out}.csv"
        rows = report.to_rows()
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        json_path = f"{args.out}.json"
        with open(json_path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        outputs = [csv_path, json_path]
    payload = {"schema_version": SCHEMA_VERSION, **report.to_dict(),
               "manifest": _manifest(args, started, outputs,
                                     {"preset": args.preset})}
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdcs",
        description="Bias-aware test-inversion confidence sets for fuzzy "
                    "regression discontinuity and kink designs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_frd = sub.add_parser("frd", help="confidence set for the jump ratio")
    _add_data_flags(p_frd)
    _add_inference_flags(p_frd)
    p_frd.set_defaults(func=cmd_frd)

    p_rkd = sub.add_parser("rkd", help="confidence set for a derivative-jump ratio")
    _add_data_flags(p_rkd)
    _add_inference_flags(p_rkd)
    p_rkd.add_argument("--v", type=int, default=1)
    p_rkd.add_argument("--p", type=int, default=2)
    p_rkd.set_defaults(func=cmd_rkd)

    p_sens = sub.add_parser("sensitivity",
                            help="confidence sets over a grid of bounds")
    _add_data_flags(p_sens)
    _add_inference_flags(p_sens)
    for action in list(p_sens._actions):
        if action.dest in ("by", "bt"):
            action.required = False
    p_sens.add_argument("--by-grid", required=True)
    p_sens.add_argument("--bt-grid", required=True)
    p_sens.set_defaults(func=cmd_sensitivity, by=0.0, bt=0.0)

    p_rot = sub.add_parser("rot", help="rule-of-thumb curvature bounds")
    _add_data_flags(p_rot)
    p_rot.set_defaults(func=cmd_rot)

    p_viz = sub.add_parser("viz-bounds",
                           help="plot extreme members of the smoothness class")
    _add_data_flags(p_viz)
    p_viz.add_argument("--b-list", required=True,
                       help="comma-separated curvature bounds")
    p_viz.add_argument("--dep", default="y", choices=("y", "t"))
    p_viz.add_argument("--x0", type=float, default=0.1)
    p_viz.add_argument("--knots", type=int, default=50)
    p_viz.add_argument("--out-prefix", default="bounds")
    p_viz.add_argument("--seed", type=int, default=0)
    p_viz.set_defaults(func=cmd_viz_bounds)

    p_sim = sub.add_parser("simulate", help="Monte Carlo coverage study")
    p_sim.add_argument("--preset", default=None,
                       help=f"one of {sorted(PRESETS)}")
    p_sim.add_argument("--runvar", default="continuous_uniform",
                       choices=("continuous_uniform", "discrete_uniform_15"))
    p_sim.add_argument("--tau-y", type=float, default=1.0)
    p_sim.add_argument("--tau-t", type=float, default=0.5)
    p_sim.add_argument("--by", type=float, default=1.0)
    p_sim.add_argument("--bt", type=float, default=0.2)
    p_sim.add_argument("--n", type=int, default=1000)
    p_sim.add_argument("--methods", default="ar_tc",
                       help=f"comma-separated subset of {ALL_METHODS}")
    p_sim.add_argument("--reps", type=int, default=2000)
    p_sim.add_argument("--theta-grid", default=None)
    p_sim.add_argument("--alpha", type=float, default=0.05)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--workers", type=int, default=None)
    p_sim.add_argument("--out", default=None, help="output file prefix")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ClassificationError as exc:
        print(f"classification failure: {exc}", file=sys.stderr)
        print(json.dumps({"diagnostics": exc.diagnostics}, default=str),
              file=sys.stderr)
        return EXIT_CLASSIFY
    except RdcsError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
