"""Command-line front end: load .map files, dispatch analyses, write JSON
reports and CSV grids.

Exit codes: 0 completed analysis (even with fail verdicts), 2 input error,
3 internal numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from importlib import resources

import numpy as np

from . import dsl
from .degree import degree_formula, winding_degree_2d
from .errors import ParseError, UnsupportedDimension
from .globalcheck import global_report, kinf_probe
from .region import Region
from .regularity import NuSchedule, classify_point, implicit_solve, sard_scan
from .reports import render_report, to_jsonable


def _load_map(path):
    with open(path) as fh:
        return dsl.parse_map(fh.read())


def fixture_path(name):
    return resources.files("semimap.fixtures") / f"{name}.map"


def load_fixture(name) -> dsl.MapDef:
    return dsl.parse_map(fixture_path(name).read_text())


def _csv_floats(text):
    return [float(v) for v in text.split(",")]


def _region_from_args(args, dim_hint=None):
    if args.ball:
        vals = _csv_floats(args.ball)
        return Region.ball(vals[:-1], vals[-1])
    if args.box:
        vals = _csv_floats(args.box)
        lo = vals[0::2]
        hi = vals[1::2]
        return Region.box(lo, hi)
    if dim_hint is not None:
        return Region.box([-2.0] * dim_hint, [2.0] * dim_hint)
    raise ValueError("a region (--ball or --box) is required")


def emit_grid(m: dsl.MapDef, region: Region, quantity, resolution, out_path,
              guard_tol=dsl.GUARD_TOL_DEFAULT, seed=0):
    """CSV grid rows x1,x2,value over the region; NotSmooth cells emit nan."""
    if region.dim != 2 or m.arity != 2:
        raise UnsupportedDimension("grid quantities require n = 2")
    pts = region.grid(resolution)
    jd = dsl.differentiate(m)
    if quantity == "norm_f":
        vals = np.linalg.norm(dsl.eval_map(m, pts, strict=False), axis=1)
    else:
        mats, ok = dsl.eval_jacobian_batch(jd, pts, guard_tol=guard_tol)
        vals = np.full(len(pts), np.nan)
        if quantity == "sign_det":
            dets = np.linalg.det(mats[ok])
            vals[ok] = np.sign(dets)
        elif quantity == "nu":
            from .conorm import conorm_many

            vals[ok] = conorm_many(mats[ok])
        else:
            raise ValueError(f"unknown grid quantity {quantity!r}")
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for p, v in zip(pts, vals):
            writer.writerow([f"{p[0]:.17g}", f"{p[1]:.17g}",
                             "nan" if not np.isfinite(v) else f"{v:.17g}"])
    return len(pts)


def _schedule_from_args(args):
    kw = {"seed": args.seed}
    if args.levels:
        kw["levels"] = args.levels
    if args.samples:
        kw["samples"] = args.samples
    return NuSchedule(**kw)


def _write(args, config, verdicts, evidence, budgets):
    text = render_report(config, verdicts, evidence, budgets, args.seed)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_analyze(args):
    m = _load_map(args.map)
    x = _csv_floats(args.point)
    schedule = _schedule_from_args(args)
    cls = classify_point(m, x, schedule)
    verdicts = {"classification": cls.kind, "nu_verdict": cls.nu.verdict,
                "nu_value": cls.nu.value}
    evidence = {"radii": cls.nu.radii, "estimates": cls.nu.estimates,
                "slacks": cls.nu.slacks}
    budgets = {"sample_budget": cls.nu.sample_budget}
    _write(args, {"command": "analyze", "map": args.map, "point": x},
           verdicts, evidence, budgets)
    return 0


def cmd_degree(args):
    m = _load_map(args.map)
    y = _csv_floats(args.target)
    region = _region_from_args(args, m.arity)
    schedule = _schedule_from_args(args)
    res = degree_formula(m, region, y, schedule)
    verdicts = {"degree": res.degree, "method": res.method}
    evidence = {
        "preimages": [{"point": p, "sign": s.sign} for p, s in res.preimages],
        "boundary_margin": res.boundary_margin,
    }
    if m.arity == 2:
        evidence["winding_oracle"] = winding_degree_2d(m, region, y)
        verdicts["oracle_agrees"] = evidence["winding_oracle"] == res.degree
    budgets = {"samples": schedule.samples, "levels": schedule.levels}
    _write(args, {"command": "degree", "map": args.map, "target": y,
                  "region": to_jsonable(region)}, verdicts, evidence, budgets)
    return 0


def cmd_sard(args):
    m = _load_map(args.map)
    region = _region_from_args(args, m.arity)
    res = sard_scan(m, region, grid_resolution=args.resolution or 9, seed=args.seed)
    verdicts = {"occupancy_decreasing": res.decreasing}
    evidence = {"occupancy": res.occupancy, "critical_counts": res.critical_counts,
                "grid_resolutions": res.grid_resolutions,
                "value_resolutions": res.value_resolutions}
    _write(args, {"command": "sard", "map": args.map,
                  "region": to_jsonable(region)}, verdicts, evidence, {})
    return 0


def cmd_global(args):
    m = _load_map(args.map)
    schedule = _schedule_from_args(args)
    c_expr = None
    if args.c_expr:
        wrapper = dsl.parse_map(f"map c(x1) = ({args.c_expr})")
        c_expr = wrapper.components[0]
    rep = global_report(m, delta=args.delta, c_expr=c_expr,
                        schedule=schedule, seed=args.seed)
    verdicts = {
        "properness": rep.properness.verdict,
        "pourciau": rep.pourciau.verdict,
        "kinf_evidence_count": len(rep.kinf_evidence),
    }
    evidence = {"properness": to_jsonable(rep.properness),
                "pourciau": to_jsonable(rep.pourciau),
                "kinf": to_jsonable(rep.kinf_evidence)}
    if rep.hadamard_uniform:
        verdicts["hadamard_uniform"] = rep.hadamard_uniform.verdict
        evidence["hadamard_uniform"] = to_jsonable(rep.hadamard_uniform)
    if rep.hadamard_integral:
        verdicts["hadamard_integral"] = rep.hadamard_integral.verdict
        evidence["hadamard_integral"] = to_jsonable(rep.hadamard_integral)
    budgets = {"samples": schedule.samples}
    _write(args, {"command": "global", "map": args.map}, verdicts, evidence, budgets)
    return 0


def cmd_implicit(args):
    m = _load_map(args.map)
    xbar = _csv_floats(args.point)
    ybar = _csv_floats(args.target)
    n = len(xbar)
    if args.box:
        vals = _csv_floats(args.box)
        lo, hi = vals[0::2], vals[1::2]
    else:
        lo = [v - 0.5 for v in xbar]
        hi = [v + 0.5 for v in xbar]
    schedule = _schedule_from_args(args)
    sol = implicit_solve(m, xbar, ybar, lo, hi,
                         grid_resolution=args.resolution or 21, schedule=schedule)
    verdicts = {"cells_solved": int(np.sum(np.isfinite(sol.residuals))),
                "cells_diverged": len(sol.diverged_cells),
                "condition_estimate": sol.condition_estimate}
    evidence = {"max_residual": float(np.nanmax(sol.residuals))
                if np.any(np.isfinite(sol.residuals)) else None}
    if args.grid_out:
        with open(args.grid_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            for xg, yg in zip(sol.x_grid, sol.y_values):
                writer.writerow([f"{v:.17g}" for v in xg]
                                + [("nan" if not np.isfinite(v) else f"{v:.17g}")
                                   for v in yg])
    _write(args, {"command": "implicit", "map": args.map, "point": xbar,
                  "target": ybar}, verdicts, evidence, {})
    return 0


def cmd_selftest(args):
    """Quick bundled-fixture harness over the worked examples."""
    results = {}
    f1 = load_fixture("ex_cbrt_x")
    f2 = load_fixture("ex_cbrt_cbrt")
    f3 = load_fixture("ex_sqrt_abs")
    schedule = NuSchedule(seed=args.seed)
    c1 = classify_point(f1, [0, 0], schedule)
    c2 = classify_point(f2, [0, 0], schedule)
    c3 = classify_point(f3, [0, 0], schedule)
    results["nu_triple"] = (
        c1.kind == "regular" and abs(c1.nu.value - 1.0) <= 0.05
        and c2.nu.verdict == "infinite"
        and c3.kind == "critical"
    )
    deg = degree_formula(f2, Region.ball((0, 0), 1.0), [0, 0], schedule)
    results["degree_fixture"] = deg.degree == 1
    z2 = load_fixture("complex_square")
    results["winding_oracle"] = (
        winding_degree_2d(z2, Region.ball((0, 0), 2.0), [1, 0]) == 2
        and degree_formula(z2, Region.ball((0, 0), 2.0), [1, 0], schedule).degree == 2
    )
    shear = load_fixture("shear_product")
    ev = kinf_probe(shear, targets=[(0.0, 1.0)], ray_count=2, seed=args.seed)
    results["kinf_cluster"] = any(
        np.linalg.norm(np.asarray(e.candidate) - [0.0, 1.0]) < 0.1 for e in ev
    )
    ok = all(results.values())
    _write(args, {"command": "selftest"},
           {"all_pass": ok, **{k: bool(v) for k, v in results.items()}}, {}, {})
    return 0 if ok else 3


def build_parser():
    p = argparse.ArgumentParser(prog="semimap",
                                description="piecewise semi-algebraic map analysis")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in [("analyze", cmd_analyze), ("degree", cmd_degree),
                     ("sard", cmd_sard), ("global", cmd_global),
                     ("implicit", cmd_implicit), ("selftest", cmd_selftest)]:
        sp = sub.add_parser(name)
        sp.add_argument("--map")
        sp.add_argument("--point")
        sp.add_argument("--ball")
        sp.add_argument("--box")
        sp.add_argument("--target")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--levels", type=int, default=0)
        sp.add_argument("--samples", type=int, default=0)
        sp.add_argument("--out")
        sp.add_argument("--grid-out", dest="grid_out")
        sp.add_argument("--resolution", type=int, default=0)
        sp.add_argument("--delta", type=float, default=None)
        sp.add_argument("--c-expr", dest="c_expr", default=None)
        sp.add_argument("--quantity", default="nu",
                        choices=["nu", "sign_det", "norm_f"])
        sp.set_defaults(fn=fn)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        rc = args.fn(args)
        if args.grid_out and args.command in ("analyze", "degree", "sard"):
            m = _load_map(args.map)
            region = _region_from_args(args, m.arity)
            emit_grid(m, region, args.quantity, args.resolution or 11,
                      args.grid_out)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, UnsupportedDimension) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    return rc


if __name__ == "__main__":
    sys.exit(main())
