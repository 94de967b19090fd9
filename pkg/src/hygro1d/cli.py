"""Command-line interface.

Commands: simulate, converge, sensitivity, fit-peclet, steady, gen-data.
All numerics are dimensionless unless ``--dimensional`` is given (which only
affects how measurement files are read).  Exit codes: 0 ok, 1 usage or
parse error, 2 divergence, 3 unreliable reference, 4 infeasible fit.

CSV artifacts (floats at 17 significant digits):

* ``solution.csv``: ``t,x,u,phi``
* ``probes.csv``: ``t,x,u,phi``
* ``convergence.csv``: ``h,eps``
* ``sensitivity.csv``: ``t,x,theta``
* ``steady.csv``: ``x,u,phi``
* measurement files: ``t,x,phi[,T]``
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, cases, config, driver, metrics
from .errors import (
    CflViolationError,
    FitInfeasibleError,
    OracleUnreliableError,
    ProblemDefinitionError,
)
from .model import relative_humidity

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2
EXIT_ORACLE = 3
EXIT_INFEASIBLE = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _f(x: float) -> str:
    return f"{x:.17g}"


def _add_problem_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--case", choices=cases.CASE_IDS, help="built-in case id")
    src.add_argument("--config", type=Path, help="problem JSON file")
    p.add_argument("--scheme", choices=("sg", "cn", "cn_imex"), default="sg")
    p.add_argument("--dx", type=float, help="override node spacing")
    p.add_argument("--dt", type=float, help="override time step / output cadence")
    p.add_argument("--adaptive", action="store_true", help="stability-bound stepping (sg)")
    p.add_argument("--outdir", type=Path, default=Path("."), help="output directory")
    p.add_argument("--decimate", type=int, default=0,
                   help="store every k-th layer (0 = choose automatically)")
    p.add_argument("--seed", type=int, default=0)


def _load_problem(args):
    probes = ()
    if args.case:
        case = cases.build_case(args.case)
        case = cases.with_discretization(
            case, dx=args.dx, dt=args.dt,
            mode="adaptive" if args.adaptive else None,
        )
        probes = case.probes
        spec = case.spec
    else:
        spec = config.problem_from_json(args.config)
        if args.dx is not None or args.dt is not None or args.adaptive:
            from dataclasses import replace

            from .model import Grid1D, TimeControls

            grid = spec.grid if args.dx is None else Grid1D.with_spacing(args.dx)
            time = TimeControls(
                step=spec.time.step if args.dt is None else args.dt,
                horizon=spec.time.horizon,
                mode="adaptive" if args.adaptive else spec.time.mode,
                safety=spec.time.safety,
            )
            spec = replace(spec, grid=grid, time=time)
    return spec, probes


def _auto_decimation(spec, requested: int) -> int:
    if requested > 0:
        return requested
    steps = spec.time.horizon / spec.time.step
    return max(1, int(steps // 2000))


def _phi_or_nan(u, phi_initial):
    if phi_initial is None:
        return np.full_like(np.asarray(u, dtype=float), math.nan)
    return relative_humidity(u, phi_initial)


def _write_field_csv(path, field, phi_initial):
    x = field.grid.nodes
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x,u,phi\n")
        for n, t in enumerate(field.stamps):
            phi = _phi_or_nan(field.values[n], phi_initial)
            for j in range(x.size):
                fh.write(f"{_f(t)},{_f(x[j])},{_f(field.values[n, j])},{_f(phi[j])}\n")


def _write_probes_csv(path, field, phi_initial):
    pr = field.probes
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x,u,phi\n")
        if pr is None:
            return
        for n, t in enumerate(pr.times):
            phi = _phi_or_nan(pr.values[n], phi_initial)
            for p, x in enumerate(pr.positions):
                fh.write(f"{_f(t)},{_f(x)},{_f(pr.values[n, p])},{_f(phi[p])}\n")


def cmd_simulate(args) -> int:
    spec, case_probes = _load_problem(args)
    probe_list = [float(s) for s in args.probes.split(",")] if args.probes else \
        (list(case_probes) or [0.0, 0.5, 1.0])
    decim = _auto_decimation(spec, args.decimate)
    field, report = driver.solve(spec, args.scheme, probes=probe_list, decimation=decim)
    args.outdir.mkdir(parents=True, exist_ok=True)
    _write_field_csv(args.outdir / "solution.csv", field, spec.phi_initial)
    _write_probes_csv(args.outdir / "probes.csv", field, spec.phi_initial)
    doc = report.to_dict()
    doc["diverged"] = report.status == "diverged"
    doc["scheme"] = args.scheme
    doc["dx"] = spec.grid.spacing
    doc["dt"] = spec.time.step
    with open(args.outdir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    if report.status != "completed":
        print(f"run ended with status: {report.status}", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"completed {report.accepted_steps} steps, wrote {args.outdir / 'solution.csv'}")
    return EXIT_OK


def cmd_steady(args) -> int:
    spec, _ = _load_problem(args)
    row = driver.steady_state_solve(spec, args.scheme)
    args.outdir.mkdir(parents=True, exist_ok=True)
    phi = _phi_or_nan(row, spec.phi_initial)
    x = spec.grid.nodes
    with open(args.outdir / "steady.csv", "w", encoding="utf-8") as fh:
        fh.write("x,u,phi\n")
        for j in range(x.size):
            fh.write(f"{_f(x[j])},{_f(row[j])},{_f(phi[j])}\n")
    print(f"wrote {args.outdir / 'steady.csv'}")
    return EXIT_OK


def cmd_converge(args) -> int:
    spec, _ = _load_problem(args)
    values = sorted({float(v) for v in args.values.split(",")}, reverse=True)
    if len(values) < 3:
        raise _UsageError("need at least 3 distinct sweep values")
    from dataclasses import replace

    from .model import Grid1D, TimeControls

    finest = min(values)
    specs = []
    for v in values:
        if args.vary == "dx":
            ratio = v / finest
            if abs(ratio - round(ratio)) > 1e-9:
                raise _UsageError("dx values must be integer multiples of the finest")
            specs.append(replace(spec, grid=Grid1D.with_spacing(v)))
        else:
            cadence = max(values)
            ratio = cadence / v
            if abs(ratio - round(ratio)) > 1e-9:
                raise _UsageError("dt values must divide the largest value")
            specs.append(replace(spec, time=TimeControls(
                step=v, horizon=spec.time.horizon, mode=spec.time.mode,
                safety=spec.time.safety)))

    if args.vary == "dx":
        ref_spec = specs[-1]
        decim = _auto_decimation(ref_spec, args.decimate)
        ref = metrics.reference_solution(ref_spec, decimation=decim)
    else:
        cadence = max(values)
        ref_spec = replace(specs[-1], time=TimeControls(
            step=finest, horizon=spec.time.horizon, mode=spec.time.mode,
            safety=spec.time.safety))
        decim = int(round(cadence / finest))
        ref = metrics.reference_solution(ref_spec, decimation=decim)

    eps = []
    for v, s in zip(values, specs):
        if args.vary == "dx":
            field, report = driver.solve(s, args.scheme, decimation=decim)
            stride = int(round(v / finest))
            ref_sub = ref.subsample_nodes(stride)
        else:
            k = int(round(max(values) / v))
            field, report = driver.solve(s, args.scheme, decimation=k)
            ref_sub = ref
        if not report.completed:
            print(f"sweep point {v} ended with status {report.status}", file=sys.stderr)
            return EXIT_DIVERGED
        eps.append(metrics.l2_errors(field, ref_sub).eps)

    if ref.oracle_delta is not None and ref.oracle_delta >= 0.1 * min(eps):
        print(f"reference unreliable: delta {ref.oracle_delta:.3e} vs "
              f"smallest error {min(eps):.3e}", file=sys.stderr)
        return EXIT_ORACLE

    table = metrics.fit_convergence(values, eps)
    args.outdir.mkdir(parents=True, exist_ok=True)
    with open(args.outdir / "convergence.csv", "w", encoding="utf-8") as fh:
        fh.write("h,eps\n")
        for h, e in table.rows():
            fh.write(f"{_f(h)},{_f(e)}\n")
    with open(args.outdir / "convergence.json", "w", encoding="utf-8") as fh:
        json.dump({
            "vary": args.vary, "scheme": args.scheme, "slope": table.slope,
            "residual": table.residual, "monotone": table.monotone,
            "oracle_delta": ref.oracle_delta,
        }, fh, indent=2)
        fh.write("\n")
    print(f"observed order: {table.slope:.3f}")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    spec, case_probes = _load_problem(args)
    if args.delta <= 0.0:
        raise _UsageError("delta must be positive")
    probe_list = [float(s) for s in args.probes.split(",")] if args.probes else \
        (list(case_probes) or [0.5])
    decim = _auto_decimation(spec, args.decimate)
    series = analysis.sensitivity(spec, args.param, probe_list, args.delta,
                                  scheme=args.scheme, decimation=decim)
    args.outdir.mkdir(parents=True, exist_ok=True)
    with open(args.outdir / "sensitivity.csv", "w", encoding="utf-8") as fh:
        fh.write("t,x,theta\n")
        for s in series:
            for i in range(s.times.size):
                fh.write(f"{_f(s.times[i])},{_f(s.position)},{_f(s.theta[i])}\n")
    print(f"wrote {args.outdir / 'sensitivity.csv'}")
    return EXIT_OK


def cmd_fit_peclet(args) -> int:
    spec, _ = _load_problem(args)
    kwargs = {}
    if args.dimensional:
        if args.length is None or args.time_ref is None:
            raise _UsageError("--dimensional needs --length and --time-ref")
        kwargs = {"dimensionless": False, "length": args.length, "time_ref": args.time_ref}
    else:
        kwargs = {"dimensionless": True}
    series = analysis.read_measurements(args.data, **kwargs)
    bounds = tuple(float(v) for v in args.bounds.split(","))
    if len(bounds) != 2:
        raise _UsageError("--bounds needs two comma-separated values")
    decim = _auto_decimation(spec, args.decimate)
    if args.segments:
        seg_times = [float(v) for v in args.segments.split(",")]
        fit = analysis.fit_peclet_piecewise(spec, series, seg_times, bounds,
                                            scheme=args.scheme, decimation=decim)
    else:
        fit = analysis.fit_peclet_constant(spec, series, bounds,
                                           scheme=args.scheme, decimation=decim)
    from dataclasses import replace

    fitted_spec = replace(spec, peclet=fit.model)
    positions = [s.position for s in series]
    field, _report = driver.solve(fitted_spec, args.scheme, probes=positions,
                                  decimation=decim)
    args.outdir.mkdir(parents=True, exist_ok=True)
    with open(args.outdir / "fit.json", "w", encoding="utf-8") as fh:
        model = ({"value": fit.model.value} if fit.model.is_constant
                 else {"segments": [list(s) for s in fit.model.segments]})
        json.dump({
            "peclet": model, "misfit": fit.misfit,
            "evaluations": fit.evaluations, "bounds": list(fit.bounds),
        }, fh, indent=2)
        fh.write("\n")
    with open(args.outdir / "fit_curves.csv", "w", encoding="utf-8") as fh:
        fh.write("t,x,phi_meas,phi_sim\n")
        for i, s in enumerate(series):
            sim = np.interp(s.times, field.probes.times,
                            relative_humidity(field.probes.values[:, i], spec.phi_initial))
            for k in range(s.times.size):
                fh.write(f"{_f(s.times[k])},{_f(s.position)},{_f(s.phi[k])},{_f(sim[k])}\n")
    desc = (f"Pe = {fit.model.value:.4f}" if fit.model.is_constant
            else "piecewise " + ", ".join(f"{v:.3f}" for _, _, v in fit.model.segments))
    print(f"fitted {desc}, misfit {fit.misfit:.6g}")
    return EXIT_OK


def cmd_gen_data(args) -> int:
    spec, case_probes = _load_problem(args)
    probe_list = [float(s) for s in args.probes.split(",")] if args.probes else \
        (list(case_probes) or [0.5])
    decim = _auto_decimation(spec, args.decimate)
    series = analysis.generate_synthetic_measurements(
        spec, probe_list, args.noise, args.period,
        seed=args.seed, scheme=args.scheme, decimation=decim,
    )
    args.outdir.mkdir(parents=True, exist_ok=True)
    out = args.outdir / "measurements.csv"
    analysis.write_measurements(out, series)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="hygro1d",
                     description="1-D advection-diffusion moisture transfer solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation and dump CSV artifacts")
    _add_problem_args(p)
    p.add_argument("--probes", help="comma-separated probe positions in [0, 1]")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("steady", help="solve to steady state")
    _add_problem_args(p)
    p.set_defaults(fn=cmd_steady)

    p = sub.add_parser("converge", help="grid/step convergence study")
    _add_problem_args(p)
    p.add_argument("--vary", choices=("dx", "dt"), required=True)
    p.add_argument("--values", required=True, help="comma-separated sweep values")
    p.set_defaults(fn=cmd_converge)

    p = sub.add_parser("sensitivity", help="parameter sensitivity series")
    _add_problem_args(p)
    p.add_argument("--param", choices=("dm", "pe"), required=True)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--probes", help="comma-separated probe positions in [0, 1]")
    p.set_defaults(fn=cmd_sensitivity)

    p = sub.add_parser("fit-peclet", help="estimate the Peclet number from data")
    _add_problem_args(p)
    p.add_argument("--data", type=Path, required=True, help="measurement CSV (t,x,phi[,T])")
    p.add_argument("--bounds", default="0.0,5.0")
    p.add_argument("--segments", help="comma-separated segment boundary times")
    p.add_argument("--dimensional", action="store_true",
                   help="measurement stamps are seconds/metres")
    p.add_argument("--length", type=float, help="material thickness [m]")
    p.add_argument("--time-ref", type=float, dest="time_ref", help="reference time [s]")
    p.set_defaults(fn=cmd_fit_peclet)

    p = sub.add_parser("gen-data", help="generate synthetic measurements")
    _add_problem_args(p)
    p.add_argument("--probes", help="comma-separated probe positions in [0, 1]")
    p.add_argument("--noise", type=float, default=0.0, help="noise std on phi")
    p.add_argument("--period", type=float, default=0.1, help="sampling period")
    p.set_defaults(fn=cmd_gen_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProblemDefinitionError, CflViolationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleUnreliableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except FitInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
