"""Command-line front end: ``run``, ``lab`` and ``bench``.

Exit codes: 0 success, 1 failed lab check or failed suite member, 2 config
error, 3 divergence (the partial trace is still written).
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import lab
from .config import (RunConfig, lab_settings, parse_number, run_config, suite_config)
from .diagnostics import classify_trace
from .errors import DivergenceError, TrajAccelError
from .runner import load_problem, solve
from .traceio import write_svg, write_trace_csv

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3
SUMMARY_COLUMNS = ("problem", "method", "iterations_to_tol", "final_objective",
                   "classified_trajectory_type", "status")

logger = logging.getLogger("trajaccel")


def _error(message):
    print(f"error: {message}", file=sys.stderr)


def execute(cfg: RunConfig):
    """Solve one configured run.

    Returns
    -------
    trace : list of TraceRecord
    converged : bool
    diverged : bool
    """
    problem = load_problem({k: v for k, v in cfg.problem.items() if not k.startswith("_")})
    try:
        result = solve(problem, cfg.method, cfg.accel, tol=cfg.tol, max_iter=cfg.max_iter)
    except DivergenceError as exc:
        return exc.trace, False, True
    return result.trace, result.converged, False


def cmd_run(args):
    try:
        cfg = run_config(args.config, args.set)
        out = args.out or cfg.out or "trace.csv"
        plot = args.plot or cfg.plot
        start = time.perf_counter()
        trace, converged, diverged = execute(cfg)
    except (TrajAccelError, ValueError) as exc:
        _error(exc)
        return EXIT_CONFIG
    wall = time.perf_counter() - start
    write_trace_csv(out, trace)
    if plot:
        write_svg(plot, trace, title=f"{cfg.method.name} / {cfg.accel.kind}")
    final = trace[-1].v_norm if trace else float("nan")
    status = "diverged" if diverged else ("converged" if converged else "max_iter")
    print(f"iterations={len(trace)} final_residual={final:.6e} wall_time={wall:.3f}s "
          f"status={status}")
    return EXIT_DIVERGED if diverged else EXIT_OK


def _list(raw):
    return [parse_number(t) for t in raw.split(",") if t.strip()]


def _lab_checks(settings):
    kind = settings.get("type", "").strip().lower()
    seed = int(settings.get("seed", "0"))

    def num(key, default=None):
        if key not in settings:
            if default is None:
                raise lab.InvalidConfigError(f"lab setting {key!r} is required for {kind}")
            return default
        return parse_number(settings[key])

    def count(key, default):
        return int(settings.get(key, default))

    if kind == "type1":
        window = tuple(int(t) for t in settings.get("window", "100,400").split(","))
        L, trace, checks = lab.type1_experiment(_list(settings["sigmas"]), seed,
                                                count("iterations", window[1]), window)
    elif kind == "type2":
        L, trace, checks = lab.type2_experiment(num("psi"), num("eta"), num("modulus", 0.99),
                                                seed, count("iterations", 1000),
                                                count("settle", 300))
    elif kind == "type3":
        tail = _list(settings["tail"]) if settings.get("tail", "").strip() else ()
        L, trace, checks = lab.type3_experiment(
            _list(settings["a"]), _list(settings["b"]), _list(settings["c"]),
            num("delta", 1.0), num("tau", 1.0), seed, tail, count("iterations", 10000))
    elif kind == "ellipse":
        psi = num("psi") if "psi" in settings else None
        return None, lab.ellipse_experiment(num("axis_ratio"), num("phi"),
                                            count("iterations", 10000), psi)
    elif kind == "pd":
        return None, lab.pd_experiment(num("gamma_r"), num("gamma_j"), num("tau", 1.0),
                                       num("sigma"))
    else:
        raise lab.InvalidConfigError(
            f"unknown lab type {kind!r}; use type1, type2, type3, ellipse or pd")
    return trace, checks


def cmd_lab(args):
    try:
        settings = lab_settings(args.config, args.set)
        trace, checks = _lab_checks(settings)
    except (TrajAccelError, ValueError, KeyError) as exc:
        _error(exc if not isinstance(exc, KeyError) else f"missing lab setting {exc}")
        return EXIT_CONFIG
    out = args.out or settings.get("out")
    if trace is not None and out:
        write_trace_csv(out, trace.records)
    lines = [c.line() for c in checks]
    report = settings.get("report")
    if report:
        Path(report).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_PARTIAL


def _bench_member(cfg: RunConfig, outdir: Path, plot: bool):
    name = cfg.problem.get("_name", "problem")
    row = dict(problem=name, method=cfg.label, iterations_to_tol="", final_objective="",
               classified_trajectory_type="", status="ok")
    try:
        trace, converged, diverged = execute(cfg)
    except (TrajAccelError, ValueError) as exc:
        row["status"] = f"error: {exc}"
        return row, False
    write_trace_csv(outdir / f"{name}__{cfg.label}.csv", trace)
    if plot:
        write_svg(outdir / f"{name}__{cfg.label}.svg", trace, title=f"{name} {cfg.label}")
    if converged:
        row["iterations_to_tol"] = str(len(trace))
    objective = trace[-1].objective if trace else None
    if objective is not None and math.isfinite(objective):
        row["final_objective"] = format(objective, ".17g")
    row["classified_trajectory_type"] = classify_trace(trace, cfg.tol) if trace else ""
    if diverged:
        row["status"] = "diverged"
    elif not converged:
        row["status"] = "max_iter"
    return row, not diverged


def thread_count():
    """Worker count from ``ACCEL_THREADS`` (default: CPU count)."""
    raw = os.environ.get("ACCEL_THREADS", "")
    try:
        value = int(raw) if raw.strip() else (os.cpu_count() or 1)
    except ValueError:
        logger.warning("ignoring non-integer ACCEL_THREADS=%r", raw)
        value = os.cpu_count() or 1
    return max(1, value)


def cmd_bench(args):
    try:
        suite = suite_config(args.suite, args.set)
    except (TrajAccelError, ValueError) as exc:
        _error(exc)
        return EXIT_CONFIG
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    plot = suite.plot or args.plot
    with ThreadPoolExecutor(max_workers=min(thread_count(), len(suite.runs))) as pool:
        results = list(pool.map(lambda cfg: _bench_member(cfg, outdir, plot), suite.runs))
    with open(outdir / "summary.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row, _ in results:
            writer.writerow(row)
    for row, _ in results:
        print(f"{row['problem']:>16} {row['method']:>10} "
              f"{row['iterations_to_tol'] or '-':>8} {row['classified_trajectory_type']:>12} "
              f"{row['status']}")
    return EXIT_OK if all(ok for _, ok in results) else EXIT_PARTIAL


def build_parser():
    parser = argparse.ArgumentParser(prog="trajaccel",
                                     description="Operator-splitting solvers with "
                                                 "trajectory-following acceleration.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings and details")
    sub = parser.add_subparsers(dest="command", required=True)

    def overrides(p):
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config entry (repeatable)")

    run = sub.add_parser("run", help="solve one configured problem and write its trace")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="trace CSV path (default: [run] out or trace.csv)")
    run.add_argument("--plot", help="optional SVG path")
    overrides(run)
    run.set_defaults(func=cmd_run)

    lab_cmd = sub.add_parser("lab", help="run a linear-system geometry experiment")
    lab_cmd.add_argument("--config", required=True)
    lab_cmd.add_argument("--out", help="trace CSV path (default: [lab] out)")
    overrides(lab_cmd)
    lab_cmd.set_defaults(func=cmd_lab)

    bench = sub.add_parser("bench", help="run a suite of solver configurations")
    bench.add_argument("--suite", required=True)
    bench.add_argument("--outdir", required=True)
    bench.add_argument("--plot", action="store_true", help="also write one SVG per run")
    overrides(bench)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
