"""Command-line entry point.

Exit codes: 0 ok, 2 configuration or usage error, 3 calibration error,
4 assessment error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CALIBRATION = 3
EXIT_ASSESS = 4

OUT_ENV = "ELASTISIM_OUT"
DEFAULT_OUT = "elastisim-out"

log = logging.getLogger("elastisim")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_error(exc) -> int:
    print("configuration error:", file=sys.stderr)
    for p in getattr(exc, "problems", [str(exc)]):
        print(f"  {p}", file=sys.stderr)
    return EXIT_CONFIG


def _load(ref, args):
    from dataclasses import replace

    from .config import resolve_config
    cfg = resolve_config(ref)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "horizon", None) is not None:
        cfg = replace(cfg, horizon_s=args.horizon,
                      workload=cfg.workload.replace(duration_s=args.horizon))
    if getattr(args, "devices", None) is not None:
        cfg = cfg.with_devices(args.devices)
    return cfg


def cmd_simulate(args) -> int:
    from .config import ConfigError
    from .simcore import run
    try:
        cfg = _load(args.config, args)
        report = run(cfg)
    except ConfigError as exc:
        return _config_error(exc)
    out = _out_dir(args)
    paths = report.write(out, prefix=args.prefix)
    if not args.no_plots:
        from . import plotting
        plotting.utilization_plot(report, out / f"{args.prefix}_utilization.png")
        plotting.response_plot(report, out / f"{args.prefix}_response.png")
    s = report.summary_dict()
    p95 = s["response_ms"].get("p95")
    print(f"{cfg.name}: seed={cfg.seed} generated={report.generated} "
          f"completed={report.completed} in_flight={report.in_flight} "
          f"p95={'n/a' if p95 is None else f'{p95:.1f}'} ms -> {paths['summary'].parent}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    from .demand import Accuracy, CalibrationUnstableError, calibrate_live
    try:
        load1 = os.getloadavg()[0]
        if load1 > 0.5 * (os.cpu_count() or 1):
            log.warning("load average %.2f is high; calibration may be noisy", load1)
    except OSError:
        pass
    try:
        table = calibrate_live(Accuracy(args.accuracy.upper()), max_target_ms=args.max_target_ms)
    except CalibrationUnstableError as exc:
        print(f"calibration unstable: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    out = _out_dir(args)
    path = out / args.file
    table.to_csv(path)
    print(f"{len(table.rows)} rows, {table.fitted_rate_ms_per_iter:.4e} ms/iter, "
          f"spread {table.ratio_spread():.2%} -> {path}")
    return EXIT_OK


def _int_list(text: str) -> list:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of integers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def cmd_assess(args, parser) -> int:
    from . import plotting, stats
    from .assess import AssessmentError, assess_configurations, comparison_rows
    from .config import ConfigError
    if args.lo >= args.hi:
        parser.error(f"--lo ({args.lo}) must be below --hi ({args.hi})")
    if args.step <= 0 or args.seeds < 1 or args.jobs < 1:
        parser.error("--step, --seeds and --jobs must be positive")
    try:
        scenarios = {}
        for ref in args.config:
            cfg = _load(ref, args)
            scenarios[cfg.name] = cfg
    except ConfigError as exc:
        return _config_error(exc)
    base = args.seed if args.seed is not None else 0
    seeds = [base + k for k in range(args.seeds)]
    try:
        results = assess_configurations(scenarios, args.lo, args.hi, args.step, seeds,
                                        jobs=args.jobs)
    except (AssessmentError, ValueError) as exc:
        print(f"assessment failed: {exc}", file=sys.stderr)
        return EXIT_ASSESS
    out = _out_dir(args)
    for name, res in results.items():
        stats.export(res, "csv", out / f"{name}_trials.csv")
    stats.write_csv(out / "capacity_curve.csv", ("config",) + tuple(next(iter(results.values())).csv_header),
                    comparison_rows(results))
    stats.write_json(out / "capacity.json",
                     {name: r.summary_dict() for name, r in results.items()})
    threshold = next(iter(scenarios.values())).slo.threshold_ms
    plotting.scalability_plot(results, out / "scalability.png", threshold)
    for name, res in results.items():
        flags = " (hi passes)" if res.hi_pass else " (lo fails)" if res.lo_fail else ""
        print(f"{name}: max_devices={res.max_devices}{flags} probes={res.probes}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from . import plotting, stats
    from .demand import CalibrationTable, burn_cpu
    if any(d <= 0 for d in args.demand):
        print("demand levels must be positive", file=sys.stderr)
        return EXIT_CONFIG
    if args.iterations < 1 or args.warmup < 0 or args.executions < 1:
        print("--iterations and --executions must be >= 1, --warmup >= 0", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args)
    cal = Path(args.calibration) if args.calibration else out / "calibration.csv"
    try:
        table = CalibrationTable.from_csv(cal)
    except (OSError, ValueError) as exc:
        print(f"no usable calibration table at {cal}: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    records = []
    for demand in args.demand:
        for execution in range(1, args.executions + 1):
            for i in range(args.warmup + args.iterations):
                warm = i < args.warmup
                records.append(dict(node=args.node, qos=args.qos, demand_ms=demand,
                                    execution=execution,
                                    iteration=i + 1 - (0 if warm else args.warmup),
                                    measured_ms=burn_cpu(demand, table),
                                    warmup="true" if warm else "false"))
    stats.write_benchmark_csv(out / "bench.csv", records)
    for r in records:
        r["warmup"] = r["warmup"] == "true"
    sets = stats.group_samples(records)
    stats.write_csv(out / "bench_summary.csv", stats.SUMMARY_HEADER, stats.summary_rows(sets))
    if not args.no_plots:
        plotting.bench_plot(sets, out / "bench.png")
    measured = sum(not r["warmup"] for r in records)
    print(f"{measured} measured rows ({len(records) - measured} warm-up) -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="elastisim",
        description="Simulate and benchmark an elastic containerised ingest pipeline.",
        epilog="exit codes: 0 ok, 2 config/usage, 3 calibration, 4 assessment")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def out_arg(sp):
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")

    s = sub.add_parser("simulate", help="run one scenario and export the report")
    s.add_argument("config", help="config path or bundled config name")
    out_arg(s)
    s.add_argument("--seed", type=int)
    s.add_argument("--devices", type=int, help="override workload device count")
    s.add_argument("--horizon", type=float, help="override horizon in seconds")
    s.add_argument("--prefix", default="run", help="file name prefix (default run)")
    s.add_argument("--no-plots", action="store_true")

    c = sub.add_parser("calibrate", help="calibrate the busy-loop kernel on this host")
    c.add_argument("--accuracy", choices=("low", "medium", "high"), default="medium")
    c.add_argument("--max-target-ms", type=float, default=1024.0)
    c.add_argument("--file", default="calibration.csv")
    out_arg(c)

    a = sub.add_parser("assess", help="binary-search the device capacity of configs")
    a.add_argument("config", nargs="+", help="config paths or bundled names")
    a.add_argument("--lo", type=int, default=100)
    a.add_argument("--hi", type=int, default=8000)
    a.add_argument("--step", type=int, default=100)
    a.add_argument("--seeds", type=int, default=3, help="seeds per probe (median verdict)")
    a.add_argument("--seed", type=int, help="first seed (default 0)")
    a.add_argument("--horizon", type=float, help="override horizon in seconds")
    a.add_argument("--jobs", type=int, default=1, help="parallel simulation processes")
    out_arg(a)

    b = sub.add_parser("bench", help="burn calibrated CPU demands and record timings")
    b.add_argument("--demand", type=_int_list, default=[50, 200, 1000],
                   help="comma separated demands in ms (default 50,200,1000)")
    b.add_argument("--qos", choices=("Guaranteed", "Burstable", "BestEffort"),
                   default="BestEffort", help="QoS label recorded with the rows")
    b.add_argument("--node", default=os.uname().nodename if hasattr(os, "uname") else "local")
    b.add_argument("--iterations", type=int, default=5)
    b.add_argument("--warmup", type=int, default=5)
    b.add_argument("--executions", type=int, default=2)
    b.add_argument("--calibration", help="calibration CSV (default <out>/calibration.csv)")
    b.add_argument("--no-plots", action="store_true")
    out_arg(b)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "calibrate":
        return cmd_calibrate(args)
    if args.command == "assess":
        return cmd_assess(args, parser)
    return cmd_bench(args)


if __name__ == "__main__":
    sys.exit(main())
