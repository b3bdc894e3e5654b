"""Command-line interface.

Subcommands: run (single experiment), compare (all policy combos on one
workload), tune (line-card timer search), sweep-flowsize (comparison across
inter-task flow sizes). Errors are emitted as JSON on stderr; exit code 2
marks configuration problems, 1 marks runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, ExperimentConfig
from .experiments import compare_policies, run_experiment, sweep_flowsize, tune_timers
from .metrics import write_comparison_csv


def _fail(code: int, kind: str, message: str, details=None) -> int:
    payload = {"error": kind, "message": message}
    if details:
        payload["details"] = details
    print(json.dumps(payload), file=sys.stderr)
    return code


def _load(path: str) -> ExperimentConfig:
    return ExperimentConfig.from_yaml(path)


def _cmd_run(args) -> int:
    cfg = _load(args.config)
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    result = run_experiment(cfg)
    result.write_summary_json(os.path.join(out_dir, "summary.json"))
    result.write_jobs_csv(os.path.join(out_dir, "jobs.csv"))
    result.write_energy_csv(os.path.join(out_dir, "energy.csv"))
    if cfg.record_power_trace:
        result.write_power_trace_csv(os.path.join(out_dir, "power_trace.csv"))
    if cfg.record_event_log:
        with open(os.path.join(out_dir, "events.log"), "w") as fh:
            fh.write("\n".join(result.event_log) + "\n")
    if args.export_edges:
        cfg.build_topology().export_edge_list(args.export_edges)
    print(json.dumps(result.summary(), sort_keys=True))
    return 0


def _cmd_compare(args) -> int:
    cfg = _load(args.config)
    results, errors = compare_policies(cfg, parallel=not args.serial)
    if args.out:
        write_comparison_csv(results, args.out)
    for label in sorted(results):
        row = results[label].summary()
        row["combo"] = label
        print(json.dumps(row, sort_keys=True))
    if errors:
        return _fail(1, "combo_failures", "one or more policy combos failed", errors)
    return 0


def _cmd_tune(args) -> int:
    cfg = _load(args.config)
    grid = tuple(args.grid) if args.grid else None
    outcome = tune_timers(cfg, **({"grid": grid} if grid else {}))
    payload = {
        "best_timers": outcome["timers"],
        "energy_per_job_j": outcome["result"].energy_per_job,
        "qos_ratio_p90": outcome["result"].qos_ratio_quantile(0.90),
        "candidates": outcome["table"],
    }
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(json.dumps({"best_timers": outcome["timers"],
                      "energy_per_job_j": outcome["result"].energy_per_job}, sort_keys=True))
    return 0


def _cmd_sweep_flowsize(args) -> int:
    cfg = _load(args.config)
    sizes = tuple(args.sizes) if args.sizes else (100e3, 1e6, 10e6)
    sweep = sweep_flowsize(cfg, sizes=sizes, parallel=not args.serial)
    rows = []
    for size, results in sweep.items():
        for label, res in sorted(results.items()):
            rows.append(
                {
                    "flow_bytes": size,
                    "combo": label,
                    "energy_per_job_j": res.energy_per_job,
                    "latency_p90_s": res.latency_quantile(0.90),
                    "qos_ratio_p90": res.qos_ratio_quantile(0.90),
                }
            )
    if args.out:
        import csv

        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(
                fh,
                fieldnames=[
                    "flow_bytes",
                    "combo",
                    "energy_per_job_j",
                    "latency_p90_s",
                    "qos_ratio_p90",
                ],
            )
            w.writeheader()
            w.writerows(rows)
    for row in rows:
        print(json.dumps(row, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcensim",
        description="Event-driven data-center energy simulator with cooperative "
        "network/server power management.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single experiment")
    p_run.add_argument("config", help="YAML experiment configuration")
    p_run.add_argument("--out-dir", default="out", help="directory for result files")
    p_run.add_argument("--export-edges", default=None, help="also write the topology edge list")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run every policy combo on one workload")
    p_cmp.add_argument("config")
    p_cmp.add_argument("--out", default=None, help="comparison CSV path")
    p_cmp.add_argument("--serial", action="store_true", help="disable process parallelism")
    p_cmp.set_defaults(func=_cmd_compare)

    p_tune = sub.add_parser("tune", help="search line-card sleep timers")
    p_tune.add_argument("config")
    p_tune.add_argument("--grid", type=float, nargs="+", default=None)
    p_tune.add_argument("--out", default=None, help="JSON report path")
    p_tune.set_defaults(func=_cmd_tune)

    p_sw = sub.add_parser("sweep-flowsize", help="policy comparison across flow sizes")
    p_sw.add_argument("config")
    p_sw.add_argument("--sizes", type=float, nargs="+", default=None)
    p_sw.add_argument("--out", default=None, help="CSV path")
    p_sw.add_argument("--serial", action="store_true")
    p_sw.set_defaults(func=_cmd_sweep_flowsize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(2, "config_error", "invalid configuration", exc.errors)
    except FileNotFoundError as exc:
        return _fail(2, "file_not_found", str(exc))
    except Exception as exc:  # noqa: BLE001 - last-resort CLI boundary
        return _fail(1, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
