"""High-level experiment drivers: single run, policy comparison, timer
tuning, and flow-size sweeps. The command-line interface is a thin wrapper
around these."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from .config import ExperimentConfig
from .engine import Simulation
from .metrics import SimulationResult

# (label, placement, routing): the baseline grid plus the cooperative policy
POLICY_COMBOS = (
    ("SB+SP", "random", "shortest"),
    ("SB+ET", "random", "elastic"),
    ("WASP+SP", "wasp", "shortest"),
    ("WASP+ET", "wasp", "elastic"),
    ("PopcornsPro", "popcorns", "popcorns"),
)


def run_experiment(cfg: ExperimentConfig, label: str = "") -> SimulationResult:
    placement, routing = cfg.build_policies()
    sim = Simulation(
        cfg.build_topology(), cfg.build_job_stream(), placement, routing, cfg.build_sim_config()
    )
    result = sim.run(stop_jobs=cfg.stop_jobs, stop_time=cfg.stop_time)
    result.label = label or f"{cfg.placement}+{cfg.routing}"
    return result


def _worker(args):
    cfg, label = args
    try:
        return label, run_experiment(cfg, label), None
    except Exception as exc:  # noqa: BLE001 - isolate per-combo failures
        return label, None, f"{type(exc).__name__}: {exc}"


def max_workers() -> int:
    env = os.environ.get("DCENSIM_THREADS")
    if env:
        try:
            n = int(env)
            if n >= 1:
                return n
        except ValueError:
            pass
    return min(len(POLICY_COMBOS), os.cpu_count() or 1)


def compare_policies(
    cfg: ExperimentConfig, parallel: bool = True
) -> tuple[dict[str, SimulationResult], dict[str, str]]:
    """Run every policy combo on the identical workload realization.

    Returns (results by label, errors by label); a combo that fails is
    reported in errors without aborting the others.
    """
    jobs = []
    for label, placement, routing in POLICY_COMBOS:
        jobs.append((cfg.replaced(placement=placement, routing=routing), label))
    results: dict[str, SimulationResult] = {}
    errors: dict[str, str] = {}
    workers = max_workers()
    if parallel and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_worker, jobs))
    else:
        outcomes = [_worker(j) for j in jobs]
    for label, result, error in outcomes:
        if error is not None:
            errors[label] = error
        else:
            results[label] = result
    return results, errors


DEFAULT_TIMER_GRID = (0.01, 0.05, 0.2, 1.0)


def tune_timers(
    cfg: ExperimentConfig,
    grid: tuple[float, ...] = DEFAULT_TIMER_GRID,
    qos_ratio_limit: float = 1.0,
) -> dict:
    """Coordinate-descent search over line-card delay timers.

    For each ladder state in descent order, sweeps the grid while holding the
    other timers fixed and keeps the value minimizing energy per job among
    QoS-feasible runs (p90 latency/deadline <= limit); ties prefer the
    smallest timer. Returns the best timer set, its result, and the full
    per-candidate table.
    """
    states = cfg.build_sim_config().card_descent_sequence()
    timers = {s: cfg.card_delay_timers.get(s, grid[0]) for s in states}
    table = []

    def evaluate(t: dict) -> SimulationResult:
        return run_experiment(cfg.replaced(card_delay_timers=dict(t)), label="tune")

    best_result = evaluate(timers)
    for state in states:
        for value in sorted(grid):
            cand = dict(timers)
            cand[state] = value
            if cand == timers:
                res = best_result
            else:
                res = evaluate(cand)
            feasible = res.qos_ratio_quantile(0.90) <= qos_ratio_limit
            table.append(
                {
                    "timers": dict(cand),
                    "energy_per_job_j": res.energy_per_job,
                    "qos_ratio_p90": res.qos_ratio_quantile(0.90),
                    "feasible": feasible,
                }
            )
            better = feasible and (
                res.energy_per_job < best_result.energy_per_job
                or (
                    res.energy_per_job == best_result.energy_per_job
                    and value < timers[state]
                )
            )
            if better:
                timers = cand
                best_result = res
    return {"timers": timers, "result": best_result, "table": table}


def sweep_flowsize(
    cfg: ExperimentConfig, sizes: tuple[float, ...] = (100e3, 1e6, 10e6), parallel: bool = True
) -> dict[float, dict[str, SimulationResult]]:
    """Policy comparison repeated at each inter-task flow size."""
    out: dict[float, dict[str, SimulationResult]] = {}
    for size in sizes:
        results, errors = compare_policies(cfg.replaced(flow_bytes=float(size)), parallel=parallel)
        if errors:
            raise RuntimeError(f"flow-size sweep failures at {size}: {errors}")
        out[float(size)] = results
    return out
