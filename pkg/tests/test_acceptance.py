"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -v -s tests/test_acceptance.py` to see the criterion lines.
"""

import math
import time

import numpy as np
import pytest

from dcensim.config import ExperimentConfig
from dcensim.engine import SimConfig, Simulation, max_min_rates
from dcensim.experiments import compare_policies, run_experiment, sweep_flowsize, tune_timers
from dcensim.policies import EnergyAwareRouting, PopcornsPlacement, pair_weight, server_weight
from dcensim.power import (
    LC_STATES,
    SERVER_STATES,
    default_linecard_profile,
    default_server_profile,
    linecard_power,
)
from dcensim.topology import NodeId, NodeKind, build_fat_tree, enumerate_paths, paths_between
from oracles import dfs_minimal_paths, integrate_power_trace, water_filling


def report(criterion: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {criterion}: {status}" + (f" ({detail})" if detail else ""))
    assert ok, f"{criterion}: {detail}"


def test_01_power_table_fidelity():
    srv = default_server_profile(20)
    card = default_linecard_profile()
    ok = (
        srv.total_power == {"active": 385.0, "idle_g0": 308.0, "sleep_g1": 73.0, "sleep_g2": 51.0}
        and linecard_power(card, "active", 0.0, 24, 0) == 268.5
        and linecard_power(card, "deep", 0.0, 0, 24) == 7.0
    )
    for comp in ("forwarding_engine", "voq_static", "tcam_static", "interconnect", "host_processor"):
        series = [getattr(card, comp)[s] for s in LC_STATES]
        ok = ok and series == sorted(series, reverse=True)
    srv_series = [srv.total_power[s] for s in SERVER_STATES]
    ok = ok and srv_series == sorted(srv_series, reverse=True)
    report("01 power-table fidelity", ok)


def test_02_topology_matches_dfs_oracle():
    ok = True
    for k in (2, 4, 6):
        t = build_fat_tree(k)
        half = k // 2
        s = lambda i: NodeId(NodeKind.SERVER, i)
        pairs = [(0, half * half, half * half, 6)]
        if half > 1:
            pairs += [(0, 1, 1, 2), (0, half, half, 4)]
        for a, b, count, hops in pairs:
            paths = enumerate_paths(t, s(a), s(b))
            ok = ok and len(paths) == count and all(len(p) == hops for p in paths)
            ok = ok and sorted(p.links for p in paths) == dfs_minimal_paths(t, s(a), s(b))
    report("02 topology path oracle (k=2,4,6)", ok)


def test_03_max_min_oracle():
    rng = np.random.default_rng(100)
    worst = 0.0
    for _ in range(200):
        n_links = int(rng.integers(1, 11))
        caps = {lid: float(rng.uniform(0.5, 10.0)) for lid in range(n_links)}
        flows = {}
        for fid in range(int(rng.integers(1, 11))):
            m = int(rng.integers(1, n_links + 1))
            flows[fid] = tuple(sorted(rng.choice(n_links, size=m, replace=False).tolist()))
        got = max_min_rates(caps, flows)
        want = water_filling(caps, flows)
        for fid in flows:
            denom = max(abs(want[fid]), 1e-12)
            worst = max(worst, abs(got[fid] - want[fid]) / denom)
    report("03 max-min vs water-filling oracle", worst <= 1e-9, f"worst rel err {worst:.2e}")


def test_04_energy_conservation():
    cfg = ExperimentConfig(
        k=2, utilization=0.25, stop_jobs=200, seed=13,
        placement="random", routing="shortest", record_power_trace=True,
    )
    res = run_experiment(cfg)
    ledger_total = res.ledger.total()
    device_total = sum(res.ledger.device_total(d) for d in res.ledger.last)
    oracle_total = integrate_power_trace(res.power_trace, res.duration)
    rel_dev = abs(device_total - ledger_total) / ledger_total
    rel_orc = abs(oracle_total - ledger_total) / ledger_total
    report(
        "04 energy conservation",
        rel_dev <= 1e-6 and rel_orc <= 1e-6,
        f"device rel {rel_dev:.2e}, trace-integral rel {rel_orc:.2e}",
    )


def test_05_determinism():
    cfg = ExperimentConfig(
        k=2, utilization=0.25, stop_jobs=200, seed=21,
        placement="random", routing="shortest",
        record_event_log=True, record_power_trace=True,
    )
    a, b = run_experiment(cfg), run_experiment(cfg)
    ok = (
        a.event_log == b.event_log
        and a.ledger.entries == b.ledger.entries
        and a.workload_trace == b.workload_trace
        and a.power_trace == b.power_trace
    )
    report("05 determinism (logs and ledgers identical)", ok)


def test_06_popcorns_argmin_oracle():
    t0 = time.monotonic()
    total_checked = 0
    mismatches = 0

    def make_audit(counter):
        def audit(sim, job, tid, parent, chosen_server, chosen_path):
            nonlocal mismatches
            counter[0] += 1
            elig = [i for i in range(len(sim.servers)) if sim.server_available(i)]
            task = {t.task_id: t for t in job.tasks}[tid]
            if parent is None:
                best = min(elig, key=lambda c: (server_weight(sim, c, task.service_time, 0.0), c))
                if chosen_server != best:
                    mismatches += 1
                return
            edge = max(job.parents_of(tid), key=lambda e: (e.size, -e.parent))
            best = None
            for cand in elig:
                paths = paths_between(
                    sim.topo, sim.topo.servers[parent].id, sim.topo.servers[cand].id
                )
                for pi, path in enumerate(paths):
                    w = pair_weight(sim, cand, path, task.service_time, edge.size, job.qos_deadline)
                    key = (w, cand, pi)
                    if best is None or key < best[0]:
                        best = (key, cand, path)
            if chosen_server != best[1] or chosen_path.links != best[2].links:
                mismatches += 1
        return audit

    for k, jobs in ((2, 60), (4, 60)):
        cfg = ExperimentConfig(k=k, utilization=0.2, stop_jobs=jobs, seed=17)
        counter = [0]
        placement = PopcornsPlacement(mode="exhaustive", audit=make_audit(counter))
        sim = Simulation(
            cfg.build_topology(), cfg.build_job_stream(), placement,
            EnergyAwareRouting(), cfg.build_sim_config(),
        )
        sim.run(stop_jobs=jobs)
        assert counter[0] >= 100
        total_checked += counter[0]
    elapsed = time.monotonic() - t0
    report(
        "06 popcorns argmin oracle",
        mismatches == 0 and total_checked >= 200 and elapsed < 30,
        f"{total_checked} decisions, {mismatches} mismatches, {elapsed:.1f}s",
    )


def test_07_multi_state_ladder_not_worse_than_single_deep():
    t0 = time.monotonic()
    base = ExperimentConfig(
        k=2, utilization=0.2, stop_jobs=300, seed=4,
        placement="random", routing="shortest",
    )
    grid = (0.01, 0.05, 0.2, 1.0)
    multi = tune_timers(base, grid=grid)
    single = tune_timers(base.replaced(single_deep_state=True), grid=grid)
    e_multi = multi["result"].energy_per_job
    e_single = single["result"].energy_per_job
    elapsed = time.monotonic() - t0
    report(
        "07 tuned multi-state ladder <= 1.05 x single-deep",
        e_multi <= 1.05 * e_single and elapsed < 120,
        f"multi {e_multi:.2f} J/job vs single {e_single:.2f}, {elapsed:.1f}s",
    )


@pytest.fixture(scope="module")
def k4_comparison():
    cfg = ExperimentConfig(
        k=4, utilization=0.15, stop_jobs=2000, seed=2,
        placement="random", routing="shortest",
    )
    t0 = time.monotonic()
    results, errors = compare_policies(cfg, parallel=False)
    assert not errors, errors
    return results, time.monotonic() - t0


def test_08_policy_energy_ordering(k4_comparison):
    results, elapsed = k4_comparison
    pop = results["PopcornsPro"].energy_per_job
    sb = results["SB+SP"].energy_per_job
    wasp = results["WASP+ET"].energy_per_job
    report(
        "08 policy ordering (popcorns < SB+SP and < WASP+ET)",
        pop < sb and pop < wasp and elapsed < 120,
        f"popcorns {pop:.2f} vs SB+SP {sb:.2f} vs WASP+ET {wasp:.2f}, {elapsed:.1f}s",
    )


def test_09_qos_p90_within_deadline(k4_comparison):
    results, _ = k4_comparison
    ratios = {label: res.qos_ratio_quantile(0.90) for label, res in results.items()}
    report(
        "09 QoS p90 within deadline for every policy",
        all(r <= 1.0 for r in ratios.values()),
        ", ".join(f"{l}={r:.2f}" for l, r in sorted(ratios.items())),
    )


def test_10_flow_size_sweep():
    t0 = time.monotonic()
    cfg = ExperimentConfig(
        k=4, utilization=0.15, stop_jobs=600, seed=2,
        placement="random", routing="shortest",
    )
    sizes = (100e3, 1e6, 10e6)
    sweep = sweep_flowsize(cfg, sizes=sizes, parallel=False)
    rises = {}
    monotone = True
    for label in next(iter(sweep.values())):
        vals = [sweep[s][label].energy_per_job for s in sizes]
        monotone = monotone and vals == sorted(vals)
        rises[label] = vals[-1] - vals[0]
    smallest = min(rises, key=lambda l: rises[l])
    elapsed = time.monotonic() - t0
    report(
        "10 flow-size sweep monotone; popcorns gains least",
        monotone and smallest == "PopcornsPro" and elapsed < 300,
        f"rises {dict((l, round(r, 2)) for l, r in rises.items())}, {elapsed:.1f}s",
    )


def test_11_scale_smoke_k16():
    t0 = time.monotonic()
    cfg = ExperimentConfig(
        k=16, utilization=0.15, stop_jobs=10000, seed=7,
        placement="random", routing="shortest",
        popcorns_mode="pruned",
    )
    results, errors = compare_policies(cfg, parallel=False)
    elapsed = time.monotonic() - t0
    ok = (
        not errors
        and len(results) == 5
        and all(r.jobs_completed + r.jobs_dropped == 10000 for r in results.values())
        and all(math.isfinite(r.energy_per_job) for r in results.values())
        and elapsed < 900
    )
    report(
        "11 scale smoke k=16, 10k jobs, full comparison",
        ok,
        f"{elapsed:.1f}s, errors={errors}",
    )
