import math

import numpy as np
import pytest

from dcensim.config import ExperimentConfig
from dcensim.engine import SimConfig, Simulation
from dcensim.policies import (
    ElasticRouting,
    EnergyAwareRouting,
    PopcornsPlacement,
    RandomPlacement,
    ShortestPathRouting,
    WaspPlacement,
    link_weight,
    min_rate_for_qos,
    pair_weight,
    server_weight,
)
from dcensim.topology import build_fat_tree, paths_between
from dcensim.workload import make_job


def fresh_sim(k=4, routing=None, placement=None):
    return Simulation(
        build_fat_tree(k),
        iter(()),
        placement or RandomPlacement(seed=0),
        routing or ShortestPathRouting(),
        SimConfig(),
    )


def a_job(template="web_service", seed=0, flow_bytes=1e5, deadline=10.0):
    job = make_job(template, np.random.default_rng(seed), flow_bytes=flow_bytes)
    job.qos_deadline = deadline
    return job


# ------------------------------------------------------------- weights


def test_min_rate_for_qos():
    assert min_rate_for_qos(1e6, 2.0) == pytest.approx(4e6)
    assert min_rate_for_qos(0, 2.0) == 0.0
    assert math.isinf(min_rate_for_qos(1e6, 0.0))


def test_link_weight_positive_and_monotone_in_size():
    sim = fresh_sim()
    link = sim.topo.links[0]  # a server-edge link
    sizes = [1e4, 1e5, 1e6, 1e7]
    weights = [link_weight(sim, link, s, 0.0) for s in sizes]
    assert all(w > 0 for w in weights)
    assert weights == sorted(weights)
    assert link_weight(sim, link, 0.0, 0.0) == 0.0


def test_link_weight_infinite_when_qos_unmeetable():
    sim = fresh_sim()
    link = sim.topo.links[0]
    assert math.isinf(link_weight(sim, link, 1e6, min_rate=link.capacity * 2))


def test_link_weight_prefers_awake_cards():
    sim = fresh_sim()
    link = sim.topo.links[0]
    asleep = link_weight(sim, link, 1e6, 0.0)
    card = next(iter(c for c, _ in sim._link_ports[link.link_id]))
    card.machine.current = "active"
    card.port_active[0] = True
    card.port_flows[0] = 1
    awake_busy = link_weight(sim, link, 1e6, 0.0)
    assert awake_busy < asleep


def test_server_weight_prefers_awake_servers():
    sim = fresh_sim()
    sim.servers[0].machine.current = "active"
    w_awake = server_weight(sim, 0, 0.5, 0.0)
    w_asleep = server_weight(sim, 1, 0.5, 0.0)  # idle_g0
    sim.servers[2].machine.current = "sleep_g2"
    w_deep = server_weight(sim, 2, 0.5, 0.0)
    assert w_awake < w_asleep < w_deep


def test_pair_weight_prefers_colocation():
    sim = fresh_sim()
    sim.servers[0].machine.current = "active"
    sim.servers[1].machine.current = "active"
    src = sim.topo.servers[0].id
    zero = paths_between(sim.topo, src, src)[0]
    net = paths_between(sim.topo, src, sim.topo.servers[1].id)[0]
    w_coloc = pair_weight(sim, 0, zero, 0.5, 1e5, 5.0)
    w_net = pair_weight(sim, 1, net, 0.5, 1e5, 5.0)
    assert w_coloc < w_net


def test_pair_weight_infeasible_path_is_infinite():
    sim = fresh_sim()
    src = sim.topo.servers[0].id
    net = paths_between(sim.topo, src, sim.topo.servers[1].id)[0]
    assert math.isinf(pair_weight(sim, 1, net, 0.5, 1e9, qos_remaining=0.001))


# ------------------------------------------------------------- placements


def test_random_placement_is_roughly_uniform():
    sim = fresh_sim(k=4)
    placement = RandomPlacement(seed=5)
    counts = np.zeros(len(sim.servers))
    n = 4000
    job = a_job()
    for _ in range(n):
        decision = placement.place(sim, job)
        for srv in decision.assignment.values():
            counts[srv] += 1
    expected = 2 * n / len(sim.servers)
    # chi-square-style bound: every server within 20% of uniform at n=4000
    assert np.all(np.abs(counts - expected) < 0.2 * expected)


def test_wasp_packs_active_prefix_and_resizes():
    sim = fresh_sim(k=4)
    wasp = WaspPlacement(resize_interval=5.0, headroom=1.25)
    job = a_job()
    decision = wasp.place(sim, job)
    assert set(decision.assignment.values()) == {0}  # single active server at start
    # feed 5 seconds of heavy demand, then cross the resize boundary
    sim.now = 4.9
    for _ in range(100):
        wasp.observe(sim, job)
    sim.now = 5.1
    wasp.observe(sim, job)
    demand_cores = 100 * sum(t.service_time for t in job.tasks) / 5.0
    want = math.ceil(demand_cores * 1.25 / 20)
    assert wasp.active_count == min(max(want, 1), len(sim.servers))
    assert wasp.active_count > 1


def test_wasp_least_loaded_within_active_set():
    sim = fresh_sim(k=4)
    wasp = WaspPlacement()
    wasp.active_count = 3
    sim.servers[0].machine.active_cores = 5
    sim.servers[1].machine.active_cores = 1
    sim.servers[2].machine.active_cores = 3
    decision = wasp.place(sim, a_job())
    assert decision.assignment[1] == 1


def test_popcorns_exhaustive_matches_argmin_oracle():
    decisions = []

    def audit(sim, job, tid, parent, chosen_server, chosen_path):
        elig = [i for i in range(len(sim.servers)) if sim.server_available(i)]
        task = {t.task_id: t for t in job.tasks}[tid]
        if parent is None:
            best = min(elig, key=lambda c: (server_weight(sim, c, task.service_time, 0.0), c))
            assert chosen_server == best
        else:
            edge = max(job.parents_of(tid), key=lambda e: (e.size, -e.parent))
            best = None
            for cand in elig:
                paths = paths_between(
                    sim.topo, sim.topo.servers[parent].id, sim.topo.servers[cand].id
                )
                for pi, path in enumerate(paths):
                    w = pair_weight(
                        sim, cand, path, task.service_time, edge.size, job.qos_deadline
                    )
                    key = (w, cand, pi)
                    if best is None or key < best[0]:
                        best = (key, cand, path)
            assert chosen_server == best[1]
            assert chosen_path.links == best[2].links
        decisions.append(tid)

    cfg = ExperimentConfig(k=2, utilization=0.2, stop_jobs=60, seed=9)
    placement = PopcornsPlacement(mode="exhaustive", audit=audit)
    routing = EnergyAwareRouting()
    sim = Simulation(
        cfg.build_topology(), cfg.build_job_stream(), placement, routing, cfg.build_sim_config()
    )
    res = sim.run(stop_jobs=60)
    assert res.jobs_completed == 60
    assert len(decisions) >= 100


def test_popcorns_pruned_includes_parent_server():
    sim = fresh_sim(k=4, placement=PopcornsPlacement(mode="pruned", max_candidates=2))
    placement = PopcornsPlacement(mode="pruned", max_candidates=2)
    # make the parent's would-be server busy but still eligible
    sim.servers[7].machine.current = "active"
    cands = placement._candidates(sim, 7)
    assert 7 in cands
    assert len(cands) <= 2 + 1 + 1


def test_popcorns_rejects_bad_mode():
    with pytest.raises(ValueError):
        PopcornsPlacement(mode="fast")


# --------------------------------------------------------------- routings


def test_shortest_routing_matches_dijkstra():
    from dcensim.topology import dijkstra_path

    sim = fresh_sim(k=4)
    sp = ShortestPathRouting()
    for src, dst in [(0, 1), (0, 5), (3, 12), (15, 0)]:
        got = sp.route(sim, src, dst, 1e5, 10.0)
        want = dijkstra_path(sim.topo, sim.topo.servers[src].id, sim.topo.servers[dst].id)
        assert got == want


def test_elastic_routing_spills_when_leftmost_is_full():
    sim = fresh_sim(k=4)
    et = ElasticRouting()
    paths = paths_between(sim.topo, sim.topo.servers[0].id, sim.topo.servers[4].id)
    assert et.route(sim, 0, 4, 1e5, 10.0) == paths[0]
    # saturate the leftmost edge->agg link; it carries paths[0] and paths[1]
    agg_link = paths[0].links[1]
    sim.link_rates = {agg_link: sim.topo.links[agg_link].capacity}
    flow_bytes, qos = 1e6, 0.01  # needs 800 Mb/s
    assert et.route(sim, 0, 4, flow_bytes, qos) == paths[2]


def test_energy_aware_routing_prefers_awake_path():
    sim = fresh_sim(k=4)
    paths = paths_between(sim.topo, sim.topo.servers[0].id, sim.topo.servers[4].id)
    # wake every card along the second path
    for lid in paths[1].links:
        for card, slot in sim._link_ports[lid]:
            card.machine.current = "active"
            card.port_flows[slot] = 1
    ea = EnergyAwareRouting()
    assert ea.route(sim, 0, 4, 1e6, 10.0) == paths[1]
