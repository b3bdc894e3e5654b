"""Placement and routing policies.

Placements: random spread (baseline), workload-aware server provisioning
(WASP), and the cooperative energy-aware policy that co-optimizes server
choice and network path per interdependent task pair.

Routings: hop-count shortest path, elastic consolidation onto the leftmost
subtree with spare capacity, and the energy-aware leftmost-admissible route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .topology import Link, NodeId, Path, paths_between
from .workload import topological_order


@dataclass
class PlacementDecision:
    assignment: dict[int, int]  # task id -> server index
    paths: dict[tuple[int, int], Path]  # (parent, child) -> network path


def _server_id(sim, idx: int) -> NodeId:
    return sim.topo.servers[idx].id


def residual_capacity(sim, link: Link) -> float:
    """Unallocated bandwidth on a link given current max-min rates."""
    return max(link.capacity - sim.link_rates.get(link.link_id, 0.0), 0.0)


def min_rate_for_qos(flow_bytes: float, qos_remaining: float) -> float:
    if flow_bytes <= 0:
        return 0.0
    if qos_remaining <= 0:
        return math.inf
    return flow_bytes * 8.0 / qos_remaining


def _link_cards(sim, link: Link):
    for port in (link.port_a, link.port_b):
        if port is not None:
            yield sim.cards[(str(port.node), port.card)]


def link_weight(sim, link: Link, flow_bytes: float, min_rate: float) -> float:
    """Energy cost of carrying a flow over one link.

    Infinite when the residual bandwidth cannot meet the flow's QoS minimum
    rate. Otherwise: wake energy for sleeping line cards at either endpoint,
    plus the marginal card power (buffer terms, or full card power if the
    card is idle) held for the transfer duration.
    """
    avail = residual_capacity(sim, link)
    if avail < min_rate or avail <= 0:
        return math.inf
    if flow_bytes <= 0:
        return 0.0
    transfer = flow_bytes * 8.0 / avail
    w = 0.0
    mb = flow_bytes / 1e6
    for card in _link_cards(sim, link):
        prof = card.profile
        m = card.machine
        if m.waking or m.current != "active":
            origin = m.wake_origin if m.waking else m.current
            w += prof.active_power() * (prof.wakeup_latency.get(origin, 0.0) + transfer)
        elif any(card.port_flows):
            # card stays up anyway; only the buffered-data terms are marginal
            w += mb * (prof.voq_per_mb["active"] + prof.tcam_per_mb["active"]) * transfer
        else:
            w += prof.active_power() * transfer
    return w


def server_weight(sim, cand: int, task_service: float, transfer: float) -> float:
    """Energy cost of executing a task (and waiting out its inbound transfer)
    on a candidate server, including wake energy if it is asleep."""
    srv = sim.servers[cand]
    prof = srv.profile
    hold = task_service + transfer
    w = prof.per_active_core * hold
    m = srv.machine
    if m.waking or m.current != "active":
        origin = m.wake_origin if m.waking else m.current
        w += prof.total_power["active"] * prof.wakeup_latency.get(origin, 0.0)
        if origin != "active":
            w += (prof.total_power["active"] - prof.total_power[origin]) * hold
    # discourage piling onto a backlogged server
    w += len(srv.queue) * task_service * prof.per_active_core
    return w


def pair_weight(
    sim,
    cand: int,
    path: Path,
    task_service: float,
    flow_bytes: float,
    qos_remaining: float,
) -> float:
    """Joint cost of placing a child task on `cand` reached via `path`."""
    min_rate = min_rate_for_qos(flow_bytes, qos_remaining)
    if path.links:
        avail = min(residual_capacity(sim, sim.topo.links[lid]) for lid in path.links)
        if avail < min_rate or avail <= 0:
            return math.inf
        transfer = flow_bytes * 8.0 / avail if flow_bytes > 0 else 0.0
    else:
        transfer = 0.0
    w = server_weight(sim, cand, task_service, transfer)
    for lid in path.links:
        w += link_weight(sim, sim.topo.links[lid], flow_bytes, min_rate)
    return w


# ----------------------------------------------------------------- routing


class ShortestPathRouting:
    """Hop-count shortest path with deterministic leftmost tie-break.

    In a fat tree every minimal path has the same hop count and the
    lexicographically smallest one is the leftmost enumeration entry, so this
    equals a Dijkstra search with lexicographic tie-break (asserted against
    `dijkstra_path` in the tests) at closed-form cost.
    """

    name = "shortest"

    def route(self, sim, src: int, dst: int, flow_bytes: float, qos_remaining: float) -> Path:
        return paths_between(sim.topo, _server_id(sim, src), _server_id(sim, dst))[0]


class ElasticRouting:
    """Consolidate onto the leftmost path with enough spare capacity.

    Scans minimal paths in leftmost order and takes the first whose
    bottleneck residual meets the flow's QoS minimum rate; if none
    qualifies, falls back to the leftmost path.
    """

    name = "elastic"

    def route(self, sim, src: int, dst: int, flow_bytes: float, qos_remaining: float) -> Path:
        paths = paths_between(sim.topo, _server_id(sim, src), _server_id(sim, dst))
        min_rate = min_rate_for_qos(flow_bytes, qos_remaining)
        for path in paths:
            if not path.links:
                return path
            avail = min(residual_capacity(sim, sim.topo.links[lid]) for lid in path.links)
            if avail >= min_rate and avail > 0:
                return path
        return paths[0]


class EnergyAwareRouting:
    """Pick the minimal path with the smallest energy weight (leftmost ties)."""

    name = "popcorns"

    def route(self, sim, src: int, dst: int, flow_bytes: float, qos_remaining: float) -> Path:
        paths = paths_between(sim.topo, _server_id(sim, src), _server_id(sim, dst))
        min_rate = min_rate_for_qos(flow_bytes, qos_remaining)
        best = None
        for path in paths:
            w = sum(
                link_weight(sim, sim.topo.links[lid], flow_bytes, min_rate)
                for lid in path.links
            )
            if best is None or w < best[0]:
                best = (w, path)
        return best[1]


# --------------------------------------------------------------- placement


def _eligible_servers(sim) -> list[int]:
    out = [i for i in range(len(sim.servers)) if sim.server_available(i)]
    if not out:
        out = [i for i in range(len(sim.servers)) if sim.server_has_room(i)]
    return out


def _route_edges(sim, job, assignment) -> dict[tuple[int, int], Path] | None:
    paths = {}
    for e in job.edges:
        src, dst = assignment[e.parent], assignment[e.child]
        if src == dst:
            paths[(e.parent, e.child)] = Path(nodes=(_server_id(sim, src),), links=())
            continue
        paths[(e.parent, e.child)] = sim.routing.route(
            sim, src, dst, e.size, job.qos_deadline
        )
    return paths


class RandomPlacement:
    """Spread-by-random baseline: each task lands on a uniformly random
    available server, independent of energy state."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def place(self, sim, job) -> PlacementDecision | None:
        assignment = {}
        for t in job.tasks:
            elig = _eligible_servers(sim)
            if not elig:
                return None
            assignment[t.task_id] = elig[int(self.rng.integers(len(elig)))]
        return PlacementDecision(assignment, _route_edges(sim, job, assignment))


class WaspPlacement:
    """Workload-aware server provisioning.

    Keeps a prefix of the server list "active" and packs tasks onto the
    least-loaded active server. Every `resize_interval` seconds the active
    count is resized to the measured core demand of the last window times a
    headroom factor.
    """

    name = "wasp"

    def __init__(self, resize_interval: float = 5.0, headroom: float = 1.25):
        self.resize_interval = resize_interval
        self.headroom = headroom
        self.active_count = 1
        self._window_service = 0.0
        self._next_resize = resize_interval

    def observe(self, sim, job):
        while sim.now >= self._next_resize:
            demand_cores = self._window_service / self.resize_interval
            want = math.ceil(
                demand_cores * self.headroom / sim.servers[0].profile.core_count
            )
            self.active_count = min(max(want, 1), len(sim.servers))
            self._window_service = 0.0
            self._next_resize += self.resize_interval
        self._window_service += sum(t.service_time for t in job.tasks)

    def place(self, sim, job) -> PlacementDecision | None:
        assignment = {}
        placed: dict[int, int] = {}  # load this call has already committed
        for t in job.tasks:
            pool = [i for i in range(self.active_count) if sim.server_has_room(i)]
            if not pool:
                pool = _eligible_servers(sim)
            if not pool:
                return None
            load = lambda i: (
                len(sim.servers[i].queue)
                + sim.servers[i].machine.active_cores
                + placed.get(i, 0),
                i,
            )
            chosen = min(pool, key=load)
            assignment[t.task_id] = chosen
            placed[chosen] = placed.get(chosen, 0) + 1
        return PlacementDecision(assignment, _route_edges(sim, job, assignment))


class PopcornsPlacement:
    """Cooperative network/server placement.

    Walks the job DAG in topological order. Root tasks take the server with
    the smallest standalone energy weight. A dependent task is placed by
    minimizing the joint pair weight over (candidate server, minimal path
    from its primary parent), which trades off wake energy, marginal
    transport energy, and QoS feasibility. `exhaustive` mode scans every
    server and every minimal path; pruned mode caps both for scale.
    """

    name = "popcorns"

    def __init__(
        self,
        mode: str = "pruned",
        max_candidates: int = 8,
        max_paths: int = 2,
        audit=None,
    ):
        if mode not in ("exhaustive", "pruned"):
            raise ValueError(f"unknown popcorns mode {mode!r}")
        self.mode = mode
        self.max_candidates = max_candidates
        self.max_paths = max_paths
        self.audit = audit  # callback(sim, job, task_id, parent, chosen_server, chosen_path)
        self.decision_points = 0

    def _candidates(self, sim, parent: int | None) -> list[int]:
        elig = _eligible_servers(sim)
        if not elig:
            return []
        if self.mode == "exhaustive":
            return elig
        awake = [i for i in elig if sim.servers[i].machine.current == "active"
                 and not sim.servers[i].machine.waking]
        asleep = [i for i in elig if i not in set(awake)]
        awake.sort(key=lambda i: (len(sim.servers[i].queue), i))
        pool = awake[: self.max_candidates] + asleep[: max(self.max_candidates // 2, 1)]
        if parent is not None and parent in elig and parent not in pool:
            pool.append(parent)
        return sorted(set(pool))

    def _paths(self, sim, src: int, dst: int) -> list[Path]:
        paths = paths_between(sim.topo, _server_id(sim, src), _server_id(sim, dst))
        if self.mode == "pruned":
            return paths[: self.max_paths]
        return paths

    def place(self, sim, job) -> PlacementDecision | None:
        assignment: dict[int, int] = {}
        paths: dict[tuple[int, int], Path] = {}
        by_id = {t.task_id: t for t in job.tasks}
        for tid in topological_order(job):
            task = by_id[tid]
            parents = job.parents_of(tid)
            if not parents:
                cands = self._candidates(sim, None)
                if not cands:
                    return None
                chosen = min(
                    cands, key=lambda c: (server_weight(sim, c, task.service_time, 0.0), c)
                )
                assignment[tid] = chosen
                self.decision_points += 1
                if self.audit is not None:
                    self.audit(sim, job, tid, None, chosen, None)
                continue
            primary = max(parents, key=lambda e: (e.size, -e.parent))
            px = assignment[primary.parent]
            cands = self._candidates(sim, px)
            if not cands:
                return None
            best = None
            for cand in cands:
                for pi, path in enumerate(self._paths(sim, px, cand)):
                    w = pair_weight(
                        sim, cand, path, task.service_time, primary.size, job.qos_deadline
                    )
                    key = (w, cand, pi)
                    if best is None or key < best[0]:
                        best = (key, cand, path)
            if best is None or not math.isfinite(best[0][0]):
                # no QoS-feasible candidate: fall back to the overall argmin
                if best is None:
                    return None
            _, chosen, chosen_path = best
            assignment[tid] = chosen
            paths[(primary.parent, tid)] = chosen_path
            self.decision_points += 1
            if self.audit is not None:
                self.audit(sim, job, tid, px, chosen, chosen_path)
            for e in parents:
                if e is primary:
                    continue
                src = assignment[e.parent]
                if src == chosen:
                    paths[(e.parent, tid)] = Path(nodes=(_server_id(sim, src),), links=())
                else:
                    paths[(e.parent, tid)] = sim.routing.route(
                        sim, src, chosen, e.size, job.qos_deadline
                    )
        # zero-link entries for co-located edges the loop above skipped
        for e in job.edges:
            if (e.parent, e.child) not in paths:
                src = assignment[e.parent]
                paths[(e.parent, e.child)] = Path(nodes=(_server_id(sim, src),), links=())
        return PlacementDecision(assignment, paths)


PLACEMENTS = {
    "random": RandomPlacement,
    "wasp": WaspPlacement,
    "popcorns": PopcornsPlacement,
}

ROUTINGS = {
    "shortest": ShortestPathRouting,
    "elastic": ElasticRouting,
    "popcorns": EnergyAwareRouting,
}


def make_placement(name: str, seed: int = 0, **kwargs):
    if name == "random":
        return RandomPlacement(seed=seed)
    if name == "wasp":
        return WaspPlacement(**kwargs)
    if name == "popcorns":
        return PopcornsPlacement(**kwargs)
    raise ValueError(f"unknown placement policy {name!r}")


def make_routing(name: str):
    try:
        return ROUTINGS[name]()
    except KeyError:
        raise ValueError(f"unknown routing policy {name!r}") from None
