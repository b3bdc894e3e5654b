"""Fat-tree topology: servers, switches, line cards, ports, links, and path queries.

The structure built here is immutable after construction; the simulation
engine layers mutable runtime state (power state machines, flow counts)
on top of it by node index.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum


class NodeKind(Enum):
    SERVER = "server"
    EDGE = "edge"
    AGG = "agg"
    CORE = "core"


SWITCH_KINDS = (NodeKind.EDGE, NodeKind.AGG, NodeKind.CORE)


@dataclass(frozen=True)
class NodeId:
    kind: NodeKind
    index: int

    def __repr__(self):
        return f"{self.kind.value}{self.index}"


@dataclass(frozen=True)
class PortRef:
    """(switch index within kind, card index, port index on the card)."""

    node: NodeId
    card: int
    port: int


@dataclass(frozen=True)
class Link:
    link_id: int
    endpoint_a: NodeId
    endpoint_b: NodeId
    capacity: float  # bits per second
    port_a: PortRef | None = None  # None for the server side of a link
    port_b: PortRef | None = None

    def other(self, node: NodeId) -> NodeId:
        if node == self.endpoint_a:
            return self.endpoint_b
        if node == self.endpoint_b:
            return self.endpoint_a
        raise KeyError(f"{node} is not an endpoint of link {self.link_id}")

    def port_at(self, node: NodeId) -> PortRef | None:
        if node == self.endpoint_a:
            return self.port_a
        if node == self.endpoint_b:
            return self.port_b
        raise KeyError(f"{node} is not an endpoint of link {self.link_id}")


@dataclass
class LineCard:
    ports: list[int | None]  # link_id per port slot, None = unused
    port_count: int


@dataclass
class Switch:
    id: NodeId
    level: NodeKind
    line_cards: list[LineCard]
    pod: int | None  # None for core switches


@dataclass
class Server:
    id: NodeId
    core_count: int
    edge_link: int  # link_id
    pod: int
    edge_index: int  # global index of the attached edge switch


@dataclass(frozen=True)
class Path:
    nodes: tuple[NodeId, ...]
    links: tuple[int, ...]

    def __len__(self):
        return len(self.links)


DEFAULT_CAPACITY_BY_LEVEL = {
    "edge": 1e9,
    "agg": 10e9,
    "core": 10e9,
}


@dataclass
class FatTree:
    k: int
    core_count_per_server: int
    servers: list[Server]
    switches: dict[NodeKind, list[Switch]]
    links: list[Link]
    link_by_pair: dict[tuple[NodeId, NodeId], int]
    adj: dict[NodeId, list[int]] = field(default_factory=dict)
    path_cache: dict[tuple[int, int], list[Path]] = field(default_factory=dict)

    @property
    def num_servers(self):
        return len(self.servers)

    def link(self, link_id: int) -> Link:
        return self.links[link_id]

    def link_between(self, a: NodeId, b: NodeId) -> Link:
        key = (a, b) if (a.kind.value, a.index) <= (b.kind.value, b.index) else (b, a)
        return self.links[self.link_by_pair[key]]

    def all_switches(self):
        for kind in SWITCH_KINDS:
            yield from self.switches[kind]

    def max_capacity(self) -> float:
        return max(l.capacity for l in self.links)

    def export_edge_list(self, path):
        with open(path, "w") as fh:
            for l in self.links:
                fh.write(f"{l.endpoint_a} {l.endpoint_b} {l.capacity:.0f}\n")


def _pair_key(a: NodeId, b: NodeId):
    return (a, b) if (a.kind.value, a.index) <= (b.kind.value, b.index) else (b, a)


def build_fat_tree(
    k: int,
    capacity_by_level: dict[str, float] | None = None,
    cores_per_server: int = 20,
    ports_per_card: int = 24,
) -> FatTree:
    """Construct a k-ary fat tree with deterministic, pod-major numbering.

    Numbering: pods left to right; within a pod, edge and agg switches left
    to right; servers left to right under their edge switch; core switches
    grouped by the agg position they attach to.
    """
    if k < 2 or k % 2 != 0:
        raise ValueError(f"fat tree requires an even k >= 2, got {k}")
    caps = dict(DEFAULT_CAPACITY_BY_LEVEL)
    if capacity_by_level:
        caps.update(capacity_by_level)
    for level, cap in caps.items():
        if cap <= 0:
            raise ValueError(f"capacity for level {level!r} must be positive")

    half = k // 2
    n_edge = n_agg = k * half
    n_core = half * half

    def make_switch(kind, idx, pod, n_ports):
        cards = []
        remaining = n_ports
        while remaining > 0:
            n = min(ports_per_card, remaining)
            cards.append(LineCard(ports=[None] * n, port_count=ports_per_card))
            remaining -= n
        return Switch(id=NodeId(kind, idx), level=kind, line_cards=cards, pod=pod)

    switches = {
        NodeKind.EDGE: [make_switch(NodeKind.EDGE, i, i // half, k) for i in range(n_edge)],
        NodeKind.AGG: [make_switch(NodeKind.AGG, i, i // half, k) for i in range(n_agg)],
        NodeKind.CORE: [make_switch(NodeKind.CORE, i, None, k) for i in range(n_core)],
    }

    links: list[Link] = []
    link_by_pair: dict[tuple[NodeId, NodeId], int] = {}
    port_cursor: dict[NodeId, int] = {}

    def next_port(sw: Switch) -> PortRef:
        cur = port_cursor.get(sw.id, 0)
        port_cursor[sw.id] = cur + 1
        card_idx, port_idx = divmod(cur, ports_per_card)
        return PortRef(node=sw.id, card=card_idx, port=port_idx)

    def add_link(a: NodeId, b: NodeId, capacity: float):
        pa = pb = None
        if a.kind in SWITCH_KINDS:
            sw = switches[a.kind][a.index]
            pa = next_port(sw)
            sw.line_cards[pa.card].ports[pa.port] = len(links)
        if b.kind in SWITCH_KINDS:
            sw = switches[b.kind][b.index]
            pb = next_port(sw)
            sw.line_cards[pb.card].ports[pb.port] = len(links)
        link = Link(len(links), a, b, capacity, pa, pb)
        links.append(link)
        link_by_pair[_pair_key(a, b)] = link.link_id
        return link

    servers: list[Server] = []
    for pod in range(k):
        for e in range(half):
            edge_idx = pod * half + e
            for s in range(half):
                srv_idx = pod * half * half + e * half + s
                srv_id = NodeId(NodeKind.SERVER, srv_idx)
                link = add_link(srv_id, NodeId(NodeKind.EDGE, edge_idx), caps["edge"])
                servers.append(
                    Server(
                        id=srv_id,
                        core_count=cores_per_server,
                        edge_link=link.link_id,
                        pod=pod,
                        edge_index=edge_idx,
                    )
                )
    # edge <-> agg, within each pod
    for pod in range(k):
        for e in range(half):
            for a in range(half):
                add_link(
                    NodeId(NodeKind.EDGE, pod * half + e),
                    NodeId(NodeKind.AGG, pod * half + a),
                    caps["agg"],
                )
    # agg <-> core: agg at position a in its pod connects to cores [a*half, (a+1)*half)
    for pod in range(k):
        for a in range(half):
            for c in range(half):
                add_link(
                    NodeId(NodeKind.AGG, pod * half + a),
                    NodeId(NodeKind.CORE, a * half + c),
                    caps["core"],
                )

    adj: dict[NodeId, list[int]] = {}
    for link in links:
        adj.setdefault(link.endpoint_a, []).append(link.link_id)
        adj.setdefault(link.endpoint_b, []).append(link.link_id)

    return FatTree(
        k=k,
        core_count_per_server=cores_per_server,
        servers=servers,
        switches=switches,
        links=links,
        link_by_pair=link_by_pair,
        adj=adj,
    )


def _server(t: FatTree, node: NodeId) -> Server:
    if node.kind is not NodeKind.SERVER or not 0 <= node.index < len(t.servers):
        raise KeyError(f"unknown server {node}")
    return t.servers[node.index]


def _make_path(t: FatTree, nodes: list[NodeId]) -> Path:
    links = tuple(
        t.link_between(nodes[i], nodes[i + 1]).link_id for i in range(len(nodes) - 1)
    )
    return Path(nodes=tuple(nodes), links=links)


def enumerate_paths(t: FatTree, src: NodeId, dst: NodeId) -> list[Path]:
    """All minimal-hop simple paths between two servers, leftmost first.

    Same edge switch -> 1 path (2 links); same pod -> k/2 paths (4 links);
    inter-pod -> (k/2)^2 paths (6 links).
    """
    key = (src.index, dst.index)
    cached = t.path_cache.get(key)
    if cached is not None:
        return cached
    a, b = _server(t, src), _server(t, dst)
    if src == dst:
        raise ValueError("enumerate_paths requires distinct servers")
    half = t.k // 2
    e1 = NodeId(NodeKind.EDGE, a.edge_index)
    e2 = NodeId(NodeKind.EDGE, b.edge_index)
    paths: list[Path] = []
    if a.edge_index == b.edge_index:
        paths.append(_make_path(t, [src, e1, dst]))
    elif a.pod == b.pod:
        for i in range(half):
            agg = NodeId(NodeKind.AGG, a.pod * half + i)
            paths.append(_make_path(t, [src, e1, agg, e2, dst]))
    else:
        for i in range(half):
            agg1 = NodeId(NodeKind.AGG, a.pod * half + i)
            agg2 = NodeId(NodeKind.AGG, b.pod * half + i)
            for j in range(half):
                core = NodeId(NodeKind.CORE, i * half + j)
                paths.append(_make_path(t, [src, e1, agg1, core, agg2, e2, dst]))
    t.path_cache[key] = paths
    return paths


def paths_between(t: FatTree, src: NodeId, dst: NodeId) -> list[Path]:
    """Like enumerate_paths but allows src == dst (one zero-link path)."""
    if src == dst:
        return [Path(nodes=(src,), links=())]
    return enumerate_paths(t, src, dst)


def dijkstra_path(t: FatTree, src: NodeId, dst: NodeId) -> Path:
    """Minimum-hop path; ties broken by the smallest node-index sequence."""
    _server(t, src)
    _server(t, dst)
    if src == dst:
        return Path(nodes=(src,), links=())

    def node_key(n: NodeId):
        order = {NodeKind.SERVER: 0, NodeKind.EDGE: 1, NodeKind.AGG: 2, NodeKind.CORE: 3}
        return (order[n.kind], n.index)

    # heap entries: (hops, node-key sequence, node, path nodes, path links)
    heap = [(0, (node_key(src),), src, [src], [])]
    best: dict[NodeId, tuple] = {}
    while heap:
        hops, seq, node, nodes, lids = heapq.heappop(heap)
        if node == dst:
            return Path(nodes=tuple(nodes), links=tuple(lids))
        if node in best and best[node] <= (hops, seq):
            continue
        best[node] = (hops, seq)
        for lid in sorted(t.adj[node], key=lambda i: node_key(t.links[i].other(node))):
            nxt = t.links[lid].other(node)
            if nxt in nodes:
                continue
            if nxt.kind is NodeKind.SERVER and nxt != dst:
                continue
            heapq.heappush(
                heap,
                (hops + 1, seq + (node_key(nxt),), nxt, nodes + [nxt], lids + [lid]),
            )
    raise RuntimeError("fat tree is connected; no path found indicates a construction bug")


def leftmost_path(t: FatTree, src: NodeId, dst: NodeId, admissible=None) -> Path | None:
    """First minimal path, in leftmost order, whose switch-to-switch links all
    pass the admissibility predicate. Server attachment links are mandatory
    and exempt. Returns None when every branch is inadmissible.
    """
    if src == dst:
        return Path(nodes=(src,), links=())
    if admissible is None:
        admissible = lambda link: True
    for path in enumerate_paths(t, src, dst):
        ok = True
        for lid in path.links:
            link = t.links[lid]
            if link.endpoint_a.kind is NodeKind.SERVER or link.endpoint_b.kind is NodeKind.SERVER:
                continue
            if not admissible(link):
                ok = False
                break
        if ok:
            return path
    return None
