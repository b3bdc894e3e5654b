"""Tour of the fat-tree topology builder: element counts, path classes,
and the edge-list export."""

from dcensim import NodeId, NodeKind, build_fat_tree, dijkstra_path, enumerate_paths

for k in (2, 4, 8):
    t = build_fat_tree(k)
    print(
        f"k={k}: {len(t.servers)} servers, "
        f"{len(t.switches[NodeKind.EDGE])} edge / "
        f"{len(t.switches[NodeKind.AGG])} agg / "
        f"{len(t.switches[NodeKind.CORE])} core switches, "
        f"{len(t.links)} links"
    )

t = build_fat_tree(4)
s = lambda i: NodeId(NodeKind.SERVER, i)

print("\nPath classes at k=4 (server 0 as source):")
for dst, label in ((1, "same edge switch"), (2, "same pod"), (8, "inter-pod")):
    paths = enumerate_paths(t, s(0), s(dst))
    print(f"  -> server {dst} ({label}): {len(paths)} minimal path(s), {len(paths[0])} links each")
    print(f"     leftmost: {' - '.join(map(str, paths[0].nodes))}")

print("\nHop-shortest route with deterministic tie-break:")
p = dijkstra_path(t, s(0), s(8))
print("  ", " - ".join(map(str, p.nodes)))

t.export_edge_list("/tmp/dcensim_edges.txt")
with open("/tmp/dcensim_edges.txt") as fh:
    lines = fh.readlines()
print(f"\nEdge list exported ({len(lines)} lines); first three:")
print("".join(f"  {l}" for l in lines[:3]), end="")
