"""Load the bundled snapshot, build the lineage, and look around.

Run with ``python3 demos/quickstart.py``.
"""

import importlib.resources

from modelphylo.graph import build_family_graph, depth_stats, finetune_forest
from modelphylo.ingest import load_snapshot

path = importlib.resources.files("modelphylo") / "data" / "synthetic_500.jsonl"
records, report = load_snapshot(path)
print(f"{len(records)} records, {report.malformed} malformed lines skipped")

graph = build_family_graph(records)
print(f"family graph: {len(graph.nodes)} nodes, {len(graph.edges)} relation edges, "
      f"{len(graph.components())} components")

# Each child keeps only its first finetune parent, which turns the graph into a forest.
forest = finetune_forest(graph)
stats = sorted(depth_stats(forest), key=lambda s: -s.size)[:5]
print("\nlargest finetune trees")
for s in stats:
    print(f"  {s.root:40s} size={s.size:4d} max_depth={s.max_depth} virality={s.virality:.3f}")
