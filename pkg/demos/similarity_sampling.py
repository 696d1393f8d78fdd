"""Compare how similar models are across lineage patterns.

Siblings, parent/child pairs and random pairs are sampled uniformly over all
occurrences of each pattern, then scored on their canonical metadata string.
"""

import importlib.resources

from modelphylo.graph import build_family_graph, finetune_forest
from modelphylo.ingest import canonical_metadata_string, load_snapshot
from modelphylo.sampling import ROLE_PAIRS, Pattern, enumerate_sites, estimate_similarity
from modelphylo.similarity import TextMetric

records, _ = load_snapshot(importlib.resources.files("modelphylo") / "data" / "synthetic_500.jsonl")
forest = finetune_forest(build_family_graph(records))
texts = {r.model_id: canonical_metadata_string(r) for r in records}
metric = TextMetric(texts, "tfidf")

print(f"{'pattern':18s} {'roles':22s} {'sites':>8s} {'mean':>7s} {'se':>7s}")
for pattern in (Pattern.EDGE, Pattern.SIBLING_FORK, Pattern.CHAIN3, Pattern.RANDOM_PAIR):
    table = enumerate_sites(forest, pattern)
    for roles in ROLE_PAIRS[pattern]:
        est = estimate_similarity(forest, pattern, roles, metric, k=2000, seed=1, table=table)
        print(f"{pattern.label:18s} {'/'.join(roles):22s} {table.total_count:8d} {est.mean:7.4f} {est.se:7.4f}")
