import itertools
import math
import random
from datetime import datetime, timezone

import numpy as np
import pytest

from modelphylo.graph import forest_from_parent_map
from modelphylo.ingest import ModelRecord

T0 = datetime(2023, 1, 1, tzinfo=timezone.utc)


def rec(model_id, tags=(), created=T0, **fields):
    return ModelRecord.from_tags(model_id, created, list(tags), **fields)


def random_parent_map(rng: random.Random, n: int, root_p: float = 0.15) -> dict:
    """Node i picks a parent among 0..i-1 (or none)."""
    parent = {}
    for i in range(n):
        name = f"n{i:03d}"
        if i == 0 or rng.random() < root_p:
            parent[name] = None
        else:
            parent[name] = f"n{rng.randrange(i):03d}"
    return parent


def random_forest(rng: random.Random, n: int, root_p: float = 0.15):
    return forest_from_parent_map(random_parent_map(rng, n, root_p))


def connected_subsets(forest, size: int) -> set[frozenset]:
    """All node sets of the given size that induce a connected subtree (undirected)."""
    nbrs = {v: set(forest.successors(v)) for v in forest.nodes}
    for c, p in forest.parent.items():
        nbrs[c].add(p)
    found: set[frozenset] = set()

    def grow(current: frozenset):
        if len(current) == size:
            found.add(current)
            return
        frontier = set().union(*(nbrs[v] for v in current)) - current
        for w in frontier:
            nxt = current | {w}
            if nxt not in seen:
                seen.add(nxt)
                grow(nxt)

    seen: set[frozenset] = set()
    for v in forest.nodes:
        grow(frozenset([v]))
    return found


def classify(forest, subset: frozenset) -> str:
    top = [v for v in subset if forest.predecessor(v) not in subset]
    assert len(top) == 1
    kids = lambda v: [c for c in forest.successors(v) if c in subset]  # noqa: E731
    r = top[0]
    if len(subset) == 2:
        return "edge"
    if len(subset) == 3:
        return "sibling_fork" if len(kids(r)) == 2 else "chain3"
    k = len(kids(r))
    if k == 3:
        return "triple_fork"
    if k == 2:
        return "uncle_fork"
    (v,) = kids(r)
    return "fork_under_edge" if len(kids(v)) == 2 else "chain4"


def brute_force_counts(forest) -> dict[str, int]:
    counts = dict.fromkeys(["edge", "sibling_fork", "chain3", "triple_fork", "fork_under_edge",
                            "uncle_fork", "chain4"], 0)
    for size in (2, 3, 4):
        for s in connected_subsets(forest, size):
            counts[classify(forest, s)] += 1
    counts["random_pair"] = math.comb(len(forest.nodes), 2)
    return counts


def dp_levenshtein(a: str, b: str) -> int:
    """Textbook row-by-row dynamic programme, numpy-vectorised per row.

    The insertion dependency inside a row is resolved with a running minimum:
    row[j] = min_k<=j (tmp[k] + j - k) = cummin(tmp - idx) + idx.
    """
    if not a:
        return len(b)
    if not b:
        return len(a)
    bb = np.frombuffer(b.encode("utf-32-le"), dtype=np.uint32)
    idx = np.arange(len(b) + 1)
    prev = idx.copy()
    for i, ch in enumerate(a, 1):
        cost = (bb != ord(ch)).astype(np.int64)
        tmp = np.empty_like(prev)
        tmp[0] = i
        tmp[1:] = np.minimum(prev[1:] + 1, prev[:-1] + cost)
        prev = np.minimum.accumulate(tmp - idx) + idx
    return int(prev[-1])


def naive_levenshtein(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def brute_force_order(graph, objective: str, tie_policy: str = "none"):
    """Best objective value over every permutation."""
    from modelphylo.ordering import weight_matrix

    nodes, w = weight_matrix(graph, objective, tie_policy)
    best = -1
    for perm in itertools.permutations(range(len(nodes))):
        val = sum(int(w[perm[i], perm[j]]) for i in range(len(perm)) for j in range(i + 1, len(perm)))
        best = max(best, val)
    return best


@pytest.fixture
def synthetic_path(tmp_path):
    from modelphylo.ingest import write_snapshot
    from modelphylo.synthetic import generate_records

    path = tmp_path / "snap.jsonl"
    with open(path, "wb") as fh:
        write_snapshot(generate_records(300, seed=3), fh)
    return path
