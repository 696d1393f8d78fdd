"""Optimal orderings of drift-graph values (weighted linear ordering / feedback arc set).

An ordering is scored two ways:

* drift agreement: share of oriented drift edges whose source precedes target;
* mutation agreement: share of all mutation events between retained values
  whose source precedes target.

Tie-flagged drift edges have no majority direction. Under the default
``tie_policy="none"`` they stay in the denominator but never count as
agreeing; ``"orientation"`` scores them by their recorded orientation and
``"exclude"`` drops them altogether.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass

import numpy as np

from .errors import InvalidPermutationError, TooLargeError
from .mutation import DriftGraph

OBJECTIVES = ("mutation", "drift")
TIE_POLICIES = ("none", "orientation", "exclude")
DEFAULT_EXACT_CAP = 22


@dataclass(frozen=True)
class OrderScores:
    drift_forward: int
    drift_total: int
    mutation_forward: int
    mutation_total: int

    @property
    def drift_agreement(self) -> float:
        return self.drift_forward / self.drift_total if self.drift_total else 1.0

    @property
    def mutation_agreement(self) -> float:
        return self.mutation_forward / self.mutation_total if self.mutation_total else 1.0


def _positions(graph: DriftGraph, permutation) -> dict[str, int]:
    perm = list(permutation)
    pos = {v: i for i, v in enumerate(perm)}
    if len(pos) != len(perm) or set(pos) != set(graph.nodes):
        raise InvalidPermutationError("permutation must list every drift-graph node exactly once")
    return pos


def order_scores(graph: DriftGraph, permutation, tie_policy: str = "none") -> OrderScores:
    if tie_policy not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {tie_policy!r}")
    pos = _positions(graph, permutation)
    fwd = total = 0
    for e in graph.edges:
        if e.tie and tie_policy == "exclude":
            continue
        total += 1
        if e.tie and tie_policy == "none":
            continue
        fwd += pos[e.source] < pos[e.target]
    mfwd = sum(c for (i, j), c in graph.counts.items() if pos[i] < pos[j])
    return OrderScores(fwd, total, mfwd, graph.total_events)


def score_ordering(graph: DriftGraph, permutation, tie_policy: str = "none") -> tuple[float, float]:
    """``(drift_agreement, mutation_agreement)``; an edgeless graph scores 1.0."""
    s = order_scores(graph, permutation, tie_policy)
    return s.drift_agreement, s.mutation_agreement


def weight_matrix(graph: DriftGraph, objective: str, tie_policy: str = "none") -> tuple[list[str], np.ndarray]:
    """Nodes in lexicographic order and W[i, j] = reward for placing i before j."""
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    nodes = sorted(graph.nodes)
    idx = {v: i for i, v in enumerate(nodes)}
    w = np.zeros((len(nodes), len(nodes)), dtype=np.int64)
    if objective == "mutation":
        for (i, j), c in graph.counts.items():
            w[idx[i], idx[j]] += c
    else:
        for e in graph.edges:
            if not e.tie or tie_policy == "orientation":
                w[idx[e.source], idx[e.target]] += 1
    return nodes, w


@dataclass(frozen=True)
class OrderingResult:
    permutation: tuple[str, ...]
    objective: str
    drift_agreement: float
    mutation_agreement: float
    optimal: bool
    solver: str
    runtime: float
    scores: OrderScores
    objective_value: int

    def stat_box(self) -> dict:
        s = self.scores
        return {
            "ordering": list(self.permutation),
            "objective": self.objective,
            "solver": self.solver,
            "optimal": self.optimal,
            "drifts_following": s.drift_forward,
            "drifts_total": s.drift_total,
            "drift_agreement": self.drift_agreement,
            "mutation_agreement": self.mutation_agreement,
        }


def _result(graph, perm, objective, optimal, solver, started, tie_policy, value):
    scores = order_scores(graph, perm, tie_policy)
    return OrderingResult(
        permutation=tuple(perm),
        objective=objective,
        drift_agreement=scores.drift_agreement,
        mutation_agreement=scores.mutation_agreement,
        optimal=optimal,
        solver=solver,
        runtime=time.perf_counter() - started,
        scores=scores,
        objective_value=int(value),
    )


class _SetWeights:
    """out(v, S) = sum of w[v, u] over u in S, via two half-width lookup tables."""

    def __init__(self, w: np.ndarray):
        n = len(w)
        self.lo_bits = n // 2
        self.lo_mask = (1 << self.lo_bits) - 1
        self.lo = [self._table(w[v, : self.lo_bits]) for v in range(n)]
        self.hi = [self._table(w[v, self.lo_bits:]) for v in range(n)]

    @staticmethod
    def _table(row: np.ndarray) -> np.ndarray:
        table = np.zeros(1 << len(row), dtype=np.int64)
        for b, x in enumerate(row):
            table[1 << b: 1 << (b + 1)] = table[: 1 << b] + x
        return table

    def out(self, v: int, sets):
        return self.lo[v][sets & self.lo_mask] + self.hi[v][sets >> self.lo_bits]


def solve_exact(
    graph: DriftGraph,
    objective: str = "mutation",
    cap: int = DEFAULT_EXACT_CAP,
    tie_policy: str = "none",
) -> OrderingResult:
    """Maximise the objective with a subset dynamic program over O(2^n * n) states.

    ``best[R]`` is the largest forward weight attainable among the values in
    ``R``; placing ``v`` first earns its weight towards every other member.
    Walking forward from the full set and always taking the smallest value
    that stays optimal yields the lexicographically smallest optimal ordering.
    """
    started = time.perf_counter()
    nodes, w = weight_matrix(graph, objective, tie_policy)
    n = len(nodes)
    if n > cap:
        raise TooLargeError(f"{n} values exceed the exact-solver cap of {cap}; use solve_heuristic")
    if n == 0:
        return _result(graph, [], objective, True, "subset-dp", started, tie_policy, 0)

    size = 1 << n
    sets = np.arange(size, dtype=np.int64)
    popcount = np.zeros(size, dtype=np.int8)
    for b in range(n):
        popcount += ((sets >> b) & 1).astype(np.int8)
    order = np.argsort(popcount, kind="stable")
    bounds = np.searchsorted(popcount[order], np.arange(n + 2))
    sw = _SetWeights(w)
    best = np.zeros(size, dtype=np.int64)
    for c in range(1, n + 1):
        layer = order[bounds[c]:bounds[c + 1]]
        layer_best = np.full(len(layer), -1, dtype=np.int64)
        for v in range(n):
            bit = 1 << v
            has = (layer & bit) != 0
            rest = layer[has] ^ bit
            cand = best[rest] + sw.out(v, rest)
            layer_best[has] = np.maximum(layer_best[has], cand)
        best[layer] = layer_best

    remaining = size - 1
    perm = []
    while remaining:
        for v in range(n):
            bit = 1 << v
            if remaining & bit:
                rest = remaining ^ bit
                if best[rest] + int(sw.out(v, np.int64(rest))) == best[remaining]:
                    perm.append(nodes[v])
                    remaining = rest
                    break
    return _result(graph, perm, objective, True, "subset-dp", started, tie_policy, best[size - 1])


def _forward_weight(order: list[int], w: np.ndarray) -> int:
    idx = np.asarray(order)
    return int(np.triu(w[np.ix_(idx, idx)], 1).sum())


def _greedy_order(w: np.ndarray, rng: random.Random) -> list[int]:
    """Eades-Lin-Smyth: peel sinks to the back, sources to the front, otherwise
    the value with the largest out-minus-in weight (random tie-break)."""
    remaining = set(range(len(w)))
    head: list[int] = []
    tail: list[int] = []
    prio = {v: rng.random() for v in remaining}

    def flows(v):
        out_w = sum(int(w[v, u]) for u in remaining if u != v)
        in_w = sum(int(w[u, v]) for u in remaining if u != v)
        return out_w, in_w

    while remaining:
        peeled = True
        while peeled:
            peeled = False
            for v in sorted(remaining, key=prio.get):
                out_w, in_w = flows(v)
                if in_w == 0:
                    head.append(v)
                elif out_w == 0:
                    tail.append(v)
                else:
                    continue
                remaining.discard(v)
                peeled = True
        if remaining:
            v = max(sorted(remaining, key=prio.get), key=lambda x: flows(x)[0] - flows(x)[1])
            head.append(v)
            remaining.discard(v)
    return head + tail[::-1]


def _best_insertion(order: list[int], v: int, w: np.ndarray) -> tuple[int, int]:
    """Position and gain of inserting ``v`` into ``order`` (earliest among equals)."""
    # gain at position p = sum_{u before p} w[u,v] + sum_{u at/after p} w[v,u]
    gain = sum(int(w[v, u]) for u in order)
    best_pos, best_gain = 0, gain
    for p, u in enumerate(order, 1):
        gain += int(w[u, v]) - int(w[v, u])
        if gain > best_gain:
            best_pos, best_gain = p, gain
    return best_pos, best_gain


def solve_heuristic(
    graph: DriftGraph,
    objective: str = "mutation",
    seed: int = 0,
    tie_policy: str = "none",
) -> OrderingResult:
    """Greedy insertion construction, then adjacent-swap and single-value
    relocation moves until neither improves the objective."""
    started = time.perf_counter()
    nodes, w = weight_matrix(graph, objective, tie_policy)
    rng = random.Random(seed)
    order: list[int] = []
    for v in _greedy_order(w, rng):
        p, _ = _best_insertion(order, v, w)
        order.insert(p, v)

    improved = True
    while improved:
        improved = False
        for i in range(len(order) - 1):
            a, b = order[i], order[i + 1]
            if w[b, a] > w[a, b]:
                order[i], order[i + 1] = b, a
                improved = True
        for v in list(order):
            i = order.index(v)
            rest = order[:i] + order[i + 1:]
            current = sum(int(w[u, v]) for u in rest[:i]) + sum(int(w[v, u]) for u in rest[i:])
            p, gain = _best_insertion(rest, v, w)
            if gain > current:
                rest.insert(p, v)
                order = rest
                improved = True
    perm = [nodes[i] for i in order]
    return _result(graph, perm, objective, False, "insertion-local-search", started, tie_policy,
                   _forward_weight(order, w) if order else 0)


def solve(graph: DriftGraph, objective: str = "mutation", cap: int = DEFAULT_EXACT_CAP,
          seed: int = 0, tie_policy: str = "none") -> OrderingResult:
    """Exact when the graph fits under ``cap``, heuristic otherwise."""
    if len(graph.nodes) <= cap:
        return solve_exact(graph, objective, cap, tie_policy)
    return solve_heuristic(graph, objective, seed, tie_policy)
