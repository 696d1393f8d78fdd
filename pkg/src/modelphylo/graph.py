"""Typed lineage graph, its finetune-only forest, and tree statistics."""

from __future__ import annotations

import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from datetime import datetime
from typing import IO, Iterable, Mapping, NamedTuple

import networkx as nx

from .errors import NodeNotFoundError, UndefinedInputError
from .ingest import ModelRecord, RelationKind

log = logging.getLogger(__name__)


class Edge(NamedTuple):
    parent: str
    child: str
    kind: RelationKind


@dataclass
class BuildReport:
    self_loops: list[Edge] = field(default_factory=list)
    duplicate_edges: int = 0
    cycle_drops: list[Edge] = field(default_factory=list)
    external_nodes: int = 0
    extra_finetune_parents: list[Edge] = field(default_factory=list)


@dataclass
class FamilyGraph:
    nodes: frozenset[str]
    edges: list[Edge]
    records: dict[str, ModelRecord]
    external: frozenset[str]
    report: BuildReport
    _parents: dict[str, list[Edge]] = field(default_factory=dict, repr=False)
    _children: dict[str, list[Edge]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        parents = defaultdict(list)
        children = defaultdict(list)
        for e in self.edges:
            parents[e.child].append(e)
            children[e.parent].append(e)
        self._parents = dict(parents)
        self._children = dict(children)

    def parents(self, node: str, kind: RelationKind | None = None) -> list[Edge]:
        """Incoming edges in declaration order, optionally filtered by kind."""
        return [e for e in self._parents.get(node, ()) if kind is None or e.kind == kind]

    def children(self, node: str, kind: RelationKind | None = None) -> list[Edge]:
        return [e for e in self._children.get(node, ()) if kind is None or e.kind == kind]

    def is_external(self, node: str) -> bool:
        return node in self.external

    def components(self) -> list[list[str]]:
        """Weakly connected components, largest first (ties by smallest member id)."""
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from((e.parent, e.child) for e in self.edges)
        comps = [sorted(c) for c in nx.connected_components(g)]
        comps.sort(key=lambda c: (-len(c), c[0]))
        return comps


def _repair_cycles(edges: list[Edge], report: BuildReport) -> list[Edge]:
    """Break cycles by dropping, inside each non-trivial SCC, the edge whose
    child id is smallest (then parent id, then kind) until none remain.

    Runs once per relation kind and then once over all kinds together.
    """
    dropped: set[Edge] = set()

    def repair(subset: list[Edge]):
        g = nx.MultiDiGraph()
        for e in subset:
            g.add_edge(e.parent, e.child, key=e.kind.value, edge=e)
        pending = [c for c in nx.strongly_connected_components(g) if len(c) > 1]
        while pending:
            comp = pending.pop()
            sub = g.subgraph(comp)
            inside = sorted((d["edge"] for _, _, d in sub.edges(data=True)),
                            key=lambda e: (e.child, e.parent, e.kind.value))
            victim = inside[0]
            g.remove_edge(victim.parent, victim.child, key=victim.kind.value)
            dropped.add(victim)
            report.cycle_drops.append(victim)
            log.warning("cycle repair: dropped %s -[%s]-> %s", victim.parent, victim.kind.value, victim.child)
            pending.extend(c for c in nx.strongly_connected_components(g.subgraph(comp)) if len(c) > 1)

    for kind in RelationKind:
        repair([e for e in edges if e.kind == kind])
    repair([e for e in edges if e not in dropped])
    return [e for e in edges if e not in dropped]


def build_family_graph(records: Iterable[ModelRecord]) -> FamilyGraph:
    """One edge per declared (parent, kind); unknown parents become external placeholders."""
    by_id = {r.model_id: r for r in records}
    report = BuildReport()
    edges: list[Edge] = []
    seen = set()
    external = set()
    for model_id in sorted(by_id):
        for parent, kind in by_id[model_id].parent_relations:
            e = Edge(parent, model_id, kind)
            if parent == model_id:
                report.self_loops.append(e)
                log.warning("dropping self-loop on %s", model_id)
                continue
            if e in seen:
                report.duplicate_edges += 1
                continue
            seen.add(e)
            edges.append(e)
            if parent not in by_id:
                external.add(parent)
    edges = _repair_cycles(edges, report)
    report.external_nodes = len(external)
    return FamilyGraph(
        nodes=frozenset(by_id) | frozenset(external),
        edges=edges,
        records=by_id,
        external=frozenset(external),
        report=report,
    )


@dataclass
class FinetuneForest:
    """Finetune edges only, each child keeping its first-listed finetune parent."""

    nodes: frozenset[str]
    parent: dict[str, str]
    children: dict[str, list[str]]
    records: dict[str, ModelRecord]
    external: frozenset[str]

    @property
    def roots(self) -> list[str]:
        return sorted(n for n in self.nodes if n not in self.parent)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return sorted((p, c) for c, p in self.parent.items())

    def n_succ(self, node: str) -> int:
        return len(self.children.get(node, ()))

    def successors(self, node: str) -> list[str]:
        return self.children.get(node, [])

    def predecessor(self, node: str) -> str | None:
        return self.parent.get(node)

    def root_of(self, node: str) -> str:
        if node not in self.nodes:
            raise NodeNotFoundError(node)
        while node in self.parent:
            node = self.parent[node]
        return node

    def tree(self, root: str) -> "Tree":
        if root not in self.nodes:
            raise NodeNotFoundError(root)
        if root in self.parent:
            raise ValueError(f"{root!r} is not a root")
        order = [root]
        parent = {root: None}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in self.successors(u):
                parent[v] = u
                order.append(v)
                queue.append(v)
        return Tree(root, order, parent)

    def trees(self) -> list["Tree"]:
        return [self.tree(r) for r in self.roots]

    def is_usable(self, node: str) -> bool:
        """False for external placeholders, which carry no metadata."""
        return node not in self.external


def finetune_forest(graph: FamilyGraph) -> FinetuneForest:
    parent = {}
    children = defaultdict(list)
    for node in sorted(graph.nodes):
        ft = graph.parents(node, RelationKind.FINETUNE)
        if not ft:
            continue
        parent[node] = ft[0].parent
        children[ft[0].parent].append(node)
        for extra in ft[1:]:
            graph.report.extra_finetune_parents.append(extra)
            log.info("%s has several finetune parents; keeping %s", node, ft[0].parent)
    return FinetuneForest(
        nodes=graph.nodes,
        parent=parent,
        children={k: sorted(v) for k, v in children.items()},
        records=graph.records,
        external=graph.external,
    )


@dataclass
class Tree:
    """One rooted component; ``order`` is breadth-first from the root."""

    root: str
    order: list[str]
    parent: dict[str, str | None]

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]], root=None) -> "Tree":
        edges = list(edges)
        children = defaultdict(list)
        has_parent = set()
        nodes = set()
        for p, c in edges:
            children[p].append(c)
            has_parent.add(c)
            nodes.update((p, c))
        if root is None:
            roots = sorted(nodes - has_parent)
            if len(roots) != 1:
                raise ValueError("edges do not form a single rooted tree")
            root = roots[0]
        order, parent = [root], {root: None}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in children.get(u, ()):
                parent[v] = u
                order.append(v)
                queue.append(v)
        return cls(root, order, parent)

    def __len__(self) -> int:
        return len(self.order)

    def depths(self) -> dict[str, int]:
        depth = {}
        for v in self.order:
            p = self.parent[v]
            depth[v] = 0 if p is None else depth[p] + 1
        return depth

    def subtree_sizes(self) -> dict[str, int]:
        size = dict.fromkeys(self.order, 1)
        for v in reversed(self.order):
            p = self.parent[v]
            if p is not None:
                size[p] += size[v]
        return size


def generation(forest: FinetuneForest, node: str) -> int:
    if node not in forest.nodes:
        raise NodeNotFoundError(node)
    g = 0
    while node in forest.parent:
        node = forest.parent[node]
        g += 1
    return g


def structural_virality(tree: Tree) -> float:
    """Mean undirected distance over all unordered node pairs.

    Each edge (p, v) lies on the path of exactly size(v) * (n - size(v)) pairs,
    so the distance total is a single pass over subtree sizes.
    """
    n = len(tree)
    if n < 2:
        raise UndefinedInputError("structural virality needs at least two nodes")
    size = tree.subtree_sizes()
    total = sum(size[v] * (n - size[v]) for v in tree.order if tree.parent[v] is not None)
    return total / (n * (n - 1) // 2)


@dataclass(frozen=True)
class TreeStats:
    root: str
    size: int
    max_depth: int
    mean_depth: float
    virality: float | None


def depth_stats(forest: FinetuneForest) -> list[TreeStats]:
    """Per-tree size, depth and virality; largest trees first."""
    out = []
    for tree in forest.trees():
        depths = tree.depths().values()
        out.append(TreeStats(
            root=tree.root,
            size=len(tree),
            max_depth=max(depths),
            mean_depth=sum(depths) / len(tree),
            virality=structural_virality(tree) if len(tree) > 1 else None,
        ))
    out.sort(key=lambda s: (-s.size, s.root))
    return out


@dataclass
class GrowthSeries:
    points: list[tuple[datetime, int]]
    includes_backfilled: bool
    backfilled_nodes: int
    undated_nodes: int


def component_growth(graph: FamilyGraph, component: int | Iterable[str]) -> GrowthSeries:
    """Cumulative member count at each distinct creation timestamp.

    ``component`` is an index into :meth:`FamilyGraph.components` or an explicit
    node collection. External placeholders carry no timestamp and are counted
    as undated rather than plotted.
    """
    members = graph.components()[component] if isinstance(component, int) else list(component)
    stamps: dict[datetime, int] = defaultdict(int)
    backfilled = undated = 0
    for node in members:
        rec = graph.records.get(node)
        if rec is None:
            undated += 1
            continue
        stamps[rec.created_at] += 1
        backfilled += rec.created_at_backfilled
    points = []
    running = 0
    for ts in sorted(stamps):
        running += stamps[ts]
        points.append((ts, running))
    return GrowthSeries(points, backfilled > 0, backfilled, undated)


def write_edge_list(graph: FamilyGraph, stream: IO[str]) -> None:
    """Tab-separated ``parent child kind`` lines with a header row."""
    stream.write("parent\tchild\tkind\n")
    for e in sorted(graph.edges, key=lambda e: (e.parent, e.child, e.kind.value)):
        stream.write(f"{e.parent}\t{e.child}\t{e.kind.value}\n")


def forest_from_parent_map(parent: Mapping[str, str | None], records: Mapping[str, ModelRecord] | None = None,
                           external: Iterable[str] = ()) -> FinetuneForest:
    """Build a forest directly from a child -> parent map (``None`` for roots)."""
    nodes = set(parent)
    nodes.update(p for p in parent.values() if p is not None)
    par = {c: p for c, p in parent.items() if p is not None}
    children = defaultdict(list)
    for c, p in par.items():
        children[p].append(c)
    if records is None:
        records = {}
    return FinetuneForest(
        nodes=frozenset(nodes),
        parent=par,
        children={k: sorted(v) for k, v in children.items()},
        records=dict(records),
        external=frozenset(external),
    )
