"""Trait mutation rates along finetune edges, directional events, drift graphs."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import AbstractSet, Callable, Iterable, Mapping

from .errors import NoDataError, UndefinedInputError
from .graph import FinetuneForest
from .ingest import ModelRecord

log = logging.getLogger(__name__)

DEFAULT_TOP_K = 20
# Registry placeholders that are not real license categories.
NON_STANDARD_LICENSES = frozenset({"unknown", "other"})


@dataclass(frozen=True)
class TraitKind:
    name: str
    extract: Callable[[ModelRecord], Iterable[str]]
    singleton: bool = False


TRAIT_KINDS: dict[str, TraitKind] = {}


def register_trait(name: str, extract: Callable[[ModelRecord], Iterable[str]], singleton: bool = False) -> TraitKind:
    kind = TraitKind(name, extract, singleton)
    TRAIT_KINDS[name] = kind
    return kind


def _one(value):
    return (value,) if value else ()


register_trait("license", lambda r: _one(r.license), singleton=True)
register_trait("language", lambda r: r.languages)
register_trait("task", lambda r: _one(r.pipeline_tag), singleton=True)
register_trait("library", lambda r: _one(r.library_name), singleton=True)


def get_trait(kind: str | TraitKind) -> TraitKind:
    if isinstance(kind, TraitKind):
        return kind
    try:
        return TRAIT_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown trait kind {kind!r}; known: {sorted(TRAIT_KINDS)}") from None


class TraitSet(frozenset):
    """The values one model holds for one trait kind."""

    kind: str

    def __new__(cls, kind: str, values: Iterable[str] = ()):
        obj = super().__new__(cls, values)
        obj.kind = kind
        if any(not isinstance(v, str) or not v for v in obj):
            raise ValueError("trait values must be non-empty strings")
        trait = TRAIT_KINDS.get(kind)
        if trait is not None and trait.singleton and len(obj) > 1:
            raise ValueError(f"{kind} holds at most one value")
        return obj

    def __reduce__(self):
        return (TraitSet, (self.kind, list(self)))


def trait_values(record: ModelRecord, kind: str | TraitKind, exclude: AbstractSet[str] = frozenset()) -> TraitSet:
    trait = get_trait(kind)
    return TraitSet(trait.name, (v for v in trait.extract(record) if v not in exclude))


def _check_pair(parent: AbstractSet[str], child: AbstractSet[str]):
    pk, ck = getattr(parent, "kind", None), getattr(child, "kind", None)
    if pk is not None and ck is not None and pk != ck:
        raise ValueError(f"trait kinds differ: {pk} vs {ck}")
    if not parent and not child:
        raise UndefinedInputError("both trait sets are empty")


def edge_mutation_rate(parent: AbstractSet[str], child: AbstractSet[str]) -> float:
    """Jaccard complement ``1 - |P & C| / |P | C|``."""
    _check_pair(parent, child)
    return 1.0 - len(parent & child) / len(parent | child)


@dataclass(frozen=True, order=True)
class MutationEvent:
    source: str
    target: str
    edge: tuple[str, str] | None = None

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError("a mutation event needs two different values")


def directional_events(parent: AbstractSet[str], child: AbstractSet[str], edge=None) -> list[MutationEvent]:
    """Each dropped parent value -> every child value, plus every parent value ->
    each added child value; the dropped -> added pairs occur once."""
    _check_pair(parent, child)
    dropped = parent - child
    added = child - parent
    pairs = {(d, c) for d in dropped for c in child}
    pairs.update((p, a) for p in parent for a in added)
    return [MutationEvent(s, t, edge) for s, t in sorted(pairs)]


def _usable_edges(forest: FinetuneForest):
    for parent, child in forest.edges:
        if parent in forest.records and child in forest.records:
            yield parent, child


@dataclass(frozen=True)
class MutationSummary:
    kind: str
    rate: float
    inheritances: int
    mutated: int
    one_sided: int
    undocumented: int
    external: int


def aggregate_mutation_rate(
    forest: FinetuneForest,
    kind: str | TraitKind,
    exclude: AbstractSet[str] = frozenset(),
) -> MutationSummary:
    """Mean edge mutation rate over finetune edges where both ends document the trait.

    Edges with the trait on one side only are left out (``one_sided``):
    missing documentation is not a trait change. ``inheritances`` is the
    number of edges averaged over.
    """
    trait = get_trait(kind)
    total = 0.0
    used = mutated = one_sided = undocumented = 0
    external = sum(1 for p, c in forest.edges if p not in forest.records or c not in forest.records)
    for p, c in _usable_edges(forest):
        tp = trait_values(forest.records[p], trait, exclude)
        tc = trait_values(forest.records[c], trait, exclude)
        if not tp and not tc:
            undocumented += 1
            continue
        if not tp or not tc:
            one_sided += 1
            continue
        m = edge_mutation_rate(tp, tc)
        total += m
        mutated += m > 0
        used += 1
    if used == 0:
        raise NoDataError(f"no finetune edge documents {trait.name} on both ends")
    return MutationSummary(trait.name, total / used, used, mutated, one_sided, undocumented, external)


def collect_events(
    forest: FinetuneForest,
    kind: str | TraitKind,
    exclude: AbstractSet[str] = frozenset(),
) -> list[MutationEvent]:
    """Directional events over the same edges :func:`aggregate_mutation_rate` uses."""
    trait = get_trait(kind)
    events = []
    for p, c in _usable_edges(forest):
        tp = trait_values(forest.records[p], trait, exclude)
        tc = trait_values(forest.records[c], trait, exclude)
        if tp and tc:
            events.extend(directional_events(tp, tc, edge=(p, c)))
    return events


@dataclass(frozen=True)
class DriftEdge:
    source: str
    target: str
    weight: int
    margin: int
    tie: bool = False


@dataclass
class DriftGraph:
    kind: str
    nodes: tuple[str, ...]
    counts: dict[tuple[str, str], int]
    edges: list[DriftEdge]

    def count(self, i: str, j: str) -> int:
        return self.counts.get((i, j), 0)

    @property
    def total_events(self) -> int:
        return sum(self.counts.values())

    def rows(self) -> list[dict]:
        return [
            {"source": e.source, "target": e.target, "weight": e.weight, "margin": e.margin, "tie_flag": int(e.tie)}
            for e in self.edges
        ]


def build_drift_graph(
    events: Iterable[MutationEvent],
    k: int = DEFAULT_TOP_K,
    kind: str = "",
    select: str = "traffic",
    frequencies: Mapping[str, int] | None = None,
) -> DriftGraph:
    """Orient each trafficked value pair by its majority direction.

    Nodes are the ``k`` values with most event participation (``select=
    "traffic"``) or, with ``select="frequency"``, the most frequent values in
    ``frequencies``. An even split points from the lexicographically smaller
    value and is flagged.
    """
    traffic: Counter[tuple[str, str]] = Counter((e.source, e.target) for e in events)
    if not traffic:
        return DriftGraph(kind, (), {}, [])
    if select == "traffic":
        score: Counter[str] = Counter()
        for (s, t), c in traffic.items():
            score[s] += c
            score[t] += c
    elif select == "frequency":
        if frequencies is None:
            raise ValueError("frequency selection needs value frequencies")
        score = Counter(frequencies)
    else:
        raise ValueError(f"unknown selection {select!r}")
    nodes = tuple(sorted(score, key=lambda v: (-score[v], v))[:k])
    keep = set(nodes)
    counts = {pair: c for pair, c in sorted(traffic.items()) if pair[0] in keep and pair[1] in keep}
    edges = []
    for i, j in sorted({tuple(sorted(pair)) for pair in counts}):
        fwd, back = counts.get((i, j), 0), counts.get((j, i), 0)
        if fwd >= back:
            edges.append(DriftEdge(i, j, fwd + back, fwd - back, tie=fwd == back))
        else:
            edges.append(DriftEdge(j, i, fwd + back, back - fwd))
    return DriftGraph(kind, nodes, counts, edges)


def value_frequencies(records: Iterable[ModelRecord], kind: str | TraitKind,
                      exclude: AbstractSet[str] = frozenset()) -> Counter:
    trait = get_trait(kind)
    freq: Counter[str] = Counter()
    for r in records:
        freq.update(trait_values(r, trait, exclude))
    return freq
