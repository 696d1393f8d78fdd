"""Model-card availability, length statistics and auto-generation markers.

Lengths are Unicode code points (``len`` of the decoded text); word counts are
whitespace-delimited tokens and only approximate.
"""

from __future__ import annotations

import re
import statistics
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

from .errors import NoDataError
from .graph import FamilyGraph, FinetuneForest, generation
from .ingest import ModelRecord, RelationKind

AUTOGEN_MARKERS = ("automatically generated", "generated automatically")
_WS = re.compile(r"\s+")


def card_coverage(records: Iterable[ModelRecord]) -> float:
    records = list(records)
    if not records:
        return 0.0
    return sum(r.card_text is not None for r in records) / len(records)


@dataclass(frozen=True)
class CardStats:
    count: int
    coverage: float
    mean_length: float
    median_length: float
    min_length: int
    max_length: int
    mean_words: float
    median_words: float


def length_stats(records: Iterable[ModelRecord]) -> CardStats:
    records = list(records)
    lengths = [len(r.card_text) for r in records if r.card_text is not None]
    if not lengths:
        raise NoDataError("no model cards present")
    words = [len(r.card_text.split()) for r in records if r.card_text is not None]
    return CardStats(
        count=len(lengths),
        coverage=len(lengths) / len(records),
        mean_length=statistics.fmean(lengths),
        median_length=float(statistics.median(lengths)),
        min_length=min(lengths),
        max_length=max(lengths),
        mean_words=statistics.fmean(words),
        median_words=float(statistics.median(words)),
    )


def lengths_by_generation(forest: FinetuneForest) -> dict[int, tuple[int, float]]:
    """generation -> (cards present, mean card length)."""
    acc: dict[int, list[int]] = defaultdict(list)
    for node, rec in forest.records.items():
        if rec.card_text is not None:
            acc[generation(forest, node)].append(len(rec.card_text))
    return {g: (len(v), statistics.fmean(v)) for g, v in sorted(acc.items())}


@dataclass(frozen=True)
class LengthDelta:
    mean_delta: float
    edges: int
    mean_parent_length: float
    mean_child_length: float


def parent_child_delta(forest: FinetuneForest) -> LengthDelta:
    """Mean of (parent card length - child card length) over finetune edges
    where both cards exist."""
    deltas, parents, children = [], [], []
    for p, c in forest.edges:
        rp, rc = forest.records.get(p), forest.records.get(c)
        if rp is None or rc is None or rp.card_text is None or rc.card_text is None:
            continue
        parents.append(len(rp.card_text))
        children.append(len(rc.card_text))
        deltas.append(parents[-1] - children[-1])
    if not deltas:
        raise NoDataError("no finetune edge has cards on both ends")
    return LengthDelta(statistics.fmean(deltas), len(deltas), statistics.fmean(parents), statistics.fmean(children))


def is_autogenerated(text: str) -> bool:
    """Case-insensitive, whitespace-collapsed substring search for either marker bigram."""
    norm = _WS.sub(" ", text.lower())
    return any(m in norm for m in AUTOGEN_MARKERS)


@dataclass(frozen=True)
class AutogenRate:
    group: str
    cards: int
    flagged: int

    @property
    def fraction(self) -> float:
        return self.flagged / self.cards if self.cards else 0.0


def autogen_rate(graph: FamilyGraph) -> dict[str, AutogenRate]:
    """Marker prevalence among cards of children of each relation kind, and of roots.

    A model with several incoming kinds counts once in each of its kinds.
    ``roots`` holds models with no parent of any kind.
    """
    cards = defaultdict(int)
    flagged = defaultdict(int)
    for node in sorted(graph.records):
        rec = graph.records[node]
        if rec.card_text is None:
            continue
        kinds = {e.kind.value for e in graph.parents(node)} or {"roots"}
        hit = is_autogenerated(rec.card_text)
        for k in kinds:
            cards[k] += 1
            flagged[k] += hit
    groups = [k.value for k in RelationKind] + ["roots"]
    return {g: AutogenRate(g, cards[g], flagged[g]) for g in groups}
