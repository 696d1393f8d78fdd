"""Family-structure sites, exact multiplicities, and weighted pair sampling.

Every small subtree shape (random pair, edge, sibling fork, ...) is anchored
at a node or an edge of the finetune forest. An anchor's multiplicity is the
number of concrete subtree instances it roots, so drawing a global rank in
``[0, total_count)`` and decoding it back into (anchor, instance) samples
instances uniformly without ever materialising them.

:func:`realize` fills interchangeable positions (``c1``, ``c2``, ...) in
ascending id order; the sampler then permutes them with its own generator so
that a role such as ``c1`` is a uniformly chosen member, not the smallest id.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .errors import NoSitesError
from .graph import FinetuneForest

DEFAULT_SAMPLE_SIZE = 10_000


class Pattern(enum.Enum):
    RANDOM_PAIR = ("random_pair", ("a", "b"))
    EDGE = ("edge", ("parent", "child"))
    SIBLING_FORK = ("sibling_fork", ("parent", "c1", "c2"))
    CHAIN3 = ("chain3", ("gp", "p", "c"))
    TRIPLE_FORK = ("triple_fork", ("parent", "c1", "c2", "c3"))
    FORK_UNDER_EDGE = ("fork_under_edge", ("gp", "p", "c1", "c2"))
    UNCLE_FORK = ("uncle_fork", ("gp", "uncle", "p", "c"))
    CHAIN4 = ("chain4", ("ggp", "gp", "p", "c"))

    def __init__(self, label, positions):
        self.label = label
        self.positions = positions

    @classmethod
    def from_label(cls, label: str) -> "Pattern":
        for p in cls:
            if p.label == label:
                return p
        raise ValueError(f"unknown pattern {label!r}")


# Distinct relationships per pattern; mirror-image roles (c1 vs c2) are listed once.
ROLE_PAIRS: dict[Pattern, tuple[tuple[str, str], ...]] = {
    Pattern.RANDOM_PAIR: (("a", "b"),),
    Pattern.EDGE: (("parent", "child"),),
    Pattern.SIBLING_FORK: (("parent", "c1"), ("c1", "c2")),
    Pattern.CHAIN3: (("gp", "p"), ("p", "c"), ("gp", "c")),
    Pattern.TRIPLE_FORK: (("parent", "c1"), ("c1", "c2")),
    Pattern.FORK_UNDER_EDGE: (("gp", "p"), ("p", "c1"), ("gp", "c1"), ("c1", "c2")),
    Pattern.UNCLE_FORK: (("gp", "uncle"), ("gp", "p"), ("gp", "c"), ("uncle", "p"), ("uncle", "c"), ("p", "c")),
    Pattern.CHAIN4: (("ggp", "gp"), ("gp", "p"), ("p", "c"), ("ggp", "p"), ("gp", "c"), ("ggp", "c")),
}


# Positions that a subtree instance does not distinguish.
INTERCHANGEABLE: dict[Pattern, tuple[str, ...]] = {
    Pattern.RANDOM_PAIR: ("a", "b"),
    Pattern.SIBLING_FORK: ("c1", "c2"),
    Pattern.TRIPLE_FORK: ("c1", "c2", "c3"),
    Pattern.FORK_UNDER_EDGE: ("c1", "c2"),
}


@dataclass
class PatternSiteTable:
    pattern: Pattern
    anchors: list[Hashable]
    multiplicities: list[int]
    universe: tuple[str, ...] = ()
    forest: FinetuneForest | None = field(default=None, repr=False, compare=False)

    @property
    def total_count(self) -> int:
        return sum(self.multiplicities)

    def entries(self) -> list[tuple[Hashable, int]]:
        return list(zip(self.anchors, self.multiplicities))


def enumerate_sites(forest: FinetuneForest, pattern: Pattern, random_pair_universe: str = "all") -> PatternSiteTable:
    """Every qualifying anchor once, with its closed-form multiplicity.

    ``random_pair_universe`` is ``"all"`` (every forest node, singletons
    included) or ``"families"`` (only nodes in trees of two or more).
    """
    ns = forest.n_succ
    anchors: list[Hashable] = []
    mult: list[int] = []

    def add(anchor, m):
        if m > 0:
            anchors.append(anchor)
            mult.append(m)

    if pattern is Pattern.RANDOM_PAIR:
        if random_pair_universe == "all":
            universe = tuple(sorted(forest.nodes))
        elif random_pair_universe == "families":
            universe = tuple(sorted(n for n in forest.nodes if n in forest.parent or ns(n) > 0))
        else:
            raise ValueError(f"unknown universe {random_pair_universe!r}")
        add("*", math.comb(len(universe), 2))
        return PatternSiteTable(pattern, anchors, mult, universe, forest)

    if pattern in (Pattern.SIBLING_FORK, Pattern.TRIPLE_FORK):
        r = 2 if pattern is Pattern.SIBLING_FORK else 3
        for u in sorted(forest.children):
            add(u, math.comb(ns(u), r))
        return PatternSiteTable(pattern, anchors, mult, forest=forest)

    for u, v in forest.edges:
        if pattern is Pattern.EDGE:
            add((u, v), 1)
        elif pattern is Pattern.CHAIN3:
            add((u, v), ns(v))
        elif pattern is Pattern.FORK_UNDER_EDGE:
            add((u, v), math.comb(ns(v), 2))
        elif pattern is Pattern.UNCLE_FORK:
            add((u, v), ns(v) * (ns(u) - 1))
        elif pattern is Pattern.CHAIN4:
            if forest.predecessor(u) is not None:
                add((u, v), ns(v))
    return PatternSiteTable(pattern, anchors, mult, forest=forest)


def unrank_combination(rank: int, n: int, k: int) -> tuple[int, ...]:
    """The ``rank``-th k-subset of ``range(n)`` in colexicographic order, ascending."""
    if not 0 <= rank < math.comb(n, k):
        raise ValueError("rank out of range")
    out = []
    hi = n
    for j in range(k, 0, -1):
        # largest c < hi with comb(c, j) <= rank
        lo_c, hi_c = j - 1, hi - 1
        while lo_c < hi_c:
            mid = (lo_c + hi_c + 1) // 2
            if math.comb(mid, j) <= rank:
                lo_c = mid
            else:
                hi_c = mid - 1
        out.append(lo_c)
        rank -= math.comb(lo_c, j)
        hi = lo_c
    return tuple(reversed(out))


def realize(forest: FinetuneForest, table: PatternSiteTable, index: int, offset: int) -> dict[str, str]:
    """Decode instance ``offset`` of anchor ``index`` into a position -> node map."""
    pattern = table.pattern
    anchor = table.anchors[index]
    succ = forest.successors
    if pattern is Pattern.RANDOM_PAIR:
        i, j = unrank_combination(offset, len(table.universe), 2)
        return {"a": table.universe[i], "b": table.universe[j]}
    if pattern is Pattern.SIBLING_FORK:
        kids = succ(anchor)
        i, j = unrank_combination(offset, len(kids), 2)
        return {"parent": anchor, "c1": kids[i], "c2": kids[j]}
    if pattern is Pattern.TRIPLE_FORK:
        kids = succ(anchor)
        i, j, l = unrank_combination(offset, len(kids), 3)
        return {"parent": anchor, "c1": kids[i], "c2": kids[j], "c3": kids[l]}
    u, v = anchor
    if pattern is Pattern.EDGE:
        return {"parent": u, "child": v}
    if pattern is Pattern.CHAIN3:
        return {"gp": u, "p": v, "c": succ(v)[offset]}
    if pattern is Pattern.FORK_UNDER_EDGE:
        kids = succ(v)
        i, j = unrank_combination(offset, len(kids), 2)
        return {"gp": u, "p": v, "c1": kids[i], "c2": kids[j]}
    if pattern is Pattern.UNCLE_FORK:
        kids = succ(v)
        uncles = [w for w in succ(u) if w != v]
        q, r = divmod(offset, len(kids))
        return {"gp": u, "uncle": uncles[q], "p": v, "c": kids[r]}
    if pattern is Pattern.CHAIN4:
        return {"ggp": forest.predecessor(u), "gp": u, "p": v, "c": succ(v)[offset]}
    raise ValueError(pattern)


def _check_roles(pattern: Pattern, roles: Sequence[str]) -> tuple[str, str]:
    a, b = roles
    if a not in pattern.positions or b not in pattern.positions or a == b:
        raise ValueError(f"roles {roles!r} are not two distinct positions of {pattern.label}")
    return a, b


class _Sampler:
    def __init__(self, forest: FinetuneForest, table: PatternSiteTable, seed: int):
        if table.total_count < 1:
            raise NoSitesError(f"no {table.pattern.label} sites in this forest")
        self.forest = forest
        self.table = table
        self.cum = np.cumsum(np.asarray(table.multiplicities, dtype=np.int64))
        self.starts = self.cum - np.asarray(table.multiplicities, dtype=np.int64)
        self.rng = np.random.default_rng(seed)

    def draw(self, k: int) -> list[dict[str, str]]:
        ranks = self.rng.integers(0, int(self.cum[-1]), size=k, dtype=np.int64)
        idx = np.searchsorted(self.cum, ranks, side="right")
        offsets = ranks - self.starts[idx]
        out = [realize(self.forest, self.table, int(i), int(o)) for i, o in zip(idx, offsets)]
        group = INTERCHANGEABLE.get(self.table.pattern)
        if group:
            perms = np.argsort(self.rng.random((k, len(group))), axis=1)
            for inst, perm in zip(out, perms):
                values = [inst[g] for g in group]
                for g, j in zip(group, perm):
                    inst[g] = values[j]
        return out


def sample_pairs(table: PatternSiteTable, roles: Sequence[str], k: int, seed: int) -> list[tuple[str, str]]:
    """``k`` role pairs, with replacement, from instances drawn uniformly.

    Anchors are thereby picked with probability proportional to multiplicity.
    """
    a, b = _check_roles(table.pattern, roles)
    return [(inst[a], inst[b]) for inst in _Sampler(table.forest, table, seed).draw(k)]


@dataclass(frozen=True)
class SimilarityEstimate:
    pattern: str
    roles: tuple[str, str]
    metric: str
    k: int
    mean: float
    se: float
    seed: int
    resampled: int = 0
    flagged: int = 0
    total_sites: int = 0

    def row(self) -> dict:
        return {
            "pattern": self.pattern,
            "role_a": self.roles[0],
            "role_b": self.roles[1],
            "metric": self.metric,
            "k": self.k,
            "mean": self.mean,
            "se": self.se,
            "seed": self.seed,
            "resampled": self.resampled,
            "flagged": self.flagged,
            "total_sites": self.total_sites,
        }


def estimate_similarity(
    forest: FinetuneForest,
    pattern: Pattern,
    roles: Sequence[str],
    metric: Callable[[str, str], float],
    k: int = DEFAULT_SAMPLE_SIZE,
    seed: int = 0,
    table: PatternSiteTable | None = None,
    metric_id: str | None = None,
    max_rounds: int = 100,
) -> SimilarityEstimate:
    """Mean and standard error of ``metric`` over ``k`` sampled role pairs.

    Pairs touching an external placeholder are redrawn (and counted in
    ``resampled``). ``metric`` may return a float or an object with ``value``
    and ``zero_vector``/``truncated`` flags.
    """
    if k < 1:
        raise ValueError("sample size must be at least 1")
    a, b = _check_roles(pattern, roles)
    if table is None:
        table = enumerate_sites(forest, pattern)
    sampler = _Sampler(forest, table, seed)
    values: list[float] = []
    resampled = flagged = 0
    for _ in range(max_rounds):
        need = k - len(values)
        if need == 0:
            break
        for inst in sampler.draw(need):
            x, y = inst[a], inst[b]
            if x in forest.external or y in forest.external:
                resampled += 1
                continue
            s = metric(x, y)
            if hasattr(s, "value"):
                flagged += bool(getattr(s, "zero_vector", False) or getattr(s, "truncated", False))
                s = s.value
            values.append(float(s))
    if len(values) < k:
        raise NoSitesError(f"could not draw {k} {pattern.label} pairs free of external placeholders")
    arr = np.asarray(values)
    se = float(arr.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    return SimilarityEstimate(
        pattern=pattern.label,
        roles=(a, b),
        metric=metric_id or getattr(metric, "id", getattr(metric, "__name__", "metric")),
        k=k,
        mean=float(arr.mean()),
        se=se,
        seed=seed,
        resampled=resampled,
        flagged=flagged,
        total_sites=table.total_count,
    )
