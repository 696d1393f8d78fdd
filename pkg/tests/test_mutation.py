import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modelphylo.errors import NoDataError, UndefinedInputError
from modelphylo.graph import build_family_graph, finetune_forest
from modelphylo.mutation import (MutationEvent, TraitSet, aggregate_mutation_rate, build_drift_graph, collect_events,
                                 directional_events, edge_mutation_rate, register_trait, trait_values)

from conftest import rec


def pairs(events):
    return {(e.source, e.target) for e in events}


def test_worked_example():
    p, c = TraitSet("language", {"A", "B", "C"}), TraitSet("language", {"B", "C", "D"})
    assert edge_mutation_rate(p, c) == 0.5
    events = directional_events(p, c)
    assert pairs(events) == {("A", "B"), ("A", "C"), ("A", "D"), ("B", "D"), ("C", "D")}
    assert len(events) == 5


def test_identical_and_disjoint():
    assert edge_mutation_rate({"x"}, {"x"}) == 0.0
    assert edge_mutation_rate({"x"}, {"y"}) == 1.0
    assert directional_events({"x", "y"}, {"x", "y"}) == []
    assert pairs(directional_events({"gemma"}, {"apache-2.0"})) == {("gemma", "apache-2.0")}


def test_both_empty_undefined():
    with pytest.raises(UndefinedInputError):
        edge_mutation_rate(set(), set())


def test_kind_mismatch():
    with pytest.raises(ValueError):
        edge_mutation_rate(TraitSet("language", {"en"}), TraitSet("task", {"en"}))


def test_singleton_kind_enforced():
    with pytest.raises(ValueError):
        TraitSet("license", {"mit", "apache-2.0"})
    with pytest.raises(ValueError):
        MutationEvent("a", "a")


def forest_of(children: dict[str, list[str]], tags: dict[str, list[str]]):
    recs = []
    parent_of = {c: p for p, cs in children.items() for c in cs}
    nodes = set(children) | set(parent_of)
    for n in sorted(nodes):
        t = list(tags.get(n, []))
        if n in parent_of:
            t.append(f"base_model:finetune:{parent_of[n]}")
        recs.append(rec(n, t))
    return finetune_forest(build_family_graph(recs))


def test_four_edges_one_mutation():
    f = forest_of({"r": ["a", "b", "c", "d"]},
                  {"r": ["license:mit"], "a": ["license:mit"], "b": ["license:mit"], "c": ["license:mit"],
                   "d": ["license:gpl-3.0"]})
    s = aggregate_mutation_rate(f, "license")
    assert s.rate == 0.25 and s.inheritances == 4 and s.mutated == 1


def test_identical_traits_rate_zero():
    f = forest_of({"r": ["a", "b"]}, {n: ["license:mit"] for n in "rab"})
    assert aggregate_mutation_rate(f, "license").rate == 0.0


def test_one_sided_edges_excluded():
    f = forest_of({"r": ["a", "b", "c"]}, {"r": ["license:mit"], "a": ["license:mit"], "b": []})
    s = aggregate_mutation_rate(f, "license")
    assert s.inheritances == 1 and s.one_sided == 2 and s.rate == 0.0


def test_no_usable_edges():
    with pytest.raises(NoDataError):
        aggregate_mutation_rate(forest_of({"r": ["a"]}, {}), "license")


def test_nonstandard_license_exclusion():
    f = forest_of({"r": ["a"]}, {"r": ["license:unknown"], "a": ["license:mit"]})
    assert aggregate_mutation_rate(f, "license").rate == 1.0
    # with placeholders removed the parent is undocumented, leaving no usable edge
    with pytest.raises(NoDataError):
        aggregate_mutation_rate(f, "license", exclude={"unknown", "other"})
    assert collect_events(f, "license", exclude={"unknown", "other"}) == []


def test_external_parent_edges_skipped():
    recs = [rec("a", ["license:mit", "base_model:finetune:up/x"]), rec("b", ["license:gpl-3.0", "base_model:finetune:a"])]
    f = finetune_forest(build_family_graph(recs))
    s = aggregate_mutation_rate(f, "license")
    assert s.inheritances == 1 and s.external == 1


def test_language_events_from_forest():
    f = forest_of({"p": ["c"]}, {"p": ["ar", "de", "fr"], "c": ["de", "fr", "zh"]})
    assert pairs(collect_events(f, "language")) == {("ar", "de"), ("ar", "fr"), ("ar", "zh"), ("de", "zh"), ("fr", "zh")}


def test_pluggable_trait():
    register_trait("license_family", lambda r: (r.license.split("-")[0],) if r.license else (), singleton=True)
    r = rec("x", ["license:cc-by-4.0"])
    assert trait_values(r, "license_family") == {"cc"}


def ev(s, t, n):
    return [MutationEvent(s, t)] * n


def test_drift_majority():
    g = build_drift_graph(ev("A", "B", 10) + ev("B", "A", 2))
    (e,) = g.edges
    assert (e.source, e.target, e.weight, e.margin, e.tie) == ("A", "B", 12, 8, False)


def test_drift_tie():
    g = build_drift_graph(ev("Q", "P", 5) + ev("P", "Q", 5))
    (e,) = g.edges
    assert (e.source, e.target, e.tie, e.margin) == ("P", "Q", True, 0)
    assert g.rows() == [{"source": "P", "target": "Q", "weight": 10, "margin": 0, "tie_flag": 1}]


def test_drift_empty():
    g = build_drift_graph([])
    assert g.nodes == () and g.edges == []


def test_top_k_bound():
    vals = [f"v{i:02d}" for i in range(25)]
    events = [MutationEvent(a, b) for a, b in itertools.permutations(vals, 2) for _ in range(1 + int(a[1:]) % 2)]
    g = build_drift_graph(events, k=20)
    assert len(g.nodes) == 20 and len(g.edges) <= 190


def test_frequency_selection():
    events = ev("a", "b", 9) + ev("c", "d", 1)
    g = build_drift_graph(events, k=2, select="frequency", frequencies={"c": 10, "d": 8, "a": 1, "b": 1})
    assert set(g.nodes) == {"c", "d"}


names = st.sampled_from(list("ABCDEF"))


@settings(max_examples=300, deadline=None)
@given(st.frozensets(names, max_size=5), st.frozensets(names, max_size=5))
def test_rate_and_event_properties(p, c):
    if not p and not c:
        return
    assert edge_mutation_rate(p, c) == edge_mutation_rate(c, p)
    assert 0.0 <= edge_mutation_rate(p, c) <= 1.0
    events = directional_events(p, c)
    assert all(e.source in p and e.target in c and e.source != e.target for e in events)
    if p and c:
        assert (edge_mutation_rate(p, c) == 0) == (events == [])
    if len(p) <= 1 and len(c) <= 1:
        assert len(events) <= 1


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(names, names).filter(lambda t: t[0] != t[1]), max_size=40), st.integers(1, 6))
def test_drift_weight_conservation(raw, k):
    events = [MutationEvent(s, t) for s, t in raw]
    g = build_drift_graph(events, k=k)
    assert sum(e.weight for e in g.edges) == g.total_events
    assert len({frozenset((e.source, e.target)) for e in g.edges}) == len(g.edges)
    assert all(e.weight > 0 for e in g.edges)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["mit", "gpl", "bsd", None]), st.sampled_from(["mit", "gpl", "bsd", None])),
                min_size=1, max_size=12))
def test_singleton_rate_is_mutated_fraction(edges):
    children, tags = {}, {}
    for i, (pl, cl) in enumerate(edges):
        children[f"p{i}"] = [f"c{i}"]
        tags[f"p{i}"] = [f"license:{pl}"] if pl else []
        tags[f"c{i}"] = [f"license:{cl}"] if cl else []
    f = forest_of(children, tags)
    usable = [(a, b) for a, b in edges if a and b]
    if not usable:
        with pytest.raises(NoDataError):
            aggregate_mutation_rate(f, "license")
        return
    s = aggregate_mutation_rate(f, "license")
    assert s.rate == sum(a != b for a, b in usable) / len(usable)
    assert s.inheritances == len(usable)
