"""Batch analyses over one snapshot, written as plot-ready CSV tables.

Each command writes its tables plus a ``<command>_manifest.json`` sidecar into
the output directory. Every CSV starts with two ``#`` comment lines holding
the toolkit version and the configuration echo; nothing time-dependent is
written, so identical inputs and configuration give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import pickle
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .cards import autogen_rate, card_coverage, length_stats, lengths_by_generation, parent_child_delta
from .errors import ModelPhyloError, NoDataError
from .graph import (FamilyGraph, FinetuneForest, build_family_graph, component_growth, depth_stats,
                    finetune_forest, write_edge_list)
from .ingest import BACKFILL_DATE, DEFAULT_MALFORMED_THRESHOLD, ModelRecord, ParseReport, attach_cards, load_card_store, load_snapshot
from .mutation import NON_STANDARD_LICENSES, aggregate_mutation_rate, build_drift_graph, collect_events, value_frequencies
from .ordering import solve
from .sampling import ROLE_PAIRS, Pattern, enumerate_sites, estimate_similarity
from .similarity import TextMetric

log = logging.getLogger(__name__)

AVAILABILITY_FLAGS = ("endpoints_compatible", "safetensors", "autotrain_compatible")

# Stat-box values published for the full 1.86M-model registry snapshot
# (traits: license, language, task). Compared, never asserted.
FULL_SNAPSHOT_REFERENCE = {
    "license": {"observed_inheritances": 320_065, "mutation_rate": 0.1498,
                "drifts_following": "132/140", "drift_agreement": 0.9429, "mutation_agreement": 0.8426},
    "language": {"observed_inheritances": 115_660, "mutation_rate": 0.1280,
                 "drifts_following": "186/190", "drift_agreement": 0.9789, "mutation_agreement": 0.7471},
    "task": {"observed_inheritances": 251_060, "mutation_rate": 0.2314,
             "drifts_following": "111/121", "drift_agreement": 0.9174, "mutation_agreement": 0.9516},
}

ARXIV_CATEGORY_NAMES = {
    "cs.AI": "Computer Science, Artificial Intelligence",
    "cs.CL": "Computer Science, Computation and Language",
    "cs.CV": "Computer Science, Computer Vision and Pattern Recognition",
    "cs.CY": "Computer Science, Computers and Society",
    "cs.IR": "Computer Science, Information Retrieval",
    "cs.LG": "Computer Science, Machine Learning",
    "cs.NE": "Computer Science, Neural and Evolutionary Computing",
    "cs.RO": "Computer Science, Robotics",
    "cs.SD": "Computer Science, Sound",
    "cs.CR": "Computer Science, Cryptography and Security",
    "cs.HC": "Computer Science, Human-Computer Interaction",
    "cs.MA": "Computer Science, Multiagent Systems",
    "cs.SE": "Computer Science, Software Engineering",
    "eess.AS": "Electrical Engineering and Systems Science, Audio and Speech Processing",
    "eess.IV": "Electrical Engineering and Systems Science, Image and Video Processing",
    "eess.SP": "Electrical Engineering and Systems Science, Signal Processing",
    "stat.ML": "Statistics, Machine Learning",
    "math.OC": "Mathematics, Optimization and Control",
    "q-bio.QM": "Quantitative Biology, Quantitative Methods",
    "physics.comp-ph": "Physics, Computational Physics",
}


@dataclass
class RunConfig:
    snapshot: Path | None = None
    cards: Path | None = None
    output_dir: Path = Path("modelphylo-out")
    seed: int | None = None
    vocab_cap: int = 20_000
    k: int = 10_000
    top_k: int = 20
    top_n: int = 10
    exact_cap: int = 22
    metrics: tuple[str, ...] = ("tfidf", "bow", "levenshtein")
    targets: tuple[str, ...] = ("metadata",)
    patterns: tuple[str, ...] = tuple(p.label for p in Pattern)
    objective: str = "mutation"
    tie_policy: str = "none"
    random_pair_universe: str = "all"
    idf_mode: str = "literal"
    ngram_mode: str = "both"
    node_selection: str = "traffic"
    include_nonstandard_licenses: bool = False
    levenshtein_cap: int = 1_000_000
    max_malformed_fraction: float = DEFAULT_MALFORMED_THRESHOLD
    arxiv_categories: Path | None = None
    cache_dir: Path | None = None
    compare_reference: bool = False

    def validate(self) -> None:
        for name in ("vocab_cap", "k", "top_k", "top_n", "exact_cap", "levenshtein_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.seed is not None and self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.snapshot is not None and not Path(self.snapshot).is_file():
            raise ModelPhyloError(f"snapshot {self.snapshot} is not readable")

    def echo(self) -> dict:
        """Analysis parameters; output and cache locations are left out so that
        runs differing only in where they write produce identical files."""
        out = {}
        for f in fields(self):
            if f.name in ("output_dir", "cache_dir"):
                continue
            value = getattr(self, f.name)
            if isinstance(value, Path):
                value = value.name
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        if self.snapshot is not None:
            out["snapshot_sha256"] = file_digest(self.snapshot)
        return out


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _store_digest(path) -> str:
    path = Path(path)
    h = hashlib.sha256()
    files = sorted(path.glob("*.md")) if path.is_dir() else [path, Path(str(path) + ".index.json")]
    for f in files:
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()


@dataclass
class Inputs:
    records: list[ModelRecord]
    parse_report: ParseReport
    graph: FamilyGraph
    forest: FinetuneForest


def load_inputs(config: RunConfig) -> Inputs:
    """Parse the snapshot (and card store), build graph and forest; cached by content digest."""
    if config.snapshot is None:
        raise ModelPhyloError("no snapshot given")
    cache_file = None
    if config.cache_dir is not None:
        key = hashlib.sha256(
            "|".join([__version__, file_digest(config.snapshot),
                      _store_digest(config.cards) if config.cards else "-",
                      repr(config.max_malformed_fraction)]).encode()
        ).hexdigest()
        cache_file = Path(config.cache_dir) / f"v{__version__}" / f"{key}.pickle"
        if cache_file.exists():
            with open(cache_file, "rb") as fh:
                return pickle.load(fh)
    records, report = load_snapshot(config.snapshot, config.max_malformed_fraction)
    if config.cards is not None:
        records = attach_cards(records, load_card_store(config.cards))
    graph = build_family_graph(records)
    inputs = Inputs(records, report, graph, finetune_forest(graph))
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        tmp = cache_file.with_suffix(".tmp")
        with open(tmp, "wb") as fh:
            pickle.dump(inputs, fh, protocol=pickle.HIGHEST_PROTOCOL)
        tmp.replace(cache_file)
    return inputs


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return repr(value)
    return value


@dataclass
class OutputWriter:
    command: str
    config: RunConfig
    files: list[str] = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.dir = Path(self.config.output_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._echo = self.config.echo()
        self._header = (f"# modelphylo {__version__} {self.command}\n"
                        f"# config: {json.dumps(self._echo, sort_keys=True)}\n")

    def warn(self, message: str) -> None:
        log.warning(message)
        self.warnings.append(message)

    def table(self, name: str, columns: Sequence[str], rows: Iterable[dict]) -> Path:
        buf = io.StringIO()
        buf.write(self._header)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        n = 0
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])
            n += 1
        path = self.dir / f"{name}.csv"
        path.write_text(buf.getvalue(), encoding="utf-8")
        self.files.append(path.name)
        self.counts[name] = n
        return path

    def text(self, filename: str, body: str) -> Path:
        path = self.dir / filename
        path.write_text(self._header + body, encoding="utf-8")
        self.files.append(path.name)
        return path

    def finish(self, extra: dict | None = None) -> Path:
        manifest = {
            "toolkit": "modelphylo",
            "version": __version__,
            "command": self.command,
            "config": self._echo,
            "files": self.files,
            "counts": self.counts,
            "warnings": self.warnings,
        }
        if extra:
            manifest.update(extra)
        path = self.dir / f"{self.command}_manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
        return path


def _top(counter: Counter, n: int) -> list[tuple[str, int]]:
    return sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:n]


def load_arxiv_categories(path) -> dict[str, list[str]]:
    """JSON object ``{arxiv_id: [category, ...]}`` or CSV ``arxiv_id,categories`` (space separated)."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        return {k: list(v) if isinstance(v, list) else str(v).split() for k, v in data.items()}
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out[row["arxiv_id"]] = row["categories"].split()
    return out


def arxiv_category_counts(records: Iterable[ModelRecord], mapping: dict[str, list[str]]) -> Counter:
    """Each model adds one to every distinct category among its linked papers."""
    counts: Counter[str] = Counter()
    for r in records:
        cats = set()
        for a in r.arxiv_ids:
            cats.update(mapping.get(a, ()))
        counts.update(cats)
    return counts


def summary_tables(inputs: Inputs, config: RunConfig, arxiv_map: dict | None = None) -> dict[str, list[dict]]:
    records = inputs.records
    n = config.top_n
    tables: dict[str, list[dict]] = {}
    for name, values in (
        ("licenses", (r.license for r in records if r.license)),
        ("tasks", (r.pipeline_tag for r in records if r.pipeline_tag)),
        ("libraries", (r.library_name for r in records if r.library_name)),
        ("languages", (lang for r in records for lang in r.languages)),
    ):
        tables[name] = [{"value": v, "count": c} for v, c in _top(Counter(values), n)]

    graph = inputs.graph
    children = Counter()
    finetunes = Counter()
    for e in graph.edges:
        children[e.parent] += 1
        finetunes[e.parent] += e.kind.value == "finetune"
    tables["top_children"] = [
        {"model_id": m, "children": c, "finetune_children": finetunes[m], "external": m in graph.external}
        for m, c in _top(children, n)
    ]
    by_downloads = sorted(records, key=lambda r: (-r.downloads, r.model_id))[:n]
    tables["top_downloads"] = [{"model_id": r.model_id, "downloads": r.downloads, "likes": r.likes}
                               for r in by_downloads]

    total = len(records)
    flags = []
    for flag in AVAILABILITY_FLAGS:
        hits = sum(flag in r.raw_tags for r in records)
        flags.append({"flag": flag, "models": hits, "fraction": hits / total if total else 0.0})
    with_doi = [r for r in records if any(t.startswith("doi:") for t in r.raw_tags)]
    flags.append({"flag": "doi", "models": len(with_doi), "fraction": len(with_doi) / total if total else 0.0})
    tables["availability_flags"] = flags

    without_doi = [r for r in records if r not in with_doi] if len(with_doi) < total else []
    tables["doi_downloads"] = [
        {"group": "doi", "models": len(with_doi),
         "mean_downloads": sum(r.downloads for r in with_doi) / len(with_doi) if with_doi else None},
        {"group": "no_doi", "models": len(without_doi),
         "mean_downloads": sum(r.downloads for r in without_doi) / len(without_doi) if without_doi else None},
    ]

    if arxiv_map is not None:
        counts = arxiv_category_counts(records, arxiv_map)
        tables["arxiv_categories"] = [
            {"category": c, "name": ARXIV_CATEGORY_NAMES.get(c, ""), "models": k}
            for c, k in _top(counts, max(n, 20))
        ]
    return tables


_SUMMARY_COLUMNS = {
    "licenses": ("value", "count"),
    "tasks": ("value", "count"),
    "libraries": ("value", "count"),
    "languages": ("value", "count"),
    "top_children": ("model_id", "children", "finetune_children", "external"),
    "top_downloads": ("model_id", "downloads", "likes"),
    "availability_flags": ("flag", "models", "fraction"),
    "doi_downloads": ("group", "models", "mean_downloads"),
    "arxiv_categories": ("category", "name", "models"),
}


def _parse_counts(inputs: Inputs) -> dict:
    r = inputs.parse_report
    return {"records": r.records, "malformed_lines": r.malformed, "duplicate_ids": r.duplicates,
            "edges": len(inputs.graph.edges), "external_nodes": len(inputs.graph.external)}


def cmd_summary(config: RunConfig) -> dict[str, list[dict]]:
    config.validate()
    inputs = load_inputs(config)
    out = OutputWriter("summary", config)
    if not inputs.records:
        out.warn("snapshot contains no records; tables are empty")
    arxiv_map = load_arxiv_categories(config.arxiv_categories) if config.arxiv_categories else None
    if arxiv_map is None:
        out.warn("no arXiv category mapping given; arxiv_categories table skipped")
    tables = summary_tables(inputs, config, arxiv_map)
    for name, rows in tables.items():
        out.table(f"summary_{name}", _SUMMARY_COLUMNS[name], rows)
    out.finish({"inputs": _parse_counts(inputs)})
    return tables


def node_texts(inputs: Inputs, target: str) -> dict[str, str | None]:
    if target == "metadata":
        return {m: r.metadata_string for m, r in inputs.graph.records.items()}
    if target == "card":
        return {m: r.card_text for m, r in inputs.graph.records.items()}
    raise ValueError(f"unknown similarity target {target!r}")


SIMILARITY_COLUMNS = ("target", "metric", "pattern", "role_a", "role_b", "k", "mean", "se", "seed",
                      "resampled", "flagged", "total_sites", "vocab_cap", "status")


def similarity_rows(inputs: Inputs, config: RunConfig, out: OutputWriter | None = None) -> list[dict]:
    if config.seed is None:
        raise ModelPhyloError("similarity sampling needs an explicit seed")
    forest = inputs.forest
    patterns = [Pattern.from_label(p) for p in config.patterns]
    tables = {p: enumerate_sites(forest, p, config.random_pair_universe) for p in patterns}
    rows = []
    for target in config.targets:
        texts = node_texts(inputs, target)
        for measure in config.metrics:
            metric = TextMetric(texts, measure, n=config.vocab_cap, mode=config.ngram_mode,
                                idf_mode=config.idf_mode, levenshtein_cap=config.levenshtein_cap)
            for pattern in patterns:
                table = tables[pattern]
                for roles in ROLE_PAIRS[pattern]:
                    base = {"target": target, "metric": measure, "pattern": pattern.label,
                            "role_a": roles[0], "role_b": roles[1], "seed": config.seed,
                            "vocab_cap": config.vocab_cap if measure != "levenshtein" else None,
                            "total_sites": table.total_count}
                    try:
                        est = estimate_similarity(forest, pattern, roles, metric, config.k, config.seed,
                                                  table=table, metric_id=measure)
                    except ModelPhyloError as exc:
                        if out is not None:
                            out.warn(f"{target}/{measure}/{pattern.label} {roles}: {exc}")
                        rows.append({**base, "k": 0, "status": "no_sites"})
                        continue
                    rows.append({**base, **est.row(), "target": target, "status": "ok"})
    return rows


def cmd_similarity(config: RunConfig) -> list[dict]:
    config.validate()
    inputs = load_inputs(config)
    out = OutputWriter("similarity", config)
    rows = similarity_rows(inputs, config, out)
    out.table("similarity_estimates", SIMILARITY_COLUMNS, rows)
    out.finish({"inputs": _parse_counts(inputs)})
    return rows


def drift_analysis(inputs: Inputs, config: RunConfig, trait: str) -> dict:
    exclude = frozenset()
    if trait == "license" and not config.include_nonstandard_licenses:
        exclude = NON_STANDARD_LICENSES
    summary = aggregate_mutation_rate(inputs.forest, trait, exclude)
    events = collect_events(inputs.forest, trait, exclude)
    freq = value_frequencies(inputs.records, trait, exclude) if config.node_selection == "frequency" else None
    graph = build_drift_graph(events, config.top_k, trait, config.node_selection, freq)
    result = solve(graph, config.objective, config.exact_cap, config.seed or 0, config.tie_policy)
    s = result.scores
    statbox = {
        "trait": trait,
        "optimal_ordering": ", ".join(result.permutation),
        "observed_inheritances": summary.inheritances,
        "mutation_rate": summary.rate,
        "drifts_following": f"{s.drift_forward}/{s.drift_total}",
        "drift_agreement": result.drift_agreement,
        "mutation_agreement": result.mutation_agreement,
        "objective": result.objective,
        "solver": result.solver,
        "optimal": result.optimal,
        "tie_policy": config.tie_policy,
        "tied_drifts": sum(e.tie for e in graph.edges),
        "retained_values": len(graph.nodes),
        "events_total": len(events),
        "events_retained": graph.total_events,
        "mutated_edges": summary.mutated,
        "one_sided_edges_excluded": summary.one_sided,
        "undocumented_edges": summary.undocumented,
        "external_edges": summary.external,
        "excluded_values": " ".join(sorted(exclude)),
        "dropped_to_added_counted_once": True,
    }
    return {"summary": summary, "graph": graph, "result": result, "statbox": statbox}


def cmd_drift(config: RunConfig, trait: str) -> dict:
    config.validate()
    inputs = load_inputs(config)
    out = OutputWriter(f"drift_{trait}", config)
    res = drift_analysis(inputs, config, trait)
    out.table(f"drift_{trait}_edges", ("source", "target", "weight", "margin", "tie_flag"), res["graph"].rows())
    out.table(f"drift_{trait}_ordering", ("rank", "value"),
              ({"rank": i + 1, "value": v} for i, v in enumerate(res["result"].permutation)))
    statbox = res["statbox"]
    rows = [{"key": k, "value": v} for k, v in statbox.items()]
    extra = {"statbox": statbox, "inputs": _parse_counts(inputs)}
    ref = FULL_SNAPSHOT_REFERENCE.get(trait)
    if config.compare_reference and ref:
        comparison = {k: {"observed": statbox[k], "reference": v} for k, v in ref.items()}
        rows += [{"key": f"reference_{k}", "value": v} for k, v in ref.items()]
        extra["reference_comparison"] = comparison
    out.table(f"drift_{trait}_statbox", ("key", "value"), rows)
    out.finish(extra)
    return res


def graph_tables(inputs: Inputs, top_components: int = 10) -> dict[str, list[dict]]:
    trees = [{"root": t.root, "size": t.size, "max_depth": t.max_depth, "mean_depth": t.mean_depth,
              "virality": t.virality, "external_root": t.root in inputs.forest.external}
             for t in depth_stats(inputs.forest)]
    growth = []
    components = inputs.graph.components()
    for cid, members in enumerate(components[:top_components]):
        series = component_growth(inputs.graph, members)
        for ts, count in series.points:
            growth.append({"component": cid, "size": len(members), "timestamp": ts.isoformat().replace("+00:00", "Z"),
                           "cumulative": count,
                           "backfilled": ts.date() == BACKFILL_DATE,
                           "undated_members": series.undated_nodes})
    kinds = Counter(e.kind.value for e in inputs.graph.edges)
    rep = inputs.graph.report
    build = [{"key": f"edges_{k}", "value": kinds[k]} for k in sorted(kinds)]
    build += [
        {"key": "nodes", "value": len(inputs.graph.nodes)},
        {"key": "external_nodes", "value": len(inputs.graph.external)},
        {"key": "self_loops_dropped", "value": len(rep.self_loops)},
        {"key": "duplicate_edges_dropped", "value": rep.duplicate_edges},
        {"key": "cycle_edges_dropped", "value": len(rep.cycle_drops)},
        {"key": "extra_finetune_parents_ignored", "value": len(rep.extra_finetune_parents)},
        {"key": "finetune_trees", "value": len(trees)},
        {"key": "components", "value": len(components)},
    ]
    return {"trees": trees, "growth": growth, "build": build}


def cmd_graphstats(config: RunConfig, export_edges: bool = True) -> dict[str, list[dict]]:
    config.validate()
    inputs = load_inputs(config)
    out = OutputWriter("graphstats", config)
    tables = graph_tables(inputs, config.top_n)
    out.table("graph_trees", ("root", "size", "max_depth", "mean_depth", "virality", "external_root"), tables["trees"])
    out.table("graph_growth", ("component", "size", "timestamp", "cumulative", "backfilled", "undated_members"),
              tables["growth"])
    out.table("graph_build", ("key", "value"), tables["build"])
    if export_edges:
        buf = io.StringIO()
        write_edge_list(inputs.graph, buf)
        out.text("graph_edges.tsv", buf.getvalue())
    out.finish({"inputs": _parse_counts(inputs)})
    return tables


def card_tables(inputs: Inputs, out: OutputWriter | None = None) -> dict[str, list[dict]]:
    stats = length_stats(inputs.records)
    rows = [{"key": k, "value": v} for k, v in asdict(stats).items()]
    rows.insert(0, {"key": "models", "value": len(inputs.records)})
    try:
        delta = parent_child_delta(inputs.forest)
        rows += [{"key": f"parent_child_{k}", "value": v} for k, v in asdict(delta).items()]
    except NoDataError as exc:
        if out is not None:
            out.warn(f"parent-child delta unavailable: {exc}")
    gens = [{"generation": g, "cards": c, "mean_length": m} for g, (c, m) in lengths_by_generation(inputs.forest).items()]
    auto = [{"group": g, "cards": a.cards, "flagged": a.flagged, "fraction": a.fraction}
            for g, a in autogen_rate(inputs.graph).items()]
    return {"stats": rows, "generations": gens, "autogen": auto,
            "coverage": [{"key": "coverage", "value": card_coverage(inputs.records)}]}


def cmd_cards(config: RunConfig) -> dict[str, list[dict]]:
    config.validate()
    inputs = load_inputs(config)
    out = OutputWriter("cards", config)
    tables = card_tables(inputs, out)
    out.table("cards_stats", ("key", "value"), tables["stats"])
    out.table("cards_generations", ("generation", "cards", "mean_length"), tables["generations"])
    out.table("cards_autogen", ("group", "cards", "flagged", "fraction"), tables["autogen"])
    out.finish({"inputs": _parse_counts(inputs)})
    return tables
