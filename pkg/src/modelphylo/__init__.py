"""Phylogenetic analysis of model-registry family trees."""

__version__ = "0.1.0"

from .errors import (AuthError, CorruptSnapshotError, FetchAborted, InvalidPermutationError, ModelPhyloError,
                     NoDataError, NodeNotFoundError, NoSitesError, SnapshotIOError, TooLargeError,
                     UndefinedInputError)
from .ingest import ModelRecord, RelationKind, load_snapshot, read_snapshot, write_snapshot
from .graph import (FamilyGraph, FinetuneForest, build_family_graph, depth_stats, finetune_forest, generation,
                    structural_virality)
from .similarity import TextMetric, levenshtein_similarity, sparse_cosine, tokenize
from .sampling import Pattern, enumerate_sites, estimate_similarity, sample_pairs
from .mutation import aggregate_mutation_rate, build_drift_graph, collect_events, directional_events, edge_mutation_rate
from .ordering import score_ordering, solve, solve_exact, solve_heuristic

__all__ = [name for name in dir() if not name.startswith("_")]
