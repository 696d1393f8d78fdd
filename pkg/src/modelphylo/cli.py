"""Command-line entry point: ``modelphylo <command> [options]``.

Exit status is 0 on success, 1 on a fatal analysis or input error, 2 on a
usage error and 3 when a fetch stops early (the resume token is printed and
saved next to the output file).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import AuthError, FetchAborted, ModelPhyloError
from .ordering import DEFAULT_EXACT_CAP, OBJECTIVES, TIE_POLICIES
from .report import RunConfig, cmd_cards, cmd_drift, cmd_graphstats, cmd_similarity, cmd_summary
from .sampling import Pattern
from .similarity import MEASURES

log = logging.getLogger("modelphylo")


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("snapshot", type=Path, help="NDJSON snapshot file")
    p.add_argument("-o", "--output-dir", type=Path, default=Path("modelphylo-out"))
    p.add_argument("--cards", type=Path, help="card directory or card archive")
    p.add_argument("--cache-dir", type=Path, help="reuse parsed graphs across runs")
    p.add_argument("--max-malformed", type=float, default=0.10, metavar="FRACTION",
                   help="abort when more than this share of lines is malformed (default 0.10)")
    p.add_argument("--top-n", type=int, default=10, help="rows in ranked tables")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modelphylo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"modelphylo {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("summary", help="ecosystem overview tables")
    _common(p)
    p.add_argument("--arxiv-categories", type=Path,
                   help="JSON {arxiv_id: [categories]} or CSV with arxiv_id,categories columns")

    p = sub.add_parser("similarity", help="sampled similarity by structural pattern")
    _common(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-k", "--samples", type=int, default=10_000)
    p.add_argument("--metrics", type=_csv_list, default=("tfidf", "bow", "levenshtein"),
                   help=f"comma list from {', '.join(MEASURES)}")
    p.add_argument("--targets", type=_csv_list, default=("metadata",), help="metadata and/or card")
    p.add_argument("--patterns", type=_csv_list, default=tuple(x.label for x in Pattern))
    p.add_argument("--vocab", type=int, default=20_000, help="vocabulary cap")
    p.add_argument("--ngrams", choices=("both", "unigram", "bigram"), default="both")
    p.add_argument("--idf", choices=("literal", "log"), default="literal")
    p.add_argument("--random-pair-universe", choices=("all", "families"), default="all")
    p.add_argument("--levenshtein-cap", type=int, default=1_000_000)

    p = sub.add_parser("drift", help="trait mutation rate, drift graph and optimal ordering")
    _common(p)
    p.add_argument("--trait", required=True, help="license, language, task or library")
    p.add_argument("--top-k", type=int, default=20, help="values kept in the drift graph")
    p.add_argument("--objective", choices=OBJECTIVES, default="mutation")
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="none")
    p.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP)
    p.add_argument("--select", choices=("traffic", "frequency"), default="traffic")
    p.add_argument("--include-nonstandard", action="store_true", help="keep unknown/other licenses")
    p.add_argument("--seed", type=int, default=0, help="heuristic solver seed")
    p.add_argument("--compare-reference", action="store_true",
                   help="add published full-registry values next to the observed ones")

    p = sub.add_parser("graphstats", help="tree depth, virality, growth and edge list")
    _common(p)
    p.add_argument("--no-edges", action="store_true", help="skip the edge-list export")

    p = sub.add_parser("cards", help="card coverage, lengths and auto-generation markers")
    _common(p)

    p = sub.add_parser("fetch", help="download a snapshot from the registry API")
    p.add_argument("--out", type=Path, required=True, help="NDJSON file to append to")
    p.add_argument("--resume", help="resume token; defaults to the one saved next to --out")
    p.add_argument("--base-url", default="https://huggingface.co")
    p.add_argument("--page-size", type=int, default=1000)
    p.add_argument("--rate", type=float, default=5.0, help="requests per second")
    p.add_argument("--max-pages", type=int)
    p.add_argument("--max-retries", type=int, default=5)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--cards-dir", type=Path, help="also download cards for fetched models into this directory")
    p.add_argument("--token-env", default="HF_TOKEN", help="environment variable holding the API token")

    p = sub.add_parser("synth", help="write a deterministic synthetic snapshot")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("-n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-cards", action="store_true")
    return parser


def _config(args) -> RunConfig:
    cfg = RunConfig(snapshot=args.snapshot, cards=args.cards, output_dir=args.output_dir,
                    cache_dir=args.cache_dir, max_malformed_fraction=args.max_malformed, top_n=args.top_n)
    c = args.command
    if c == "summary":
        cfg.arxiv_categories = args.arxiv_categories
    elif c == "similarity":
        cfg.seed = args.seed
        cfg.k = args.samples
        cfg.metrics = args.metrics
        cfg.targets = args.targets
        cfg.patterns = args.patterns
        cfg.vocab_cap = args.vocab
        cfg.ngram_mode = args.ngrams
        cfg.idf_mode = args.idf
        cfg.random_pair_universe = args.random_pair_universe
        cfg.levenshtein_cap = args.levenshtein_cap
    elif c == "drift":
        cfg.top_k = args.top_k
        cfg.objective = args.objective
        cfg.tie_policy = args.tie_policy
        cfg.exact_cap = args.exact_cap
        cfg.node_selection = args.select
        cfg.include_nonstandard_licenses = args.include_nonstandard
        cfg.seed = args.seed
        cfg.compare_reference = args.compare_reference
    return cfg


def _fetch(args) -> int:
    from .fetch import TERMINAL_TOKEN, FetchConfig, fetch_cards, fetch_snapshot
    from .ingest import write_card_directory
    import json

    cfg = FetchConfig(base_url=args.base_url, page_size=args.page_size, rate_limit=args.rate,
                      max_retries=args.max_retries, workers=args.workers, token_env=args.token_env)
    token_file = Path(str(args.out) + ".resume")
    token = args.resume
    if token is None and token_file.exists():
        token = token_file.read_text(encoding="utf-8").strip() or TERMINAL_TOKEN
    args.out.parent.mkdir(parents=True, exist_ok=True)
    before = args.out.stat().st_size if args.out.exists() else 0
    with open(args.out, "ab") as fh:
        try:
            result = fetch_snapshot(cfg, resume_token=token, out=fh, max_pages=args.max_pages)
        except FetchAborted as exc:
            token_file.write_text(exc.resume_token or "", encoding="utf-8")
            print(f"fetch stopped after {exc.records_fetched} records; resume token: {exc.resume_token}",
                  file=sys.stderr)
            return 3
    token_file.write_text(result.resume_token, encoding="utf-8")
    print(f"fetched {result.record_count} records in {result.pages} pages", file=sys.stderr)
    if args.cards_dir is not None:
        with open(args.out, "rb") as fh:
            fh.seek(before)
            ids = [json.loads(line).get("id") or json.loads(line).get("modelId") for line in fh if line.strip()]
        cards = fetch_cards([i for i in ids if i], cfg)
        write_card_directory({k: v for k, v in cards.items() if v is not None}, args.cards_dir)
    if not result.complete:
        print(f"listing not exhausted; resume token: {result.resume_token}", file=sys.stderr)
    return 0


def _synth(args) -> int:
    from .ingest import write_snapshot
    from .synthetic import generate_records

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "wb") as fh:
        write_snapshot(generate_records(args.n, args.seed), fh, include_cards=not args.no_cards)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "fetch":
            return _fetch(args)
        if args.command == "synth":
            return _synth(args)
        cfg = _config(args)
        if args.command == "summary":
            cmd_summary(cfg)
        elif args.command == "similarity":
            cmd_similarity(cfg)
        elif args.command == "drift":
            cmd_drift(cfg, args.trait)
        elif args.command == "graphstats":
            cmd_graphstats(cfg, export_edges=not args.no_edges)
        elif args.command == "cards":
            cmd_cards(cfg)
    except AuthError as exc:
        print(f"modelphylo: authentication failed: {exc}", file=sys.stderr)
        return 1
    except (ModelPhyloError, ValueError, OSError) as exc:
        print(f"modelphylo: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
