"""Snapshot parsing, trait extraction and the canonical metadata string.

A snapshot is newline-delimited JSON, one registry entry per line::

    {"id": "Qwen/Qwen1.5-72B-Chat", "createdAt": "2024-02-01T10:00:00.000Z",
     "downloads": 1200, "likes": 40, "trendingScore": 3.5,
     "pipeline_tag": "text-generation", "library_name": "transformers",
     "tags": ["license:other", "en", "base_model:finetune:Qwen/Qwen1.5-72B"],
     "card": "# Qwen1.5 ..."}

``id`` and ``createdAt`` are required (``modelId``/``model_id`` and
``created_at`` are accepted as aliases). ``card`` is optional; cards can also
be attached afterwards from a card store (see :func:`load_card_store`).
"""

from __future__ import annotations

import enum
import json
import logging
import os
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping
from urllib.parse import quote, unquote

from .errors import CorruptSnapshotError, SnapshotIOError
from .languages import is_language_code

log = logging.getLogger(__name__)

BACKFILL_DATE = date(2022, 3, 2)
DEFAULT_MALFORMED_THRESHOLD = 0.10


class RelationKind(str, enum.Enum):
    FINETUNE = "finetune"
    QUANTIZED = "quantized"
    ADAPTER = "adapter"
    MERGE = "merge"

    def __str__(self) -> str:
        return self.value


_KINDS = {k.value: k for k in RelationKind}


@dataclass(frozen=True)
class ModelRecord:
    model_id: str
    created_at: datetime
    downloads: int = 0
    likes: int = 0
    trending_score: float | None = None
    pipeline_tag: str | None = None
    library_name: str | None = None
    license: str | None = None
    languages: frozenset[str] = frozenset()
    raw_tags: tuple[str, ...] = ()
    parent_relations: tuple[tuple[str, RelationKind], ...] = ()
    arxiv_ids: frozenset[str] = frozenset()
    card_text: str | None = None
    metadata_string: str = field(init=False, repr=False, compare=False)
    created_at_backfilled: bool = field(init=False, compare=False)

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if self.downloads < 0 or self.likes < 0:
            raise ValueError("downloads and likes must be non-negative")
        if self.created_at.tzinfo is None:
            object.__setattr__(self, "created_at", self.created_at.replace(tzinfo=timezone.utc))
        else:
            object.__setattr__(self, "created_at", self.created_at.astimezone(timezone.utc))
        object.__setattr__(self, "created_at_backfilled", self.created_at.date() == BACKFILL_DATE)
        object.__setattr__(self, "metadata_string", canonical_metadata_string(self))

    @classmethod
    def from_tags(cls, model_id: str, created_at: datetime, tags: Iterable[str] = (), **fields):
        """Build a record whose license, languages, arXiv ids and parents come from ``tags``."""
        tags = tuple(tags)
        license_, languages, arxiv_ids, parents = extract_traits(tags)
        return cls(
            model_id=model_id,
            created_at=created_at,
            license=license_,
            languages=frozenset(languages),
            raw_tags=tags,
            parent_relations=tuple(parents),
            arxiv_ids=frozenset(arxiv_ids),
            **fields,
        )

    @property
    def has_card(self) -> bool:
        return self.card_text is not None


def extract_traits(raw_tags: Iterable[str]):
    """Split registry tags into ``(license, languages, arxiv_ids, parent_relations)``.

    ``license:`` is first-wins (later ones are logged and ignored);
    ``base_model:<kind>:<id>`` relations keep their order with exact
    duplicates dropped; bare ISO-639 codes become languages. Anything else is
    left alone.
    """
    license_ = None
    languages: set[str] = set()
    arxiv_ids: set[str] = set()
    parents: list[tuple[str, RelationKind]] = []
    seen_parents = set()
    for tag in raw_tags:
        if tag.startswith("license:"):
            value = tag[len("license:"):].strip().lower()
            if not value:
                continue
            if license_ is None:
                license_ = value
            elif value != license_:
                log.warning("ignoring additional license tag %r (keeping %r)", value, license_)
        elif tag.startswith("arxiv:"):
            value = tag[len("arxiv:"):].strip()
            if value:
                arxiv_ids.add(value)
        elif tag.startswith("base_model:"):
            rest = tag[len("base_model:"):]
            kind_name, sep, parent = rest.partition(":")
            kind = _KINDS.get(kind_name)
            if not sep or kind is None or not parent:
                continue
            if (parent, kind) not in seen_parents:
                seen_parents.add((parent, kind))
                parents.append((parent, kind))
        elif is_language_code(tag):
            languages.add(tag.lower())
    return license_, languages, arxiv_ids, parents


def _format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _parse_timestamp(value: str) -> datetime:
    ts = datetime.fromisoformat(value.strip().replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


# Field order of the canonical metadata string. Card text is deliberately absent.
METADATA_FIELDS = (
    "model_id",
    "created_at",
    "downloads",
    "likes",
    "trending_score",
    "pipeline_tag",
    "library_name",
    "license",
    "languages",
    "tags",
    "base_models",
    "arxiv",
)


def canonical_metadata_string(record: ModelRecord) -> str:
    """Serialize the record's metadata (its "DNA") as ``key: <json value>`` lines.

    Keys follow :data:`METADATA_FIELDS`. Tags and parent relations keep their
    original order; the set-valued languages and arXiv ids are sorted. Values
    are JSON-encoded, so no value can spill into another line.
    """
    values = {
        "model_id": record.model_id,
        "created_at": _format_timestamp(record.created_at),
        "downloads": record.downloads,
        "likes": record.likes,
        "trending_score": record.trending_score,
        "pipeline_tag": record.pipeline_tag,
        "library_name": record.library_name,
        "license": record.license,
        "languages": sorted(record.languages),
        "tags": list(record.raw_tags),
        "base_models": [[p, k.value] for p, k in record.parent_relations],
        "arxiv": sorted(record.arxiv_ids),
    }
    return "\n".join(f"{key}: {json.dumps(values[key], ensure_ascii=False)}" for key in METADATA_FIELDS)


def record_to_json(record: ModelRecord, include_card: bool = True) -> dict:
    out = {
        "id": record.model_id,
        "createdAt": _format_timestamp(record.created_at),
        "downloads": record.downloads,
        "likes": record.likes,
        "trendingScore": record.trending_score,
        "pipeline_tag": record.pipeline_tag,
        "library_name": record.library_name,
        "tags": list(record.raw_tags),
    }
    if include_card and record.card_text is not None:
        out["card"] = record.card_text
    return out


def record_from_json(obj: Mapping) -> ModelRecord:
    """Validate one decoded snapshot object. Raises ``ValueError`` on bad structure."""
    if not isinstance(obj, Mapping):
        raise ValueError("record is not an object")
    model_id = obj.get("id") or obj.get("modelId") or obj.get("model_id")
    if not isinstance(model_id, str) or not model_id.strip():
        raise ValueError("missing model id")
    created = obj.get("createdAt", obj.get("created_at"))
    if not isinstance(created, str):
        raise ValueError("missing createdAt")
    tags = obj.get("tags") or []
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise ValueError("tags must be a list of strings")

    def count(key):
        value = obj.get(key) or 0
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
            raise ValueError(f"{key} must be a non-negative number")
        return int(value)

    trending = obj.get("trendingScore", obj.get("trending_score"))
    if trending is not None and (isinstance(trending, bool) or not isinstance(trending, (int, float))):
        raise ValueError("trendingScore must be numeric")

    def opt_str(key):
        value = obj.get(key)
        if value is not None and not isinstance(value, str):
            raise ValueError(f"{key} must be a string")
        return value or None

    card = obj.get("card")
    if card is not None and not isinstance(card, str):
        raise ValueError("card must be a string")

    return ModelRecord.from_tags(
        model_id.strip(),
        _parse_timestamp(created),
        tags,
        downloads=count("downloads"),
        likes=count("likes"),
        trending_score=None if trending is None else float(trending),
        pipeline_tag=opt_str("pipeline_tag"),
        library_name=opt_str("library_name"),
        card_text=card,
    )


@dataclass
class ParseReport:
    lines: int = 0
    records: int = 0
    malformed: int = 0
    duplicates: int = 0
    malformed_lines: list[int] = field(default_factory=list)


def read_snapshot(
    stream: IO[bytes] | Iterable[bytes],
    max_malformed_fraction: float = DEFAULT_MALFORMED_THRESHOLD,
) -> tuple[list[ModelRecord], ParseReport]:
    """Parse an NDJSON byte stream; returns records sorted by model id plus a report."""
    report = ParseReport()
    by_id: dict[str, ModelRecord] = {}
    try:
        for lineno, raw in enumerate(stream, 1):
            if not raw.strip():
                continue
            report.lines += 1
            try:
                record = record_from_json(json.loads(raw.decode("utf-8")))
            except (ValueError, UnicodeDecodeError, TypeError) as exc:
                report.malformed += 1
                report.malformed_lines.append(lineno)
                log.debug("line %d skipped: %s", lineno, exc)
                continue
            if record.model_id in by_id:
                report.duplicates += 1
                log.warning("duplicate model id %r on line %d; keeping first", record.model_id, lineno)
                continue
            by_id[record.model_id] = record
    except OSError as exc:
        raise SnapshotIOError(f"cannot read snapshot: {exc}") from exc

    if report.lines and report.malformed / report.lines > max_malformed_fraction:
        raise CorruptSnapshotError(report.malformed, report.lines, max_malformed_fraction)
    report.records = len(by_id)
    return [by_id[k] for k in sorted(by_id)], report


def parse_snapshot(stream, max_malformed_fraction: float = DEFAULT_MALFORMED_THRESHOLD) -> list[ModelRecord]:
    return read_snapshot(stream, max_malformed_fraction)[0]


def load_snapshot(path, max_malformed_fraction: float = DEFAULT_MALFORMED_THRESHOLD):
    try:
        with open(path, "rb") as fh:
            return read_snapshot(fh, max_malformed_fraction)
    except OSError as exc:
        raise SnapshotIOError(f"cannot open snapshot {path}: {exc}") from exc


def write_snapshot(records: Iterable[ModelRecord], stream: IO[bytes], include_cards: bool = True) -> int:
    n = 0
    for record in records:
        line = json.dumps(record_to_json(record, include_cards), ensure_ascii=False, sort_keys=True)
        stream.write(line.encode("utf-8") + b"\n")
        n += 1
    return n


# -- card stores ---------------------------------------------------------------

def card_filename(model_id: str) -> str:
    return quote(model_id, safe="") + ".md"


def write_card_directory(cards: Mapping[str, str], directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for model_id, text in cards.items():
        (directory / card_filename(model_id)).write_text(text, encoding="utf-8")


def read_card_directory(directory) -> dict[str, str]:
    cards = {}
    for path in sorted(Path(directory).glob("*.md")):
        cards[unquote(path.name[:-3])] = path.read_text(encoding="utf-8")
    return cards


def _index_path(archive) -> Path:
    return Path(str(archive) + ".index.json")


def write_card_archive(cards: Mapping[str, str], archive) -> None:
    """Concatenate cards into one file; ``<archive>.index.json`` maps id -> [offset, nbytes]."""
    index = {}
    offset = 0
    with open(archive, "wb") as fh:
        for model_id in sorted(cards):
            blob = cards[model_id].encode("utf-8")
            fh.write(blob)
            index[model_id] = [offset, len(blob)]
            offset += len(blob)
    _index_path(archive).write_text(json.dumps(index, sort_keys=True), encoding="utf-8")


def iter_card_archive(archive) -> Iterator[tuple[str, str]]:
    index = json.loads(_index_path(archive).read_text(encoding="utf-8"))
    with open(archive, "rb") as fh:
        for model_id in sorted(index):
            offset, size = index[model_id]
            fh.seek(offset)
            yield model_id, fh.read(size).decode("utf-8")


def load_card_store(path) -> dict[str, str]:
    """Read a card directory or a card archive (detected by its index file)."""
    path = Path(path)
    if path.is_dir():
        return read_card_directory(path)
    if _index_path(path).exists():
        return dict(iter_card_archive(path))
    raise SnapshotIOError(f"{path} is neither a card directory nor an indexed archive")


def attach_cards(records: Iterable[ModelRecord], cards: Mapping[str, str]) -> list[ModelRecord]:
    """Return records with ``card_text`` filled from ``cards`` where present."""
    out = []
    for record in records:
        text = cards.get(record.model_id)
        out.append(record if text is None else replace(record, card_text=text))
    return out


def token_from_env(var: str = "HF_TOKEN") -> str | None:
    return os.environ.get(var) or None
