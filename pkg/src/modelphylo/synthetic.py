"""Deterministic synthetic registry snapshots for demos and tests.

Families grow by preferential attachment. Traits are inherited with small
mutation probabilities that drift along fixed value orders, so the drift and
ordering analyses have real structure to find.
"""

from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone

from .ingest import ModelRecord

LICENSE_ORDER = ["gemma", "llama3.1", "llama3", "llama2", "cc-by-nc-4.0", "openrail", "mit", "apache-2.0",
                 "cc-by-4.0", "gpl-3.0"]
TASK_ORDER = ["fill-mask", "feature-extraction", "text-generation", "summarization", "text-to-image",
              "image-classification", "text-classification", "token-classification"]
LANGUAGES = ["en", "zh", "fr", "de", "es", "ja", "ko", "ru", "ar", "hi", "pt", "it"]
LIBRARIES = ["transformers", "diffusers", "peft", "gguf", "sentence-transformers", "timm"]
FLAGS = ["endpoints_compatible", "safetensors", "autotrain_compatible", "region:us"]
WORDS = ("model trained dataset evaluation results usage license limitations bias training procedure "
         "hyperparameters learning rate batch size optimizer epochs framework versions intended uses "
         "accuracy loss benchmark tokenizer inference quantization adapter merge base fine-tuned").split()
AUTOGEN_SENTENCE = "This model card has been generated automatically according to the information the Trainer had access to."


def _drift(rng: random.Random, order: list[str], value: str, forward: float = 0.85) -> str:
    i = order.index(value)
    if rng.random() < forward and i < len(order) - 1:
        return order[rng.randint(i + 1, len(order) - 1)]
    choices = [v for v in order if v != value]
    return rng.choice(choices)


def _card(rng: random.Random, words: int, autogen: bool) -> str:
    body = " ".join(rng.choice(WORDS) for _ in range(words))
    parts = ["# Model card", body]
    if autogen:
        parts.insert(1, AUTOGEN_SENTENCE)
    return "\n\n".join(parts)


def generate_records(n: int = 500, seed: int = 0, root_fraction: float = 0.12) -> list[ModelRecord]:
    rng = random.Random(seed)
    start = datetime(2022, 3, 2, tzinfo=timezone.utc)
    state: dict[str, dict] = {}
    ids: list[str] = []
    pos: dict[str, int] = {}
    weights: list[float] = []
    records = []
    for i in range(n):
        author = f"org{rng.randint(0, max(1, n // 20)):03d}"
        model_id = f"{author}/model-{i:05d}"
        parent = None
        kind = None
        if ids and rng.random() > root_fraction:
            parent = rng.choices(ids, weights=weights)[0]
            kind = rng.choices(["finetune", "quantized", "adapter", "merge"], weights=[62, 20, 13, 5])[0]
        if parent is None:
            traits = {
                "license": "unknown" if rng.random() < 0.05 else rng.choice(LICENSE_ORDER[:6]),
                "languages": set(rng.sample(LANGUAGES, rng.randint(1, 6))),
                "task": rng.choice(TASK_ORDER[:4]),
                "library": rng.choice(LIBRARIES[:2]),
                "created": start if rng.random() < 0.3 else start + timedelta(days=rng.randint(1, 400)),
                "card_words": rng.randint(300, 1500),
                "depth": 0,
            }
        else:
            p = state[parent]
            langs = set(p["languages"])
            if rng.random() < 0.15 and len(langs) > 1:
                langs = set(rng.sample(sorted(langs), rng.randint(1, len(langs) - 1)))
            if rng.random() < 0.1:
                langs.add("en")
            traits = {
                "license": _drift(rng, LICENSE_ORDER, p["license"]) if p["license"] in LICENSE_ORDER and rng.random() < 0.15 else p["license"],
                "languages": langs,
                "task": _drift(rng, TASK_ORDER, p["task"]) if rng.random() < 0.2 else p["task"],
                "library": {"quantized": "gguf", "adapter": "peft"}.get(kind, p["library"]),
                "created": p["created"] + timedelta(days=rng.randint(1, 60), hours=rng.randint(0, 23)),
                "card_words": max(5, int(p["card_words"] * rng.uniform(0.3, 0.9))),
                "depth": p["depth"] + 1,
            }
        tags = [f"license:{traits['license']}"] + sorted(traits["languages"])
        if parent is not None:
            tags.append(f"base_model:{kind}:{parent}")
            if kind == "merge" and len(ids) > 1:
                other = rng.choice([x for x in ids if x != parent])
                tags.append(f"base_model:merge:{other}")
        elif rng.random() < 0.05:
            # declared parent that is not part of the snapshot
            tags.append(f"base_model:finetune:upstream/base-{rng.randint(0, 3)}")
        if rng.random() < 0.2:
            tags.append(f"arxiv:{2300 + rng.randint(0, 99)}.{rng.randint(10000, 10049)}")
        tags += [f for f in FLAGS if rng.random() < 0.3]
        if rng.random() < 0.02:
            tags.append(f"doi:10.57967/hf/{rng.randint(1000, 9999)}")
        autogen = kind in ("finetune", "adapter") and rng.random() < 0.35
        card = _card(rng, traits["card_words"], autogen) if rng.random() < (0.95 if parent else 0.6) else None
        records.append(ModelRecord.from_tags(
            model_id,
            traits["created"],
            tags,
            downloads=int(rng.paretovariate(1.2) * 10),
            likes=int(rng.paretovariate(1.5)),
            trending_score=round(rng.random() * 10, 3),
            pipeline_tag=traits["task"],
            library_name=traits["library"],
            card_text=card,
        ))
        state[model_id] = traits
        pos[model_id] = len(ids)
        ids.append(model_id)
        weights.append(1.0)
        if parent is not None and kind == "finetune":
            weights[pos[parent]] += 1.5
    return records

