"""Genetic-similarity measures between two texts.

Three measures share one interface: term-frequency cosine (bag of words),
TF-IDF cosine, and normalized Levenshtein similarity. The term-based ones need
a :class:`TermVectorSpace` built over the whole corpus first.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Literal

NgramMode = Literal["both", "unigram", "bigram"]
IdfMode = Literal["literal", "log"]

DEFAULT_VOCAB_CAP = 20_000
DEFAULT_LEVENSHTEIN_CAP = 1_000_000

_SPLIT = re.compile(r"[^\w.\-]+")


def tokenize(text: str, mode: NgramMode = "both") -> list[str]:
    """Lowercased unigrams, then adjacent bigrams joined by one space.

    Splits on any run of characters other than letters, digits, ``_``, ``-``
    and ``.``.
    """
    words = [w for w in _SPLIT.split(text.lower()) if w]
    if mode == "unigram":
        return words
    bigrams = [f"{a} {b}" for a, b in zip(words, words[1:])]
    if mode == "bigram":
        return bigrams
    return words + bigrams


@dataclass(frozen=True)
class TermVectorSpace:
    vocabulary: tuple[str, ...]
    document_frequency: dict[str, int]
    corpus_size: int
    n: int
    mode: NgramMode = "both"
    idf_mode: IdfMode = "literal"
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.vocabulary)})

    def idf(self, term: str) -> float:
        df = self.document_frequency[term]
        if self.idf_mode == "log":
            return math.log((1 + self.corpus_size) / (1 + df)) + 1.0
        return self.corpus_size / df

    def term_counts(self, text: str) -> dict[int, int]:
        """Sparse raw term-frequency vector over the vocabulary."""
        idx = self.index
        counts: dict[int, int] = {}
        for tok in tokenize(text, self.mode):
            i = idx.get(tok)
            if i is not None:
                counts[i] = counts.get(i, 0) + 1
        return counts

    def tf_vector(self, text: str) -> dict[int, float]:
        return {i: float(c) for i, c in self.term_counts(text).items()}

    def tfidf_vector(self, text: str) -> dict[int, float]:
        vocab = self.vocabulary
        return {i: c * self.idf(vocab[i]) for i, c in self.term_counts(text).items()}


def build_vector_space(
    corpus: Iterable[str],
    n: int = DEFAULT_VOCAB_CAP,
    mode: NgramMode = "both",
    idf_mode: IdfMode = "literal",
) -> TermVectorSpace:
    """Keep the ``n`` terms with the highest total corpus frequency.

    Ties are broken lexicographically. Document frequency counts documents
    containing the term at least once.
    """
    if n < 1:
        raise ValueError("vocabulary cap must be at least 1")
    total: Counter[str] = Counter()
    df: Counter[str] = Counter()
    size = 0
    for doc in corpus:
        size += 1
        toks = tokenize(doc, mode)
        total.update(toks)
        df.update(set(toks))
    vocab = tuple(sorted(total, key=lambda t: (-total[t], t))[:n])
    return TermVectorSpace(vocab, {t: df[t] for t in vocab}, size, n, mode, idf_mode)


@dataclass(frozen=True)
class Similarity:
    """A similarity value plus the reason it may be degenerate."""

    value: float
    zero_vector: bool = False
    truncated: bool = False

    def __float__(self) -> float:
        return self.value


def sparse_cosine(u: dict[int, float], v: dict[int, float]) -> Similarity:
    if not u or not v:
        return Similarity(0.0, zero_vector=True)
    if u == v:
        return Similarity(1.0)
    if len(u) > len(v):
        u, v = v, u
    dot = sum(w * v[i] for i, w in u.items() if i in v)
    norm = math.sqrt(sum(w * w for w in u.values())) * math.sqrt(sum(w * w for w in v.values()))
    return Similarity(min(1.0, max(0.0, dot / norm)))


def bow_cosine(s1: str, s2: str, space: TermVectorSpace) -> float:
    return sparse_cosine(space.tf_vector(s1), space.tf_vector(s2)).value


def tfidf_cosine(s1: str, s2: str, space: TermVectorSpace) -> float:
    return sparse_cosine(space.tfidf_vector(s1), space.tfidf_vector(s2)).value


def levenshtein_distance(s1: str, s2: str) -> int:
    """Edit distance via the bit-vector recurrence of Myers/Hyyrö.

    The shorter string becomes the bit pattern, so each character of the
    longer one costs a handful of big-integer operations.
    """
    if len(s1) < len(s2):
        s1, s2 = s2, s1
    m = len(s2)
    if m == 0:
        return len(s1)
    peq: dict[str, int] = {}
    for i, ch in enumerate(s2):
        peq[ch] = peq.get(ch, 0) | (1 << i)
    mask = (1 << m) - 1
    high = 1 << (m - 1)
    pv, mv, score = mask, 0, m
    for ch in s1:
        eq = peq.get(ch, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | (~(xh | pv) & mask)
        mh = pv & xh
        if ph & high:
            score += 1
        elif mh & high:
            score -= 1
        ph = ((ph << 1) | 1) & mask
        mh = (mh << 1) & mask
        pv = mh | (~(xv | ph) & mask)
        mv = ph & xv
    return score


def levenshtein_similarity(s1: str, s2: str, cap: int | None = DEFAULT_LEVENSHTEIN_CAP) -> Similarity:
    truncated = False
    if cap is not None and (len(s1) > cap or len(s2) > cap):
        s1, s2, truncated = s1[:cap], s2[:cap], True
    longest = max(len(s1), len(s2))
    if longest == 0:
        return Similarity(1.0, truncated=truncated)
    return Similarity(1.0 - levenshtein_distance(s1, s2) / longest, truncated=truncated)


def normalized_levenshtein_similarity(s1: str, s2: str, cap: int | None = DEFAULT_LEVENSHTEIN_CAP) -> float:
    """``1 - distance / max(len)``; two empty strings are identical (1.0)."""
    return levenshtein_similarity(s1, s2, cap).value


MEASURES = ("tfidf", "bow", "levenshtein")


class TextMetric:
    """Similarity between two node ids, looked up through ``texts``.

    The term space is built once over every present text. A node without text
    (for example a model with no card) scores 0 against anything, flagged as a
    zero vector. Results are memoised per unordered pair.
    """

    def __init__(
        self,
        texts: dict[str, str | None],
        measure: str = "tfidf",
        n: int = DEFAULT_VOCAB_CAP,
        mode: NgramMode = "both",
        idf_mode: IdfMode = "literal",
        levenshtein_cap: int | None = DEFAULT_LEVENSHTEIN_CAP,
        name: str | None = None,
    ):
        if measure not in MEASURES:
            raise ValueError(f"unknown measure {measure!r}")
        self.texts = texts
        self.measure = measure
        self.levenshtein_cap = levenshtein_cap
        self.id = name or measure
        self.space = None
        if measure != "levenshtein":
            corpus = [texts[k] for k in sorted(texts) if texts[k] is not None]
            self.space = build_vector_space(corpus, n, mode, idf_mode)
        self._vectors: dict[str, dict[int, float]] = {}
        self._memo: dict[tuple[str, str], Similarity] = {}

    def _vector(self, node: str) -> dict[int, float]:
        vec = self._vectors.get(node)
        if vec is None:
            text = self.texts.get(node) or ""
            vec = self.space.tfidf_vector(text) if self.measure == "tfidf" else self.space.tf_vector(text)
            self._vectors[node] = vec
        return vec

    def __call__(self, a: str, b: str) -> Similarity:
        key = (a, b) if a <= b else (b, a)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        ta, tb = self.texts.get(a), self.texts.get(b)
        if ta is None or tb is None:
            result = Similarity(0.0, zero_vector=True)
        elif self.measure == "levenshtein":
            result = levenshtein_similarity(ta, tb, self.levenshtein_cap)
        else:
            result = sparse_cosine(self._vector(a), self._vector(b))
        self._memo[key] = result
        return result
