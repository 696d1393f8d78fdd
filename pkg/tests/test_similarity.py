import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modelphylo.similarity import (TextMetric, bow_cosine, build_vector_space, levenshtein_distance,
                                   levenshtein_similarity, normalized_levenshtein_similarity, tfidf_cosine, tokenize)

from conftest import dp_levenshtein, naive_levenshtein


def test_tokenize_examples():
    assert tokenize("license: apache-2.0") == ["license", "apache-2.0", "license apache-2.0"]
    assert tokenize("") == []
    assert tokenize("A_b, c.d") == ["a_b", "c.d", "a_b c.d"]
    assert tokenize("x y z", "unigram") == ["x", "y", "z"]
    assert tokenize("x y z", "bigram") == ["x y", "y z"]


def test_vocabulary_and_df():
    space = build_vector_space(["a b", "a c"], n=2, mode="unigram")
    assert space.vocabulary == ("a", "b")
    assert space.document_frequency["a"] == 2
    full = build_vector_space(["a b", "a c"], n=100, mode="unigram")
    assert full.vocabulary == ("a", "b", "c")


def test_empty_corpus_space():
    space = build_vector_space([], n=10)
    assert space.vocabulary == () and space.corpus_size == 0
    assert bow_cosine("a", "a", space) == 0.0


def test_bow_examples():
    space = build_vector_space(["a b", "a c"], mode="unigram")
    assert bow_cosine("a b", "a c", space) == pytest.approx(0.5, abs=1e-15)
    assert bow_cosine("a b", "a b", space) == 1.0
    assert bow_cosine("b", "c", space) == 0.0


def test_tfidf_hand_expanded():
    # corpus x:3 y:2 z:1 w:1 -> vocabulary (x, y, w, z); idf = N/df = (1, 3/2, 3, 3)
    space = build_vector_space(["x y", "x z", "x y w"], mode="unigram")
    assert space.vocabulary == ("x", "y", "w", "z")
    assert [space.idf(t) for t in space.vocabulary] == [1.0, 1.5, 3.0, 3.0]
    # (1, 3/2, 0, 0) . (1, 3/2, 3, 0) = 13/4 ; norms sqrt(13/4), sqrt(49/4)
    assert abs(tfidf_cosine("x y", "x y w", space) - math.sqrt(13) / 7) <= 1e-12
    # (1, 0, 0, 3) . (1, 3/2, 3, 0) = 1 ; norms sqrt(10), 7/2
    assert abs(tfidf_cosine("x z", "x y w", space) - 1 / (math.sqrt(10) * 3.5)) <= 1e-12
    assert abs(bow_cosine("x y", "x y w", space) - math.sqrt(2 / 3)) <= 1e-12
    assert abs(bow_cosine("x z", "x y w", space) - 1 / math.sqrt(6)) <= 1e-12


def test_tfidf_with_bigrams_hand_expanded():
    docs = ["red fox", "red dog", "blue fox"]
    space = build_vector_space(docs, mode="both")
    # unigrams red:2 fox:2 dog:1 blue:1 ; bigrams each 1
    assert space.vocabulary[:2] == ("fox", "red")
    w = {t: space.idf(t) for t in space.vocabulary}
    assert w["fox"] == 1.5 and w["red fox"] == 3.0
    a = {"red": 1.5, "fox": 1.5, "red fox": 3.0}
    b = {"red": 1.5, "dog": 3.0, "red dog": 3.0}
    dot = sum(a[t] * b.get(t, 0) for t in a)
    expected = dot / math.sqrt(sum(x * x for x in a.values())) / math.sqrt(sum(x * x for x in b.values()))
    assert abs(tfidf_cosine("red fox", "red dog", space) - expected) <= 1e-12


def test_idf_one_for_ubiquitous_term():
    space = build_vector_space(["a b", "a c", "a"], mode="unigram")
    assert space.idf("a") == 1.0


def test_log_idf_mode():
    space = build_vector_space(["a b", "a c", "a"], mode="unigram", idf_mode="log")
    assert space.idf("a") == pytest.approx(1.0)
    assert space.idf("b") == pytest.approx(math.log(4 / 2) + 1)


def test_levenshtein_examples():
    assert normalized_levenshtein_similarity("kitten", "sitting") == 1 - 3 / 7
    assert Fraction(normalized_levenshtein_similarity("kitten", "sitting")).limit_denominator(100) == Fraction(4, 7)
    assert normalized_levenshtein_similarity("same", "same") == 1.0
    assert normalized_levenshtein_similarity("", "abc") == 0.0
    assert normalized_levenshtein_similarity("", "") == 1.0


def test_dp_oracle_agrees_with_textbook():
    rng = random.Random(11)
    for _ in range(300):
        a = "".join(rng.choice("abc") for _ in range(rng.randint(0, 12)))
        b = "".join(rng.choice("abc") for _ in range(rng.randint(0, 12)))
        assert dp_levenshtein(a, b) == naive_levenshtein(a, b)


def test_levenshtein_matches_dp_random():
    rng = random.Random(5)
    alphabets = ["ab", "acgt", "abcdefghijklmnopqrstuvwxyz ", "aé中😀"]
    for _ in range(300):
        al = rng.choice(alphabets)
        a = "".join(rng.choice(al) for _ in range(rng.randint(0, 300)))
        b = "".join(rng.choice(al) for _ in range(rng.randint(0, 300)))
        assert levenshtein_distance(a, b) == dp_levenshtein(a, b)


def test_levenshtein_cap_flag():
    s = levenshtein_similarity("a" * 50, "a" * 40 + "b" * 10, cap=40)
    assert s.truncated and s.value == 1.0
    assert not levenshtein_similarity("ab", "ab", cap=40).truncated


def test_text_metric_missing_text_flagged():
    m = TextMetric({"a": "x y", "b": "x z", "c": None}, "tfidf", mode="unigram")
    r = m("a", "c")
    assert r.value == 0.0 and r.zero_vector
    assert m("a", "b").value == m("b", "a").value
    lev = TextMetric({"a": "abc", "b": None}, "levenshtein")
    assert lev("a", "b").zero_vector


text = st.text(alphabet="abc xyz-._", max_size=40)


@settings(max_examples=200, deadline=None)
@given(st.lists(text, min_size=1, max_size=5), text, text)
def test_cosine_properties(corpus, s1, s2):
    space = build_vector_space(corpus + [s1, s2])
    for f in (bow_cosine, tfidf_cosine):
        v = f(s1, s2, space)
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(f(s2, s1, space), abs=1e-12)
        if space.tf_vector(s1):
            assert f(s1, s1, space) == 1.0
        if not set(space.term_counts(s1)) & set(space.term_counts(s2)):
            assert v == 0.0


@settings(max_examples=200, deadline=None)
@given(text, text)
def test_levenshtein_properties(s1, s2):
    v = normalized_levenshtein_similarity(s1, s2)
    assert 0.0 <= v <= 1.0
    assert v == normalized_levenshtein_similarity(s2, s1)
    assert normalized_levenshtein_similarity(s1, s1) == 1.0
    assert levenshtein_distance(s1, s2) == naive_levenshtein(s1, s2)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["p", "q", "r", "s"]), min_size=1, max_size=4, unique=True),
       st.lists(st.lists(st.integers(1, 4), min_size=4, max_size=4), min_size=2, max_size=4))
def test_uniform_df_tfidf_equals_bow(words, repeats):
    # every document holds every word, so all idf values are equal and cancel
    docs = [" ".join(w for w, r in zip(words, rep) for _ in range(r)) for rep in repeats]
    space = build_vector_space(docs, mode="unigram")
    assert abs(tfidf_cosine(docs[0], docs[1], space) - bow_cosine(docs[0], docs[1], space)) <= 1e-12
