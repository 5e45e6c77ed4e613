import math

import numpy as np
import pytest

from helpers import cosine_oracle, pmi_oracle, random_corpus, tfidf_oracle
from wctext.errors import DataError
from wctext.stats import (
    NgramSpec,
    StatsConfig,
    compute_stats,
    doc_similarity,
    extract_char_ngrams,
    extract_word_ngrams,
    pmi,
    symmetric_lookup,
    tfidf,
    word_counts,
)

from test_corpus import make_corpus


class TestNgramSpec:
    def test_rejects_bad_range(self):
        with pytest.raises(DataError):
            NgramSpec("word", 3, 2)
        with pytest.raises(DataError):
            NgramSpec("word", 1, 2)

    def test_rejects_bad_kind(self):
        with pytest.raises(DataError):
            NgramSpec("subword", 2, 3)


class TestWordNgrams:
    def test_bigrams_of_three_tokens(self):
        corpus = make_corpus([["a", "b", "c"], ["x", "y"]])
        table = extract_word_ngrams(corpus, NgramSpec("word", 2, 2, min_freq=1))
        assert table.grams[:2] == ("a_b", "b_c")
        assert table.doc_counts[0] == {0: 1, 1: 1}

    def test_window_longer_than_doc(self):
        corpus = make_corpus([["a"], ["x", "y"]])
        table = extract_word_ngrams(corpus, NgramSpec("word", 2, 2, min_freq=1))
        assert table.doc_counts[0] == {}

    def test_min_freq_counts_total_occurrences(self):
        corpus = make_corpus([["a", "b"], ["a", "b"]])
        table = extract_word_ngrams(corpus, NgramSpec("word", 2, 2, min_freq=2))
        assert table.grams == ("a_b",)
        assert table.doc_counts[0] == {0: 1}
        assert table.doc_counts[1] == {0: 1}

    def test_gram_words_are_constituents(self):
        corpus = make_corpus([["a", "b", "a"], ["x", "y"]])
        table = extract_word_ngrams(corpus, NgramSpec("word", 2, 3, min_freq=1))
        by_key = dict(zip(table.grams, table.gram_words))
        ids = corpus.word_ids
        assert by_key["a_b_a"] == (ids["a"], ids["b"])

    def test_nothing_survives_gives_empty_registry(self):
        corpus = make_corpus([["a", "b"], ["c", "d"]])
        table = extract_word_ngrams(corpus, NgramSpec("word", 2, 2, min_freq=99))
        assert table.grams == ()


class TestCharNgrams:
    def test_cat_trigrams(self):
        table = extract_char_ngrams(["cat"], NgramSpec("char", 3, 3, min_freq=1))
        assert set(table.grams) == {"<ca", "cat", "at>"}

    def test_single_letter_word(self):
        table = extract_char_ngrams(["a"], NgramSpec("char", 3, 4, min_freq=1))
        assert table.grams == ("<a>",)

    def test_min_freq_counts_distinct_words(self):
        table = extract_char_ngrams(["cat", "cap"], NgramSpec("char", 3, 3, min_freq=2))
        assert table.grams == ("<ca",)
        assert table.gram_word_pairs == {(0, 0), (0, 1)}

    def test_incidence_is_substring_of_marked_word(self):
        vocab = ["cat", "catalog", "dog", "cattle"]
        table = extract_char_ngrams(vocab, NgramSpec("char", 3, 5, min_freq=1))
        for gram_id, word_id in table.gram_word_pairs:
            assert table.grams[gram_id] in f"<{vocab[word_id]}>"


class TestTfidf:
    def test_term_in_all_docs_not_stored(self):
        corpus = make_corpus([["a", "b"], ["a"]])
        table = tfidf(word_counts(corpus), corpus.num_docs)
        assert (0, corpus.word_ids["a"]) not in table

    def test_hand_computed_value(self):
        corpus = make_corpus([["a", "b"], ["a"]])
        table = tfidf(word_counts(corpus), corpus.num_docs)
        assert table[(0, corpus.word_ids["b"])] == pytest.approx(
            0.6931471805599453, abs=1e-12
        )

    def test_single_document_gives_empty_table(self):
        assert tfidf([{0: 3, 1: 1}], 1) == {}

    def test_tf_scales_with_count(self):
        corpus = make_corpus([["b", "b", "a"], ["a"]])
        table = tfidf(word_counts(corpus), corpus.num_docs)
        assert table[(0, corpus.word_ids["b"])] == pytest.approx(
            2 * math.log(2), abs=1e-12
        )

    def test_matches_oracle_on_random_corpora(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            corpus = random_corpus(rng, max_docs=30)
            got = tfidf(word_counts(corpus), corpus.num_docs)
            want = tfidf_oracle(corpus)
            assert set(got) == set(want)
            for key, value in want.items():
                assert got[key] == pytest.approx(value, abs=1e-12)


class TestPmi:
    def test_zero_pmi_not_stored(self):
        corpus = make_corpus([["a", "b"], ["x", "y"]])
        table = pmi(corpus, window=2)
        ids = corpus.word_ids
        assert symmetric_lookup(table, ids["a"], ids["b"]) is None

    def test_hand_computed_value(self):
        corpus = make_corpus([["a", "b"], ["a", "b"], ["c", "d"]])
        table = pmi(corpus, window=2)
        ids = corpus.word_ids
        value = symmetric_lookup(table, ids["a"], ids["b"])
        assert value == pytest.approx(0.4054651081081644, abs=1e-12)

    def test_symmetric_lookup_both_ways(self):
        corpus = make_corpus([["a", "b"], ["a", "b"], ["c", "d"]])
        table = pmi(corpus, window=2)
        ids = corpus.word_ids
        assert symmetric_lookup(table, ids["a"], ids["b"]) == symmetric_lookup(
            table, ids["b"], ids["a"]
        )

    def test_window_too_small_rejected(self):
        corpus = make_corpus([["a", "b"], ["c", "d"]])
        with pytest.raises(DataError):
            pmi(corpus, window=1)

    def test_matches_bruteforce_on_random_corpora(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            corpus = random_corpus(rng, max_docs=30)
            window = int(rng.integers(2, 6))
            got = pmi(corpus, window)
            want = pmi_oracle(corpus, window)
            assert set(got) == set(want)
            for key, value in want.items():
                assert got[key] == pytest.approx(value, abs=1e-12)

    def test_only_positive_canonical_entries(self):
        rng = np.random.default_rng(13)
        corpus = random_corpus(rng, max_docs=25)
        for (i, j), value in pmi(corpus, 3).items():
            assert i < j
            assert value > 0


class TestDocSimilarity:
    def test_identical_documents(self):
        corpus = make_corpus([["a", "b"], ["a", "b"], ["z", "z"]])
        table = doc_similarity(corpus, tfidf(word_counts(corpus), 3), threshold=0.5)
        assert table[(0, 1)] == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_documents_omitted(self):
        corpus = make_corpus([["a", "b"], ["c", "d"], ["a", "c"]])
        table = doc_similarity(corpus, tfidf(word_counts(corpus), 3), threshold=0.0)
        assert (0, 1) not in table

    def test_zero_vector_omitted(self):
        # "a" occurs in every document, so doc d1 = ["a"] has a zero vector
        corpus = make_corpus([["a", "b"], ["a"], ["a", "b"]])
        table = doc_similarity(corpus, tfidf(word_counts(corpus), 3), threshold=0.0)
        assert all(1 not in key for key in table)

    def test_single_pair_above_threshold(self):
        corpus = make_corpus([["a", "b"], ["a", "c"], ["z", "q"]])
        table = doc_similarity(corpus, tfidf(word_counts(corpus), 3), threshold=0.5)
        want = cosine_oracle(corpus, 0.5)
        assert len(want) == 1 and set(table) == set(want)
        key = next(iter(want))
        assert table[key] == pytest.approx(want[key], abs=1e-12)

    def test_values_respect_threshold_and_range(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            corpus = random_corpus(rng, max_docs=30)
            threshold = float(rng.uniform(0.1, 0.9))
            table = doc_similarity(
                corpus, tfidf(word_counts(corpus), corpus.num_docs), threshold
            )
            for (i, j), value in table.items():
                assert i < j
                assert threshold <= value <= 1.0

    def test_matches_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            corpus = random_corpus(rng, max_docs=25)
            got = doc_similarity(corpus, tfidf(word_counts(corpus), corpus.num_docs), 0.3)
            want = cosine_oracle(corpus, 0.3)
            assert set(got) == set(want)
            for key, value in want.items():
                assert got[key] == pytest.approx(value, abs=1e-12)


class TestComputeStats:
    def test_disabled_families_are_empty(self):
        corpus = make_corpus([["a", "b"], ["a", "c"]])
        tables = compute_stats(
            corpus, StatsConfig(window=3, word_ngrams=None, char_ngrams=None)
        )
        assert tables.grams == () and tables.chargrams == ()
        assert tables.tfidf_dg == {} and tables.contain_cw == frozenset()

    def test_contain_tables_consistent(self):
        corpus = make_corpus([["a", "b", "a", "b"], ["a", "b"], ["c", "d"]])
        tables = compute_stats(
            corpus,
            StatsConfig(window=3, word_ngrams=(2, 2), char_ngrams=None, ngram_min_freq=1),
        )
        for gram_id, doc_id in tables.contain_gd:
            assert 0 <= gram_id < len(tables.grams)
            assert 0 <= doc_id < corpus.num_docs
        gram_keys = tables.grams
        for gram_id, word_id in tables.contain_gw:
            assert corpus.vocabulary[word_id] in gram_keys[gram_id].split("_")
