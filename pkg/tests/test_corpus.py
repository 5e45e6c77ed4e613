import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wctext.corpus import (
    Corpus,
    Document,
    PreprocessConfig,
    assign_validation,
    load_corpus,
    load_stopwords,
    prune_vocabulary,
    tokenize,
)
from wctext.errors import CorpusError


def write_tsv(tmp_path, lines, name="corpus.tsv"):
    path = tmp_path / name
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


class TestTokenize:
    def test_punctuation_split(self):
        assert tokenize("Good, movie!") == ["good", "movie"]

    def test_empty(self):
        assert tokenize("") == []

    def test_digits_and_dots(self):
        assert tokenize("A.B 3x") == ["a", "b", "3x"]

    def test_apostrophe_kept(self):
        assert tokenize("don't stop") == ["don't", "stop"]

    def test_stopwords_removed(self):
        config = PreprocessConfig(stopwords=frozenset({"the"}))
        assert tokenize("The movie", config) == ["movie"]

    @given(st.text(max_size=80))
    @settings(max_examples=200)
    def test_idempotent_on_own_output(self, text):
        once = tokenize(text)
        assert tokenize(" ".join(once)) == once


class TestLoadCorpus:
    def test_basic_load(self, tmp_path):
        path = write_tsv(tmp_path, ["d1\ttrain\tpos\tGood movie", "d2\ttest\tneg\tBad"])
        corpus = load_corpus(path)
        assert len(corpus.documents) == 2
        assert corpus.vocabulary == ("good", "movie", "bad")
        assert corpus.word_ids == {"good": 0, "movie": 1, "bad": 2}
        assert corpus.label_set == ("pos", "neg")

    def test_empty_file(self, tmp_path):
        path = write_tsv(tmp_path, [])
        with pytest.raises(CorpusError, match="no documents"):
            load_corpus(path)

    def test_wrong_field_count(self, tmp_path):
        path = write_tsv(tmp_path, ["d1\ttrain\tpos"])
        with pytest.raises(CorpusError, match="1"):
            load_corpus(path)

    def test_comment_lines_ignored(self, tmp_path):
        path = write_tsv(
            tmp_path, ["# header", "d1\ttrain\tpos\tGood", "d2\ttest\tneg\tBad"]
        )
        assert len(load_corpus(path).documents) == 2

    def test_duplicate_doc_id(self, tmp_path):
        path = write_tsv(
            tmp_path, ["d1\ttrain\tpos\tGood", "d1\ttest\tneg\tBad"]
        )
        with pytest.raises(CorpusError, match="duplicate"):
            load_corpus(path)

    def test_empty_document_rejected(self, tmp_path):
        path = write_tsv(tmp_path, ["d1\ttrain\tpos\t!!!", "d2\ttest\tneg\tBad"])
        with pytest.raises(CorpusError, match="d1"):
            load_corpus(path)

    def test_unknown_split_rejected(self, tmp_path):
        path = write_tsv(tmp_path, ["d1\tdev\tpos\tGood"])
        with pytest.raises(CorpusError, match="dev"):
            load_corpus(path)

    def test_val_split_not_assigned_at_load(self, tmp_path):
        path = write_tsv(tmp_path, ["d1\ttrain\tpos\tGood", "d2\ttest\tneg\tBad"])
        assert all(d.split in ("train", "test") for d in load_corpus(path).documents)

    def test_vocabulary_stable_across_loads(self, tmp_path):
        path = write_tsv(
            tmp_path,
            ["d1\ttrain\tpos\tone two three", "d2\ttest\tneg\ttwo four"],
        )
        assert load_corpus(path) == load_corpus(path)

    def test_missing_test_split_rejected(self, tmp_path):
        path = write_tsv(tmp_path, ["d1\ttrain\tpos\tGood"])
        with pytest.raises(CorpusError, match="test"):
            load_corpus(path)


def make_corpus(token_lists, labels=None, splits=None):
    docs = []
    for i, tokens in enumerate(token_lists):
        label = labels[i] if labels else "c0"
        split = splits[i] if splits else ("train" if i + 1 < len(token_lists) else "test")
        docs.append(Document(f"d{i}", split, label, tuple(tokens)))
    return Corpus.build(docs)


class TestPruneVocabulary:
    def test_min_df_one_is_identity(self):
        corpus = make_corpus([["a", "b"], ["a", "c"]])
        pruned, dropped = prune_vocabulary(corpus, 1)
        assert pruned == corpus
        assert dropped == ()

    def test_rare_word_removed(self):
        corpus = make_corpus([["a", "rare"], ["a", "b"], ["a", "b"]])
        pruned, _ = prune_vocabulary(corpus, 2)
        assert "rare" not in pruned.vocabulary
        assert pruned.vocabulary == ("a", "b")

    def test_ids_redensified(self):
        corpus = make_corpus([["only0", "a"], ["a", "b"], ["a", "b"]])
        pruned, _ = prune_vocabulary(corpus, 2)
        assert pruned.word_ids == {"a": 0, "b": 1}

    def test_everything_pruned_is_error(self):
        corpus = make_corpus([["a"], ["b"]])
        with pytest.raises(CorpusError, match="empty vocabulary"):
            prune_vocabulary(corpus, 5)

    def test_emptied_documents_dropped_and_reported(self):
        corpus = make_corpus([["solo"], ["a", "b"], ["a", "b"], ["a", "b"]])
        pruned, dropped = prune_vocabulary(corpus, 2)
        assert dropped == ("d0",)
        assert len(pruned.documents) == 3


class TestAssignValidation:
    def _train_corpus(self, n_train):
        token_lists = [["a", "b"]] * n_train + [["a", "c"]]
        splits = ["train"] * n_train + ["test"]
        return make_corpus(token_lists, splits=splits)

    def test_ten_percent_of_hundred(self):
        corpus = assign_validation(self._train_corpus(100), 0.1, seed=0)
        assert len(corpus.split_indices("val")) == 10
        assert len(corpus.split_indices("train")) == 90

    def test_deterministic_for_seed(self):
        base = self._train_corpus(40)
        assert assign_validation(base, 0.2, seed=7) == assign_validation(base, 0.2, seed=7)

    def test_too_small_fraction_is_error(self):
        with pytest.raises(CorpusError):
            assign_validation(self._train_corpus(5), 0.1, seed=0)

    def test_partition_property(self):
        base = self._train_corpus(30)
        before = set(base.split_indices("train"))
        after = assign_validation(base, 0.25, seed=3)
        train = set(after.split_indices("train"))
        val = set(after.split_indices("val"))
        assert train | val == before
        assert train & val == set()

    def test_vocabulary_untouched(self):
        base = self._train_corpus(20)
        assert assign_validation(base, 0.1, seed=0).vocabulary == base.vocabulary


def test_load_stopwords(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("The\n\nand\n", encoding="utf-8")
    assert load_stopwords(path) == frozenset({"the", "and"})


@given(st.lists(st.sampled_from("abcde"), min_size=1, max_size=6), st.integers(0, 10))
@settings(max_examples=50)
def test_vocabulary_bijection(letters, extra):
    tokens = [f"w{c}{extra % 3}" for c in letters]
    corpus = make_corpus([tokens, ["zz"] + tokens])
    ids = sorted(corpus.word_ids.values())
    assert ids == list(range(len(corpus.vocabulary)))
