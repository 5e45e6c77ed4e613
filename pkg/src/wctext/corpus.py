"""Corpus loading, tokenization, vocabulary pruning and split assignment.

A corpus is read from a TSV file with one document per line:

    doc_id <TAB> split <TAB> label <TAB> raw text

where split is ``train`` or ``test`` (validation documents are carved out
of the training set later by :func:`assign_validation`). Lines starting
with ``#`` are ignored.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CorpusError

SPLITS = ("train", "val", "test")

_NON_TOKEN = re.compile(r"[^a-z0-9']+")


@dataclass(frozen=True)
class PreprocessConfig:
    """Knobs for text cleaning and split assignment."""

    min_df: int = 5
    stopwords: frozenset[str] = frozenset()
    val_fraction: float = 0.1
    seed: int = 42


@dataclass(frozen=True)
class Document:
    doc_id: str
    split: str
    label: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class Corpus:
    """An immutable labeled document collection with a dense vocabulary.

    Vocabulary ids are assigned in first-occurrence order over the
    document sequence, so repeated loads of the same file produce
    identical ids.
    """

    documents: tuple[Document, ...]
    label_set: tuple[str, ...]
    vocabulary: tuple[str, ...]

    @classmethod
    def build(cls, documents: Iterable[Document]) -> "Corpus":
        docs = tuple(documents)
        if not docs:
            raise CorpusError("no documents")
        labels: list[str] = []
        vocab: list[str] = []
        word_ids: dict[str, int] = {}
        seen_ids: set[str] = set()
        for doc in docs:
            if doc.doc_id in seen_ids:
                raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
            seen_ids.add(doc.doc_id)
            if doc.split not in SPLITS:
                raise CorpusError(f"document {doc.doc_id!r} has unknown split {doc.split!r}")
            if not doc.tokens:
                raise CorpusError(f"document {doc.doc_id!r} is empty after preprocessing")
            if doc.label not in labels:
                labels.append(doc.label)
            for tok in doc.tokens:
                if tok not in word_ids:
                    word_ids[tok] = len(vocab)
                    vocab.append(tok)
        splits = {doc.split for doc in docs}
        for required in ("train", "test"):
            if required not in splits:
                raise CorpusError(f"corpus has no {required} documents")
        return cls(documents=docs, label_set=tuple(labels), vocabulary=tuple(vocab))

    @cached_property
    def word_ids(self) -> dict[str, int]:
        return {w: i for i, w in enumerate(self.vocabulary)}

    @cached_property
    def label_ids(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.label_set)}

    @cached_property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(doc.doc_id for doc in self.documents)

    @property
    def num_docs(self) -> int:
        return len(self.documents)

    @property
    def num_words(self) -> int:
        return len(self.vocabulary)

    def split_indices(self, split: str) -> list[int]:
        return [i for i, doc in enumerate(self.documents) if doc.split == split]


def tokenize(text: str, config: PreprocessConfig | None = None) -> list[str]:
    """Lowercase, split on runs of characters outside [a-z0-9'], keep order.

    Stopwords from ``config`` are removed after splitting; the result may
    be empty (callers decide whether that is an error).
    """
    tokens = _NON_TOKEN.sub(" ", text.lower()).split()
    if config is not None and config.stopwords:
        tokens = [t for t in tokens if t not in config.stopwords]
    return tokens


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read one stopword per line, lowercased; blank lines ignored."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word:
                words.add(word)
    return frozenset(words)


def load_corpus(
    path: str | Path,
    format: str = "tsv",
    config: PreprocessConfig | None = None,
) -> Corpus:
    """Load a TSV corpus, tokenize every document and build the vocabulary.

    Raises :class:`CorpusError` on malformed lines (with the line number),
    duplicate doc_ids, documents that are empty after tokenization, and
    files containing no documents.
    """
    if format != "tsv":
        raise CorpusError(f"unsupported corpus format {format!r}")
    docs: list[Document] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise CorpusError(
                    f"{path}:{lineno}: expected 4 tab-separated fields, got {len(fields)}"
                )
            doc_id, split, label, text = fields
            if split not in ("train", "test"):
                raise CorpusError(
                    f"{path}:{lineno}: split must be 'train' or 'test', got {split!r}"
                )
            tokens = tokenize(text, config)
            if not tokens:
                raise CorpusError(
                    f"{path}:{lineno}: document {doc_id!r} is empty after tokenization"
                )
            docs.append(Document(doc_id=doc_id, split=split, label=label, tokens=tuple(tokens)))
    if not docs:
        raise CorpusError(f"{path}: no documents")
    return Corpus.build(docs)


def document_frequencies(documents: Sequence[Document]) -> dict[str, int]:
    """Number of documents each word occurs in."""
    df: dict[str, int] = {}
    for doc in documents:
        for word in set(doc.tokens):
            df[word] = df.get(word, 0) + 1
    return df


def prune_vocabulary(corpus: Corpus, min_df: int) -> tuple[Corpus, tuple[str, ...]]:
    """Drop words with document frequency below ``min_df``.

    Word ids are re-densified in first-occurrence order. Documents left
    empty by pruning are dropped; their ids are returned alongside the
    new corpus so callers can report them.
    """
    if min_df < 1:
        raise CorpusError(f"min_df must be >= 1, got {min_df}")
    df = document_frequencies(corpus.documents)
    keep = {w for w, n in df.items() if n >= min_df}
    if not keep:
        raise CorpusError(f"min_df={min_df} leaves an empty vocabulary")
    if len(keep) == len(corpus.vocabulary):
        return corpus, ()
    pruned_docs: list[Document] = []
    dropped: list[str] = []
    for doc in corpus.documents:
        tokens = tuple(t for t in doc.tokens if t in keep)
        if tokens:
            pruned_docs.append(dataclasses.replace(doc, tokens=tokens))
        else:
            dropped.append(doc.doc_id)
    return Corpus.build(pruned_docs), tuple(dropped)


def assign_validation(corpus: Corpus, fraction: float, seed: int) -> Corpus:
    """Move ``floor(fraction * |train|)`` training documents to the val split.

    Selection is seeded uniform sampling without replacement, so the
    split is deterministic for a fixed seed.
    """
    if not 0.0 < fraction < 1.0:
        raise CorpusError(f"validation fraction must be in (0, 1), got {fraction}")
    train_positions = corpus.split_indices("train")
    if not train_positions:
        raise CorpusError("corpus has no train documents")
    n_val = int(fraction * len(train_positions))
    if n_val == 0:
        raise CorpusError(
            f"validation fraction {fraction} of {len(train_positions)} train documents is empty"
        )
    if n_val == len(train_positions):
        raise CorpusError("validation split would consume the entire training set")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(train_positions), size=n_val, replace=False)
    val_positions = {train_positions[i] for i in chosen}
    docs = tuple(
        dataclasses.replace(doc, split="val") if i in val_positions else doc
        for i, doc in enumerate(corpus.documents)
    )
    return Corpus(documents=docs, label_set=corpus.label_set, vocabulary=corpus.vocabulary)
