"""Edge-weight statistics: tf-idf, sliding-window PMI, document cosine
similarity, and word / character n-gram extraction.

All tables are pure functions of an immutable :class:`~wctext.corpus.Corpus`.
Symmetric tables (PMI, document similarity) are stored once with canonical
``(i, j), i < j`` keys; :func:`symmetric_lookup` resolves either orientation.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus
from .errors import DataError


@dataclass(frozen=True)
class NgramSpec:
    """What to extract: word or character n-grams of size n_min..n_max.

    ``min_freq`` filters word grams by total corpus occurrences and
    character grams by the number of distinct words containing them.
    """

    kind: str
    n_min: int
    n_max: int
    min_freq: int = 5

    def __post_init__(self):
        if self.kind not in ("word", "char"):
            raise DataError(f"ngram kind must be 'word' or 'char', got {self.kind!r}")
        if not 2 <= self.n_min <= self.n_max:
            raise DataError(
                f"ngram range must satisfy 2 <= n_min <= n_max, got {self.n_min}:{self.n_max}"
            )
        if self.min_freq < 1:
            raise DataError(f"ngram min_freq must be >= 1, got {self.min_freq}")


@dataclass(frozen=True)
class WordNgramTable:
    """Word n-gram registry plus per-document occurrence counts."""

    grams: tuple[str, ...]
    gram_words: tuple[tuple[int, ...], ...]
    doc_counts: tuple[dict[int, int], ...]


@dataclass(frozen=True)
class CharNgramTable:
    """Character n-gram registry plus (gram id, word id) incidence."""

    grams: tuple[str, ...]
    gram_word_pairs: frozenset[tuple[int, int]]


@dataclass(frozen=True)
class StatsConfig:
    """Graph statistics configuration; ``None`` ranges disable a family."""

    window: int = 20
    word_ngrams: tuple[int, int] | None = (2, 2)
    char_ngrams: tuple[int, int] | None = (3, 4)
    ngram_min_freq: int = 5
    sim_threshold: float = 0.5


@dataclass(frozen=True)
class StatTables:
    """All edge-weight tables for one corpus.

    tfidf_dw / tfidf_dg map (doc index, word/gram id) to a positive
    tf-idf weight; pmi_ww and sim_dd are symmetric with canonical
    ``i < j`` keys; the contain_* sets are boolean incidence relations.
    """

    tfidf_dw: dict[tuple[int, int], float]
    tfidf_dg: dict[tuple[int, int], float]
    pmi_ww: dict[tuple[int, int], float]
    sim_dd: dict[tuple[int, int], float]
    contain_gw: frozenset[tuple[int, int]]
    contain_gd: frozenset[tuple[int, int]]
    contain_cw: frozenset[tuple[int, int]]
    grams: tuple[str, ...] = ()
    chargrams: tuple[str, ...] = ()


def symmetric_lookup(table: Mapping[tuple[int, int], float], i: int, j: int) -> float | None:
    """Value of a canonically stored symmetric table for either key order."""
    if i == j:
        return None
    key = (i, j) if i < j else (j, i)
    return table.get(key)


def extract_word_ngrams(corpus: Corpus, spec: NgramSpec) -> WordNgramTable:
    """Enumerate contiguous token windows of each document.

    Grams whose total corpus frequency falls below ``spec.min_freq`` are
    dropped; surviving grams get dense ids in first-occurrence order.
    """
    if spec.kind != "word":
        raise DataError(f"extract_word_ngrams needs a word spec, got kind={spec.kind!r}")
    totals: Counter[str] = Counter()
    for doc in corpus.documents:
        toks = doc.tokens
        for n in range(spec.n_min, spec.n_max + 1):
            for i in range(len(toks) - n + 1):
                totals["_".join(toks[i : i + n])] += 1
    gram_ids: dict[str, int] = {}
    grams: list[str] = []
    gram_words: list[tuple[int, ...]] = []
    doc_counts: list[dict[int, int]] = []
    word_ids = corpus.word_ids
    for doc in corpus.documents:
        counts: dict[int, int] = {}
        toks = doc.tokens
        for n in range(spec.n_min, spec.n_max + 1):
            for i in range(len(toks) - n + 1):
                window = toks[i : i + n]
                key = "_".join(window)
                if totals[key] < spec.min_freq:
                    continue
                gid = gram_ids.get(key)
                if gid is None:
                    gid = len(grams)
                    gram_ids[key] = gid
                    grams.append(key)
                    members = []
                    for tok in window:
                        wid = word_ids[tok]
                        if wid not in members:
                            members.append(wid)
                    gram_words.append(tuple(members))
                counts[gid] = counts.get(gid, 0) + 1
        doc_counts.append(counts)
    return WordNgramTable(
        grams=tuple(grams), gram_words=tuple(gram_words), doc_counts=tuple(doc_counts)
    )


def extract_char_ngrams(vocabulary: Sequence[str], spec: NgramSpec) -> CharNgramTable:
    """Character windows of each word wrapped in '<' and '>' markers.

    Grams occurring in fewer than ``spec.min_freq`` distinct words are
    dropped. Incidence is boolean: (gram id, word id).
    """
    if spec.kind != "char":
        raise DataError(f"extract_char_ngrams needs a char spec, got kind={spec.kind!r}")
    word_freq: Counter[str] = Counter()
    per_word: list[list[str]] = []
    for word in vocabulary:
        marked = f"<{word}>"
        seen: list[str] = []
        for n in range(spec.n_min, spec.n_max + 1):
            for i in range(len(marked) - n + 1):
                gram = marked[i : i + n]
                if gram not in seen:
                    seen.append(gram)
        per_word.append(seen)
        word_freq.update(seen)
    gram_ids: dict[str, int] = {}
    grams: list[str] = []
    pairs: set[tuple[int, int]] = set()
    for wid, seen in enumerate(per_word):
        for gram in seen:
            if word_freq[gram] < spec.min_freq:
                continue
            gid = gram_ids.get(gram)
            if gid is None:
                gid = len(grams)
                gram_ids[gram] = gid
                grams.append(gram)
            pairs.add((gid, wid))
    return CharNgramTable(grams=tuple(grams), gram_word_pairs=frozenset(pairs))


def tfidf(
    counts: Sequence[Mapping[int, int]], n_docs: int | None = None
) -> dict[tuple[int, int], float]:
    """tf * idf with raw-count tf and idf = ln(n_docs / df); zeros not stored."""
    if n_docs is None:
        n_docs = len(counts)
    if n_docs < 1:
        raise DataError("tfidf needs at least one document")
    df: Counter[int] = Counter()
    for doc_counts in counts:
        df.update(doc_counts.keys())
    idf = {term: math.log(n_docs / term_df) for term, term_df in df.items()}
    table: dict[tuple[int, int], float] = {}
    for d, doc_counts in enumerate(counts):
        for term, count in doc_counts.items():
            value = count * idf[term]
            if value > 0.0:
                table[(d, term)] = value
    return table


def word_counts(corpus: Corpus) -> list[dict[int, int]]:
    """Per-document word-id occurrence counts."""
    word_ids = corpus.word_ids
    result = []
    for doc in corpus.documents:
        counts: dict[int, int] = {}
        for tok in doc.tokens:
            wid = word_ids[tok]
            counts[wid] = counts.get(wid, 0) + 1
        result.append(counts)
    return result


def _document_windows(tokens: Sequence[int], window: int) -> list[set[int]]:
    # Documents shorter than the window count as a single window, the
    # convention of the sliding-window co-occurrence literature.
    if len(tokens) <= window:
        return [set(tokens)]
    return [set(tokens[i : i + window]) for i in range(len(tokens) - window + 1)]


def pmi(corpus: Corpus, window: int) -> dict[tuple[int, int], float]:
    """Positive pointwise mutual information over sliding token windows.

    PMI(i, j) = ln(#W(i,j) * #W / (#W(i) * #W(j))) where #W counts
    windows; only strictly positive values are stored, keyed (i, j) with
    i < j.
    """
    if window < 2:
        raise DataError(f"PMI window must be >= 2, got {window}")
    word_ids = corpus.word_ids
    rows: list[int] = []
    cols: list[int] = []
    n_windows = 0
    for doc in corpus.documents:
        ids = [word_ids[t] for t in doc.tokens]
        for members in _document_windows(ids, window):
            for wid in members:
                rows.append(n_windows)
                cols.append(wid)
            n_windows += 1
    if n_windows == 0:
        raise DataError("corpus produced zero windows")
    incidence = sp.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n_windows, corpus.num_words)
    )
    word_freq = np.asarray(incidence.sum(axis=0)).ravel()
    pair_counts = sp.triu(incidence.T @ incidence, k=1).tocoo()
    table: dict[tuple[int, int], float] = {}
    order = np.lexsort((pair_counts.col, pair_counts.row))
    for idx in order:
        i = int(pair_counts.row[idx])
        j = int(pair_counts.col[idx])
        c_ij = pair_counts.data[idx]
        score = math.log(c_ij * n_windows / (word_freq[i] * word_freq[j]))
        if score > 0.0:
            table[(i, j)] = score
    return table


def doc_similarity(
    corpus: Corpus,
    tfidf_dw: Mapping[tuple[int, int], float],
    threshold: float,
) -> dict[tuple[int, int], float]:
    """Pairwise cosine similarity of tf-idf word vectors.

    Pairs below ``threshold`` and pairs involving an all-zero vector are
    omitted, as is the diagonal. Keys are canonical (i, j) with i < j.
    """
    if not 0.0 <= threshold <= 1.0:
        raise DataError(f"similarity threshold must be in [0, 1], got {threshold}")
    n = corpus.num_docs
    if not tfidf_dw:
        return {}
    keys = np.array(list(tfidf_dw.keys()), dtype=np.int64)
    vals = np.fromiter(tfidf_dw.values(), dtype=np.float64, count=len(tfidf_dw))
    mat = sp.csr_matrix((vals, (keys[:, 0], keys[:, 1])), shape=(n, corpus.num_words))
    norms = np.sqrt(np.asarray(mat.multiply(mat).sum(axis=1)).ravel())
    inv = np.zeros_like(norms)
    nonzero = norms > 0.0
    inv[nonzero] = 1.0 / norms[nonzero]
    normed = sp.diags(inv) @ mat
    normed_t = normed.T.tocsc()
    table: dict[tuple[int, int], float] = {}
    block = 1024
    for start in range(0, n, block):
        stop = min(start + block, n)
        sims = (normed[start:stop] @ normed_t).tocoo()
        order = np.lexsort((sims.col, sims.row))
        for idx in order:
            i = int(sims.row[idx]) + start
            j = int(sims.col[idx])
            if i >= j:
                continue
            value = min(float(sims.data[idx]), 1.0)
            if value >= threshold:
                table[(i, j)] = value
    return table


def compute_stats(corpus: Corpus, config: StatsConfig) -> StatTables:
    """All edge statistics for one corpus under one configuration."""
    tfidf_dw = tfidf(word_counts(corpus), corpus.num_docs)
    tfidf_dg: dict[tuple[int, int], float] = {}
    contain_gw: set[tuple[int, int]] = set()
    contain_gd: set[tuple[int, int]] = set()
    grams: tuple[str, ...] = ()
    if config.word_ngrams is not None:
        spec = NgramSpec(
            "word", config.word_ngrams[0], config.word_ngrams[1], config.ngram_min_freq
        )
        table = extract_word_ngrams(corpus, spec)
        grams = table.grams
        tfidf_dg = tfidf(table.doc_counts, corpus.num_docs)
        for gid, members in enumerate(table.gram_words):
            for wid in members:
                contain_gw.add((gid, wid))
        for d, counts in enumerate(table.doc_counts):
            for gid in counts:
                contain_gd.add((gid, d))
    contain_cw: frozenset[tuple[int, int]] = frozenset()
    chargrams: tuple[str, ...] = ()
    if config.char_ngrams is not None:
        spec = NgramSpec(
            "char", config.char_ngrams[0], config.char_ngrams[1], config.ngram_min_freq
        )
        table = extract_char_ngrams(corpus.vocabulary, spec)
        chargrams = table.grams
        contain_cw = table.gram_word_pairs
    return StatTables(
        tfidf_dw=tfidf_dw,
        tfidf_dg=tfidf_dg,
        pmi_ww=pmi(corpus, config.window),
        sim_dd=doc_similarity(corpus, tfidf_dw, config.sim_threshold),
        contain_gw=frozenset(contain_gw),
        contain_gd=frozenset(contain_gd),
        contain_cw=contain_cw,
        grams=grams,
        chargrams=chargrams,
    )
