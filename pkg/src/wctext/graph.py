"""The word-character heterogeneous graph.

Four typed node registries (documents, words, word n-grams, character
n-grams) and six weighted edge families:

    dd  document-document   cosine similarity (symmetric, canonical i<j)
    dw  document-word       tf-idf
    dg  document-gram       tf-idf
    ww  word-word           positive PMI (symmetric, canonical i<j)
    gw  gram-word           0/1 containment
    cw  chargram-word       0/1 containment

Every other type pairing is structurally forbidden. The block adjacency
places types in the fixed order doc, word, gram, chargram.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .errors import (
    ChecksumError,
    DataError,
    GraphFormatError,
    NumericError,
    TruncatedFileError,
    VersionMismatchError,
)
from .sparse import SparseMatrix
from .stats import StatTables

NODE_TYPES = ("doc", "word", "gram", "chargram")
EDGE_FAMILIES = ("dd", "dw", "dg", "ww", "gw", "cw")
FAMILY_TYPES = {
    "dd": ("doc", "doc"),
    "dw": ("doc", "word"),
    "dg": ("doc", "gram"),
    "ww": ("word", "word"),
    "gw": ("gram", "word"),
    "cw": ("chargram", "word"),
}
SYMMETRIC_FAMILIES = ("dd", "ww")

_FORMAT_HEADER = "WCTG v1"


@dataclass(frozen=True)
class NodeRef:
    """A node named by its type and index within that type's registry."""

    node_type: str
    index: int

    def __str__(self) -> str:
        return f"{self.node_type}:{self.index}"


@dataclass(frozen=True, eq=False)
class Edges:
    """One edge family, sorted by (src, dst), weights finite and nonzero."""

    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray

    @classmethod
    def from_items(cls, items) -> "Edges":
        items = list(items)
        if not items:
            return cls(
                src=np.empty(0, dtype=np.int64),
                dst=np.empty(0, dtype=np.int64),
                weight=np.empty(0, dtype=np.float64),
            )
        src = np.array([s for s, _, _ in items], dtype=np.int64)
        dst = np.array([d for _, d, _ in items], dtype=np.int64)
        weight = np.array([w for _, _, w in items], dtype=np.float64)
        order = np.lexsort((dst, src))
        src, dst, weight = src[order], dst[order], weight[order]
        if src.size > 1:
            dup = (np.diff(src) == 0) & (np.diff(dst) == 0)
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise DataError(f"duplicate edge ({src[k]}, {dst[k]})")
        return cls(src=src, dst=dst, weight=weight)

    @classmethod
    def empty(cls) -> "Edges":
        return cls.from_items(())

    def __len__(self) -> int:
        return int(self.src.size)

    def equals(self, other: "Edges") -> bool:
        return (
            np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.weight, other.weight)
        )


@dataclass(frozen=True, eq=False)
class HetGraph:
    doc_ids: tuple[str, ...]
    words: tuple[str, ...]
    grams: tuple[str, ...]
    chargrams: tuple[str, ...]
    labels: tuple[str, ...]
    splits: tuple[str, ...]
    edges: dict[str, Edges]

    def __post_init__(self):
        if len(self.labels) != len(self.doc_ids) or len(self.splits) != len(self.doc_ids):
            raise DataError("labels and splits must cover every document node")
        if set(self.edges) != set(EDGE_FAMILIES):
            unknown = set(self.edges) ^ set(EDGE_FAMILIES)
            raise DataError(f"edge families must be exactly {EDGE_FAMILIES}, mismatch: {unknown}")
        sizes = self.type_sizes
        for family, e in self.edges.items():
            stype, dtype = FAMILY_TYPES[family]
            if len(e) == 0:
                continue
            if e.src.min() < 0 or e.src.max() >= sizes[stype]:
                raise DataError(f"{family} edge references unknown {stype} node")
            if e.dst.min() < 0 or e.dst.max() >= sizes[dtype]:
                raise DataError(f"{family} edge references unknown {dtype} node")
            if not np.isfinite(e.weight).all():
                raise DataError(f"{family} edges carry non-finite weights")
            if family in SYMMETRIC_FAMILIES and (e.src >= e.dst).any():
                raise DataError(f"{family} edges must be stored canonically with src < dst")

    @property
    def type_sizes(self) -> dict[str, int]:
        return {
            "doc": len(self.doc_ids),
            "word": len(self.words),
            "gram": len(self.grams),
            "chargram": len(self.chargrams),
        }

    @property
    def num_nodes(self) -> int:
        return sum(self.type_sizes.values())

    @property
    def type_offsets(self) -> dict[str, int]:
        sizes = self.type_sizes
        offsets = {}
        acc = 0
        for t in NODE_TYPES:
            offsets[t] = acc
            acc += sizes[t]
        return offsets

    @property
    def label_set(self) -> tuple[str, ...]:
        seen: list[str] = []
        for lab in self.labels:
            if lab not in seen:
                seen.append(lab)
        return tuple(seen)

    def node_key(self, ref: NodeRef) -> str:
        registry = {
            "doc": self.doc_ids,
            "word": self.words,
            "gram": self.grams,
            "chargram": self.chargrams,
        }[ref.node_type]
        return registry[ref.index]

    def flat_id(self, ref: NodeRef) -> int:
        return self.type_offsets[ref.node_type] + ref.index

    def split_indices(self, split: str) -> np.ndarray:
        return np.flatnonzero(np.array([s == split for s in self.splits]))

    def equals(self, other: "HetGraph") -> bool:
        return (
            self.doc_ids == other.doc_ids
            and self.words == other.words
            and self.grams == other.grams
            and self.chargrams == other.chargrams
            and self.labels == other.labels
            and self.splits == other.splits
            and all(self.edges[f].equals(other.edges[f]) for f in EDGE_FAMILIES)
        )


def build_graph(corpus: Corpus, stats: StatTables) -> HetGraph:
    """Assemble the graph for a corpus from its statistics tables."""
    n_d, n_w = corpus.num_docs, corpus.num_words
    n_g, n_c = len(stats.grams), len(stats.chargrams)

    def check(table, n_src, n_dst, name):
        for s, d in table:
            if not (0 <= s < n_src and 0 <= d < n_dst):
                raise DataError(f"{name} table references unknown ids ({s}, {d})")

    check(stats.tfidf_dw, n_d, n_w, "tfidf_dw")
    check(stats.tfidf_dg, n_d, n_g, "tfidf_dg")
    check(stats.pmi_ww, n_w, n_w, "pmi_ww")
    check(stats.sim_dd, n_d, n_d, "sim_dd")
    check(stats.contain_gw, n_g, n_w, "contain_gw")
    check(stats.contain_cw, n_c, n_w, "contain_cw")
    edges = {
        "dd": Edges.from_items((i, j, v) for (i, j), v in stats.sim_dd.items() if v != 0.0),
        "dw": Edges.from_items((d, w, v) for (d, w), v in stats.tfidf_dw.items() if v != 0.0),
        "dg": Edges.from_items((d, g, v) for (d, g), v in stats.tfidf_dg.items() if v != 0.0),
        "ww": Edges.from_items((i, j, v) for (i, j), v in stats.pmi_ww.items() if v != 0.0),
        "gw": Edges.from_items((g, w, 1.0) for g, w in stats.contain_gw),
        "cw": Edges.from_items((c, w, 1.0) for c, w in stats.contain_cw),
    }
    return HetGraph(
        doc_ids=corpus.doc_ids,
        words=corpus.vocabulary,
        grams=stats.grams,
        chargrams=stats.chargrams,
        labels=tuple(doc.label for doc in corpus.documents),
        splits=tuple(doc.split for doc in corpus.documents),
        edges=edges,
    )


def apply_ablations(
    graph: HetGraph,
    use_grams: bool = True,
    use_chargrams: bool = True,
    use_doc_sim: bool = True,
) -> HetGraph:
    """Drop gram nodes, chargram nodes and/or similarity edges.

    Disabling all three reduces the graph to the word-document baseline.
    """
    edges = dict(graph.edges)
    grams, chargrams = graph.grams, graph.chargrams
    if not use_grams:
        grams = ()
        edges["dg"] = Edges.empty()
        edges["gw"] = Edges.empty()
    if not use_chargrams:
        chargrams = ()
        edges["cw"] = Edges.empty()
    if not use_doc_sim:
        edges["dd"] = Edges.empty()
    return replace(graph, grams=grams, chargrams=chargrams, edges=edges)


def assemble_adjacency(graph: HetGraph, self_loops: bool = False) -> SparseMatrix:
    """The symmetric block adjacency over all node types.

    Each stored edge is mirrored; if ``self_loops`` is set, a unit
    diagonal is added across all four node types.
    """
    offsets = graph.type_offsets
    n = graph.num_nodes
    rows, cols, vals = [], [], []
    for family in EDGE_FAMILIES:
        e = graph.edges[family]
        if len(e) == 0:
            continue
        stype, dtype = FAMILY_TYPES[family]
        src = e.src + offsets[stype]
        dst = e.dst + offsets[dtype]
        rows.append(src)
        cols.append(dst)
        vals.append(e.weight)
        rows.append(dst)
        cols.append(src)
        vals.append(e.weight)
    if self_loops:
        idx = np.arange(n, dtype=np.int64)
        rows.append(idx)
        cols.append(idx)
        vals.append(np.ones(n))
    if not rows:
        return SparseMatrix.from_coo((n, n), [], [], [])
    return SparseMatrix.from_coo(
        (n, n), np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    )


def normalize_adjacency(adj: SparseMatrix) -> SparseMatrix:
    """Symmetric normalization D^{-1/2} A D^{-1/2} with D the row sums."""
    if adj.shape[0] != adj.shape[1]:
        raise DataError(f"adjacency must be square, got {adj.shape}")
    degree = adj.row_sums()
    if (degree == 0.0).any():
        isolated = int(np.flatnonzero(degree == 0.0)[0])
        raise NumericError(f"node {isolated} has zero degree; add self-loops first")
    inv_sqrt = 1.0 / np.sqrt(degree)
    vals = adj.vals * inv_sqrt[adj.rows] * inv_sqrt[adj.cols]
    return SparseMatrix.from_coo(adj.shape, adj.rows, adj.cols, vals)


def _graph_lines(graph: HetGraph):
    yield _FORMAT_HEADER
    yield "#nodes"
    registries = {
        "doc": graph.doc_ids,
        "word": graph.words,
        "gram": graph.grams,
        "chargram": graph.chargrams,
    }
    for node_type in NODE_TYPES:
        for index, key in enumerate(registries[node_type]):
            yield f"{node_type}\t{index}\t{key}"
    yield "#labels"
    for index, (label, split) in enumerate(zip(graph.labels, graph.splits)):
        yield f"{index}\t{label}\t{split}"
    yield "#edges"
    for family in EDGE_FAMILIES:
        e = graph.edges[family]
        for s, d, w in zip(e.src, e.dst, e.weight):
            yield f"{family}\t{int(s)}\t{int(d)}\t{float(w)!r}"


def graph_to_bytes(graph: HetGraph) -> bytes:
    """Serialize; deterministic byte-for-byte for equal graphs."""
    body = "".join(line + "\n" for line in _graph_lines(graph))
    payload = body.encode("utf-8")
    digest = hashlib.sha256(payload).hexdigest()
    return payload + f"#checksum\nsha256\t{digest}\n".encode("utf-8")


def save_graph(graph: HetGraph, path: str | Path) -> None:
    Path(path).write_bytes(graph_to_bytes(graph))


def graph_from_bytes(raw: bytes) -> HetGraph:
    marker = b"#checksum\n"
    pos = raw.rfind(marker)
    if pos < 0:
        raise TruncatedFileError("graph file has no checksum trailer; truncated?")
    payload, trailer = raw[: pos], raw[pos + len(marker):]
    fields = trailer.decode("utf-8").strip().split("\t")
    if len(fields) != 2 or fields[0] != "sha256":
        raise TruncatedFileError("malformed checksum trailer")
    digest = hashlib.sha256(payload).hexdigest()
    if digest != fields[1]:
        raise ChecksumError(f"checksum mismatch: file says {fields[1]}, content is {digest}")
    lines = payload.decode("utf-8").splitlines()
    if not lines:
        raise GraphFormatError("empty graph file")
    if lines[0] != _FORMAT_HEADER:
        raise VersionMismatchError(f"unsupported graph format {lines[0]!r}")

    registries: dict[str, list[str]] = {t: [] for t in NODE_TYPES}
    labels: dict[int, tuple[str, str]] = {}
    edge_items: dict[str, list[tuple[int, int, float]]] = {f: [] for f in EDGE_FAMILIES}
    section = None
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            if line not in ("#nodes", "#labels", "#edges"):
                raise GraphFormatError(f"line {lineno}: unknown section {line!r}")
            section = line
            continue
        parts = line.split("\t")
        if section == "#nodes":
            if len(parts) != 3:
                raise GraphFormatError(f"line {lineno}: bad node line")
            node_type, index, key = parts
            if node_type not in NODE_TYPES:
                raise GraphFormatError(f"line {lineno}: unknown node type {node_type!r}")
            if int(index) != len(registries[node_type]):
                raise GraphFormatError(f"line {lineno}: node indices must be dense and in order")
            registries[node_type].append(key)
        elif section == "#labels":
            if len(parts) != 3:
                raise GraphFormatError(f"line {lineno}: bad label line")
            labels[int(parts[0])] = (parts[1], parts[2])
        elif section == "#edges":
            if len(parts) != 4:
                raise GraphFormatError(f"line {lineno}: bad edge line")
            family, s, d, w = parts
            if family not in EDGE_FAMILIES:
                raise GraphFormatError(f"line {lineno}: unknown edge type {family!r}")
            s, d = int(s), int(d)
            if family in SYMMETRIC_FAMILIES and s > d:
                s, d = d, s
            edge_items[family].append((s, d, float(w)))
        else:
            raise GraphFormatError(f"line {lineno}: content before any section")

    n_docs = len(registries["doc"])
    if set(labels) != set(range(n_docs)):
        raise GraphFormatError("label section must cover every document node exactly once")
    return HetGraph(
        doc_ids=tuple(registries["doc"]),
        words=tuple(registries["word"]),
        grams=tuple(registries["gram"]),
        chargrams=tuple(registries["chargram"]),
        labels=tuple(labels[i][0] for i in range(n_docs)),
        splits=tuple(labels[i][1] for i in range(n_docs)),
        edges={f: Edges.from_items(items) for f, items in edge_items.items()},
    )


def load_graph(path: str | Path) -> HetGraph:
    return graph_from_bytes(Path(path).read_bytes())


def neighbors(graph: HetGraph, ref: NodeRef) -> dict[str, list[tuple[NodeRef, float]]]:
    """Typed neighbor lists for one node, each sorted by weight descending."""
    sizes = graph.type_sizes
    if ref.node_type not in NODE_TYPES:
        raise DataError(f"unknown node type {ref.node_type!r}")
    if not 0 <= ref.index < sizes[ref.node_type]:
        raise DataError(f"unknown node {ref}")
    report: dict[str, list[tuple[NodeRef, float]]] = {}
    for family in EDGE_FAMILIES:
        stype, dtype = FAMILY_TYPES[family]
        e = graph.edges[family]
        found: list[tuple[NodeRef, float]] = []
        if stype == ref.node_type:
            for k in np.flatnonzero(e.src == ref.index):
                found.append((NodeRef(dtype, int(e.dst[k])), float(e.weight[k])))
        if dtype == ref.node_type:
            for k in np.flatnonzero(e.dst == ref.index):
                found.append((NodeRef(stype, int(e.src[k])), float(e.weight[k])))
        if found:
            found.sort(key=lambda item: (-item[1], item[0].node_type, item[0].index))
            report[family] = found
    return report
