"""The two graph models over the word-character heterogeneous graph.

``wctext_gcn`` propagates through the normalized block adjacency:
H^{l+1} = f(A_hat H^l W_l) with identity input features, ReLU between
layers and no activation on the class logits.

``wctext_gat`` updates each node type through one attention phase per
neighboring type (doc <- doc/word/gram, word <- doc/word/gram/chargram,
gram <- doc/word, chargram <- word). Per phase and head:

    z_ij  = LeakyReLU(a^T [W_v h_i ; W_src h_j ; W_e e_ij])
    alpha = softmax of z over the target's neighbor set
    out_i = ELU(sum_j alpha_ij W_src h_j)

heads are concatenated, phase outputs are concatenated and mapped to the
hidden width by a per-type combiner; a linear head over document states
produces logits. Node features are one-hot, implemented as row selection
of the first-layer weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DataError
from .graph import NODE_TYPES, HetGraph, apply_ablations, assemble_adjacency, normalize_adjacency
from .sparse import SparseMatrix

MODEL_KINDS = ("wctext_gcn", "wctext_gat")

_PHASE_SOURCES = {
    "doc": ("doc", "word", "gram"),
    "word": ("doc", "word", "gram", "chargram"),
    "gram": ("doc", "word"),
    "chargram": ("word",),
}


@dataclass(frozen=True)
class ModelConfig:
    model: str = "wctext_gcn"
    hidden_dim: int = 200
    num_layers: int = 2
    heads: int = 8
    head_dim: int = 16
    edge_dim: int = 32
    dropout: float = 0.5
    leaky_slope: float = 0.2
    use_grams: bool = True
    use_chargrams: bool = True
    use_doc_sim: bool = True
    attention_dropout: bool = True

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise DataError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.hidden_dim < 1 or self.num_layers < 1:
            raise DataError("hidden_dim and num_layers must be positive")
        if self.model == "wctext_gat" and (self.heads < 1 or self.head_dim < 1):
            raise DataError("GAT needs heads >= 1 and head_dim >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise DataError(f"dropout must be in [0, 1), got {self.dropout}")


@dataclass(frozen=True)
class NodeStates:
    doc: Tensor
    word: Tensor
    gram: Tensor
    chargram: Tensor

    def get(self, node_type: str) -> Tensor:
        return getattr(self, node_type)


@dataclass(frozen=True)
class PhaseEdges:
    """Edges of one attention phase, sorted by target for segment ops."""

    target_type: str
    source_type: str
    tgt: np.ndarray
    src: np.ndarray
    weight: np.ndarray

    @property
    def name(self) -> str:
        return f"{self.target_type}<-{self.source_type}"


def _phase_edges(graph: HetGraph, target_type: str, source_type: str) -> PhaseEdges:
    pair_to_family = {
        ("doc", "doc"): ("dd", True),
        ("doc", "word"): ("dw", False),
        ("word", "doc"): ("dw", True),
        ("doc", "gram"): ("dg", False),
        ("gram", "doc"): ("dg", True),
        ("word", "word"): ("ww", True),
        ("gram", "word"): ("gw", False),
        ("word", "gram"): ("gw", True),
        ("chargram", "word"): ("cw", False),
        ("word", "chargram"): ("cw", True),
    }
    family, flip = pair_to_family[(target_type, source_type)]
    e = graph.edges[family]
    if family in ("dd", "ww"):
        tgt = np.concatenate([e.src, e.dst])
        src = np.concatenate([e.dst, e.src])
        weight = np.concatenate([e.weight, e.weight])
    elif flip:
        tgt, src, weight = e.dst, e.src, e.weight
    else:
        tgt, src, weight = e.src, e.dst, e.weight
    order = np.lexsort((src, tgt))
    return PhaseEdges(
        target_type=target_type,
        source_type=source_type,
        tgt=tgt[order],
        src=src[order],
        weight=weight[order].reshape(-1, 1),
    )


def phase_map(config: ModelConfig) -> dict[str, tuple[tuple[str, str], ...]]:
    """Enabled (target <- source) phases per node type, in fixed order."""
    phases: dict[str, tuple[tuple[str, str], ...]] = {}
    for target, sources in _PHASE_SOURCES.items():
        if target == "gram" and not config.use_grams:
            continue
        if target == "chargram" and not config.use_chargrams:
            continue
        kept = []
        for source in sources:
            if source == "gram" and not config.use_grams:
                continue
            if source == "chargram" and not config.use_chargrams:
                continue
            if target == "doc" and source == "doc" and not config.use_doc_sim:
                continue
            kept.append((target, source))
        phases[target] = tuple(kept)
    return phases


@dataclass(frozen=True, eq=False)
class PreparedGraph:
    """Ablated graph with the tensors both models consume."""

    graph: HetGraph
    config: ModelConfig
    labels: np.ndarray
    num_classes: int

    @classmethod
    def create(cls, graph: HetGraph, config: ModelConfig) -> "PreparedGraph":
        graph = apply_ablations(
            graph,
            use_grams=config.use_grams,
            use_chargrams=config.use_chargrams,
            use_doc_sim=config.use_doc_sim,
        )
        label_set = graph.label_set
        if not label_set:
            raise DataError("graph has no document labels; class count unknown")
        label_ids = {lab: i for i, lab in enumerate(label_set)}
        labels = np.array([label_ids[lab] for lab in graph.labels], dtype=np.int64)
        return cls(graph=graph, config=config, labels=labels, num_classes=len(label_set))

    @cached_property
    def a_hat(self) -> Tensor:
        a_hat = normalize_adjacency(assemble_adjacency(self.graph, self_loops=True))
        return Tensor(a_hat)

    @cached_property
    def phases(self) -> dict[str, tuple[PhaseEdges, ...]]:
        return {
            target: tuple(_phase_edges(self.graph, t, s) for t, s in pairs)
            for target, pairs in phase_map(self.config).items()
        }

    @cached_property
    def edge_weight_tensors(self) -> dict[str, Tensor]:
        return {
            phase.name: Tensor(phase.weight)
            for phases in self.phases.values()
            for phase in phases
        }

    def split_mask(self, split: str) -> np.ndarray:
        return np.array([s == split for s in self.graph.splits], dtype=bool)


def prepare(graph: HetGraph, config: ModelConfig) -> PreparedGraph:
    return PreparedGraph.create(graph, config)


def _glorot(rng: np.random.Generator, shape, fan_in=None, fan_out=None) -> np.ndarray:
    fan_in = shape[0] if fan_in is None else fan_in
    fan_out = shape[1] if fan_out is None else fan_out
    limit = np.sqrt(6.0 / max(1, fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(prepared: PreparedGraph, rng: np.random.Generator) -> dict[str, Tensor]:
    """Fresh trainable parameters; creation order is deterministic."""
    config = prepared.config
    sizes = prepared.graph.type_sizes
    n, k, c = prepared.graph.num_nodes, config.hidden_dim, prepared.num_classes
    params: dict[str, Tensor] = {}
    if config.model == "wctext_gcn":
        dims = [n] + [k] * (config.num_layers - 1) + [c]
        for i in range(config.num_layers):
            params[f"w{i}"] = Tensor(_glorot(rng, (dims[i], dims[i + 1])), requires_grad=True)
        return params
    kh = config.heads * config.head_dim
    ke = config.heads * config.edge_dim
    phases = phase_map(config)
    for layer in range(config.num_layers):
        for target in NODE_TYPES:
            if target not in phases:
                continue
            for target_type, source_type in phases[target]:
                base = f"l{layer}.{target_type}<-{source_type}"
                in_t = sizes[target_type] if layer == 0 else k
                in_s = sizes[source_type] if layer == 0 else k
                params[f"{base}.w_v"] = Tensor(
                    _glorot(rng, (in_t, kh), fan_in=in_t, fan_out=config.head_dim),
                    requires_grad=True,
                )
                params[f"{base}.w_src"] = Tensor(
                    _glorot(rng, (in_s, kh), fan_in=in_s, fan_out=config.head_dim),
                    requires_grad=True,
                )
                params[f"{base}.w_e"] = Tensor(
                    _glorot(rng, (1, ke), fan_in=1, fan_out=config.edge_dim),
                    requires_grad=True,
                )
                for part, width in (("a_v", kh), ("a_src", kh), ("a_e", ke)):
                    params[f"{base}.{part}"] = Tensor(np.zeros((1, width)), requires_grad=True)
            width_in = len(phases[target]) * kh
            params[f"l{layer}.{target}.w_out"] = Tensor(
                _glorot(rng, (width_in, k)), requires_grad=True
            )
    params["cls"] = Tensor(_glorot(rng, (k, c)), requires_grad=True)
    return params


def gcn_forward(
    prepared: PreparedGraph | HetGraph,
    params: dict[str, Tensor],
    config: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Class logits over document nodes (the first adjacency block)."""
    if isinstance(prepared, HetGraph):
        prepared = prepare(prepared, config)
    if training and config.dropout > 0.0 and rng is None:
        raise DataError("training with dropout needs an rng")
    h = params["w0"]
    if training:
        h = ad.dropout(h, config.dropout, rng, rowwise=True)
    h = ad.spmm(prepared.a_hat, h)
    for i in range(1, config.num_layers):
        h = ad.relu(h)
        if training:
            h = ad.dropout(h, config.dropout, rng)
        h = ad.spmm(prepared.a_hat, ad.matmul(h, params[f"w{i}"]))
    n_docs = prepared.graph.type_sizes["doc"]
    return ad.slice_rows(h, np.arange(n_docs))


def _identity_states(prepared: PreparedGraph) -> None:
    return None


def gat_layer(
    prepared: PreparedGraph,
    states: NodeStates | None,
    params: dict[str, Tensor],
    config: ModelConfig,
    layer: int = 0,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> NodeStates:
    """One four-phase attention update. ``states=None`` means one-hot inputs."""
    sizes = prepared.graph.type_sizes
    phases = prepared.phases
    # Input dropout: one mask per node type, shared by every phase that
    # reads the type. With one-hot inputs this is dropout on the identity
    # features, i.e. a row mask on the first-layer weights.
    row_masks: dict[str, np.ndarray] = {}
    dropped: dict[str, Tensor] = {}
    apply_dropout = training and config.dropout > 0.0
    if states is None:
        if apply_dropout:
            for t in NODE_TYPES:
                mask = (rng.random((sizes[t], 1)) >= config.dropout) / (1.0 - config.dropout)
                row_masks[t] = mask
    elif apply_dropout:
        dropped = {t: ad.dropout(states.get(t), config.dropout, rng) for t in NODE_TYPES}
    else:
        dropped = {t: states.get(t) for t in NODE_TYPES}

    def transformed(node_type: str, weight: Tensor) -> Tensor:
        if states is None:
            if node_type in row_masks:
                return ad.mul_const(weight, row_masks[node_type])
            return weight
        return ad.matmul(dropped[node_type], weight)

    new_states: dict[str, Tensor] = {}
    for target in NODE_TYPES:
        if target not in phases:
            new_states[target] = Tensor(np.zeros((sizes[target], config.hidden_dim)))
            continue
        phase_outputs = []
        for phase in phases[target]:
            base = f"l{layer}.{phase.name}"
            t_tgt = transformed(target, params[f"{base}.w_v"])
            t_src = transformed(phase.source_type, params[f"{base}.w_src"])
            score_tgt = ad.sum_col_blocks(ad.mul_rowvec(t_tgt, params[f"{base}.a_v"]), config.heads)
            score_src = ad.sum_col_blocks(
                ad.mul_rowvec(t_src, params[f"{base}.a_src"]), config.heads
            )
            edge_vec = ad.matmul(prepared.edge_weight_tensors[phase.name], params[f"{base}.w_e"])
            score_edge = ad.sum_col_blocks(
                ad.mul_rowvec(edge_vec, params[f"{base}.a_e"]), config.heads
            )
            z = ad.leaky_relu(
                ad.add(
                    ad.add(ad.slice_rows(score_tgt, phase.tgt), ad.slice_rows(score_src, phase.src)),
                    score_edge,
                ),
                config.leaky_slope,
            )
            alpha = ad.segment_softmax(z, phase.tgt)
            if training and config.attention_dropout and config.dropout > 0.0:
                alpha = ad.dropout(alpha, config.dropout, rng)
            messages = ad.slice_rows(t_src, phase.src)
            agg = ad.segment_weighted_sum(messages, alpha, phase.tgt, sizes[target])
            phase_outputs.append(ad.elu(agg))
        stacked = phase_outputs[0] if len(phase_outputs) == 1 else ad.concat_cols(phase_outputs)
        new_states[target] = ad.matmul(stacked, params[f"l{layer}.{target}.w_out"])
    return NodeStates(**new_states)


def gat_forward(
    prepared: PreparedGraph | HetGraph,
    params: dict[str, Tensor],
    config: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Stacked attention layers, then a linear head on document states."""
    if isinstance(prepared, HetGraph):
        prepared = prepare(prepared, config)
    if training and config.dropout > 0.0 and rng is None:
        raise DataError("training with dropout needs an rng")
    states: NodeStates | None = None
    for layer in range(config.num_layers):
        states = gat_layer(prepared, states, params, config, layer, training, rng)
    doc_states = states.doc
    if training and config.dropout > 0.0:
        doc_states = ad.dropout(doc_states, config.dropout, rng)
    return ad.matmul(doc_states, params["cls"])


def forward(
    prepared: PreparedGraph,
    params: dict[str, Tensor],
    config: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    if config.model == "wctext_gcn":
        return gcn_forward(prepared, params, config, training, rng)
    return gat_forward(prepared, params, config, training, rng)


def loss(logits: Tensor, labels: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean cross-entropy over the documents selected by ``mask``."""
    return ad.masked_cross_entropy(logits, labels, mask)


def accuracy(logit_values: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DataError("accuracy mask selects no rows")
    predictions = logit_values[mask].argmax(axis=1)
    return float((predictions == labels[mask]).mean())
