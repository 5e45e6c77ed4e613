"""Word-character heterogeneous text graphs and the GNN classifiers over them."""

from .corpus import (
    Corpus,
    Document,
    PreprocessConfig,
    assign_validation,
    load_corpus,
    prune_vocabulary,
    tokenize,
)
from .graph import (
    HetGraph,
    NodeRef,
    apply_ablations,
    assemble_adjacency,
    build_graph,
    load_graph,
    normalize_adjacency,
    save_graph,
)
from .models import ModelConfig, gat_forward, gat_layer, gcn_forward, init_params, prepare
from .sparse import SparseMatrix
from .stats import NgramSpec, StatsConfig, StatTables, compute_stats
from .training import RunSummary, TrainConfig, TrainReport, run_many, sweep_char_ngrams, train

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "Document",
    "PreprocessConfig",
    "assign_validation",
    "load_corpus",
    "prune_vocabulary",
    "tokenize",
    "HetGraph",
    "NodeRef",
    "apply_ablations",
    "assemble_adjacency",
    "build_graph",
    "load_graph",
    "normalize_adjacency",
    "save_graph",
    "ModelConfig",
    "gat_forward",
    "gat_layer",
    "gcn_forward",
    "init_params",
    "prepare",
    "SparseMatrix",
    "NgramSpec",
    "StatsConfig",
    "StatTables",
    "compute_stats",
    "RunSummary",
    "TrainConfig",
    "TrainReport",
    "run_many",
    "sweep_char_ngrams",
    "train",
]
