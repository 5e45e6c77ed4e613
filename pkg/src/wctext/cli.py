"""Command-line interface.

    wctext build-graph --corpus docs.tsv --out docs.wctg
    wctext train --graph docs.wctg --model wctext_gcn --runs 10
    wctext eval --graph docs.wctg --model wctext_gat --train-seed 7
    wctext sweep --corpus docs.tsv --runs 2 --out-dir reports/
    wctext inspect --graph docs.wctg --node word:42

Every option can also come from a ``--config`` file of ``key = value``
lines; explicit flags win over the file, the file wins over defaults.
The fully resolved configuration is logged to stderr before running.
Exit codes: 0 ok, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .corpus import PreprocessConfig, assign_validation, load_corpus, load_stopwords, prune_vocabulary
from .errors import DataError, NumericError, WctextError
from .graph import EDGE_FAMILIES, NODE_TYPES, NodeRef, build_graph, load_graph, neighbors, save_graph
from .models import MODEL_KINDS, ModelConfig
from .report import (
    format_summary_line,
    format_sweep_grid,
    write_sweep_outputs,
    write_train_outputs,
)
from .stats import StatsConfig, compute_stats
from .training import TrainConfig, evaluate, run_many, sweep_char_ngrams


class UsageError(WctextError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _ngram_range(text: str):
    if text.strip().lower() in ("off", "none", ""):
        return None
    parts = text.split(":")
    if len(parts) == 1:
        lo = hi = int(parts[0])
    elif len(parts) == 2:
        lo, hi = int(parts[0]), int(parts[1])
    else:
        raise ValueError(f"expected MIN:MAX, got {text!r}")
    return (lo, hi)


def _int_list(text: str):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _bool(text: str):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


class Opt:
    def __init__(self, name, flag, parse, default, help, required=False, choices=None):
        self.name = name
        self.flag = flag
        self.parse = parse
        self.default = default
        self.help = help
        self.required = required
        self.choices = choices

    def add_to(self, parser: argparse.ArgumentParser):
        if self.parse is _bool:
            parser.add_argument(
                self.flag,
                dest=self.name,
                action=argparse.BooleanOptionalAction,
                default=None,
                help=self.help,
            )
        else:
            parser.add_argument(
                self.flag,
                dest=self.name,
                type=self.parse,
                default=None,
                choices=self.choices,
                help=self.help,
            )


_PREPROCESS_OPTS = [
    Opt("corpus", "--corpus", str, None, "corpus TSV file", required=True),
    Opt("min_df", "--min-df", int, 5, "drop words in fewer documents than this"),
    Opt("stopwords", "--stopwords", str, None, "optional stopword list file"),
    Opt("val_fraction", "--val-fraction", float, 0.1, "training fraction moved to validation"),
    Opt("split_seed", "--seed", int, 42, "seed for the validation split"),
]

_STATS_OPTS = [
    Opt("window", "--window", int, 20, "PMI sliding window size"),
    Opt("word_ngrams", "--word-ngrams", _ngram_range, (2, 2), "word n-gram range MIN:MAX, or 'off'"),
    Opt("char_ngrams", "--char-ngrams", _ngram_range, (3, 4), "char n-gram range MIN:MAX, or 'off'"),
    Opt("ngram_min_freq", "--ngram-min-freq", int, 5, "minimum n-gram frequency"),
    Opt("sim_threshold", "--sim-threshold", float, 0.5, "document similarity threshold"),
]

_MODEL_OPTS = [
    Opt("model", "--model", str, "wctext_gcn", "model variant", choices=MODEL_KINDS),
    Opt("hidden_dim", "--hidden-dim", int, 200, "hidden dimension"),
    Opt("num_layers", "--num-layers", int, 2, "number of propagation layers"),
    Opt("heads", "--heads", int, 8, "attention heads (GAT)"),
    Opt("head_dim", "--head-dim", int, 16, "units per attention head (GAT)"),
    Opt("edge_dim", "--edge-dim", int, 32, "edge feature dimension (GAT)"),
    Opt("dropout", "--dropout", float, 0.5, "dropout rate"),
    Opt("leaky_slope", "--leaky-slope", float, 0.2, "LeakyReLU slope (GAT)"),
    Opt("use_grams", "--grams", _bool, True, "use word n-gram nodes"),
    Opt("use_chargrams", "--chargrams", _bool, True, "use character n-gram nodes"),
    Opt("use_doc_sim", "--doc-sim", _bool, True, "use document similarity edges"),
    Opt("attention_dropout", "--attention-dropout", _bool, True, "dropout on attention weights"),
]

_TRAIN_OPTS = [
    Opt("lr", "--lr", float, 0.002, "learning rate"),
    Opt("epochs", "--epochs", int, 200, "maximum training epochs"),
    Opt("patience", "--patience", int, 20, "early stopping patience"),
    Opt("seed", "--train-seed", int, 42, "base seed (run i uses seed + i)"),
    Opt("runs", "--runs", int, 1, "independent runs to aggregate"),
    Opt("beta1", "--beta1", float, 0.9, "Adam beta1"),
    Opt("beta2", "--beta2", float, 0.999, "Adam beta2"),
    Opt("eps", "--eps", float, 1e-8, "Adam epsilon"),
    Opt("threads", "--threads", int, 1, "worker threads for independent runs"),
    Opt("deterministic", "--deterministic", _bool, False, "force single-threaded execution"),
    Opt("out_dir", "--out-dir", str, None, "write report files and figures here"),
]

_GRAPH_OPT = Opt("graph", "--graph", str, None, "graph file", required=True)

_SPECS: dict[str, list[Opt]] = {
    "build-graph": _PREPROCESS_OPTS
    + _STATS_OPTS
    + [Opt("out", "--out", str, None, "output graph file", required=True)],
    "train": [_GRAPH_OPT] + _MODEL_OPTS + _TRAIN_OPTS,
    "eval": [_GRAPH_OPT] + _MODEL_OPTS + _TRAIN_OPTS,
    "sweep": _PREPROCESS_OPTS
    + _STATS_OPTS
    + _MODEL_OPTS
    + _TRAIN_OPTS
    + [Opt("n_values", "--n-values", _int_list, (3, 4, 5, 6), "char n-gram sizes to sweep")],
    "inspect": [
        _GRAPH_OPT,
        Opt("node", "--node", str, None, "node as type:index or type:key", required=True),
    ],
}


def _read_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(args, command: str) -> dict:
    opts = _SPECS[command]
    conf = _read_config(args.config) if getattr(args, "config", None) else {}
    known = {o.name for o in opts}
    unknown = set(conf) - known
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    resolved = {}
    for o in opts:
        value = getattr(args, o.name)
        if value is None and o.name in conf:
            try:
                value = o.parse(conf[o.name])
            except ValueError as exc:
                raise DataError(f"config key {o.name}: {exc}") from exc
        if value is None:
            value = o.default
        if value is None and o.required:
            raise UsageError(f"missing required option {o.flag}")
        resolved[o.name] = value
    return resolved


def _log_config(command: str, resolved: dict) -> None:
    print(f"# resolved configuration ({command})", file=sys.stderr)
    for key, value in resolved.items():
        if isinstance(value, tuple):
            joiner = ":" if len(value) == 2 and key.endswith("ngrams") else ","
            value = joiner.join(str(v) for v in value)
        elif isinstance(value, bool):
            value = str(value).lower()
        elif value is None:
            value = ""
        print(f"{key} = {value}", file=sys.stderr)


def _load_prepared_corpus(r: dict):
    stopwords = load_stopwords(r["stopwords"]) if r["stopwords"] else frozenset()
    preprocess = PreprocessConfig(
        min_df=r["min_df"],
        stopwords=stopwords,
        val_fraction=r["val_fraction"],
        seed=r["split_seed"],
    )
    corpus = load_corpus(r["corpus"], config=preprocess)
    corpus, dropped = prune_vocabulary(corpus, preprocess.min_df)
    if dropped:
        print(f"warning: {len(dropped)} documents dropped by vocabulary pruning", file=sys.stderr)
    return assign_validation(corpus, preprocess.val_fraction, preprocess.seed)


def _stats_config(r: dict) -> StatsConfig:
    return StatsConfig(
        window=r["window"],
        word_ngrams=r["word_ngrams"],
        char_ngrams=r["char_ngrams"],
        ngram_min_freq=r["ngram_min_freq"],
        sim_threshold=r["sim_threshold"],
    )


def _model_config(r: dict) -> ModelConfig:
    return ModelConfig(
        model=r["model"],
        hidden_dim=r["hidden_dim"],
        num_layers=r["num_layers"],
        heads=r["heads"],
        head_dim=r["head_dim"],
        edge_dim=r["edge_dim"],
        dropout=r["dropout"],
        leaky_slope=r["leaky_slope"],
        use_grams=r["use_grams"],
        use_chargrams=r["use_chargrams"],
        use_doc_sim=r["use_doc_sim"],
        attention_dropout=r["attention_dropout"],
    )


def _train_config(r: dict) -> TrainConfig:
    return TrainConfig(
        lr=r["lr"],
        epochs=r["epochs"],
        patience=r["patience"],
        seed=r["seed"],
        runs=r["runs"],
        beta1=r["beta1"],
        beta2=r["beta2"],
        eps=r["eps"],
    )


def _workers(r: dict) -> int:
    return 1 if r["deterministic"] else max(1, r["threads"])


def _cmd_build_graph(r: dict) -> int:
    corpus = _load_prepared_corpus(r)
    graph = build_graph(corpus, compute_stats(corpus, _stats_config(r)))
    save_graph(graph, r["out"])
    sizes = graph.type_sizes
    print("nodes: " + " ".join(f"{t}={sizes[t]}" for t in NODE_TYPES) + f" total={graph.num_nodes}")
    edge_counts = {f: len(graph.edges[f]) for f in EDGE_FAMILIES}
    print(
        "edges: "
        + " ".join(f"{f}={n}" for f, n in edge_counts.items())
        + f" total={sum(edge_counts.values())}"
    )
    print(f"wrote {r['out']}", file=sys.stderr)
    return 0


def _cmd_train(r: dict) -> int:
    graph = load_graph(r["graph"])
    summary = run_many(graph, _model_config(r), _train_config(r), max_workers=_workers(r))
    print(format_summary_line(r["model"], summary))
    if r["out_dir"]:
        for p in write_train_outputs(Path(r["out_dir"]), r["model"], summary):
            print(f"wrote {p}", file=sys.stderr)
    return 0


def _cmd_eval(r: dict) -> int:
    graph = load_graph(r["graph"])
    report, split_metrics, per_class = evaluate(graph, _model_config(r), _train_config(r))
    for split in ("train", "val", "test"):
        loss, acc = split_metrics[split]
        print(f"{split}: loss {loss:.4f} accuracy {100 * acc:.2f}")
    for name, acc in per_class.items():
        print(f"class {name}: {100 * acc:.2f}")
    print(
        f"best epoch {report.best_epoch} of {len(report.epochs)} trained;"
        f" wall time {report.wall_time_s:.1f}s"
    )
    return 0


def _cmd_sweep(r: dict) -> int:
    corpus = _load_prepared_corpus(r)
    result = sweep_char_ngrams(
        corpus,
        _model_config(r),
        _train_config(r),
        _stats_config(r),
        n_values=r["n_values"],
        max_workers=_workers(r),
    )
    corner = Path(r["corpus"]).stem
    print(format_sweep_grid(result, corner), end="")
    if r["out_dir"]:
        for p in write_sweep_outputs(Path(r["out_dir"]), result, corner):
            print(f"wrote {p}", file=sys.stderr)
    return 0


def _parse_node(graph, text: str) -> NodeRef:
    if ":" not in text:
        raise UsageError(f"node must be written type:index or type:key, got {text!r}")
    node_type, _, rest = text.partition(":")
    if node_type not in NODE_TYPES:
        raise DataError(f"unknown node type {node_type!r}")
    registry = {
        "doc": graph.doc_ids,
        "word": graph.words,
        "gram": graph.grams,
        "chargram": graph.chargrams,
    }[node_type]
    try:
        index = int(rest)
    except ValueError:
        try:
            index = registry.index(rest)
        except ValueError:
            raise DataError(f"no {node_type} node with key {rest!r}") from None
    if not 0 <= index < len(registry):
        raise DataError(f"{node_type} index {index} out of range (size {len(registry)})")
    return NodeRef(node_type, index)


def _cmd_inspect(r: dict) -> int:
    graph = load_graph(r["graph"])
    ref = _parse_node(graph, r["node"])
    print(f"{ref} key={graph.node_key(ref)!r}")
    report = neighbors(graph, ref)
    if not report:
        print("no neighbors")
        return 0
    for family, items in report.items():
        print(f"{family.upper()} ({len(items)} edges):")
        for other, weight in items:
            print(f"  {other} {graph.node_key(other)!r} {weight!r}")
    return 0


_COMMANDS = {
    "build-graph": _cmd_build_graph,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "inspect": _cmd_inspect,
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="wctext", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, opts in _SPECS.items():
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", default=None, help="key = value configuration file")
        for o in opts:
            o.add_to(cmd)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return 1
        resolved = _resolve(args, args.command)
        _log_config(args.command, resolved)
        return _COMMANDS[args.command](resolved)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SystemExit as exc:  # argparse --help exits
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
