"""Shared test fixtures and independent oracles.

The oracles recompute everything from first principles (python loops,
dense matrices, per-edge attention) so the vectorized library paths are
checked against genuinely separate implementations.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from wctext.corpus import Corpus, Document, assign_validation
from wctext.graph import NODE_TYPES, Edges, HetGraph
from wctext.models import NodeStates

POS_WORDS = ("alpha", "beta", "gamma", "delta")
NEG_WORDS = ("omega", "sigma", "tau", "rho")


def toy_corpus(n_docs: int = 20, seed: int = 0, val_seed: int = 1) -> Corpus:
    """Linearly separable two-class corpus with train/val/test splits."""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n_docs):
        label = "pos" if i % 2 == 0 else "neg"
        pool = POS_WORDS if label == "pos" else NEG_WORDS
        tokens = tuple(rng.choice(pool, size=6))
        split = "train" if i < int(0.7 * n_docs) else "test"
        docs.append(Document(f"d{i}", split, label, tokens))
    return assign_validation(Corpus.build(docs), 0.1, seed=val_seed)


def random_corpus(rng: np.random.Generator, max_docs: int = 50) -> Corpus:
    """Random small corpus over a ten-word alphabet."""
    words = [f"w{i}" for i in range(10)]
    n_docs = int(rng.integers(3, max_docs + 1))
    docs = []
    for i in range(n_docs):
        length = int(rng.integers(1, 9))
        tokens = tuple(rng.choice(words, size=length))
        split = "train" if i % 3 != 0 else "test"
        docs.append(Document(f"d{i}", split, f"c{i % 2}", tokens))
    return Corpus.build(docs)


def random_graph(rng: np.random.Generator, classes=("a", "b")) -> HetGraph:
    """Random structurally valid graph with at most 20 nodes."""
    n_d = int(rng.integers(2, 6))
    n_w = int(rng.integers(2, 7))
    n_g = int(rng.integers(0, 5))
    n_c = int(rng.integers(0, 5))

    def sym_items(n, prob, lo, hi):
        return [
            (i, j, float(rng.uniform(lo, hi)))
            for i in range(n)
            for j in range(i + 1, n)
            if rng.random() < prob
        ]

    def rect_items(n_src, n_dst, prob, lo, hi):
        return [
            (i, j, float(rng.uniform(lo, hi)))
            for i in range(n_src)
            for j in range(n_dst)
            if rng.random() < prob
        ]

    splits = ["train" if rng.random() < 0.6 else "test" for _ in range(n_d)]
    splits[0] = "train"
    splits[-1] = "test"
    return HetGraph(
        doc_ids=tuple(f"d{i}" for i in range(n_d)),
        words=tuple(f"w{i}" for i in range(n_w)),
        grams=tuple(f"g{i}" for i in range(n_g)),
        chargrams=tuple(f"c{i}" for i in range(n_c)),
        labels=tuple(classes[i % len(classes)] for i in range(n_d)),
        splits=tuple(splits),
        edges={
            "dd": Edges.from_items(sym_items(n_d, 0.4, 0.5, 1.0)),
            "dw": Edges.from_items(rect_items(n_d, n_w, 0.5, 0.1, 2.0)),
            "dg": Edges.from_items(rect_items(n_d, n_g, 0.5, 0.1, 2.0)),
            "ww": Edges.from_items(sym_items(n_w, 0.4, 0.05, 2.0)),
            "gw": Edges.from_items(rect_items(n_g, n_w, 0.5, 1.0, 1.0)),
            "cw": Edges.from_items(rect_items(n_c, n_w, 0.5, 1.0, 1.0)),
        },
    )


# ---------------------------------------------------------------------------
# statistics oracles (pure python)


def tfidf_oracle(corpus: Corpus) -> dict[tuple[int, int], float]:
    n = corpus.num_docs
    df: Counter[str] = Counter()
    for doc in corpus.documents:
        df.update(set(doc.tokens))
    table = {}
    for d, doc in enumerate(corpus.documents):
        for word, count in Counter(doc.tokens).items():
            value = count * math.log(n / df[word])
            if value > 0:
                table[(d, corpus.word_ids[word])] = value
    return table


def enumerate_windows(tokens, window):
    tokens = list(tokens)
    if len(tokens) <= window:
        return [tokens]
    return [tokens[i : i + window] for i in range(len(tokens) - window + 1)]


def pmi_oracle(corpus: Corpus, window: int) -> dict[tuple[int, int], float]:
    windows = []
    for doc in corpus.documents:
        windows.extend(enumerate_windows(doc.tokens, window))
    total = len(windows)
    single: Counter[str] = Counter()
    pair: Counter[tuple[str, str]] = Counter()
    for win in windows:
        uniq = sorted(set(win))
        single.update(uniq)
        for i in range(len(uniq)):
            for j in range(i + 1, len(uniq)):
                pair[(uniq[i], uniq[j])] += 1
    table = {}
    for (a, b), c_ab in pair.items():
        score = math.log(c_ab * total / (single[a] * single[b]))
        if score > 0:
            i, j = corpus.word_ids[a], corpus.word_ids[b]
            table[(min(i, j), max(i, j))] = score
    return table


def cosine_oracle(corpus: Corpus, threshold: float) -> dict[tuple[int, int], float]:
    tfidf = tfidf_oracle(corpus)
    vectors = []
    for d in range(corpus.num_docs):
        v = [0.0] * corpus.num_words
        for (doc, word), value in tfidf.items():
            if doc == d:
                v[word] = value
        vectors.append(v)
    table = {}
    for i in range(corpus.num_docs):
        for j in range(i + 1, corpus.num_docs):
            ni = math.sqrt(sum(x * x for x in vectors[i]))
            nj = math.sqrt(sum(x * x for x in vectors[j]))
            if ni == 0 or nj == 0:
                continue
            sim = sum(a * b for a, b in zip(vectors[i], vectors[j])) / (ni * nj)
            sim = min(sim, 1.0)
            if sim >= threshold:
                table[(i, j)] = sim
    return table


# ---------------------------------------------------------------------------
# model oracles (dense / per-edge)


def gcn_oracle(prepared, params) -> np.ndarray:
    a_dense = prepared.a_hat.value.to_dense()
    h = a_dense @ params["w0"].value
    for i in range(1, prepared.config.num_layers):
        h = a_dense @ (np.maximum(h, 0.0) @ params[f"w{i}"].value)
    return h[: prepared.graph.type_sizes["doc"]]


def _elu(x):
    return np.where(x > 0, x, np.expm1(x))


def gat_layer_oracle(prepared, state_values, params, config, layer: int):
    """Per-edge, per-head attention loops. state_values None = one-hot."""
    sizes = prepared.graph.type_sizes
    heads, hd, ed = config.heads, config.head_dim, config.edge_dim
    slope = config.leaky_slope

    def features(node_type, weight):
        if state_values is None:
            return weight.copy()
        return state_values[node_type] @ weight

    new_values = {}
    for target in NODE_TYPES:
        if target not in prepared.phases:
            new_values[target] = np.zeros((sizes[target], config.hidden_dim))
            continue
        phase_blocks = []
        for phase in prepared.phases[target]:
            base = f"l{layer}.{phase.name}"
            w_v = params[f"{base}.w_v"].value
            w_src = params[f"{base}.w_src"].value
            w_e = params[f"{base}.w_e"].value
            a_v = params[f"{base}.a_v"].value.ravel()
            a_src = params[f"{base}.a_src"].value.ravel()
            a_e = params[f"{base}.a_e"].value.ravel()
            feat_tgt = features(target, w_v)
            feat_src = features(phase.source_type, w_src)
            out = np.zeros((sizes[target], heads * hd))
            for node in range(sizes[target]):
                picks = [k for k in range(len(phase.tgt)) if phase.tgt[k] == node]
                if not picks:
                    continue
                for h in range(heads):
                    cols = slice(h * hd, (h + 1) * hd)
                    ecols = slice(h * ed, (h + 1) * ed)
                    score_self = float(feat_tgt[node, cols] @ a_v[cols])
                    zs = []
                    for k in picks:
                        j = int(phase.src[k])
                        e_vec = float(phase.weight[k, 0]) * w_e[0, ecols]
                        z = score_self + float(feat_src[j, cols] @ a_src[cols])
                        z += float(e_vec @ a_e[ecols])
                        zs.append(z if z > 0 else slope * z)
                    zs = np.array(zs)
                    expz = np.exp(zs - zs.max())
                    alpha = expz / expz.sum()
                    acc = np.zeros(hd)
                    for weight_k, k in zip(alpha, picks):
                        acc += weight_k * feat_src[int(phase.src[k]), cols]
                    out[node, cols] = acc
            phase_blocks.append(_elu(out))
        stacked = np.hstack(phase_blocks)
        new_values[target] = stacked @ params[f"l{layer}.{target}.w_out"].value
    return new_values


def gat_forward_oracle(prepared, params, config) -> np.ndarray:
    values = None
    for layer in range(config.num_layers):
        values = gat_layer_oracle(prepared, values, params, config, layer)
    return values["doc"] @ params["cls"].value


def states_from_values(values: dict[str, np.ndarray]) -> NodeStates:
    from wctext.autodiff import Tensor

    return NodeStates(**{t: Tensor(values[t]) for t in NODE_TYPES})


# ---------------------------------------------------------------------------
# finite differences


def fd_gradient(value_fn, tensor, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function w.r.t. one tensor."""
    grad = np.zeros(tensor.value.shape)
    flat_value = tensor.value
    it = np.nditer(flat_value, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        original = flat_value[idx]
        flat_value[idx] = original + eps
        plus = value_fn()
        flat_value[idx] = original - eps
        minus = value_fn()
        flat_value[idx] = original
        grad[idx] = (plus - minus) / (2 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(1.0, np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
