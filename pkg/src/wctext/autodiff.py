"""Minimal reverse-mode automatic differentiation over 2-D float64 arrays.

Primitives execute eagerly on numpy and, when a :class:`Tape` is active,
append a node with the vector-Jacobian products of their differentiable
operands. :func:`backward` replays the tape in reverse, summing gradients
at fan-out. Sparse operands (the graph adjacency) are constants and never
receive gradients.

Usage:

    with Tape() as tape:
        h = relu(spmm(a_hat, w0))
        l = sum_all(h)
    grads = backward(l)          # {tensor: ndarray}
"""

from __future__ import annotations

import threading

import numpy as np

from .errors import DataError, NumericError, ShapeError
from .sparse import SparseMatrix

_TLS = threading.local()


class Tape:
    """Ordered record of executed primitives; one backward pass per tape."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._used = False

    def __enter__(self) -> "Tape":
        stack = getattr(_TLS, "stack", None)
        if stack is None:
            stack = _TLS.stack = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _TLS.stack.pop()
        return False

    def __len__(self) -> int:
        return len(self._nodes)


def _active_tape() -> Tape | None:
    stack = getattr(_TLS, "stack", None)
    return stack[-1] if stack else None


class _Node:
    __slots__ = ("inputs", "vjps", "output", "tape")

    def __init__(self, tape, inputs, vjps, output):
        self.tape = tape
        self.inputs = inputs
        self.vjps = vjps
        self.output = output


class Tensor:
    """A dense 2-D float64 array or a sparse constant."""

    __slots__ = ("value", "requires_grad", "node")

    def __init__(self, value, requires_grad: bool = False):
        if isinstance(value, SparseMatrix):
            if requires_grad:
                raise NumericError("sparse tensors cannot require gradients")
        else:
            value = np.atleast_2d(np.asarray(value, dtype=np.float64))
            if value.ndim != 2:
                raise ShapeError(f"tensors are 2-D, got shape {value.shape}")
        self.value = value
        self.requires_grad = requires_grad
        self.node: _Node | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.value.shape)

    @property
    def is_sparse(self) -> bool:
        return isinstance(self.value, SparseMatrix)

    def __repr__(self) -> str:
        kind = "sparse" if self.is_sparse else "dense"
        return f"<Tensor {kind} {self.shape} requires_grad={self.requires_grad}>"


def tensor(value, requires_grad: bool = False) -> Tensor:
    return Tensor(value, requires_grad=requires_grad)


def _finish(value: np.ndarray, pairs) -> Tensor:
    if not np.isfinite(value).all():
        raise NumericError("non-finite value produced in forward pass")
    out = Tensor(value)
    tape = _active_tape()
    if tape is None:
        return out
    live = tuple(
        (t, vjp)
        for t, vjp in pairs
        if vjp is not None and (t.requires_grad or (t.node is not None and t.node.tape is tape))
    )
    if not live:
        return out
    node = _Node(tape, tuple(t for t, _ in live), tuple(v for _, v in live), out)
    out.node = node
    tape._nodes.append(node)
    return out


def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Gradients of a scalar loss for every requires_grad leaf on its tape."""
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.node is None:
        raise NumericError("loss was not recorded on an active tape")
    tape = loss.node.tape
    if tape._used:
        raise NumericError("backward was already called on this tape")
    tape._used = True
    flowing: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    grads: dict[Tensor, np.ndarray] = {}
    for node in reversed(tape._nodes):
        g = flowing.pop(id(node.output), None)
        if g is None:
            continue
        for inp, vjp in zip(node.inputs, node.vjps):
            contrib = vjp(g)
            if inp.requires_grad:
                if inp in grads:
                    grads[inp] = grads[inp] + contrib
                else:
                    grads[inp] = contrib
            if inp.node is not None and inp.node.tape is tape:
                key = id(inp)
                if key in flowing:
                    flowing[key] = flowing[key] + contrib
                else:
                    flowing[key] = contrib
    tape._nodes.clear()
    return grads


def _require_dense(*tensors):
    for t in tensors:
        if t.is_sparse:
            raise ShapeError("operation requires dense tensors")


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _require_dense(a, b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} do not align")
    av, bv = a.value, b.value
    return _finish(av @ bv, [(a, lambda g: g @ bv.T), (b, lambda g: av.T @ g)])


def spmm(sparse: Tensor, dense: Tensor) -> Tensor:
    """Sparse-constant @ dense; gradients flow only to the dense operand."""
    if not sparse.is_sparse:
        raise ShapeError("spmm left operand must be sparse")
    _require_dense(dense)
    sm: SparseMatrix = sparse.value
    if sm.shape[1] != dense.shape[0]:
        raise ShapeError(f"spmm shapes {sm.shape} and {dense.shape} do not align")
    return _finish(sm.matmul_dense(dense.value), [(dense, lambda g: sm.t_matmul_dense(g))])


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_dense(a, b)
    if a.shape != b.shape:
        raise ShapeError(f"add shapes {a.shape} and {b.shape} differ")
    return _finish(a.value + b.value, [(a, lambda g: g), (b, lambda g: g)])


def scale(a: Tensor, factor: float) -> Tensor:
    _require_dense(a)
    factor = float(factor)
    return _finish(a.value * factor, [(a, lambda g: g * factor)])


def mul_rowvec(x: Tensor, v: Tensor) -> Tensor:
    """Elementwise product with a (1, D) row vector broadcast over rows."""
    _require_dense(x, v)
    if v.shape != (1, x.shape[1]):
        raise ShapeError(f"row vector shape {v.shape} does not match columns of {x.shape}")
    xv, vv = x.value, v.value
    return _finish(
        xv * vv,
        [(x, lambda g: g * vv), (v, lambda g: (g * xv).sum(axis=0, keepdims=True))],
    )


def mul_const(x: Tensor, const: np.ndarray) -> Tensor:
    """Elementwise product with a constant array (may broadcast)."""
    _require_dense(x)
    const = np.asarray(const, dtype=np.float64)
    if np.broadcast_shapes(x.shape, const.shape) != x.shape:
        raise ShapeError(f"constant shape {const.shape} does not broadcast to {x.shape}")
    return _finish(x.value * const, [(x, lambda g: g * const)])


def sum_col_blocks(x: Tensor, num_blocks: int) -> Tensor:
    """Sum each of ``num_blocks`` equal contiguous column blocks to one column."""
    _require_dense(x)
    rows, cols = x.shape
    if num_blocks < 1 or cols % num_blocks:
        raise ShapeError(f"{cols} columns do not split into {num_blocks} blocks")
    width = cols // num_blocks
    value = x.value.reshape(rows, num_blocks, width).sum(axis=2)
    return _finish(value, [(x, lambda g: np.repeat(g, width, axis=1))])


def concat_cols(tensors) -> Tensor:
    tensors = list(tensors)
    _require_dense(*tensors)
    rows = tensors[0].shape[0]
    for t in tensors:
        if t.shape[0] != rows:
            raise ShapeError(f"concat_cols row counts differ: {[t.shape for t in tensors]}")
    value = np.hstack([t.value for t in tensors])
    pairs = []
    offset = 0
    for t in tensors:
        width = t.shape[1]
        start = offset

        def vjp(g, start=start, width=width):
            return g[:, start : start + width]

        pairs.append((t, vjp))
        offset += width
    return _finish(value, pairs)


def slice_rows(x: Tensor, index: np.ndarray) -> Tensor:
    _require_dense(x)
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.shape[0]):
        raise ShapeError(f"row index out of range for shape {x.shape}")
    n_rows = x.shape[0]

    def vjp(g):
        out = np.zeros((n_rows, g.shape[1]))
        np.add.at(out, index, g)
        return out

    return _finish(x.value[index], [(x, vjp)])


def relu(x: Tensor) -> Tensor:
    _require_dense(x)
    mask = x.value > 0.0
    return _finish(np.where(mask, x.value, 0.0), [(x, lambda g: g * mask)])


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    _require_dense(x)
    grad = np.where(x.value > 0.0, 1.0, slope)
    return _finish(np.where(x.value > 0.0, x.value, slope * x.value), [(x, lambda g: g * grad)])


def elu(x: Tensor) -> Tensor:
    _require_dense(x)
    positive = x.value > 0.0
    value = np.where(positive, x.value, np.expm1(x.value))
    grad = np.where(positive, 1.0, value + 1.0)
    return _finish(value, [(x, lambda g: g * grad)])


def exp(x: Tensor) -> Tensor:
    _require_dense(x)
    value = np.exp(x.value)
    return _finish(value, [(x, lambda g: g * value)])


def log(x: Tensor) -> Tensor:
    _require_dense(x)
    xv = x.value
    return _finish(np.log(xv), [(x, lambda g: g / xv)])


def sum_all(x: Tensor) -> Tensor:
    _require_dense(x)
    shape = x.shape
    return _finish(
        np.array([[x.value.sum()]]), [(x, lambda g: np.full(shape, g[0, 0]))]
    )


def row_softmax(x: Tensor) -> Tensor:
    _require_dense(x)
    shifted = x.value - x.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)
    return _finish(s, [(x, lambda g: s * (g - (g * s).sum(axis=1, keepdims=True)))])


def _segment_runs(segment_ids: np.ndarray):
    if segment_ids.size and (np.diff(segment_ids) < 0).any():
        raise ShapeError("segment ids must be sorted ascending")
    starts = np.flatnonzero(np.diff(segment_ids, prepend=segment_ids[:1] - 1))
    run_of_row = np.cumsum(np.diff(segment_ids, prepend=segment_ids[:1] - 1) != 0) - 1
    return starts, run_of_row


def segment_softmax(x: Tensor, segment_ids: np.ndarray) -> Tensor:
    """Column-wise softmax within contiguous runs of equal segment ids."""
    _require_dense(x)
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if segment_ids.shape != (x.shape[0],):
        raise ShapeError(
            f"segment ids shape {segment_ids.shape} does not match rows of {x.shape}"
        )
    if x.shape[0] == 0:
        return _finish(x.value.copy(), [(x, lambda g: g)])
    starts, run_of_row = _segment_runs(segment_ids)
    peak = np.maximum.reduceat(x.value, starts, axis=0)
    e = np.exp(x.value - peak[run_of_row])
    denom = np.add.reduceat(e, starts, axis=0)
    s = e / denom[run_of_row]

    def vjp(g):
        weighted = np.add.reduceat(g * s, starts, axis=0)
        return s * (g - weighted[run_of_row])

    return _finish(s, [(x, vjp)])


def segment_weighted_sum(
    values: Tensor, weights: Tensor, segment_ids: np.ndarray, num_segments: int
) -> Tensor:
    """Per-segment sums of values scaled by per-block weights.

    ``values`` is (E, K*H), ``weights`` is (E, K); weight column k scales
    the k-th block of H value columns. Rows with the same segment id are
    summed into that segment's output row; absent segments are zero.
    """
    _require_dense(values, weights)
    n_rows, n_cols = values.shape
    if weights.shape[0] != n_rows:
        raise ShapeError(f"weights rows {weights.shape} differ from values rows {values.shape}")
    k = weights.shape[1]
    if k < 1 or n_cols % k:
        raise ShapeError(f"{n_cols} value columns do not split into {k} weighted blocks")
    width = n_cols // k
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if segment_ids.shape != (n_rows,):
        raise ShapeError("segment ids must have one entry per row")
    if segment_ids.size and (segment_ids.min() < 0 or segment_ids.max() >= num_segments):
        raise ShapeError("segment id out of range")
    if n_rows == 0:
        return _finish(
            np.zeros((num_segments, n_cols)),
            [(values, lambda g: np.zeros((0, n_cols))), (weights, lambda g: np.zeros((0, k)))],
        )
    starts, run_of_row = _segment_runs(segment_ids)
    run_segments = segment_ids[starts]
    wexp = np.repeat(weights.value, width, axis=1)
    contrib = values.value * wexp
    out = np.zeros((num_segments, n_cols))
    out[run_segments] = np.add.reduceat(contrib, starts, axis=0)
    vv = values.value

    def vjp_values(g):
        return wexp * g[segment_ids]

    def vjp_weights(g):
        per_edge = vv * g[segment_ids]
        return per_edge.reshape(n_rows, k, width).sum(axis=2)

    return _finish(out, [(values, vjp_values), (weights, vjp_weights)])


def dropout(x: Tensor, p: float, rng, rowwise: bool = False) -> Tensor:
    """Inverted dropout; identity when p == 0. ``rng`` is a seed or Generator.

    With ``rowwise`` one mask entry is drawn per row and applied to the
    whole row, matching dropout on one-hot identity features.
    """
    if not 0.0 <= p < 1.0:
        raise NumericError(f"dropout rate must be in [0, 1), got {p}")
    if p == 0.0:
        return x
    _require_dense(x)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    shape = (x.shape[0], 1) if rowwise else x.shape
    mask = (rng.random(shape) >= p) / (1.0 - p)
    return _finish(x.value * mask, [(x, lambda g: g * mask)])


def masked_cross_entropy(logits: Tensor, labels: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean cross-entropy over the rows selected by ``mask``."""
    _require_dense(logits)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    if labels.shape != (logits.shape[0],) or mask.shape != (logits.shape[0],):
        raise ShapeError("labels and mask must have one entry per logit row")
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise DataError("cross-entropy mask selects no rows")
    sub = logits.value[rows]
    shifted = sub - sub.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True)) + sub.max(axis=1, keepdims=True)
    picked = sub[np.arange(rows.size), labels[rows]]
    value = np.array([[float((lse.ravel() - picked).mean())]])
    n_rows, n_cols = logits.shape

    def vjp(g):
        p = np.exp(shifted)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(rows.size), labels[rows]] -= 1.0
        out = np.zeros((n_rows, n_cols))
        out[rows] = p * (g[0, 0] / rows.size)
        return out

    return _finish(value, [(logits, vjp)])
