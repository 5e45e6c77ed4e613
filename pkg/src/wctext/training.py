"""Training loop with Adam, early stopping, seeded multi-run aggregation
and the character n-gram range sweep.

Each run owns its parameters, tape and random generator, so independent
runs can execute on worker threads; aggregation is an ordered reduction
over run indices. The validation split is fixed in the corpus before any
graph is built, so runs differ only in initialization and dropout.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import models
from .autodiff import Tape, Tensor, backward
from .corpus import Corpus
from .errors import DataError, NumericError
from .graph import HetGraph, build_graph
from .models import ModelConfig, PreparedGraph, prepare
from .stats import StatsConfig, compute_stats


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.002
    epochs: int = 200
    patience: int = 20
    seed: int = 42
    runs: int = 1
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0.0:
            raise DataError(f"learning rate must be positive, got {self.lr}")
        if self.epochs < 1 or self.patience < 1 or self.runs < 1:
            raise DataError("epochs, patience and runs must all be >= 1")
        if self.optimizer != "adam":
            raise DataError(f"unsupported optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float
    val_loss: float


@dataclass(frozen=True)
class TrainReport:
    epochs: tuple[EpochStats, ...]
    best_epoch: int
    val_accuracy: float
    test_accuracy: float
    wall_time_s: float
    seed: int
    model_config: ModelConfig
    train_config: TrainConfig

    def __post_init__(self):
        if self.best_epoch > len(self.epochs):
            raise DataError("best epoch past the last trained epoch")
        if not 0.0 <= self.test_accuracy <= 1.0:
            raise DataError("test accuracy outside [0, 1]")


@dataclass(frozen=True)
class RunSummary:
    mean: float
    std: float
    reports: tuple[TrainReport, ...]


class AdamState:
    """First/second moment estimates and the shared timestep."""

    def __init__(self, params: dict[str, Tensor]):
        self.m = {name: np.zeros(p.shape) for name, p in params.items()}
        self.v = {name: np.zeros(p.shape) for name, p in params.items()}
        self.t = 0


class EarlyStopper:
    """Best-validation-accuracy tracking; ties broken by lower loss."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_accuracy = -1.0
        self.best_loss = np.inf
        self.best_epoch = 0
        self._stale = 0

    def update(self, epoch: int, accuracy: float, loss: float) -> bool:
        improved = accuracy > self.best_accuracy or (
            accuracy == self.best_accuracy and loss < self.best_loss
        )
        if improved:
            self.best_accuracy = accuracy
            self.best_loss = loss
            self.best_epoch = epoch
            self._stale = 0
        else:
            self._stale += 1
        return improved

    @property
    def should_stop(self) -> bool:
        return self._stale >= self.patience


def adam_step(
    params: dict[str, Tensor],
    grads: dict[Tensor, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """Standard bias-corrected Adam update, applied in place."""
    state.t += 1
    correction1 = 1.0 - beta1**state.t
    correction2 = 1.0 - beta2**state.t
    for name, p in params.items():
        grad = grads.get(p)
        if grad is None:
            continue
        if not np.isfinite(grad).all():
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        p.value = p.value - lr * m_hat / (np.sqrt(v_hat) + eps)
    return state


def _split_masks(prepared: PreparedGraph) -> dict[str, np.ndarray]:
    masks = {split: prepared.split_mask(split) for split in ("train", "val", "test")}
    for split, mask in masks.items():
        if not mask.any():
            raise DataError(f"graph has no documents in the {split} split")
    return masks


def _evaluate(prepared, params, config) -> dict[str, tuple[float, float]]:
    logits = models.forward(prepared, params, config, training=False)
    out = {}
    for split in ("train", "val", "test"):
        mask = prepared.split_mask(split)
        loss = models.loss(logits, prepared.labels, mask)
        out[split] = (float(loss.value[0, 0]), models.accuracy(logits.value, prepared.labels, mask))
    return out


def _run_training(
    prepared: PreparedGraph,
    model_config: ModelConfig,
    train_config: TrainConfig,
    seed: int,
) -> tuple[TrainReport, dict[str, Tensor]]:
    started = time.perf_counter()
    masks = _split_masks(prepared)
    rng = np.random.default_rng(seed)
    params = models.init_params(prepared, rng)
    state = AdamState(params)
    stopper = EarlyStopper(train_config.patience)
    best = {name: p.value.copy() for name, p in params.items()}
    history: list[EpochStats] = []
    for epoch in range(1, train_config.epochs + 1):
        with Tape():
            logits = models.forward(prepared, params, model_config, training=True, rng=rng)
            train_loss = models.loss(logits, prepared.labels, masks["train"])
        grads = backward(train_loss)
        adam_step(
            params,
            grads,
            state,
            train_config.lr,
            train_config.beta1,
            train_config.beta2,
            train_config.eps,
        )
        eval_logits = models.forward(prepared, params, model_config, training=False)
        val_loss = float(models.loss(eval_logits, prepared.labels, masks["val"]).value[0, 0])
        val_acc = models.accuracy(eval_logits.value, prepared.labels, masks["val"])
        history.append(
            EpochStats(
                epoch=epoch,
                train_loss=float(train_loss.value[0, 0]),
                val_accuracy=val_acc,
                val_loss=val_loss,
            )
        )
        if stopper.update(epoch, val_acc, val_loss):
            best = {name: p.value.copy() for name, p in params.items()}
        elif stopper.should_stop:
            break
    for name, p in params.items():
        p.value = best[name]
    test_logits = models.forward(prepared, params, model_config, training=False)
    test_acc = models.accuracy(test_logits.value, prepared.labels, prepared.split_mask("test"))
    report = TrainReport(
        epochs=tuple(history),
        best_epoch=stopper.best_epoch,
        val_accuracy=stopper.best_accuracy,
        test_accuracy=test_acc,
        wall_time_s=time.perf_counter() - started,
        seed=seed,
        model_config=model_config,
        train_config=train_config,
    )
    return report, params


def train(graph: HetGraph, model_config: ModelConfig, train_config: TrainConfig) -> TrainReport:
    """One training run seeded by ``train_config.seed``.

    Trains for up to ``epochs``, stops after ``patience`` epochs without
    validation improvement (ties broken by validation loss), restores the
    best-epoch parameters and evaluates test accuracy once.
    """
    prepared = prepare(graph, model_config)
    report, _ = _run_training(prepared, model_config, train_config, train_config.seed)
    return report


def evaluate(
    graph: HetGraph, model_config: ModelConfig, train_config: TrainConfig
) -> tuple[TrainReport, dict[str, tuple[float, float]], dict[str, float]]:
    """One seeded run plus detailed metrics of the restored parameters.

    Returns the report, per-split (loss, accuracy) pairs, and per-class
    test accuracy.
    """
    prepared = prepare(graph, model_config)
    report, params = _run_training(prepared, model_config, train_config, train_config.seed)
    split_metrics = _evaluate(prepared, params, model_config)
    logits = models.forward(prepared, params, model_config, training=False)
    predictions = logits.value.argmax(axis=1)
    test_mask = prepared.split_mask("test")
    per_class: dict[str, float] = {}
    for class_id, name in enumerate(prepared.graph.label_set):
        rows = test_mask & (prepared.labels == class_id)
        if rows.any():
            per_class[name] = float((predictions[rows] == class_id).mean())
    return report, split_metrics, per_class


def run_many(
    graph: HetGraph,
    model_config: ModelConfig,
    train_config: TrainConfig,
    max_workers: int = 1,
) -> RunSummary:
    """``runs`` independent trainings with seeds base, base+1, ...

    Reports the mean and population standard deviation of test accuracy.
    """
    prepared = prepare(graph, model_config)
    seeds = [train_config.seed + i for i in range(train_config.runs)]
    if max_workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            reports = [
                report
                for report, _ in pool.map(
                    lambda s: _run_training(prepared, model_config, train_config, s), seeds
                )
            ]
    else:
        reports = [
            _run_training(prepared, model_config, train_config, s)[0] for s in seeds
        ]
    accuracies = np.array([r.test_accuracy for r in reports])
    return RunSummary(
        mean=float(accuracies.mean()),
        std=float(accuracies.std()),
        reports=tuple(reports),
    )


@dataclass(frozen=True)
class SweepResult:
    n_values: tuple[int, ...]
    cells: dict[tuple[int, int], RunSummary]


def sweep_char_ngrams(
    corpus: Corpus,
    model_config: ModelConfig,
    train_config: TrainConfig,
    stats_config: StatsConfig,
    n_values: tuple[int, ...] = (3, 4, 5, 6),
    max_workers: int = 1,
) -> SweepResult:
    """Rebuild the graph per character n-gram range and train each cell.

    Only the upper triangle (n_lo <= n_hi) is populated.
    """
    cells: dict[tuple[int, int], RunSummary] = {}
    for lo in n_values:
        for hi in n_values:
            if lo > hi:
                continue
            cell_stats = dataclasses.replace(stats_config, char_ngrams=(lo, hi))
            graph = build_graph(corpus, compute_stats(corpus, cell_stats))
            cells[(lo, hi)] = run_many(graph, model_config, train_config, max_workers)
    return SweepResult(n_values=tuple(n_values), cells=cells)
