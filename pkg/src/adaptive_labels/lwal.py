"""Training with adaptive labels, plus the one-hot softmax baseline.

Each class is represented by a vector in the encoder's latent space. On a
refresh step the vector of every class present in the batch is reset to
the mean encoding of that class's samples; in between, the encoder is
trained with cross-entropy over a softmax of negative distances to those
vectors. The label vectors are never moved by gradients.
"""
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .encoder import forward, l2_penalty
from .errors import ConfigError, DataError, DimensionError
from .tensor import (
    Tensor,
    backward,
    cross_class_cosine,
    log,
    mean,
    pick,
    row_l2_distance,
    row_softmax,
    scale,
)


@dataclass
class LabelTable:
    vectors: np.ndarray
    initialized: np.ndarray

    @classmethod
    def empty(cls, n_classes, latent_dim):
        return cls(np.zeros((n_classes, latent_dim)), np.zeros(n_classes, dtype=bool))

    @property
    def num_classes(self):
        return self.vectors.shape[0]

    @property
    def latent_dim(self):
        return self.vectors.shape[1]

    def copy(self):
        return LabelTable(self.vectors.copy(), self.initialized.copy())

    def require_initialized(self):
        if not self.initialized.all():
            missing = np.flatnonzero(~self.initialized).tolist()
            raise ConfigError(f"label table has uninitialized classes {missing}")

    def assign(self, centroids):
        for c, vec in centroids:
            self.vectors[c] = vec
            self.initialized[c] = True


@dataclass
class TrainConfig:
    update_frequency: int = 1
    warmup_steps: int = 0
    repel_weight: float = 0.0
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 12

    def __post_init__(self):
        if self.update_frequency < 1:
            raise ConfigError("update frequency k must be >= 1")
        if self.warmup_steps < 0:
            raise ConfigError("warmup steps w must be >= 0")
        if self.repel_weight < 0:
            raise ConfigError("repel weight must be >= 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")

    def is_refresh_step(self, step):
        """Whether the 1-based global ``step`` recomputes the label vectors."""
        return step > self.warmup_steps and (step - self.warmup_steps - 1) % self.update_frequency == 0


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainerState:
    params: object
    table: LabelTable
    optimizer: Adam
    step: int = 0
    epoch: int = 0

    @classmethod
    def create(cls, params, table, cfg):
        opt = Adam(params.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
        return cls(params, table, opt)


@dataclass
class StepLog:
    step: int
    epoch: int
    loss: float
    cls_loss: float
    repel_loss: float
    l2: float
    refreshed: bool
    wall_ms: float
    repel_skipped: int = 0


def _check_labels(labels, n_classes):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"labels must lie in [0, {n_classes})")
    return labels


def compute_centroids(Z, labels, n_classes):
    """Mean encoding of every class present in the batch, as ``[(class, vector)]``."""
    Z = Z.data if isinstance(Z, Tensor) else np.asarray(Z, dtype=np.float64)
    labels = _check_labels(labels, n_classes)
    if labels.shape != (Z.shape[0],) or Z.shape[0] < 1:
        raise DimensionError("need one label per encoding and at least one row")
    sums, counts = kernels.class_sums(Z, labels, n_classes)
    return [(c, sums[c] / counts[c]) for c in range(n_classes) if counts[c] > 0]


def init_label_table(n_classes, latent_dim, seed, min_separation=1e-3, max_draws=100):
    """Random unit vectors, redrawn until every pair is at least ``min_separation`` apart."""
    if latent_dim < 1:
        raise ConfigError("latent_dim must be >= 1")
    rng = np.random.default_rng(seed)
    for _ in range(max_draws):
        V = rng.standard_normal((n_classes, latent_dim))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        if n_classes < 2:
            break
        D = kernels.pairwise_distance(V, V, 0.0)
        np.fill_diagonal(D, np.inf)
        if D.min() > min_separation:
            break
    else:
        raise ConfigError(f"cannot place {n_classes} distinct unit vectors in {latent_dim} dims")
    return LabelTable(V, np.ones(n_classes, dtype=bool))


def lwal_probabilities(Z, table):
    table.require_initialized()
    return row_softmax(scale(row_l2_distance(Z, Tensor(table.vectors)), -1.0))


def lwal_loss(P, labels):
    """Batch-mean cross-entropy of ``P`` against integer labels."""
    return scale(mean(log(pick(P, labels))), -1.0)


def repel_loss(Z, labels):
    return cross_class_cosine(Z, labels)


def _finish_step(state, loss, start):
    state.params.zero_grad()
    backward(loss)
    state.optimizer.step()
    return (time.perf_counter() - start) * 1e3


def train_step(state, X, labels, cfg):
    """One batch of adaptive-label training; returns a :class:`StepLog`."""
    start = time.perf_counter()
    labels = _check_labels(labels, state.table.num_classes)
    i = state.step + 1
    Z = forward(state.params, X)
    refresh = cfg.is_refresh_step(i)
    if refresh:
        state.table.assign(compute_centroids(Z.data, labels, state.table.num_classes))
    cls = lwal_loss(lwal_probabilities(Z, state.table), labels)
    loss = cls
    rep_value, skipped = 0.0, 0
    if refresh and cfg.repel_weight > 0:
        rep = repel_loss(Z, labels)
        rep_value, skipped = rep.item(), rep.skipped
        loss = loss + scale(rep, cfg.repel_weight)
    l2 = l2_penalty(state.params)
    loss = loss + l2
    log_entry = StepLog(i, state.epoch, loss.item(), cls.item(), rep_value, l2.item(), refresh, 0.0, skipped)
    log_entry.wall_ms = _finish_step(state, loss, start)
    state.step = i
    return log_entry


def std_train_step(state, X, labels, cfg):
    """One batch of ordinary softmax cross-entropy training on the raw encodings."""
    start = time.perf_counter()
    n_classes = state.table.num_classes
    if state.params.weights[-1].shape[1] != n_classes:
        raise ConfigError("one-hot training needs latent_dim equal to the number of classes")
    labels = _check_labels(labels, n_classes)
    i = state.step + 1
    Z = forward(state.params, X)
    cls = lwal_loss(row_softmax(Z), labels)
    l2 = l2_penalty(state.params)
    loss = cls + l2
    log_entry = StepLog(i, state.epoch, loss.item(), cls.item(), 0.0, l2.item(), False, 0.0)
    log_entry.wall_ms = _finish_step(state, loss, start)
    state.step = i
    return log_entry


def nearest_label(Z, vectors):
    """Index of the closest label vector per row; ties go to the lowest index."""
    Z = np.asarray(Z, dtype=np.float64)
    D = kernels.pairwise_distance(Z, vectors, 0.0)
    return np.argmin(D, axis=1)


def predict(params, table, X):
    table.require_initialized()
    return nearest_label(forward(params, X).data, table.vectors)


def std_predict(params, X):
    return np.argmax(forward(params, X).data, axis=1)
