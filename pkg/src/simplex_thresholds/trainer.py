"""A small numpy MLP classifier trained with weighted CE or the MultiSOL loss.

Hidden layers use ReLU, the output is a softmax, parameters are updated with
Adam, and training stops early on validation macro-F1 (argmax rule), keeping
the best epoch's weights.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .data import DatasetSplit
from .metrics import Score, ScoreSpec, confusion_table, table_objective
from .regions import TiePolicy, classify_batch
from .simplex import barycenter
from .sol_loss import MultiSOL, SolConfig

log = logging.getLogger(__name__)

CE_GUARD = 1e-12
F1 = ScoreSpec(Score.F1)


class NonFiniteLoss(FloatingPointError):
    """Training produced a NaN or infinite loss."""


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def m(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]


def init_mlp(widths: Sequence[int], seed: int | np.random.Generator) -> MlpParams:
    """He-normal weights and zero biases for layer widths ``[d, h1, ..., m]``."""
    if len(widths) < 2 or widths[-1] < 2:
        raise ValueError(f"need at least input and an output of width >= 2, got {widths}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ws, bs = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        ws.append(rng.standard_normal((fan_in, fan_out)) * math.sqrt(2.0 / fan_in))
        bs.append(np.zeros(fan_out))
    return MlpParams(ws, bs)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(params: MlpParams, x: np.ndarray):
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        h = softmax(z) if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Softmax outputs for one feature vector or an ``(n, d)`` batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None] if single else x
    if xb.shape[1] != params.widths[0]:
        raise ValueError(f"input width {xb.shape[1]} does not match network width {params.widths[0]}")
    out = _forward(params, xb)[-1]
    return out[0] if single else out


def backward(params: MlpParams, acts: list[np.ndarray], d_probs: np.ndarray) -> list[np.ndarray]:
    """Gradients ``[dW1, db1, dW2, db2, ...]`` given dLoss/dProbs."""
    probs = acts[-1]
    delta = probs * (d_probs - (d_probs * probs).sum(axis=1, keepdims=True))
    grads = []
    for i in range(len(params.weights) - 1, -1, -1):
        h = acts[i]
        grads.append(delta.sum(axis=0))
        grads.append(h.T @ delta)
        if i:
            delta = (delta @ params.weights[i].T) * (h > 0)
    return grads[::-1]


def class_weights(labels: np.ndarray, m: int, policy: str = "balanced") -> np.ndarray:
    """``w_j = n / (m n_j)`` for ``"balanced"``; all ones for ``"none"``."""
    if policy == "none":
        return np.ones(m)
    if policy != "balanced":
        raise ValueError(f"unknown class-weight policy {policy!r}")
    counts = np.bincount(labels, minlength=m).astype(np.float64)
    if np.any(counts == 0):
        raise ValueError("balanced weights need every class present in the training split")
    return len(labels) / (m * counts)


def weighted_ce(preds: np.ndarray, labels, class_weights: np.ndarray) -> float:
    return weighted_ce_with_grad(preds, labels, class_weights)[0]


def weighted_ce_with_grad(preds: np.ndarray, labels, class_weights: np.ndarray):
    p = np.asarray(preds, dtype=np.float64)
    lab = np.asarray(labels)
    w = np.asarray(class_weights, dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("class weights must be positive")
    n = len(lab)
    rows = np.arange(n)
    py = p[rows, lab] + CE_GUARD
    value = -float(np.sum(w[lab] * np.log(py)) / n)
    grad = np.zeros_like(p)
    grad[rows, lab] = -w[lab] / (n * py)
    return value, grad


@dataclass
class TrainConfig:
    loss: str = "wce"  # "wce" or "multisol"
    sol: SolConfig | None = None
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    batch_size: int = 128
    max_epochs: int = 100
    patience: int = 5
    seed: int = 0
    class_weight: str = "balanced"

    def __post_init__(self):
        if self.loss not in ("wce", "multisol"):
            raise ValueError(f"loss must be 'wce' or 'multisol', got {self.loss!r}")
        if self.loss == "multisol" and self.sol is None:
            raise ValueError("multisol training needs a SolConfig")
        if not (self.lr > 0 and self.batch_size > 0 and self.max_epochs > 0 and self.patience > 0):
            raise ValueError("learning rate, batch size, epochs and patience must be positive")


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr, (self.b1, self.b2), self.eps = lr, betas, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainResult:
    params: MlpParams
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    sol_seed: int | None = None


def evaluate(params: MlpParams, data: DatasetSplit, tau=None, tie_policy: TiePolicy = TiePolicy.LOWEST) -> dict:
    """Overall accuracy, macro-F1 and per-class counts at threshold ``tau``.

    ``tau`` defaults to the barycenter, i.e. the argmax rule.
    """
    probs = forward(params, data.features)
    tau = barycenter(params.m) if tau is None else tau
    predicted = classify_batch(probs, tau, tie_policy)
    table = confusion_table(data.labels, predicted, params.m)
    return {
        "accuracy": float(np.mean(predicted == data.labels)),
        "macro_f1": float(table_objective(F1, table)),
        "table": table,
    }


def _loss_fn(config: TrainConfig, train: DatasetSplit, sol_seed: int):
    m = train.m
    if config.loss == "wce":
        w = class_weights(train.labels, m, config.class_weight)
        return lambda p, y: weighted_ce_with_grad(p, y, w)
    sol = MultiSOL(replace(config.sol, seed=sol_seed))
    if sol.m != m:
        raise ValueError(f"SolConfig is for {sol.m} classes, data has {m}")
    if config.batch_size < 2 * m:
        warnings.warn(f"batch size {config.batch_size} < 2m = {2 * m}: soft per-class counts will be tiny")
    return sol.value_and_grad


def train(
    data: tuple[DatasetSplit, DatasetSplit, DatasetSplit] | tuple[DatasetSplit, DatasetSplit],
    hidden: Sequence[int],
    config: TrainConfig,
) -> TrainResult:
    """Fit an MLP with the given hidden widths and return the best-validation weights.

    Initialization, shuffling and the loss's threshold sample all derive from
    ``config.seed``.
    """
    train_split, val_split = data[0], data[1]
    m = train_split.m
    init_seq, shuffle_seq, sol_seq = np.random.SeedSequence(config.seed).spawn(3)
    sol_seed = int(sol_seq.generate_state(1)[0])
    params = init_mlp([train_split.d, *hidden, m], np.random.default_rng(init_seq))
    shuffle_rng = np.random.default_rng(shuffle_seq)
    loss_fn = _loss_fn(config, train_split, sol_seed)
    arrays = params.arrays()
    opt = Adam(arrays, config.lr, config.betas, config.adam_eps)

    best = params.copy()
    best_f1, best_epoch, stale = -math.inf, 0, 0
    history = []
    x, y = train_split.features, train_split.labels
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(train_split.n)
        total = 0.0
        for b, lo in enumerate(range(0, len(order), config.batch_size)):
            idx = order[lo : lo + config.batch_size]
            acts = _forward(params, x[idx])
            value, d_probs = loss_fn(acts[-1], y[idx])
            if not math.isfinite(value):
                raise NonFiniteLoss(f"non-finite loss {value} at epoch {epoch}, batch {b}")
            total += value * len(idx)
            opt.step(backward(params, acts, d_probs))
        val = evaluate(params, val_split)
        row = {
            "epoch": epoch,
            "train_loss": total / train_split.n,
            "val_accuracy": val["accuracy"],
            "val_macro_f1": val["macro_f1"],
        }
        history.append(row)
        log.info("epoch %d loss %.5f val acc %.4f val F1 %.4f", epoch, row["train_loss"], val["accuracy"], val["macro_f1"])
        if val["macro_f1"] > best_f1:
            best, best_f1, best_epoch, stale = params.copy(), val["macro_f1"], epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return TrainResult(best, history, best_epoch, sol_seed if config.loss == "multisol" else None)
