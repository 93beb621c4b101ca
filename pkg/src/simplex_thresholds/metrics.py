"""One-vs-rest confusion matrices and the scores built on them."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .regions import TiePolicy, classify_batch


class Score(enum.Enum):
    """Binary scores that are monotone in the confusion-matrix entries.

    ``ACCURACY`` is ``(tp + tn) / n`` per class; as a tuning objective it means
    overall accuracy. ``MACRO_ACCURACY`` keeps the mean of the per-class
    binary accuracies instead. ``LINEAR`` is ``(tp + tn - fp - fn) / n``.
    """

    ACCURACY = "accuracy"
    MACRO_ACCURACY = "macro_accuracy"
    PRECISION = "precision"
    RECALL = "recall"
    F1 = "f1"
    TSS = "tss"
    LINEAR = "linear"


@dataclass(frozen=True)
class ScoreSpec:
    name: Score = Score.F1
    zero_division_value: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "name", Score(self.name))


@dataclass(frozen=True)
class ConfusionCounts:
    """One-vs-rest counts for a single class; real-valued when expected."""

    tn: float
    fp: float
    fn: float
    tp: float

    def __post_init__(self):
        if min(self.tn, self.fp, self.fn, self.tp) < 0:
            raise ValueError(f"negative confusion entry in {self}")

    @property
    def n(self) -> float:
        return self.tn + self.fp + self.fn + self.tp

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.tn, self.fp, self.fn, self.tp)


# kept for readers coming from the loss module
SoftConfusion = ConfusionCounts


def _ratio(num, den, zero_value):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    safe = np.where(den == 0, 1.0, den)
    return np.where(den == 0, zero_value, num / safe)


def score_arrays(spec: ScoreSpec, tn, fp, fn, tp) -> np.ndarray:
    """Vectorized binary score over broadcastable count arrays."""
    tn, fp, fn, tp = (np.asarray(v, dtype=np.float64) for v in (tn, fp, fn, tp))
    z = spec.zero_division_value
    n = tn + fp + fn + tp
    name = spec.name
    if name in (Score.ACCURACY, Score.MACRO_ACCURACY):
        return _ratio(tp + tn, n, z)
    if name is Score.PRECISION:
        return _ratio(tp, tp + fp, z)
    if name is Score.RECALL:
        return _ratio(tp, tp + fn, z)
    if name is Score.F1:
        return _ratio(2 * tp, 2 * tp + fp + fn, z)
    if name is Score.TSS:
        # each rate falls back on its own when its class side is empty
        return _ratio(tp, tp + fn, z) + _ratio(tn, tn + fp, z) - 1.0
    if name is Score.LINEAR:
        return _ratio(tp + tn - fp - fn, n, z)
    raise ValueError(f"unknown score {name}")


def binary_score(spec: ScoreSpec, cm: ConfusionCounts) -> float:
    return float(score_arrays(spec, cm.tn, cm.fp, cm.fn, cm.tp))


def macro_score(spec: ScoreSpec, cms: Sequence[ConfusionCounts]) -> float:
    """Arithmetic mean of the binary score over the per-class matrices."""
    if len(cms) == 0:
        raise ValueError("macro_score needs at least one confusion matrix")
    return float(np.mean([binary_score(spec, cm) for cm in cms]))


def objective(spec: ScoreSpec, cms: Sequence[ConfusionCounts]) -> float:
    """The number a tuning run maximizes: overall accuracy or a macro score."""
    if spec.name is Score.ACCURACY:
        n = cms[0].n
        return float(sum(cm.tp for cm in cms) / n) if n else spec.zero_division_value
    return macro_score(spec, cms)


def _check_labels(labels, m: int, n: int) -> np.ndarray:
    lab = np.asarray(labels)
    if lab.ndim != 1 or lab.size != n:
        raise ValueError(f"got {lab.size} labels for {n} predictions")
    if n == 0:
        raise ValueError("empty prediction set")
    if not np.issubdtype(lab.dtype, np.integer):
        if not np.all(lab == np.round(lab)):
            raise ValueError("labels must be integer class indices")
        lab = lab.astype(np.int64)
    if lab.min() < 0 or lab.max() >= m:
        bad = int(np.flatnonzero((lab < 0) | (lab >= m))[0])
        raise ValueError(f"label {lab[bad]} at position {bad} is outside [0, {m - 1}]")
    return lab


def confusion_table(labels, predicted, m: int) -> np.ndarray:
    """``(m, 4)`` int array of (tn, fp, fn, tp) rows from hard predictions.

    ``labels`` and ``predicted`` may also carry a leading candidate axis, in
    which case the result is ``(c, m, 4)``.
    """
    labels = np.asarray(labels)
    predicted = np.asarray(predicted)
    n = labels.shape[-1]
    flat = np.broadcast_to(labels, predicted.shape) * m + predicted
    lead = predicted.shape[:-1]
    flat = flat.reshape(-1, n)
    offs = (np.arange(flat.shape[0]) * m * m)[:, None]
    joint = np.bincount((flat + offs).ravel(), minlength=flat.shape[0] * m * m)
    joint = joint.reshape(flat.shape[0], m, m)  # [true, predicted]
    tp = np.diagonal(joint, axis1=1, axis2=2)
    support = joint.sum(axis=2)
    called = joint.sum(axis=1)
    fn = support - tp
    fp = called - tp
    tn = n - tp - fn - fp
    out = np.stack([tn, fp, fn, tp], axis=-1)
    return out.reshape(lead + (m, 4))


def to_counts(table: np.ndarray) -> list[ConfusionCounts]:
    return [ConfusionCounts(*(float(v) for v in row)) for row in np.asarray(table)]


def per_class_confusions(
    preds: np.ndarray, labels, tau: Sequence[float], tie_policy: TiePolicy = TiePolicy.LOWEST
) -> list[ConfusionCounts]:
    """Hard one-vs-rest matrices for every class under threshold ``tau``."""
    y = np.asarray(preds, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError(f"predictions must be (n, m), got shape {y.shape}")
    lab = _check_labels(labels, y.shape[1], y.shape[0])
    predicted = classify_batch(y, tau, tie_policy)
    return to_counts(confusion_table(lab, predicted, y.shape[1]))


def overall_accuracy(preds: np.ndarray, labels, tau: Sequence[float], tie_policy: TiePolicy = TiePolicy.LOWEST) -> float:
    y = np.asarray(preds, dtype=np.float64)
    lab = _check_labels(labels, y.shape[1], y.shape[0])
    return float(np.mean(classify_batch(y, tau, tie_policy) == lab))


def table_objective(spec: ScoreSpec, table: np.ndarray) -> np.ndarray:
    """Vectorized :func:`objective` over ``(..., m, 4)`` count tables."""
    table = np.asarray(table, dtype=np.float64)
    tn, fp, fn, tp = np.moveaxis(table, -1, 0)
    if spec.name is Score.ACCURACY:
        n = table[..., 0, :].sum(axis=-1)
        return tp.sum(axis=-1) / n
    return score_arrays(spec, tn, fp, fn, tp).mean(axis=-1)


def score_partials(spec: ScoreSpec, tn, fp, fn, tp, eps: float = 1e-12):
    """Smoothed score and its partials w.r.t. (tn, fp, fn, tp).

    Every denominator gets ``+ eps`` so soft counts from the loss never hit
    0/0. Returns ``(value, d_tn, d_fp, d_fn, d_tp)`` as arrays.
    """
    tn, fp, fn, tp = (np.asarray(v, dtype=np.float64) for v in (tn, fp, fn, tp))
    zero = np.zeros_like(tp)
    name = spec.name
    if name in (Score.ACCURACY, Score.MACRO_ACCURACY, Score.LINEAR):
        n = tn + fp + fn + tp + eps
        sign = 1.0 if name is Score.LINEAR else 0.0
        num = tp + tn - sign * (fp + fn)
        v = num / n
        d_pos = (1.0 - v) / n
        d_neg = (-sign - v) / n
        return v, d_pos, d_neg, d_neg, d_pos
    if name is Score.PRECISION:
        d = tp + fp + eps
        return tp / d, zero, -tp / d**2, zero, (fp + eps) / d**2
    if name is Score.RECALL:
        d = tp + fn + eps
        return tp / d, zero, zero, -tp / d**2, (fn + eps) / d**2
    if name is Score.F1:
        d = 2 * tp + fp + fn + eps
        v = 2 * tp / d
        return v, zero, -2 * tp / d**2, -2 * tp / d**2, 2 * (fp + fn + eps) / d**2
    if name is Score.TSS:
        dp = tp + fn + eps
        dn = tn + fp + eps
        v = tp / dp + tn / dn - 1.0
        return v, (fp + eps) / dn**2, -tn / dn**2, -tp / dp**2, (fn + eps) / dp**2
    raise ValueError(f"unknown score {name}")
