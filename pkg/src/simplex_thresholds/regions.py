"""Threshold-dependent classification regions on the simplex.

For a threshold ``tau`` the region of class ``j`` is the set of points ``z``
with ``z[j] - z[k] > tau[j] - tau[k]`` for every ``k != j``. At the barycenter
this is exactly the argmax rule. Points on region boundaries (a measure-zero
set) belong to no region and are resolved by a :class:`TiePolicy`.

Class indices are 0-based throughout the library; the CLI and file formats
use 1-based labels.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class TiePolicy(enum.Enum):
    LOWEST = "lowest"
    # the tied set already holds the shifted-score maximizers, so this is LOWEST
    HIGHEST_SHIFTED_THEN_LOWEST = "highest_shifted"
    ERROR = "error"


class BoundaryError(ValueError):
    """A point sits on a region boundary and the tie policy forbids guessing."""


@dataclass(frozen=True)
class RegionAssignment:
    """Either a single class or a boundary marker with the tied classes."""

    class_index: int | None = None
    tied: tuple[int, ...] = ()

    def __post_init__(self):
        if self.class_index is None and len(self.tied) < 2:
            raise ValueError("a boundary assignment needs at least two tied classes")

    @property
    def is_boundary(self) -> bool:
        return self.class_index is None


def _pair(y_hat, tau) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y_hat, dtype=np.float64)
    t = np.asarray(tau, dtype=np.float64)
    if y.shape[-1] != t.shape[-1]:
        raise ValueError(f"dimension mismatch: prediction has {y.shape[-1]}, threshold has {t.shape[-1]}")
    return y, t


def shifted_scores(y_hat: Sequence[float], tau: Sequence[float]) -> np.ndarray:
    y, t = _pair(y_hat, tau)
    return y - t


def pairwise_gaps(z: np.ndarray) -> np.ndarray:
    """``z[..., j] - z[..., k]`` as an ``(..., m, m)`` array."""
    return z[..., :, None] - z[..., None, :]


def _membership(gap_pred: np.ndarray, gap_tau: np.ndarray, strict: bool) -> np.ndarray:
    # diagonal entries compare 0 against 0; force them true
    m = gap_pred.shape[-1]
    cmp = gap_pred > gap_tau if strict else gap_pred >= gap_tau
    cmp = cmp | np.eye(m, dtype=bool)
    return cmp.all(axis=-1)


def _tied_set(y: np.ndarray, t: np.ndarray, gp: np.ndarray, gt: np.ndarray) -> tuple[int, ...]:
    weak = _membership(gp, gt, strict=False)
    shifted = y - t
    tied = weak | (shifted == shifted.max())
    if tied.sum() < 2:
        # only reachable through non-transitive rounding; keep the two best
        tied = np.zeros_like(tied)
        tied[np.argsort(-shifted, kind="stable")[:2]] = True
    return tuple(int(i) for i in np.flatnonzero(tied))


def region_of(y_hat: Sequence[float], tau: Sequence[float]) -> RegionAssignment:
    """Region containing ``y_hat`` under threshold ``tau``.

    Membership uses the pairwise strict inequalities directly. When no class
    passes, the result is a boundary marker listing the classes that maximize
    ``y_hat - tau`` (together with any class passing the non-strict test).
    """
    y, t = _pair(y_hat, tau)
    if y.ndim != 1:
        raise ValueError("region_of takes a single prediction; use classify_batch")
    gp, gt = pairwise_gaps(y), pairwise_gaps(t)
    inside = np.flatnonzero(_membership(gp, gt, strict=True))
    if inside.size == 1:
        return RegionAssignment(class_index=int(inside[0]))
    return RegionAssignment(tied=_tied_set(y, t, gp, gt))


def _resolve(assignment: RegionAssignment, tie_policy: TiePolicy) -> int:
    if not assignment.is_boundary:
        return assignment.class_index
    if tie_policy is TiePolicy.ERROR:
        raise BoundaryError(f"prediction lies on the boundary between classes {assignment.tied}")
    return min(assignment.tied)


def classify(y_hat: Sequence[float], tau: Sequence[float], tie_policy: TiePolicy = TiePolicy.LOWEST) -> int:
    return _resolve(region_of(y_hat, tau), TiePolicy(tie_policy))


def classify_batch(
    preds: np.ndarray, tau: Sequence[float], tie_policy: TiePolicy = TiePolicy.LOWEST
) -> np.ndarray:
    """Vectorized :func:`classify` over the rows of an ``(n, m)`` array."""
    tie_policy = TiePolicy(tie_policy)
    t = np.asarray(tau, dtype=np.float64)
    if isinstance(preds, np.ndarray):
        y = np.asarray(preds, dtype=np.float64)
    else:
        rows = list(preds)
        if not rows:
            return np.zeros(0, dtype=np.int64)
        for i, r in enumerate(rows):
            if len(r) != t.size:
                raise ValueError(f"prediction {i} has dimension {len(r)}, threshold has {t.size}")
        y = np.asarray(rows, dtype=np.float64)
    if y.size == 0:
        return np.zeros(0, dtype=np.int64)
    if y.ndim != 2 or y.shape[1] != t.size:
        raise ValueError(f"predictions of shape {y.shape} do not match threshold dimension {t.size}")
    return assign_many(pairwise_gaps(y), y, t[None, :], tie_policy)[0]


def assign_many(
    gap_pred: np.ndarray, preds: np.ndarray, taus: np.ndarray, tie_policy: TiePolicy = TiePolicy.LOWEST
) -> np.ndarray:
    """Class indices for every (threshold, prediction) pair.

    ``gap_pred`` is ``pairwise_gaps(preds)`` (precomputed so candidate loops
    reuse it) and ``taus`` is ``(c, m)``. Returns a ``(c, n)`` int array.
    """
    gap_tau = pairwise_gaps(taus)[:, None]  # (c, 1, m, m)
    strict = _membership(gap_pred[None], gap_tau, strict=True)  # (c, n, m)
    labels = strict.argmax(axis=-1)
    onb = strict.sum(axis=-1) != 1
    if onb.any():
        if tie_policy is TiePolicy.ERROR:
            c, i = np.argwhere(onb)[0]
            raise BoundaryError(f"prediction {i} lies on a region boundary for threshold {taus[c].tolist()}")
        for c, i in np.argwhere(onb):
            t = taus[c]
            labels[c, i] = min(_tied_set(preds[i], t, gap_pred[i], pairwise_gaps(t)))
    return labels
