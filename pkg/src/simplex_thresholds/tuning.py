"""A-posteriori search for the threshold that maximizes a score.

Candidates come either from the regular simplex lattice or from Dirichlet
draws. The barycenter (plain argmax) is always evaluated too, so a tuned
threshold never does worse than argmax on the data it was tuned on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import ScoreSpec, _check_labels, confusion_table, table_objective
from .regions import TiePolicy, assign_many, pairwise_gaps
from .simplex import DirichletParams, barycenter, grid_size, sample_dirichlet, simplex_grid

DEFAULT_BUDGET = 10**7
# rough cap on (candidates x samples x m x m) booleans held at once
_CHUNK_CELLS = 4_000_000


class BudgetExceeded(RuntimeError):
    """The candidate set is too large for exhaustive evaluation."""


@dataclass
class TuneResult:
    best_tau: np.ndarray
    best_score: float
    best_index: int
    candidates: np.ndarray  # (M, m)
    scores: np.ndarray  # (M,)
    score_spec: ScoreSpec
    baseline_argmax_score: float
    barycenter_index: int
    best_table: np.ndarray = field(repr=False)  # (m, 4) counts at best_tau
    baseline_table: np.ndarray = field(repr=False)

    @property
    def n_candidates(self) -> int:
        return len(self.scores)

    def pairs(self) -> list[tuple[np.ndarray, float]]:
        return list(zip(self.candidates, self.scores.tolist()))


def _with_barycenter(cands: np.ndarray) -> tuple[np.ndarray, int]:
    m = cands.shape[1]
    b = barycenter(m)
    hit = np.flatnonzero(np.all(np.abs(cands - b) <= 1e-12, axis=1))
    if hit.size:
        return cands, int(hit[0])
    return np.vstack([cands, b]), len(cands)


def score_candidates(
    preds: np.ndarray,
    labels,
    candidates: np.ndarray,
    spec: ScoreSpec,
    tie_policy: TiePolicy = TiePolicy.LOWEST,
) -> tuple[np.ndarray, np.ndarray]:
    """Objective value and ``(m, 4)`` confusion table for every candidate.

    Candidates are processed in fixed-order chunks; the result does not
    depend on chunk size.
    """
    y = np.asarray(preds, dtype=np.float64)
    n, m = y.shape
    lab = _check_labels(labels, m, n)
    cands = np.asarray(candidates, dtype=np.float64)
    gaps = pairwise_gaps(y)
    step = max(1, _CHUNK_CELLS // (n * m * m))
    scores = np.empty(len(cands))
    tables = np.empty((len(cands), m, 4), dtype=np.int64)
    for lo in range(0, len(cands), step):
        chunk = cands[lo : lo + step]
        predicted = assign_many(gaps, y, chunk, TiePolicy(tie_policy))
        tab = confusion_table(lab, predicted, m)
        tables[lo : lo + step] = tab
        scores[lo : lo + step] = table_objective(spec, tab)
    return scores, tables


def _tune(preds, labels, spec, cands, tie_policy) -> TuneResult:
    cands, bary = _with_barycenter(np.asarray(cands, dtype=np.float64))
    scores, tables = score_candidates(preds, labels, cands, spec, tie_policy)
    best = int(np.argmax(scores))  # first maximum = lowest candidate index
    return TuneResult(
        best_tau=cands[best].copy(),
        best_score=float(scores[best]),
        best_index=best,
        candidates=cands,
        scores=scores,
        score_spec=spec,
        baseline_argmax_score=float(scores[bary]),
        barycenter_index=bary,
        best_table=tables[best],
        baseline_table=tables[bary],
    )


def tune_grid(
    preds: np.ndarray,
    labels,
    spec: ScoreSpec,
    k: int,
    tie_policy: TiePolicy = TiePolicy.LOWEST,
    budget: int = DEFAULT_BUDGET,
) -> TuneResult:
    """Exhaustive search over the resolution-``k`` simplex lattice."""
    y = np.asarray(preds, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError(f"predictions must be (n, m), got shape {y.shape}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    m = y.shape[1]
    count = grid_size(m, k)
    if count > budget:
        raise BudgetExceeded(
            f"grid with m={m}, k={k} has {count} candidates (budget {budget}); "
            "use Monte-Carlo tuning (tune_mc) instead"
        )
    return _tune(y, labels, spec, simplex_grid(m, k), tie_policy)


def tune_mc(
    preds: np.ndarray,
    labels,
    spec: ScoreSpec,
    params: DirichletParams,
    n_samples: int,
    seed: int,
    tie_policy: TiePolicy = TiePolicy.LOWEST,
    budget: int = DEFAULT_BUDGET,
) -> TuneResult:
    """Search over ``n_samples`` Dirichlet-distributed thresholds."""
    y = np.asarray(preds, dtype=np.float64)
    if params.m != y.shape[1]:
        raise ValueError(f"Dirichlet has {params.m} classes, predictions have {y.shape[1]}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if n_samples > budget:
        raise BudgetExceeded(f"{n_samples} Monte-Carlo candidates exceed budget {budget}")
    cands = np.array(sample_dirichlet(params, n_samples, seed))
    return _tune(y, labels, spec, cands, tie_policy)


def heatmap_table(
    preds: np.ndarray,
    labels,
    spec: ScoreSpec,
    k: int,
    tie_policy: TiePolicy = TiePolicy.LOWEST,
) -> np.ndarray:
    """Rows ``(t1, t2, t3, score)`` for every lattice point plus the barycenter.

    Only defined for three classes. Lattice rows come first in lexicographic
    order; the barycenter is appended when it is not a lattice point.
    """
    y = np.asarray(preds, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != 3:
        raise ValueError(f"heatmaps need exactly 3 classes, got predictions of shape {y.shape}")
    res = tune_grid(y, labels, spec, k, tie_policy)
    return np.column_stack([res.candidates, res.scores])
