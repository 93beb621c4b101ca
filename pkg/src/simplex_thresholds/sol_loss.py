"""Multiclass score-oriented loss with a Dirichlet-distributed threshold.

The threshold is treated as a random point of the simplex. For each sample
and class the probability of landing in that class's region is estimated
by Monte Carlo over a fixed set of threshold draws, with the region
indicator relaxed to a product of sigmoids::

    p[i, j] = mean_r  prod_{k != j} sigmoid(lam * (y[i,j] - y[i,k] - t[r,j] + t[r,k]))

Expected one-vs-rest counts follow from ``p`` (false negatives and true
negatives as exact complements), and the loss is the negated macro score of
those expected matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .metrics import ConfusionCounts, ScoreSpec, _check_labels, score_partials
from .regions import _membership, pairwise_gaps
from .simplex import DirichletParams, sample_dirichlet

DEFAULT_LAMBDA = 20.0
DEFAULT_ALPHA = 20.0
DEFAULT_SAMPLE_BUDGET = 4096
SMOOTHING = 1e-12
_CHUNK_CELLS = 4_000_000
_LOG2 = math.log(2.0)


def hoeffding_samples(epsilon: float, delta: float) -> int:
    """Smallest N with ``2 exp(-2 N eps^2) <= delta``, and at least 1."""
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return max(1, math.ceil(math.log(2.0 / delta) / (2.0 * epsilon**2)))


def soft_membership(y_hat, tau_r, j: int, lam: float) -> float:
    """Sigmoid relaxation of the indicator that ``y_hat`` is in region ``j``."""
    y = np.asarray(y_hat, dtype=np.float64)
    t = np.asarray(tau_r, dtype=np.float64)
    if y.shape != t.shape:
        raise ValueError(f"dimension mismatch: {y.shape} vs {t.shape}")
    if not 0 <= j < y.size:
        raise ValueError(f"class index {j} out of range for m={y.size}")
    margins = (y[j] - y - t[j] + t)
    margins = np.delete(margins, j)
    return float(np.prod(expit(lam * margins)))


def hard_membership(preds: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Monte-Carlo mean of the exact region indicators, ``(n, m)``."""
    y = np.asarray(preds, dtype=np.float64)
    t = np.asarray(thresholds, dtype=np.float64)
    n, m = y.shape
    gp = pairwise_gaps(y)
    out = np.zeros((n, m))
    step = max(1, _CHUNK_CELLS // (n * m * m))
    for lo in range(0, len(t), step):
        gt = pairwise_gaps(t[lo : lo + step])
        out += _membership(gp[:, None], gt[None], strict=True).sum(axis=1)
    return out / len(t)


def _soft_numpy(y: np.ndarray, t: np.ndarray, lam: float, with_grad: bool):
    n, m = y.shape
    gp = pairwise_gaps(y)
    p = np.zeros((n, m))
    g = np.zeros((n, m, m)) if with_grad else None
    step = max(1, _CHUNK_CELLS // (n * m * m))
    for lo in range(0, len(t), step):
        gt = pairwise_gaps(t[lo : lo + step])
        s = lam * (gp[:, None] - gt[None])  # (n, c, m, m); diagonal is 0
        # diagonal contributes log(1/2) per class, removed by adding log 2
        logp = -np.logaddexp(0.0, -s).sum(axis=-1) + _LOG2
        pr = np.exp(logp)  # (n, c, m)
        p += pr.sum(axis=1)
        if with_grad:
            g += np.einsum("icj,icjk->ijk", pr, expit(-s))
    return p, g


try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

if numba is not None:

    @numba.njit(cache=True)
    def _soft_kernel(y, t, lam, with_grad):  # pragma: no cover - compiled
        n, m = y.shape
        nt = t.shape[0]
        p = np.zeros((n, m))
        g = np.zeros((n, m, m))
        # sig[j, k] = sigmoid(x_jk); x_kj = -x_jk so sig[k, j] = 1 - sig[j, k]
        sig = np.empty((m, m))
        for i in range(n):
            for r in range(nt):
                for j in range(m):
                    for k in range(j + 1, m):
                        x = lam * ((y[i, j] - y[i, k]) - (t[r, j] - t[r, k]))
                        if x >= 0:
                            e = np.exp(-x)
                            sig[j, k] = 1.0 / (1.0 + e)
                            sig[k, j] = e / (1.0 + e)
                        else:
                            e = np.exp(x)
                            sig[j, k] = e / (1.0 + e)
                            sig[k, j] = 1.0 / (1.0 + e)
                for j in range(m):
                    prod = 1.0
                    for k in range(m):
                        if k != j:
                            prod *= sig[j, k]
                    p[i, j] += prod
                    if with_grad:
                        for k in range(m):
                            if k != j:
                                g[i, j, k] += prod * sig[k, j]
        return p, g


def soft_membership_batch(
    preds: np.ndarray, thresholds: np.ndarray, lam: float, with_grad: bool = False, backend: str = "auto"
):
    """Relaxed membership probabilities for every sample and class.

    Returns ``p`` of shape ``(n, m)``; with ``with_grad`` also ``G`` of shape
    ``(n, m, m)`` where ``dp[i,j]/dy[i,k] = -G[i,j,k]`` for ``k != j`` and
    ``dp[i,j]/dy[i,j] = sum_k G[i,j,k]``. ``backend`` is ``"numba"``,
    ``"numpy"`` or ``"auto"`` (numba when importable).
    """
    y = np.ascontiguousarray(preds, dtype=np.float64)
    t = np.ascontiguousarray(thresholds, dtype=np.float64)
    n, m = y.shape
    if t.ndim != 2 or t.shape[1] != m:
        raise ValueError(f"thresholds of shape {t.shape} do not match m={m}")
    if len(t) == 0:
        raise ValueError("need at least one threshold sample")
    use_numba = numba is not None if backend == "auto" else backend == "numba"
    if use_numba:
        p, g = _soft_kernel(y, t, float(lam), with_grad)
    else:
        p, g = _soft_numpy(y, t, lam, with_grad)
    p /= len(t)
    if not with_grad:
        return p
    g *= lam / len(t)
    g[:, np.arange(m), np.arange(m)] = 0.0
    return p, g


def _soft_tables(p: np.ndarray, onehot: np.ndarray):
    support = onehot.sum(axis=0)
    n = len(p)
    tp = (p * onehot).sum(axis=0)
    fp = (p * (1.0 - onehot)).sum(axis=0)
    fn = support - tp
    tn = (n - support) - fp
    return tn, fp, fn, tp


def expected_confusions(preds, labels, thresholds, lam: float) -> list[ConfusionCounts]:
    """Expected one-vs-rest matrices under the sampled thresholds.

    ``lam = math.inf`` switches to exact region indicators.
    """
    y = np.asarray(preds, dtype=np.float64)
    lab = _check_labels(labels, y.shape[1], y.shape[0])
    t = np.asarray(thresholds, dtype=np.float64)
    if t.ndim != 2 or len(t) == 0:
        raise ValueError("need a non-empty (N, m) array of thresholds")
    if math.isinf(lam):
        p = hard_membership(y, t)
    else:
        p = soft_membership_batch(y, t, lam)
    onehot = np.eye(y.shape[1])[lab]
    tn, fp, fn, tp = _soft_tables(p, onehot)
    # complements can dip below 0 by a rounding error
    return [
        ConfusionCounts(max(a, 0.0), max(b, 0.0), max(c, 0.0), max(d, 0.0))
        for a, b, c, d in zip(tn, fp, fn, tp)
    ]


@dataclass(frozen=True)
class SolConfig:
    """Hyperparameters of the loss.

    ``lam = math.inf`` selects exact indicators (no gradient available).
    """

    alpha: DirichletParams
    lam: float = DEFAULT_LAMBDA
    n_samples: int = DEFAULT_SAMPLE_BUDGET
    seed: int = 0
    score_spec: ScoreSpec = field(default_factory=ScoreSpec)

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")

    @classmethod
    def default(cls, m: int, **overrides) -> "SolConfig":
        """Symmetric ``alpha = 20``, ``lam = 20``, Hoeffding N capped at the budget."""
        budget = overrides.pop("sample_budget", DEFAULT_SAMPLE_BUDGET)
        n = min(hoeffding_samples(0.01, 0.05), budget)
        kw = dict(alpha=DirichletParams.symmetric(m, DEFAULT_ALPHA), lam=DEFAULT_LAMBDA, n_samples=n)
        kw.update(overrides)
        return cls(**kw)


class MultiSOL:
    """Loss object that draws its thresholds once and reuses them.

    >>> loss = MultiSOL(SolConfig(DirichletParams.symmetric(3, 5.0), n_samples=64, seed=1))
    >>> value, grad = loss.value_and_grad(preds, labels)  # doctest: +SKIP
    """

    def __init__(self, config: SolConfig):
        self.config = config
        self.thresholds = np.array(sample_dirichlet(config.alpha, config.n_samples, config.seed))
        self.thresholds.setflags(write=False)

    @property
    def m(self) -> int:
        return self.config.alpha.m

    def _prepare(self, preds, labels):
        y = np.asarray(preds, dtype=np.float64)
        if y.ndim != 2 or y.shape[1] != self.m:
            raise ValueError(f"predictions of shape {y.shape} do not match m={self.m}")
        lab = _check_labels(labels, self.m, len(y))
        return y, np.eye(self.m)[lab]

    def value(self, preds, labels) -> float:
        y, onehot = self._prepare(preds, labels)
        lam = self.config.lam
        p = hard_membership(y, self.thresholds) if math.isinf(lam) else soft_membership_batch(y, self.thresholds, lam)
        v = score_partials(self.config.score_spec, *_soft_tables(p, onehot), eps=SMOOTHING)[0]
        return float(-v.mean())

    def value_and_grad(self, preds, labels) -> tuple[float, np.ndarray]:
        if math.isinf(self.config.lam):
            raise ValueError("the exact-indicator loss has no gradient; use a finite lambda")
        y, onehot = self._prepare(preds, labels)
        p, g = soft_membership_batch(y, self.thresholds, self.config.lam, with_grad=True)
        v, d_tn, d_fp, d_fn, d_tp = score_partials(
            self.config.score_spec, *_soft_tables(p, onehot), eps=SMOOTHING
        )
        m = self.m
        # dL/dp[i,j]; fn and tn move opposite to tp and fp
        w = -(onehot * (d_tp - d_fn) + (1.0 - onehot) * (d_fp - d_tn)) / m
        grad = w * g.sum(axis=2) - np.einsum("ij,ijl->il", w, g)
        return float(-v.mean()), grad


def multisol_loss(preds, labels, config: SolConfig) -> float:
    return MultiSOL(config).value(preds, labels)


def multisol_loss_with_gradient(preds, labels, config: SolConfig) -> tuple[float, np.ndarray]:
    return MultiSOL(config).value_and_grad(preds, labels)

