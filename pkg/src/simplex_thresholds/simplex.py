"""Probability simplex helpers: validation, lattice grids and Dirichlet draws.

Points on the simplex are plain read-only ``float64`` numpy arrays. They carry
both network outputs and multidimensional thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln

SUM_TOL = 1e-9


class SimplexError(ValueError):
    """Raised when a vector is not a valid point of the probability simplex."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def validate_simplex(raw: Sequence[float], tol: float = SUM_TOL) -> np.ndarray:
    """Check that ``raw`` lies on the simplex and return it as a frozen array.

    Nothing is renormalized: a vector summing to ``1 + 2*tol`` is rejected, not
    rescaled. Use :func:`normalize` explicitly if that is what you want.
    """
    x = np.array(raw, dtype=np.float64).ravel()
    if x.size < 2:
        raise SimplexError(f"simplex points need at least 2 coordinates, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise SimplexError(f"non-finite coordinate in {x.tolist()}")
    lo = x.min()
    if lo < -tol:
        raise SimplexError(f"negative coordinate {lo!r} (tol={tol})")
    if x.max() > 1.0 + tol:
        raise SimplexError(f"coordinate {x.max()!r} exceeds 1 (tol={tol})")
    total = float(x.sum())
    if abs(total - 1.0) > tol:
        raise SimplexError(f"coordinates sum to {total!r}, not 1 (tol={tol})")
    return _frozen(x)


def validate_simplex_rows(raw: np.ndarray, tol: float = SUM_TOL) -> np.ndarray:
    """Row-wise :func:`validate_simplex` for an ``(n, m)`` array.

    The error message names the first offending row (0-based).
    """
    x = np.asarray(raw, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise SimplexError(f"expected an (n, m>=2) array, got shape {x.shape}")
    bad = (
        ~np.isfinite(x).all(axis=1)
        | (x.min(axis=1) < -tol)
        | (x.max(axis=1) > 1.0 + tol)
        | (np.abs(x.sum(axis=1) - 1.0) > tol)
    )
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        try:
            validate_simplex(x[i], tol)
        except SimplexError as exc:
            err = SimplexError(f"row {i}: {exc}")
            err.row, err.reason = i, str(exc)
            raise err from None
    return x


def normalize(raw: Sequence[float]) -> np.ndarray:
    """Clip negatives to zero and rescale to unit sum. Never called implicitly."""
    x = np.clip(np.asarray(raw, dtype=np.float64), 0.0, None)
    s = x.sum()
    if s <= 0:
        raise SimplexError("cannot normalize a vector with no positive mass")
    return _frozen(x / s)


def barycenter(m: int) -> np.ndarray:
    """The point ``(1/m, ..., 1/m)``; thresholding there is plain argmax."""
    if m < 2:
        raise SimplexError(f"m must be >= 2, got {m}")
    return _frozen(np.full(m, 1.0 / m))


def vertex(m: int, j: int) -> np.ndarray:
    """One-hot vertex ``e_j`` (``j`` is 0-based)."""
    e = np.zeros(m)
    e[j] = 1.0
    return _frozen(e)


def grid_size(m: int, k: int) -> int:
    """Number of points of the resolution-``k`` lattice: C(k+m-1, m-1)."""
    return math.comb(k + m - 1, m - 1)


def compositions(m: int, k: int) -> Iterator[tuple[int, ...]]:
    """Weak compositions of ``k`` into ``m`` parts, in lexicographic order."""
    if m == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in compositions(m - 1, k - first):
            yield (first,) + rest


def _composition_array(m: int, k: int) -> np.ndarray:
    # iterative build, lexicographic: prepend each leading part to the
    # (m-1)-part table of the remainder
    tables = [np.array([[r]], dtype=np.int64) for r in range(k + 1)]
    for parts in range(2, m + 1):
        # the last level only needs the table for the full total k
        totals = [k] if parts == m else range(k + 1)
        new = {}
        for r in totals:
            sizes = [len(tables[r - f]) for f in range(r + 1)]
            out = np.empty((sum(sizes), parts), dtype=np.int64)
            out[:, 0] = np.repeat(np.arange(r + 1), sizes)
            out[:, 1:] = np.vstack([tables[r - f] for f in range(r + 1)])
            new[r] = out
        tables = new
    return tables[k]


def simplex_grid(m: int, k: int, max_points: int | None = None) -> np.ndarray:
    """All simplex points with coordinates in ``{0, 1/k, ..., 1}``.

    Rows follow the lexicographic order of the integer compositions, so the
    first row is ``(0, ..., 0, 1)`` and the last is ``(1, 0, ..., 0)``.
    Returns an ``(C(k+m-1, m-1), m)`` array.
    """
    if m < 2:
        raise SimplexError(f"m must be >= 2, got {m}")
    if k < 1:
        raise ValueError(f"grid resolution k must be >= 1, got {k}")
    count = grid_size(m, k)
    if count > np.iinfo(np.int64).max:
        raise OverflowError(f"grid of C({k + m - 1}, {m - 1}) points overflows int64")
    if max_points is not None and count > max_points:
        raise OverflowError(f"grid has {count} points, budget is {max_points}")
    pts = _composition_array(m, k).astype(np.float64) / k
    return _frozen(pts)


@dataclass(frozen=True)
class DirichletParams:
    """Concentration parameters of a Dirichlet law on the simplex."""

    alpha: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(v) for v in self.alpha)
        if len(a) < 2:
            raise ValueError("Dirichlet needs at least 2 concentration parameters")
        if not all(v > 0 and math.isfinite(v) for v in a):
            raise ValueError(f"Dirichlet concentrations must be positive, got {a}")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def symmetric(cls, m: int, alpha: float) -> "DirichletParams":
        return cls((float(alpha),) * m)

    @property
    def m(self) -> int:
        return len(self.alpha)

    def mean(self) -> np.ndarray:
        a = np.asarray(self.alpha)
        return a / a.sum()

    def variance(self) -> np.ndarray:
        a = np.asarray(self.alpha)
        a0 = a.sum()
        return a * (a0 - a) / (a0**2 * (a0 + 1))


def sample_dirichlet(params: DirichletParams, n: int, seed: int | np.random.Generator) -> np.ndarray:
    """Draw ``n`` points from ``Dir(alpha)`` as normalized Gamma variates.

    ``seed`` may be an integer or an existing ``Generator``; the same integer
    always yields the same ``(n, m)`` array.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    a = np.asarray(params.alpha)
    g = rng.standard_gamma(a, size=(n, a.size))
    s = g.sum(axis=1, keepdims=True)
    # tiny alphas can underflow every gamma draw to 0; such rows go to a
    # vertex picked with probability alpha_i / sum(alpha) (the small-alpha limit)
    zero = s[:, 0] == 0
    if zero.any():
        idx = rng.choice(a.size, size=int(zero.sum()), p=a / a.sum())
        g[zero] = 0.0
        g[np.flatnonzero(zero), idx] = 1.0
        s = g.sum(axis=1, keepdims=True)
    return _frozen(g / s)


def dirichlet_log_density(params: DirichletParams, point: Sequence[float]) -> float:
    x = validate_simplex(point)
    a = np.asarray(params.alpha)
    if x.size != a.size:
        raise ValueError(f"dimension mismatch: point has {x.size}, alpha has {a.size}")
    on_face = x <= 0.0
    # with any alpha_i < 1 the density blows up somewhere on the boundary;
    # only strictly interior points are accepted then
    if np.any(on_face) and np.any(a < 1.0):
        raise ValueError("boundary point with some alpha_i < 1: density undefined there")
    if np.any(on_face & (a > 1.0)):
        return -math.inf
    log_norm = gammaln(a.sum()) - gammaln(a).sum()
    live = ~on_face
    return float(log_norm + np.sum((a[live] - 1.0) * np.log(x[live])))


def dirichlet_density(params: DirichletParams, point: Sequence[float]) -> float:
    """Dirichlet pdf at ``point``.

    Normalized against Lebesgue measure on the first ``m - 1`` coordinates,
    so ``Dir(1, 1, 1)`` has constant density ``Gamma(3) = 2``.
    """
    return math.exp(dirichlet_log_density(params, point))
