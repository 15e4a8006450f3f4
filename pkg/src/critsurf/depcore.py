"""Rank statistics, empirical copula grids, quantile-dependence surfaces,
and the exact reference distributions used to check them.

The estimation pipeline implemented here is

    Sample --ranks--> RankPairs --prefix sum--> CopulaGrid
           --normalize--> FineQSurface --cell averaging--> QSurface

All operations are pure functions of their inputs plus an explicit seed;
with the same inputs and seed they return bit-identical results, and they
share no mutable state, so concurrent use is safe.

The hypergeometric law of the rescaled copula counts under independence,
and the standard normal distribution, are provided as exact references:
Monte-Carlo behaviour elsewhere in the package is validated against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InputError

__all__ = [
    "Sample",
    "RankPairs",
    "CopulaGrid",
    "FineQSurface",
    "QSurface",
    "HypergeomParams",
    "compute_ranks",
    "copula_grid",
    "fine_q_surface",
    "coarsen",
    "hypergeom_support",
    "hypergeom_pmf",
    "hypergeom_cdf",
    "normal_cdf",
    "normal_quantile",
    "normal_approx_gap",
]


def _as_float_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise InputError(f"{name} contains a non-finite value at position {bad}")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Sample:
    """Paired real observations, the raw input of the independence test.

    Both coordinate vectors must be finite and of equal length n >= 2.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = _as_float_vector(self.x, "x")
        y = _as_float_vector(self.y, "y")
        if x.shape[0] != y.shape[0]:
            raise InputError(f"x and y differ in length: {x.shape[0]} vs {y.shape[0]}")
        if x.shape[0] < 2:
            raise InputError("a sample needs at least two observations")
        object.__setattr__(self, "x", _freeze(x))
        object.__setattr__(self, "y", _freeze(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def pairs(self) -> np.ndarray:
        """The observations as an (n, 2) array."""
        return np.column_stack([self.x, self.y])

    @classmethod
    def from_pairs(cls, pairs) -> "Sample":
        arr = np.asarray(pairs, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InputError(f"pairs must have shape (n, 2), got {arr.shape}")
        return cls(arr[:, 0], arr[:, 1])


@dataclass(frozen=True, eq=False)
class RankPairs:
    """Ranks of the two coordinates, each a permutation of 1..n.

    ``tie_broken`` records whether any tied values had to be separated
    by the seeded random tie-break.
    """

    r: np.ndarray
    s: np.ndarray
    tie_broken: bool

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=np.int64)
        s = np.asarray(self.s, dtype=np.int64)
        if r.ndim != 1 or s.ndim != 1 or r.shape != s.shape:
            raise InputError("rank vectors must be one-dimensional and of equal length")
        n = r.shape[0]
        for name, vec in (("r", r), ("s", s)):
            if not _is_permutation(vec, n):
                raise InputError(f"{name} is not a permutation of 1..{n}")
        object.__setattr__(self, "r", _freeze(r))
        object.__setattr__(self, "s", _freeze(s))

    @property
    def n(self) -> int:
        return self.r.shape[0]


def _is_permutation(vec: np.ndarray, n: int) -> bool:
    if vec.shape[0] != n or n == 0:
        return False
    if vec.min() < 1 or vec.max() > n:
        return False
    return bool(np.all(np.bincount(vec, minlength=n + 1)[1:] == 1))


@dataclass(frozen=True, eq=False)
class CopulaGrid:
    """Cumulative rank counts on the full (n+1) x (n+1) grid.

    ``counts[i][j]`` is the number of observations whose ranks satisfy
    r <= i and s <= j; equivalently n times the empirical copula at
    (i/n, j/n).  The margins are pinned: row and column 0 are zero and
    the corner equals n.
    """

    n: int
    counts: np.ndarray

    def __post_init__(self) -> None:
        n = self.n
        counts = np.asarray(self.counts, dtype=np.int64)
        if n < 1 or counts.shape != (n + 1, n + 1):
            raise InputError(f"counts must have shape ({n + 1}, {n + 1}), got {counts.shape}")
        if np.any(counts[0, :]) or np.any(counts[:, 0]):
            raise InputError("counts must vanish on row 0 and column 0")
        if counts[n, n] != n:
            raise InputError(f"counts[n][n] must equal n={n}, got {counts[n, n]}")
        if np.any(np.diff(counts, axis=0) < 0) or np.any(np.diff(counts, axis=1) < 0):
            raise InputError("counts must be nondecreasing along rows and columns")
        cell = counts[1:, 1:] - counts[:-1, 1:] - counts[1:, :-1] + counts[:-1, :-1]
        if cell.min() < 0 or cell.max() > 1:
            raise InputError("counts must place at most one observation per unit cell")
        object.__setattr__(self, "counts", _freeze(counts))


@dataclass(frozen=True, eq=False)
class FineQSurface:
    """Quantile-dependence values on the finest grid (i/n, j/n).

    Boundary rows and columns (i or j in {0, n}) are exactly zero by
    convention; interior entries are the normalized copula deviations.
    """

    n: int
    values: np.ndarray

    def __post_init__(self) -> None:
        n = self.n
        values = np.asarray(self.values, dtype=float)
        if n < 1 or values.shape != (n + 1, n + 1):
            raise InputError(f"values must have shape ({n + 1}, {n + 1}), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InputError("surface values must be finite")
        for idx in (0, n):
            if np.any(values[idx, :]) or np.any(values[:, idx]):
                raise InputError("boundary rows and columns must be exactly zero")
        if np.abs(values).max() > n:
            raise InputError("surface values exceed the attainable range")
        object.__setattr__(self, "values", _freeze(values))


@dataclass(frozen=True, eq=False)
class QSurface:
    """Cell-averaged quantile-dependence surface on a k x k grid.

    ``cells[s][t]`` (0-based indexing into the arrays; reporting uses
    1-based cell labels) is the mean of the fine-grid values whose grid
    point falls in the half-open cell ((s-1)/k, s/k] x ((t-1)/k, t/k];
    ``cell_counts`` records how many fine points each mean averages.
    Every fine point with both indices in 1..n belongs to exactly one
    cell, so cell_counts sums to n^2.
    """

    n: int
    k: int
    cells: np.ndarray
    cell_counts: np.ndarray

    def __post_init__(self) -> None:
        n, k = self.n, self.k
        cells = np.asarray(self.cells, dtype=float)
        counts = np.asarray(self.cell_counts, dtype=np.int64)
        if not 1 <= k <= n:
            raise InputError(f"need 1 <= k <= n, got k={k}, n={n}")
        if cells.shape != (k, k) or counts.shape != (k, k):
            raise InputError(f"cells and cell_counts must be ({k}, {k}) matrices")
        if not np.all(np.isfinite(cells)):
            raise InputError("cell values must be finite")
        if counts.min() < 1:
            raise InputError("every cell must contain at least one fine-grid point")
        if int(counts.sum()) != n * n:
            raise InputError(f"cell_counts must sum to n^2={n * n}, got {int(counts.sum())}")
        object.__setattr__(self, "cells", _freeze(cells))
        object.__setattr__(self, "cell_counts", _freeze(counts))


@dataclass(frozen=True, slots=True)
class HypergeomParams:
    """Parameters of the null law of the rescaled copula counts.

    At a point (u, v) of the unit square the count n*C_n(u, v) follows,
    under independence, the hypergeometric distribution with ``m`` draws
    from a population of ``n`` items of which ``l`` are marked.
    """

    m: int
    l: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InputError(f"population size must be positive, got n={self.n}")
        if not 0 <= self.m <= self.n:
            raise InputError(f"need 0 <= m <= n, got m={self.m}, n={self.n}")
        if not 0 <= self.l <= self.n:
            raise InputError(f"need 0 <= l <= n, got l={self.l}, n={self.n}")

    @classmethod
    def from_point(cls, n: int, u: float, v: float) -> "HypergeomParams":
        """Parameters at grid point (u, v): m = floor(n*u), l = floor(n*v)."""
        if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
            raise InputError(f"(u, v) must lie in the unit square, got ({u}, {v})")
        return cls(m=int(math.floor(n * u)), l=int(math.floor(n * v)), n=n)


# ---------------------------------------------------------------------------
# Rank and grid operations
# ---------------------------------------------------------------------------


def _ranks_with_random_ties(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Ranks 1..n; ties receive a uniformly random relative order.

    A random shuffle followed by a stable sort makes the rank order of
    tied entries the (uniform) shuffle order while leaving distinct
    values ranked by value.
    """
    n = values.shape[0]
    shuffle = rng.permutation(n)
    order = np.argsort(values[shuffle], kind="stable")
    ranks = np.empty(n, dtype=np.int64)
    ranks[shuffle[order]] = np.arange(1, n + 1)
    return ranks


def compute_ranks(sample: Sample, seed=None) -> RankPairs:
    """Rank both coordinates of ``sample``, breaking ties at random.

    Ties are separated by a seeded uniform permutation among the tied
    entries so that each rank vector is a permutation of 1..n, which is
    what the permutation-based null calibration requires.  The result is
    deterministic for a given seed.  Midranks are deliberately not used:
    they would break the permutation structure of the null law.
    """
    rng = np.random.default_rng(seed)
    r = _ranks_with_random_ties(sample.x, rng)
    s = _ranks_with_random_ties(sample.y, rng)
    tie_broken = bool(
        np.unique(sample.x).size < sample.n or np.unique(sample.y).size < sample.n
    )
    return RankPairs(r=r, s=s, tie_broken=tie_broken)


def copula_grid(ranks: RankPairs) -> CopulaGrid:
    """Cumulative counts of rank pairs via a two-dimensional prefix sum.

    Places one indicator per observation at (r_t, s_t) on an
    (n+1) x (n+1) lattice and prefix-sums along both axes, O(n^2) total.
    """
    n = ranks.n
    points = np.zeros((n + 1, n + 1), dtype=np.int64)
    points[ranks.r, ranks.s] = 1
    counts = points.cumsum(axis=0).cumsum(axis=1)
    return CopulaGrid(n=n, counts=counts)


def fine_q_surface(grid: CopulaGrid) -> FineQSurface:
    """Quantile-dependence values at every grid point (i/n, j/n).

    Interior entries are (C_n(u, v) - u*v) / sqrt(u*v*(1-u)*(1-v)) with
    u = i/n and v = j/n; entries with u or v in {0, 1} are set to zero,
    anchoring the surface on the boundary of the unit square.
    """
    n = grid.n
    g = np.arange(n + 1) / n
    values = np.zeros((n + 1, n + 1))
    if n >= 2:
        u = g[1:n, None]
        v = g[None, 1:n]
        values[1:n, 1:n] = (grid.counts[1:n, 1:n] / n - u * v) / np.sqrt(
            u * v * (1.0 - u) * (1.0 - v)
        )
    return FineQSurface(n=n, values=values)


def _slab_last_index(n: int, k: int) -> np.ndarray:
    """0-based index of the last fine point in each of the k slabs."""
    s = np.arange(1, k + 1, dtype=np.int64)
    return (s * n) // k - 1


def _slab_of_index(n: int, k: int) -> np.ndarray:
    """0-based slab of each 0-based fine index m, i.e. of rank m + 1.

    Fine index i (1-based) belongs to slab ceil(i*k/n) because the cells
    are half-open on the left.
    """
    i = np.arange(1, n + 1, dtype=np.int64)
    return -(-(i * k) // n) - 1


def coarsen(fine: FineQSurface, k: int) -> QSurface:
    """Average the fine surface over a k x k partition of the square.

    Each fine point (i/n, j/n) with i, j in 1..n is assigned to the
    unique half-open cell ((s-1)/k, s/k] x ((t-1)/k, t/k] it falls in;
    the cell value is the arithmetic mean of its fine values.  The
    zero-valued points at i = n or j = n participate in the averages of
    the last row and column of cells, diluting them slightly.  k does
    not have to divide n; cell populations are then unequal.
    """
    n = fine.n
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise InputError(f"k must be an integer, got {k!r}")
    if not 1 <= k <= n:
        raise InputError(f"need 1 <= k <= n, got k={k}, n={n}")
    starts = np.concatenate([[0], _slab_last_index(n, k)[:-1] + 1])
    interior = fine.values[1:, 1:]
    rowsum = np.add.reduceat(interior, starts, axis=0)
    cellsum = np.add.reduceat(rowsum, starts, axis=1)
    sizes = np.diff(np.concatenate([[-1], _slab_last_index(n, k)]))
    cell_counts = np.outer(sizes, sizes)
    return QSurface(n=n, k=int(k), cells=cellsum / cell_counts, cell_counts=cell_counts)


# ---------------------------------------------------------------------------
# Exact reference distributions
# ---------------------------------------------------------------------------


def hypergeom_support(params: HypergeomParams) -> tuple[int, int]:
    """Inclusive support bounds of the count distribution."""
    lo = max(0, params.m + params.l - params.n)
    hi = min(params.m, params.l)
    return lo, hi


@lru_cache(maxsize=128)
def _pmf_vector_cached(m: int, l: int, n: int) -> np.ndarray:
    lo = max(0, m + l - n)
    hi = min(m, l)
    size = hi - lo + 1
    if size == 1:
        out = np.ones(1)
        out.setflags(write=False)
        return out
    # log pmf relative to the mode via the exact term ratios
    #   pmf(c+1)/pmf(c) = (l-c)(m-c) / ((c+1)(n-l-m+c+1)),
    # anchored at the mode so the running sums stay small where the
    # probability mass lives; log-factorial accumulation alone loses
    # about 1e-11 of the total mass once n reaches 1e5
    c = np.arange(lo, hi, dtype=np.int64)
    log_ratio = np.log((l - c) * (m - c)) - np.log((c + 1) * (n - l - m + c + 1))
    mode = min(max((m + 1) * (l + 1) // (n + 2), lo), hi)
    idx = mode - lo
    rel = np.empty(size)
    rel[idx] = 0.0
    rel[idx + 1 :] = np.cumsum(log_ratio[idx:])
    rel[:idx] = -np.cumsum(log_ratio[:idx][::-1])[::-1]
    out = np.exp(rel)
    out /= out.sum()
    out.setflags(write=False)
    return out


def _hypergeom_pmf_vector(params: HypergeomParams) -> np.ndarray:
    """pmf over the whole support, in support order."""
    return _pmf_vector_cached(params.m, params.l, params.n)


def hypergeom_pmf(params: HypergeomParams, count: int) -> float:
    """Exact probability that the rescaled copula count equals ``count``.

    Zero outside the support [max(0, m+l-n), min(m, l)].
    """
    lo, hi = hypergeom_support(params)
    if count < lo or count > hi:
        return 0.0
    return float(_hypergeom_pmf_vector(params)[count - lo])


def hypergeom_cdf(params: HypergeomParams, count: int) -> float:
    """Exact P(count' <= count), clamped to [0, 1]."""
    lo, hi = hypergeom_support(params)
    if count < lo:
        return 0.0
    if count >= hi:
        return 1.0
    pmf = _hypergeom_pmf_vector(params)
    return float(min(1.0, pmf[: count - lo + 1].sum()))


def normal_cdf(x):
    """Standard normal cumulative distribution function.

    Accepts scalars or arrays; accurate to full double precision.
    """
    out = ndtr(x)
    return float(out) if np.isscalar(x) else out


def normal_quantile(p):
    """Inverse of ``normal_cdf`` on (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise InputError("normal_quantile requires 0 < p < 1")
    out = ndtri(p)
    return float(out) if np.isscalar(p) else out


def normal_approx_gap(n: int, u: float, v: float) -> float:
    """Worst-case distance between the exact null law and its normal limit.

    Compares the exact distribution function of C_n(u, v) - u*v, a step
    function derived from the hypergeometric law, against the normal
    approximation with variance d_n/n, d_n = p(1-p)f(1-f) built from the
    rounded coordinates p = floor(n*v)/n, f = floor(n*u)/n.  The supremum
    of the difference is attained at a jump of the step function, so both
    one-sided limits at every jump are examined.
    """
    if n < 2:
        raise InputError(f"need n >= 2, got {n}")
    if not (0.0 < u < 1.0 and 0.0 < v < 1.0):
        raise InputError(f"(u, v) must lie in the open unit square, got ({u}, {v})")
    params = HypergeomParams.from_point(n, u, v)
    if params.m in (0, n) or params.l in (0, n):
        raise InputError(
            f"degenerate point: floor(n*u)={params.m}, floor(n*v)={params.l} "
            f"must lie strictly between 0 and n={n}"
        )
    f = params.m / n
    p = params.l / n
    d = p * (1.0 - p) * f * (1.0 - f)
    scale = math.sqrt(n / d)

    lo, hi = hypergeom_support(params)
    cdf = np.cumsum(_hypergeom_pmf_vector(params))
    cdf_left = np.concatenate([[0.0], cdf[:-1]])
    x = np.arange(lo, hi + 1) / n - u * v
    approx = ndtr(scale * x)
    return float(np.max(np.maximum(np.abs(cdf - approx), np.abs(cdf_left - approx))))
