"""Monte-Carlo calibration of the critical surfaces.

Under the null hypothesis the two rank vectors are independent uniform
permutations, so a null replicate is fully described by one random
permutation (the y-ranks against identity x-ranks).  This module draws
replicate surfaces from that null, selects per-cell lower/upper
thresholds as conservative order statistics, and searches for the
largest local significance level eta whose induced surfaces keep the
estimated global size (the probability that any cell escapes its band)
at or below the requested alpha.

Replicate seeds are derived from the master seed by a counter-based
split, so results are independent of batching and of any parallel
execution strategy: the i-th replicate is always bit-identical.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .depcore import QSurface, RankPairs, _slab_last_index, _slab_of_index
from .errors import CacheError, CalibrationError, InputError

__all__ = [
    "CalibrationConfig",
    "NullEnsemble",
    "CriticalSurfaces",
    "replicate_seed",
    "sample_null_surface",
    "generate_null_ensemble",
    "rank_surface",
    "surfaces_for_eta",
    "calibrate_eta",
    "save_surfaces",
    "load_surfaces",
    "exceedance_mask",
]

CACHE_FORMAT = "critsurf-surfaces"
CACHE_VERSION = 1


# ---------------------------------------------------------------------------
# Configuration and result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CalibrationConfig:
    """Size of the problem and of the Monte-Carlo effort.

    ``k`` defaults to floor(sqrt(n)).  10^5 replicates resolve local
    levels around 10^-4 well enough for desk work; publication-grade
    surfaces want 10^6 at a proportional memory and time cost.
    """

    n: int
    k: int | None = None
    alpha: float = 0.05
    replicates: int = 100_000
    master_seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise InputError(f"n must be an integer, got {self.n!r}")
        if self.n < 2:
            raise InputError(f"need n >= 2, got n={self.n}")
        k = self.k if self.k is not None else int(math.isqrt(self.n))
        if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
            raise InputError(f"k must be an integer, got {self.k!r}")
        if not 2 <= k <= self.n:
            raise InputError(f"need 2 <= k <= n, got k={k}, n={self.n}")
        object.__setattr__(self, "k", int(k))
        if not (isinstance(self.alpha, float) and 0.0 < self.alpha < 1.0):
            raise InputError(f"alpha must be a float in (0, 1), got {self.alpha!r}")
        if not isinstance(self.replicates, (int, np.integer)) or self.replicates < 1000:
            raise InputError(f"need replicates >= 1000, got {self.replicates!r}")
        if not isinstance(self.master_seed, (int, np.integer)):
            raise InputError(f"master_seed must be an integer, got {self.master_seed!r}")
        object.__setattr__(self, "replicates", int(self.replicates))
        object.__setattr__(self, "master_seed", int(self.master_seed))


@dataclass(frozen=True, eq=False)
class NullEnsemble:
    """Replicate surfaces drawn under independence, the calibration input.

    ``surfaces`` has shape (replicates, k, k); slice i is the cell matrix
    of the surface produced by ``sample_null_surface`` with the i-th
    derived replicate seed.
    """

    config: CalibrationConfig
    surfaces: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.config.replicates, self.config.k, self.config.k)
        if self.surfaces.shape != expected:
            raise InputError(
                f"ensemble shape {self.surfaces.shape} does not match config {expected}"
            )


@dataclass(frozen=True, eq=False)
class CriticalSurfaces:
    """Calibrated per-cell rejection thresholds.

    A data surface rejects locally at cell (s, t) when its value falls
    strictly below ``lower[s][t]`` or strictly above ``upper[s][t]``;
    the global test rejects when any cell does.  ``eta`` is the local
    significance level the thresholds realize and
    ``achieved_global_size`` the global size estimated on the
    calibration ensemble.
    """

    lower: np.ndarray
    upper: np.ndarray
    eta: float
    config: CalibrationConfig
    achieved_global_size: float

    def __post_init__(self) -> None:
        k = self.config.k
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != (k, k) or upper.shape != (k, k):
            raise InputError(f"surfaces must be ({k}, {k}) matrices")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise InputError("surfaces must not contain NaN")
        if np.any(lower > upper):
            raise InputError("lower surface exceeds upper surface in some cell")
        if np.any(lower > 0.0) or np.any(upper < 0.0):
            raise InputError("surfaces must bracket zero in every cell")
        n = self.config.n
        if not self.config.alpha / (n * n) <= self.eta <= self.config.alpha:
            raise InputError(
                f"eta={self.eta} outside [alpha/n^2, alpha] = "
                f"[{self.config.alpha / (n * n)}, {self.config.alpha}]"
            )
        if not 0.0 <= self.achieved_global_size <= self.config.alpha:
            raise InputError(
                f"achieved_global_size={self.achieved_global_size} outside [0, alpha]"
            )
        for name, arr in (("lower", lower), ("upper", upper)):
            object.__setattr__(self, name, arr.copy())
            getattr(self, name).setflags(write=False)


# ---------------------------------------------------------------------------
# Fast null-surface kernel
#
# The cell averages are linear in the cumulative rank counts, and each
# observation adds a rectangular patch of weight to those counts.  Splitting
# every patch into (full slab blocks) x (partial rows) x (partial columns)
# x (one corner) turns the per-replicate cost from O(n^2) into O(n*k),
# with all replicate-independent tables precomputed once per (n, k).
# ---------------------------------------------------------------------------


class _NullKernel:
    """Precomputed tables for evaluating cell-averaged surfaces in O(n*k)."""

    def __init__(self, n: int, k: int):
        self.n, self.k = n, k
        g = np.arange(1, n + 1) / n
        weight = np.zeros((n, n))
        uu = g[: n - 1, None]
        vv = g[None, : n - 1]
        weight[: n - 1, : n - 1] = 1.0 / np.sqrt(uu * vv * (1.0 - uu) * (1.0 - vv))

        self.slab = _slab_of_index(n, k)
        hi = _slab_last_index(n, k)
        lo = np.concatenate([[0], hi[:-1] + 1])
        self.starts = lo
        sizes = hi - lo + 1
        self.cell_counts = np.outer(sizes, sizes)

        # suffix[a, b] = sum of weight[a:, b:]
        suffix = np.zeros((n + 1, n + 1))
        suffix[:n, :n] = weight[::-1, ::-1].cumsum(axis=0).cumsum(axis=1)[::-1, ::-1]
        self.suffix = suffix

        hi1 = hi + 1
        self.full_block = (
            suffix[np.ix_(lo, lo)]
            - suffix[np.ix_(lo, hi1)]
            - suffix[np.ix_(hi1, lo)]
            + suffix[np.ix_(hi1, hi1)]
        )

        # row_partial[a, t]: rows a..end-of-a's-slab, all columns of slab t.
        # By symmetry of the weight matrix the same table serves column
        # partial sums with the roles of the axes exchanged.
        col_block = np.add.reduceat(weight, lo, axis=1)
        row_partial = np.empty_like(col_block)
        for s in range(k):
            block = col_block[lo[s] : hi[s] + 1]
            row_partial[lo[s] : hi[s] + 1] = block[::-1].cumsum(axis=0)[::-1]
        self.row_partial = row_partial

        product_weight = weight * np.outer(g, g)
        self.product_cellsum = np.add.reduceat(
            np.add.reduceat(product_weight, lo, axis=0), lo, axis=1
        )
        self.slab_end = hi[self.slab]

    def cells_batch(self, sigmas: np.ndarray) -> np.ndarray:
        """Cell matrices for a batch of 0-based null permutations.

        ``sigmas`` has shape (B, n); row b pairs x-rank m+1 with y-rank
        sigmas[b, m] + 1.  Results are bit-identical regardless of how
        replicates are grouped into batches.
        """
        B, n = sigmas.shape
        k = self.k
        slab, suffix, row_partial = self.slab, self.suffix, self.row_partial

        slab_x = np.broadcast_to(slab, (B, n))
        slab_y = slab[sigmas]
        flat = (np.arange(B)[:, None] * (k * k) + slab_x * k + slab_y).ravel()

        histogram = np.bincount(flat, minlength=B * k * k).reshape(B, k, k)
        prefix = histogram.cumsum(axis=1).cumsum(axis=2)
        strictly_before = np.zeros_like(prefix)
        strictly_before[:, 1:, 1:] = prefix[:, :-1, :-1]
        full_term = self.full_block[None] * strictly_before

        m_idx = np.broadcast_to(np.arange(n), (B, n))
        end_x = np.broadcast_to(self.slab_end, (B, n)) + 1
        end_y = self.slab_end[sigmas] + 1
        corner = (
            suffix[m_idx, sigmas]
            - suffix[m_idx, end_y]
            - suffix[end_x, sigmas]
            + suffix[end_x, end_y]
        )
        corner_term = np.bincount(
            flat, weights=corner.ravel(), minlength=B * k * k
        ).reshape(B, k, k)

        t_grid = np.arange(k)
        mask_row = t_grid[None, None, :] > slab_y[:, :, None]
        row_term = np.add.reduceat(row_partial[None] * mask_row, self.starts, axis=1)

        inverse = np.empty_like(sigmas)
        np.put_along_axis(inverse, sigmas, np.ascontiguousarray(m_idx), axis=1)
        mask_col = t_grid[None, None, :] > slab[inverse][:, :, None]
        col_term = np.add.reduceat(
            row_partial[None] * mask_col, self.starts, axis=1
        ).transpose(0, 2, 1)

        weighted = full_term + corner_term + row_term + col_term
        return (weighted / n - self.product_cellsum[None]) / self.cell_counts[None]


@lru_cache(maxsize=8)
def _kernel(n: int, k: int) -> _NullKernel:
    return _NullKernel(n, k)


# ---------------------------------------------------------------------------
# Null sampling
# ---------------------------------------------------------------------------


def replicate_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Seed of the ``index``-th replicate, split off the master seed.

    Uses the spawn-key mechanism of numpy's SeedSequence, so the mapping
    (master_seed, index) -> stream is fixed, collision-resistant, and
    independent of how many replicates any worker processes.
    """
    if index < 0:
        raise InputError(f"replicate index must be nonnegative, got {index}")
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))


def _null_permutations(config: CalibrationConfig, lo: int, hi: int) -> np.ndarray:
    sigmas = np.empty((hi - lo, config.n), dtype=np.int64)
    for i in range(lo, hi):
        rng = np.random.default_rng(replicate_seed(config.master_seed, i))
        sigmas[i - lo] = rng.permutation(config.n)
    return sigmas


def sample_null_surface(config: CalibrationConfig, seed) -> QSurface:
    """One replicate surface under independence.

    Draws a uniformly random permutation for the y-ranks against identity
    x-ranks, which reproduces the joint rank distribution of independent
    continuous pairs, and evaluates the cell-averaged surface of that
    rank configuration (equal, up to rounding, to running the full
    grid pipeline on the permuted ranks).
    """
    rng = np.random.default_rng(seed)
    sigma = rng.permutation(config.n)
    kernel = _kernel(config.n, config.k)
    cells = kernel.cells_batch(sigma[None, :])[0]
    return QSurface(
        n=config.n, k=config.k, cells=cells, cell_counts=kernel.cell_counts
    )


def rank_surface(ranks: RankPairs, k: int) -> QSurface:
    """Cell-averaged surface of a rank configuration.

    Equal to coarsening the fine surface of the ranks, but evaluated
    through the same floating-point path as the calibration ensemble.
    The null law of the cells has sizeable atoms and the calibrated
    thresholds sit exactly on attained values, so tests must reproduce
    calibration values bit for bit: a last-ulp difference from a
    different summation order would turn a tie into a spurious
    exceedance.
    """
    n = ranks.n
    kernel = _kernel(n, k)
    inverse = np.empty(n, dtype=np.int64)
    inverse[ranks.r - 1] = np.arange(n)
    sigma = (ranks.s - 1)[inverse]
    cells = kernel.cells_batch(sigma[None, :])[0]
    return QSurface(n=n, k=k, cells=cells, cell_counts=kernel.cell_counts)


def generate_null_ensemble(
    config: CalibrationConfig, batch_size: int = 256
) -> NullEnsemble:
    """All replicate surfaces for ``config``, shape (replicates, k, k).

    Replicate i uses ``replicate_seed(config.master_seed, i)``; the
    output does not depend on ``batch_size``, which only trades memory
    for speed.
    """
    if batch_size < 1:
        raise InputError(f"batch_size must be positive, got {batch_size}")
    R = config.replicates
    kernel = _kernel(config.n, config.k)
    out = np.empty((R, config.k, config.k))
    for lo in range(0, R, batch_size):
        hi = min(lo + batch_size, R)
        out[lo:hi] = kernel.cells_batch(_null_permutations(config, lo, hi))
    return NullEnsemble(config=config, surfaces=out)


# ---------------------------------------------------------------------------
# Threshold selection and level search
# ---------------------------------------------------------------------------


def _order_statistic_index(replicates: int, eta: float) -> int:
    return int(math.floor(replicates * eta / 2.0 + 1e-9))


def surfaces_for_eta(ensemble: NullEnsemble, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell thresholds at local level ``eta``.

    The lower threshold of a cell is the j-th smallest null value with
    j = floor(replicates * eta / 2); at most (j-1)/replicates of the
    calibration values fall strictly below it, which keeps each
    one-sided local test conservatively within eta/2.  The upper
    threshold is symmetric from above.  When j = 0 the thresholds are
    -inf/+inf sentinels: no rejection is possible at that level.
    """
    if not 0.0 < eta < 1.0:
        raise InputError(f"eta must lie in (0, 1), got {eta}")
    R = ensemble.config.replicates
    k = ensemble.config.k
    j = _order_statistic_index(R, eta)
    lower = np.full((k, k), -np.inf)
    upper = np.full((k, k), np.inf)
    if j == 0:
        return lower, upper
    flat = ensemble.surfaces.reshape(R, k * k)
    for c in range(k * k):
        col = np.partition(flat[:, c], [j - 1, R - j])
        lower.flat[c] = col[j - 1]
        upper.flat[c] = col[R - j]
    return lower, upper


def exceedance_mask(
    surfaces: np.ndarray, lower: np.ndarray, upper: np.ndarray
) -> np.ndarray:
    """Boolean vector: which replicate surfaces escape the band anywhere."""
    flat = surfaces.reshape(surfaces.shape[0], -1)
    return np.any((flat < lower.ravel()) | (flat > upper.ravel()), axis=1)


def _min_exceedance_level(ensemble: NullEnsemble) -> np.ndarray:
    """Per replicate, the smallest order-statistic index j at which it
    would escape the band built from the j-th extreme order statistics.

    A value below the lower threshold at index j requires at most j - 1
    calibration values at or below it; ranking every value within its own
    cell column therefore converts threshold search into quantile lookup
    on this integer statistic.
    """
    R = ensemble.config.replicates
    k = ensemble.config.k
    flat = ensemble.surfaces.reshape(R, k * k)
    level = np.full(R, R, dtype=np.int64)
    for c in range(k * k):
        col = flat[:, c]
        ordered = np.sort(col)
        at_most = np.searchsorted(ordered, col, side="right")
        strictly_below = np.searchsorted(ordered, col, side="left")
        np.minimum(level, at_most + 1, out=level)  # first j rejecting from below
        np.minimum(level, R + 1 - strictly_below, out=level)  # ... from above
    return level


def calibrate_eta(ensemble: NullEnsemble, alpha: float) -> CriticalSurfaces:
    """Largest local level keeping the estimated global size within alpha.

    Searches the discrete grid of achievable levels m/replicates; the
    global size is nondecreasing in the level, so the search reduces to
    a quantile of the per-replicate minimal exceedance index.  The
    selected eta always satisfies alpha/n^2 <= eta <= alpha; failure to
    find any admissible level is impossible for valid input and raises.
    """
    if not (isinstance(alpha, float) and 0.0 < alpha < 1.0):
        raise InputError(f"alpha must be a float in (0, 1), got {alpha!r}")
    config = ensemble.config
    R = config.replicates
    j_cap = int(math.floor((alpha * R - 1.0) / 2.0 + 1e-9))
    if j_cap < 1:
        raise CalibrationError(
            f"replicates={R} cannot resolve a local level below alpha={alpha}; "
            "increase the replicate count"
        )
    level = np.sort(_min_exceedance_level(ensemble))
    allowed = int(math.floor(alpha * R + 1e-9))
    j_star = min(int(level[allowed]) - 1, j_cap, R // 2)
    if j_star < 1:
        raise CalibrationError(
            "no admissible local level found; the ensemble is degenerate"
        )
    eta = (2 * j_star + 1) / R
    lower, upper = surfaces_for_eta(ensemble, eta)
    achieved = float(np.searchsorted(level, j_star, side="right") / R)
    return CriticalSurfaces(
        lower=lower,
        upper=upper,
        eta=eta,
        config=replace(config, alpha=alpha),
        achieved_global_size=achieved,
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _matrix_to_hex(matrix: np.ndarray) -> list[list[str]]:
    return [[float(v).hex() for v in row] for row in matrix]


def _matrix_from_hex(rows, k: int, name: str) -> np.ndarray:
    try:
        matrix = np.array(
            [[float.fromhex(v) for v in row] for row in rows], dtype=float
        )
    except (TypeError, ValueError) as exc:
        raise CacheError(f"field '{name}' is not a matrix of hex floats: {exc}") from exc
    if matrix.shape != (k, k):
        raise CacheError(f"field '{name}' has shape {matrix.shape}, expected ({k}, {k})")
    return matrix


_CACHE_FIELDS = (
    "format",
    "version",
    "n",
    "k",
    "alpha",
    "eta",
    "replicates",
    "master_seed",
    "achieved_global_size",
    "lower",
    "upper",
)


def save_surfaces(cs: CriticalSurfaces, path) -> None:
    """Write the surfaces and their provenance as versioned JSON.

    Matrices are encoded as hexadecimal float strings, so the round trip
    through ``load_surfaces`` is bit-exact, including infinite sentinels.
    """
    payload = {
        "format": CACHE_FORMAT,
        "version": CACHE_VERSION,
        "n": cs.config.n,
        "k": cs.config.k,
        "alpha": cs.config.alpha,
        "eta": cs.eta,
        "replicates": cs.config.replicates,
        "master_seed": cs.config.master_seed,
        "achieved_global_size": cs.achieved_global_size,
        "lower": _matrix_to_hex(cs.lower),
        "upper": _matrix_to_hex(cs.upper),
    }
    text = json.dumps(payload, indent=2)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")


def load_surfaces(path) -> CriticalSurfaces:
    """Read surfaces written by ``save_surfaces``, enforcing the schema.

    Version mismatches, missing fields, malformed values, and invariant
    violations (for example a lower threshold above the upper one) are
    rejected with a descriptive error; nothing is silently repaired.
    """
    if not os.path.exists(path):
        raise CacheError(f"surface cache not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CacheError(f"cannot read surface cache {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise CacheError(f"surface cache {path} does not hold a JSON object")
    for field in _CACHE_FIELDS:
        if field not in payload:
            raise CacheError(f"surface cache {path} is missing field '{field}'")
    if payload["format"] != CACHE_FORMAT:
        raise CacheError(f"unrecognized cache format {payload['format']!r}")
    if payload["version"] != CACHE_VERSION:
        raise CacheError(
            f"cache version {payload['version']!r} not supported "
            f"(expected {CACHE_VERSION})"
        )
    try:
        config = CalibrationConfig(
            n=payload["n"],
            k=payload["k"],
            alpha=payload["alpha"],
            replicates=payload["replicates"],
            master_seed=payload["master_seed"],
        )
        k = config.k
        cs = CriticalSurfaces(
            lower=_matrix_from_hex(payload["lower"], k, "lower"),
            upper=_matrix_from_hex(payload["upper"], k, "upper"),
            eta=float(payload["eta"]),
            config=config,
            achieved_global_size=float(payload["achieved_global_size"]),
        )
    except InputError as exc:
        raise CacheError(f"surface cache {path} violates an invariant: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise CacheError(f"surface cache {path} has a malformed field: {exc}") from exc
    return cs
