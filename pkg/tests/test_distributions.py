"""Hypergeometric law, normal reference, and the normal-approximation gap.

Expected values come from independent routes: enumeration over all
permutations, direct binomial-coefficient arithmetic, scipy, and mpmath.
"""

import itertools
import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from critsurf import (
    HypergeomParams,
    InputError,
    RankPairs,
    copula_grid,
    hypergeom_cdf,
    hypergeom_pmf,
    hypergeom_support,
    normal_approx_gap,
    normal_cdf,
    normal_quantile,
)
from critsurf.depcore import _hypergeom_pmf_vector


# ---------------------------------------------------------------------------
# hypergeometric pmf / cdf
# ---------------------------------------------------------------------------


def test_pmf_two_by_two():
    # both permutations of two ranks are equally likely
    params = HypergeomParams(m=1, l=1, n=2)
    assert hypergeom_pmf(params, 0) == pytest.approx(0.5, abs=1e-15)
    assert hypergeom_pmf(params, 1) == pytest.approx(0.5, abs=1e-15)


def test_pmf_direct_binomial_value():
    # C(2,1) * C(2,1) / C(4,2) = 4/6
    params = HypergeomParams(m=2, l=2, n=4)
    assert hypergeom_pmf(params, 1) == pytest.approx(2.0 / 3.0, abs=1e-14)


def test_pmf_zero_outside_support():
    params = HypergeomParams(m=3, l=4, n=6)
    lo, hi = hypergeom_support(params)
    assert (lo, hi) == (1, 3)
    assert hypergeom_pmf(params, lo - 1) == 0.0
    assert hypergeom_pmf(params, hi + 1) == 0.0
    assert hypergeom_pmf(params, -5) == 0.0


@pytest.mark.parametrize(
    "m,l,n",
    [(1, 1, 2), (2, 2, 4), (3, 4, 6), (10, 15, 25), (50, 50, 100), (7, 193, 200),
     (40_000, 27_000, 100_000)],
)
def test_pmf_sums_to_one(m, l, n):
    total = float(_hypergeom_pmf_vector(HypergeomParams(m=m, l=l, n=n)).sum())
    assert total == pytest.approx(1.0, abs=1e-12)


def test_cdf_monotone_and_terminal():
    params = HypergeomParams(m=10, l=15, n=25)
    lo, hi = hypergeom_support(params)
    values = [hypergeom_cdf(params, c) for c in range(lo - 2, hi + 3)]
    assert values == sorted(values)
    assert values[0] == 0.0
    assert hypergeom_cdf(params, hi) == pytest.approx(1.0, abs=1e-12)
    assert hypergeom_cdf(params, hi + 100) == 1.0
    assert hypergeom_cdf(params, min(params.m, params.l)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("m,l,n", [(3, 5, 9), (10, 15, 25), (20, 60, 80), (1, 1, 2)])
def test_pmf_cdf_match_scipy(m, l, n):
    params = HypergeomParams(m=m, l=l, n=n)
    ref = stats.hypergeom(n, l, m)
    lo, hi = hypergeom_support(params)
    for c in range(lo, hi + 1):
        assert hypergeom_pmf(params, c) == pytest.approx(ref.pmf(c), abs=1e-13)
        assert hypergeom_cdf(params, c) == pytest.approx(ref.cdf(c), abs=1e-12)


def test_copula_counts_follow_hypergeometric_exhaustively():
    # all 24 rank pairings at n=4: the count at (2, 2) matches the law exactly
    n, i, j = 4, 2, 2
    dist = Counter()
    for sigma in itertools.permutations(range(1, n + 1)):
        grid = copula_grid(RankPairs(np.arange(1, n + 1), np.array(sigma), False))
        dist[int(grid.counts[i, j])] += 1
    params = HypergeomParams(m=i, l=j, n=n)
    lo, hi = hypergeom_support(params)
    for c in range(lo, hi + 1):
        assert dist[c] / 24 == pytest.approx(hypergeom_pmf(params, c), abs=1e-14)


def test_params_validation():
    with pytest.raises(InputError):
        HypergeomParams(m=5, l=1, n=4)
    with pytest.raises(InputError):
        HypergeomParams(m=-1, l=1, n=4)
    assert HypergeomParams.from_point(25, 0.4, 0.6) == HypergeomParams(m=10, l=15, n=25)


# ---------------------------------------------------------------------------
# normal cdf / quantile
# ---------------------------------------------------------------------------


def test_normal_cdf_center():
    assert normal_cdf(0.0) == 0.5


def test_normal_quantile_center():
    assert normal_quantile(0.5) == 0.0


def test_normal_cdf_against_mpmath():
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 30
    for x in np.linspace(-8.0, 8.0, 81):
        ref = float(mpmath.ncdf(x))
        assert abs(normal_cdf(float(x)) - ref) <= 1e-12


def test_upper_tail_at_one():
    # 1 - Phi(1) = 0.158655..., inside the stated tail envelope
    tail = 1.0 - normal_cdf(1.0)
    assert tail == pytest.approx(0.15865525393145705, abs=1e-13)
    density = math.exp(-0.5) / math.sqrt(2 * math.pi)
    assert density == pytest.approx(0.2419707245191433, abs=1e-14)
    # the tail envelope (phi/x - phi/x^3, phi/x) degenerates to (0, phi(1)) here
    assert 0.0 < tail < density


def test_gaussian_tail_envelope_holds():
    # density/x - density/x^3 < 1 - cdf(x) < density/x on 1000 points;
    # the tail is evaluated as cdf(-x), the numerically exact complement
    x = np.concatenate([np.linspace(1e-3, 10.0, 500), np.geomspace(1e-3, 10.0, 500)])
    density = np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    upper_tail = normal_cdf(-x)
    assert np.all(upper_tail < density / x)
    assert np.all(density / x - density / x**3 < upper_tail)


def test_normal_quantile_inverts_cdf():
    for x in np.linspace(-5.5, 5.5, 45):
        assert normal_quantile(normal_cdf(float(x))) == pytest.approx(float(x), abs=1e-9)
    for p in (1e-10, 1e-4, 0.2, 0.5, 0.8, 1 - 1e-4):
        assert normal_cdf(normal_quantile(p)) == pytest.approx(p, rel=1e-9)


def test_normal_quantile_rejects_endpoints():
    for p in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(InputError):
            normal_quantile(p)


# ---------------------------------------------------------------------------
# normal approximation gap
# ---------------------------------------------------------------------------


def brute_force_gap(n, u, v):
    """Gap recomputed from an exhaustive enumeration of permutations."""
    m = math.floor(n * u)
    l = math.floor(n * v)
    dist = Counter()
    for sigma in itertools.permutations(range(1, n + 1)):
        dist[sum(1 for t in range(m) if sigma[t] <= l)] += 1
    total = math.factorial(n)
    ks = np.array(sorted(dist))
    pmf = np.array([dist[int(c)] for c in ks]) / total
    cdf = np.cumsum(pmf)
    cdf_left = np.concatenate([[0.0], cdf[:-1]])
    f, p = m / n, l / n
    scale = math.sqrt(n / (p * (1 - p) * f * (1 - f)))
    x = ks / n - u * v
    approx = normal_cdf(scale * x)
    return float(np.max(np.maximum(np.abs(cdf - approx), np.abs(cdf_left - approx))))


def test_gap_shrinks_with_n():
    assert normal_approx_gap(400, 0.5, 0.5) < normal_approx_gap(25, 0.5, 0.5)


def test_gap_nonnegative_on_grid():
    for n in (5, 12, 37):
        for u in (0.21, 0.5, 0.83):
            for v in (0.3, 0.66):
                assert normal_approx_gap(n, u, v) >= 0.0


@pytest.mark.parametrize("u,v", [(0.5, 0.5), (0.34, 0.51), (0.5, 0.67)])
def test_gap_matches_permutation_oracle_at_n6(u, v):
    assert normal_approx_gap(6, u, v) == pytest.approx(brute_force_gap(6, u, v), abs=1e-12)


def test_gap_rejects_degenerate_points():
    with pytest.raises(InputError, match="degenerate"):
        normal_approx_gap(5, 0.1, 0.5)  # floor(5 * 0.1) = 0
    with pytest.raises(InputError):
        normal_approx_gap(10, 0.5, 0.05)
    with pytest.raises(InputError):
        normal_approx_gap(10, 1.0, 0.5)
    with pytest.raises(InputError):
        normal_approx_gap(1, 0.5, 0.5)
