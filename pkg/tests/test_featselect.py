import itertools
import math

import numpy as np
import pytest
from scipy import stats as sps

from medstate.featselect import (
    anderson_darling,
    rank_sum,
    screen,
    t_test_unpaired,
)


def _ranksum_p_enum(a, b):
    # brute-force two-sided permutation p over all rank subsets
    pooled = np.concatenate([a, b])
    ranks = sps.rankdata(pooled)
    na = len(a)
    w = float(ranks[:na].sum())
    sums = np.array([
        ranks[list(idx)].sum()
        for idx in itertools.combinations(range(len(pooled)), na)
    ])
    p_le = float(np.mean(sums <= w + 1e-9))
    p_ge = float(np.mean(sums >= w - 1e-9))
    return min(1.0, 2.0 * min(p_le, p_ge))


# --- normality test -----------------------------------------------------


def test_anderson_darling_gaussian_acceptance_rate():
    rng = np.random.default_rng(0)
    accepted = sum(
        anderson_darling(rng.normal(size=200))[1] for _ in range(500)
    )
    assert 0.92 <= accepted / 500 <= 0.98


def test_anderson_darling_rejects_uniform():
    rng = np.random.default_rng(1)
    accepted = sum(
        anderson_darling(rng.uniform(size=200))[1] for _ in range(500)
    )
    assert accepted <= 5


def test_anderson_darling_scale_and_shift_invariant():
    rng = np.random.default_rng(2)
    x = rng.normal(size=64)
    stat0, _ = anderson_darling(x)
    stat1, _ = anderson_darling(7.0 * x - 100.0)
    assert stat1 == pytest.approx(stat0, rel=1e-9)


def test_anderson_darling_degenerate_and_short():
    stat, is_normal = anderson_darling(np.full(20, 3.0))
    assert math.isinf(stat) and not is_normal
    with pytest.raises(ValueError, match="at least 8"):
        anderson_darling(np.arange(7.0))


# --- t-test --------------------------------------------------------------


def test_t_test_frozen_example():
    t, p = t_test_unpaired([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    assert t == pytest.approx(-3.6742346141747673, rel=1e-12)
    assert p == pytest.approx(0.0214, abs=5e-4)


def test_t_test_symmetry_and_identity():
    t_ab, p_ab = t_test_unpaired([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    t_ba, p_ba = t_test_unpaired([4.0, 5.0, 6.0], [1.0, 2.0, 3.0])
    assert t_ba == -t_ab and p_ba == p_ab
    t, p = t_test_unpaired([2.0, 2.0, 2.0], [2.0, 2.0, 2.0])
    assert (t, p) == (0.0, 1.0)
    t, p = t_test_unpaired([1.0, 1.0], [2.0, 2.0])
    assert math.isinf(t) and t < 0 and p == 0.0


def test_t_test_matches_scipy():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = rng.normal(size=rng.integers(2, 30))
        b = rng.normal(loc=rng.normal(), size=rng.integers(2, 30))
        t, p = t_test_unpaired(a, b)
        ref = sps.ttest_ind(a, b, equal_var=True)
        assert t == pytest.approx(ref.statistic, rel=1e-9)
        assert p == pytest.approx(ref.pvalue, rel=1e-9)


def test_t_test_null_rejection_rate():
    rng = np.random.default_rng(4)
    hits = sum(
        t_test_unpaired(rng.normal(size=20), rng.normal(size=20))[1] < 0.05
        for _ in range(400)
    )
    assert 0.02 <= hits / 400 <= 0.09


def test_t_test_rejects_tiny_groups():
    with pytest.raises(ValueError, match="at least 2"):
        t_test_unpaired([1.0], [2.0, 3.0])


# --- rank-sum test --------------------------------------------------------


def test_rank_sum_exact_frozen_example():
    w, p = rank_sum([1.0, 2.0], [3.0, 4.0])
    assert w == 3.0
    assert p == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_rank_sum_exact_matches_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(30):
        na = int(rng.integers(2, 7))
        nb = int(rng.integers(2, 7))
        # integer draws force ties through the midrank path
        a = rng.integers(0, 6, size=na).astype(float)
        b = rng.integers(0, 6, size=nb).astype(float)
        w, p = rank_sum(a, b)
        assert p == pytest.approx(_ranksum_p_enum(a, b), rel=1e-9), (a, b)


def test_rank_sum_fully_tied():
    w, p = rank_sum([5.0, 5.0, 5.0], [5.0, 5.0])
    assert p == 1.0


def test_rank_sum_large_shift_significant():
    rng = np.random.default_rng(6)
    a = rng.normal(size=200)
    b = rng.normal(loc=2.0, size=200)
    _, p = rank_sum(a, b)
    assert p < 1e-6


def test_rank_sum_monotone_transform_invariant():
    rng = np.random.default_rng(7)
    for n, m in ((8, 9), (40, 35)):
        a = rng.normal(size=n)
        b = rng.normal(loc=0.5, size=m)
        _, p0 = rank_sum(a, b)
        _, p1 = rank_sum(np.exp(a), np.exp(b))
        assert p1 == pytest.approx(p0, rel=1e-12)


def test_rank_sum_null_rejection_rate():
    rng = np.random.default_rng(8)
    hits = sum(
        rank_sum(rng.normal(size=30), rng.normal(size=30))[1] < 0.05
        for _ in range(400)
    )
    assert 0.02 <= hits / 400 <= 0.09


# --- screening ------------------------------------------------------------


def _labels(n_off, n_on):
    return np.array([1] * n_off + [-1] * n_on)


def test_screen_selects_planted_feature():
    rng = np.random.default_rng(9)
    n = 30
    x = rng.normal(size=(2 * n, 10))
    x[:n, 3] += 5.0  # OFF rows shifted on one column
    res = screen(x, _labels(n, n))
    assert res.selected[3]
    assert res.p_values[3] < 1e-10
    assert not res.fallback_used
    assert res.test_used[3] in ("t", "ranksum")
    records = res.to_records([f"f{j}" for j in range(10)])
    assert records[3]["selected"] and records[3]["name"] == "f3"


def test_screen_ignores_identical_feature():
    rng = np.random.default_rng(10)
    x = rng.normal(size=(40, 5))
    x[:, 2] = 1.25  # constant across both classes
    res = screen(x, _labels(20, 20))
    assert not res.selected[2]
    assert res.p_values[2] == 1.0
    assert not res.normal_off[2] and not res.normal_on[2]
    assert res.test_used[2] == "ranksum"


def test_screen_routes_non_normal_to_ranksum():
    rng = np.random.default_rng(0)
    x = np.empty((60, 2))
    x[:, 0] = rng.normal(size=60)
    x[:, 1] = rng.uniform(size=60) ** 4  # heavily skewed in both classes
    res = screen(x, _labels(30, 30))
    assert res.test_used[0] == "t"
    assert res.test_used[1] == "ranksum"


def test_screen_fallback_keeps_ten():
    rng = np.random.default_rng(12)
    x = rng.normal(size=(32, 30))
    res = screen(x, _labels(16, 16), alpha=1e-12)
    assert res.fallback_used
    assert res.selected.sum() == 10
    kept_p = res.p_values[res.selected]
    dropped_p = res.p_values[~res.selected]
    assert kept_p.max() <= dropped_p.min() + 1e-15


def test_screen_input_validation():
    rng = np.random.default_rng(13)
    x = rng.normal(size=(20, 4))
    with pytest.raises(ValueError, match="per class"):
        screen(x, np.ones(20))  # single class
    with pytest.raises(ValueError, match="per class"):
        screen(x, _labels(14, 6))
    with pytest.raises(ValueError, match="matching y"):
        screen(x, _labels(8, 8))


def test_screen_false_positive_rate_on_noise():
    # pure-noise screening keeps about alpha of the feature columns
    rng = np.random.default_rng(14)
    y = _labels(16, 16)
    rates = []
    for _ in range(500):
        res = screen(rng.normal(size=(32, 138)), y)
        rates.append(res.selected.sum() / 138.0 if not res.fallback_used
                     else 0.0)
    assert np.mean(rates) == pytest.approx(0.05, abs=0.02)
