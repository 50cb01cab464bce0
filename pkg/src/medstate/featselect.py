"""Univariate feature screening.

Every feature column is tested for a distribution shift between the two
medication states: an unpaired pooled-variance t-test when both class
samples pass an Anderson-Darling normality check, a Wilcoxon rank-sum
test otherwise.  Features with p < alpha survive; if none do, the ten
smallest p-values are kept so the classifier always has input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .datamodel import CODE_OFF, CODE_ON

AD_CRITICAL_5PCT = 0.752  # corrected-statistic critical value, alpha = 0.05
AD_MIN_SAMPLES = 8
EXACT_RANKSUM_MAX_N = 20
DEFAULT_ALPHA = 0.05
FALLBACK_KEEP = 10


def anderson_darling(samples) -> tuple:
    """Anderson-Darling normality test with estimated mean and variance.

    Returns (statistic, is_normal) where the statistic carries the
    small-sample correction (1 + 0.75/n + 2.25/n^2) and is compared
    against the 5% critical value 0.752.  Zero-variance samples are
    reported as non-normal with an infinite statistic.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = len(x)
    if n < AD_MIN_SAMPLES:
        raise ValueError(f"need at least {AD_MIN_SAMPLES} samples, got {n}")
    mu = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        return math.inf, False
    z = (x - mu) / sd
    log_cdf = sps.norm.logcdf(z)
    log_sf = sps.norm.logsf(z)
    i = np.arange(1, n + 1)
    a2 = -n - float(np.mean((2 * i - 1) * (log_cdf + log_sf[::-1])))
    a2 *= 1.0 + 0.75 / n + 2.25 / (n * n)
    return a2, bool(a2 < AD_CRITICAL_5PCT)


def t_test_unpaired(a, b) -> tuple:
    """Two-sided pooled-variance t-test; returns (t, p).

    Degenerate zero-pooled-variance input yields p = 1 when the means are
    equal and p = 0 otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("each group needs at least 2 samples")
    ma, mb = float(np.mean(a)), float(np.mean(b))
    ss = float(np.sum((a - ma) ** 2) + np.sum((b - mb) ** 2))
    df = na + nb - 2
    pooled = ss / df
    if pooled == 0.0:
        if ma == mb:
            return 0.0, 1.0
        return math.copysign(math.inf, ma - mb), 0.0
    t = (ma - mb) / math.sqrt(pooled * (1.0 / na + 1.0 / nb))
    p = 2.0 * float(sps.t.sf(abs(t), df))
    return t, min(p, 1.0)


def _exact_ranksum_p(ranks: np.ndarray, na: int, w: float) -> float:
    # Exact permutation distribution of the size-na rank sum, enumerated
    # with a subset-sum count over doubled (integer) midranks.
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    # counts[k][s] = number of k-subsets with doubled-rank sum s
    counts = [np.zeros(total + 1, dtype=np.float64) for _ in range(na + 1)]
    counts[0][0] = 1.0
    for r in doubled:
        for k in range(na, 0, -1):
            shifted = np.zeros(total + 1)
            shifted[r:] = counts[k - 1][: total + 1 - r]
            counts[k] += shifted
    dist = counts[na]
    n_subsets = dist.sum()
    w2 = int(round(2.0 * w))
    p_le = dist[: w2 + 1].sum() / n_subsets
    p_ge = dist[w2:].sum() / n_subsets
    return min(1.0, 2.0 * min(p_le, p_ge))


def rank_sum(a, b) -> tuple:
    """Two-sided Wilcoxon rank-sum test; returns (rank sum of a, p).

    Uses the exact permutation distribution when the pooled size is at
    most 20 and a normal approximation with tie and continuity
    corrections otherwise.  Fully tied data gives p = 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("each group needs at least 2 samples")
    pooled = np.concatenate([a, b])
    n = na + nb
    ranks = sps.rankdata(pooled)
    w = float(np.sum(ranks[:na]))
    if np.all(pooled == pooled[0]):
        return w, 1.0
    if n <= EXACT_RANKSUM_MAX_N:
        return w, _exact_ranksum_p(ranks, na, w)
    mu = na * (n + 1) / 2.0
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (n * (n - 1.0))
    var = na * nb / 12.0 * ((n + 1.0) - tie_term)
    if var <= 0.0:
        return w, 1.0
    z = max(abs(w - mu) - 0.5, 0.0) / math.sqrt(var)
    return w, min(1.0, 2.0 * float(sps.norm.sf(z)))


@dataclass(eq=False)
class ScreenResult:
    """Per-feature screening outcome plus the surviving mask."""

    p_values: np.ndarray
    statistics: np.ndarray
    test_used: list
    normal_off: np.ndarray
    normal_on: np.ndarray
    selected: np.ndarray
    alpha: float
    fallback_used: bool

    def selected_indices(self) -> np.ndarray:
        return np.nonzero(self.selected)[0]

    def to_records(self, feature_names=None) -> list:
        records = []
        for j in range(len(self.p_values)):
            rec = {
                "index": j,
                "p_value": float(self.p_values[j]),
                "statistic": float(self.statistics[j]),
                "test": self.test_used[j],
                "normal_off": bool(self.normal_off[j]),
                "normal_on": bool(self.normal_on[j]),
                "selected": bool(self.selected[j]),
            }
            if feature_names is not None:
                rec["name"] = feature_names[j]
            records.append(rec)
        return records


def screen(values: np.ndarray, y: np.ndarray, alpha: float = DEFAULT_ALPHA) -> ScreenResult:
    """Screen feature columns for class separation.

    ``values`` is the (windows x features) matrix, ``y`` the +1/-1 state
    coding (OFF positive).  Both classes need at least 8 rows for the
    normality check.
    """
    values = np.asarray(values, dtype=np.float64)
    y = np.asarray(y)
    if values.ndim != 2 or len(y) != values.shape[0]:
        raise ValueError("values must be (n_windows, n_features) matching y")
    off = values[y == CODE_OFF]
    on = values[y == CODE_ON]
    if len(off) < AD_MIN_SAMPLES or len(on) < AD_MIN_SAMPLES:
        raise ValueError(
            f"need at least {AD_MIN_SAMPLES} windows per class, "
            f"got OFF={len(off)} ON={len(on)}"
        )
    d = values.shape[1]
    p_values = np.empty(d)
    statistics = np.empty(d)
    normal_off = np.empty(d, dtype=bool)
    normal_on = np.empty(d, dtype=bool)
    test_used = []
    for j in range(d):
        _, norm_off = anderson_darling(off[:, j])
        _, norm_on = anderson_darling(on[:, j])
        normal_off[j] = norm_off
        normal_on[j] = norm_on
        if norm_off and norm_on:
            stat, p = t_test_unpaired(off[:, j], on[:, j])
            test_used.append("t")
        else:
            stat, p = rank_sum(off[:, j], on[:, j])
            test_used.append("ranksum")
        statistics[j] = stat
        p_values[j] = p
    selected = p_values < alpha
    fallback = not np.any(selected)
    if fallback:
        keep = np.argsort(p_values, kind="stable")[: min(FALLBACK_KEEP, d)]
        selected = np.zeros(d, dtype=bool)
        selected[keep] = True
    return ScreenResult(
        p_values=p_values,
        statistics=statistics,
        test_used=test_used,
        normal_off=normal_off,
        normal_on=normal_on,
        selected=selected,
        alpha=alpha,
        fallback_used=fallback,
    )
