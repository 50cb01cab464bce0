"""Decision-value calibration and certainty thresholding.

A sigmoid maps raw SVM margins to a posterior for the OFF (+1) class;
its parameters are fit on cross-validated training margins so the
posterior is honest about generalization.  The reported "certainty"
of a decision is the posterior probability of the emitted label, and a
threshold chosen for at most 1% training rejection later censors
low-certainty seconds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .svm import SvmConfig, train, stratified_kfold

PLATT_MAX_ITER = 200
PLATT_GRAD_TOL = 1e-8
THRESHOLD_GRID = tuple(round(0.50 + 0.05 * k, 2) for k in range(9))
MAX_TRAIN_REJECTION = 0.01
CALIBRATION_FOLDS = 4


@dataclass(frozen=True)
class PlattParams:
    """Sigmoid parameters: P(off | d) = 1 / (1 + exp(a*d + b))."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("sigmoid parameters must be finite")


def cv_decision_values(
    X,
    y,
    activities,
    config: SvmConfig,
    n_folds: int = CALIBRATION_FOLDS,
    seed: int = 0,
) -> np.ndarray:
    """Held-out decision values for every training window.

    Folds leave one activity out when the windows cover exactly
    ``n_folds`` activities and each activity contains both classes;
    otherwise the split falls back to stratified random folds with a
    warning.  The returned array is aligned with the input row order.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    activities = np.asarray(
        ["" if a is None else str(a) for a in activities], dtype=np.str_
    )
    if not (len(y) == len(activities) == X.shape[0]):
        raise ValueError("X, y and activities must have matching lengths")
    folds = None
    if np.all(activities != ""):
        acts = np.unique(activities)
        if len(acts) == n_folds:
            per_activity_ok = all(
                len(np.unique(y[activities == a])) == 2 for a in acts
            )
            if per_activity_ok:
                folds = [
                    (np.nonzero(activities != a)[0], np.nonzero(activities == a)[0])
                    for a in acts
                ]
    if folds is None:
        warnings.warn(
            "activity folds unavailable (need exactly "
            f"{n_folds} activities, each with both classes); "
            "falling back to stratified random folds",
            stacklevel=2,
        )
        folds = stratified_kfold(y, n_folds, seed)
    d = np.empty(len(y))
    for train_idx, test_idx in folds:
        model = train(X[train_idx], y[train_idx], config)
        d[test_idx] = model.decision_values(X[test_idx])
    return d


def _nll(d: np.ndarray, t: np.ndarray, a: float, b: float) -> float:
    u = a * d + b
    terms = np.where(u >= 0, t * u, (t - 1.0) * u) + np.log1p(np.exp(-np.abs(u)))
    return float(np.sum(terms))


def platt_fit(decision_values, y, max_iter: int = PLATT_MAX_ITER) -> PlattParams:
    """Fit the sigmoid by Newton descent on the regularized NLL.

    Targets are smoothed per class, (n+ + 1)/(n+ + 2) and 1/(n- + 2), so
    the optimum stays finite even for separable margins.  Stops when the
    gradient max-norm drops below 1e-8; warns and returns the best
    iterate if 200 iterations or the backtracking floor hit first.
    """
    d = np.asarray(decision_values, dtype=np.float64)
    y = np.asarray(y)
    if d.ndim != 1 or d.shape != y.shape:
        raise ValueError("decision values and labels must be equal-length vectors")
    n_pos = int(np.sum(y > 0))
    n_neg = int(np.sum(y < 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need both classes to fit the sigmoid")
    t = np.where(y > 0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a = 0.0
    b = math.log((n_neg + 1.0) / (n_pos + 1.0))
    f_cur = _nll(d, t, a, b)
    sigma = 1e-12
    for _ in range(max_iter):
        u = a * d + b
        p = _sigmoid(-u)  # P(off | d)
        g1 = float(np.sum((t - p) * d))
        g2 = float(np.sum(t - p))
        if max(abs(g1), abs(g2)) < PLATT_GRAD_TOL:
            return PlattParams(a, b)
        w = p * (1.0 - p)
        h11 = float(np.sum(w * d * d)) + sigma
        h22 = float(np.sum(w)) + sigma
        h12 = float(np.sum(w * d))
        det = h11 * h22 - h12 * h12
        da = -(h22 * g1 - h12 * g2) / det
        db = -(h11 * g2 - h12 * g1) / det
        slope = g1 * da + g2 * db
        step = 1.0
        while step >= 1e-10:
            f_new = _nll(d, t, a + step * da, b + step * db)
            if f_new <= f_cur + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            warnings.warn("sigmoid line search stalled; returning best iterate",
                          stacklevel=2)
            return PlattParams(a, b)
        a += step * da
        b += step * db
        f_cur = f_new
    warnings.warn(
        f"sigmoid fit did not converge in {max_iter} iterations", stacklevel=2
    )
    return PlattParams(a, b)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def certainty(decision, params: PlattParams):
    """Posterior certainty of the label emitted for each decision value.

    Positive decisions (OFF) get P(off) = 1/(1 + exp(a*d + b)); negative
    ones get the complement.  Zero uses the positive branch.
    """
    m = np.asarray(decision, dtype=np.float64)
    scalar = m.ndim == 0
    m = np.atleast_1d(m)
    u = params.a * m + params.b
    out = np.where(m >= 0.0, _sigmoid(-u), _sigmoid(u))
    return float(out[0]) if scalar else out


def select_threshold(certainties, max_rejection: float = MAX_TRAIN_REJECTION) -> float:
    """Largest grid threshold rejecting at most 1% of training certainties.

    Falls back to 0.50 when even the smallest threshold rejects more.
    """
    p = np.asarray(certainties, dtype=np.float64)
    if p.ndim != 1 or len(p) == 0:
        raise ValueError("certainties must be a non-empty vector")
    best = THRESHOLD_GRID[0]
    budget = max_rejection * len(p) + 1e-9
    for th in THRESHOLD_GRID:
        if np.count_nonzero(p < th) <= budget and th > best:
            best = th
    return float(best)


def rejection_table(certainties) -> list:
    """Fraction of certainties rejected at each grid threshold."""
    p = np.asarray(certainties, dtype=np.float64)
    return [
        {"threshold": th, "rejected_fraction": float(np.mean(p < th))}
        for th in THRESHOLD_GRID
    ]


def sigmoid_curve(params: PlattParams, lo: float, hi: float, n: int = 101) -> list:
    """Sampled certainty curve over a decision-value range, for plotting."""
    m = np.linspace(lo, hi, n)
    c = certainty(m, params)
    return [{"decision": float(mi), "certainty": float(ci)} for mi, ci in zip(m, c)]
