"""Soft-margin SVM trained with sequential minimal optimization.

The solver repeatedly optimizes the most-violating pair of dual
coefficients until the KKT gap drops below tolerance.  Model selection
couples a small kernel/regularization grid with recursive feature
elimination, both scored by stratified cross-validation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

C_GRID = tuple(2.0**k for k in range(-2, 3))
GAMMA_GRID = tuple(2.0**k for k in range(-4, 5))

KKT_TOLERANCE = 1e-3
DEFAULT_FOLDS = 4
DEFAULT_SEED = 0


@dataclass(frozen=True)
class SvmConfig:
    """Kernel family plus regularization for one training run."""

    kernel: str
    c: float
    gamma: float | None = None

    def __post_init__(self):
        if self.kernel not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.kernel == "rbf" and not (self.gamma and self.gamma > 0):
            raise ValueError("rbf kernel needs a positive gamma")
        if self.kernel == "linear" and self.gamma is not None:
            raise ValueError("linear kernel takes no gamma")


def kernel_matrix(a: np.ndarray, b: np.ndarray, kernel: str, gamma=None) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if kernel == "linear":
        return a @ b.T
    if kernel == "rbf":
        sq = (
            np.sum(a * a, axis=1)[:, None]
            + np.sum(b * b, axis=1)[None, :]
            - 2.0 * (a @ b.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-gamma * sq)
    raise ValueError(f"unknown kernel {kernel!r}")


def _smo_chunk_loops(K, y, alpha, G, c, tol, max_steps):
    """Run up to max_steps most-violating-pair updates in place.

    Returns (steps done, converged flag).  G tracks the dual gradient
    (K*(alpha*y))*y - 1 so pair selection and updates are O(n).
    """
    n = y.shape[0]
    tau = 1e-12 * c
    steps = 0
    while steps < max_steps:
        i = -1
        j = -1
        vmax = -1e300
        vmin = 1e300
        for t in range(n):
            v = -y[t] * G[t]
            at = alpha[t]
            if (y[t] > 0 and at < c - tau) or (y[t] < 0 and at > tau):
                if v > vmax:
                    vmax = v
                    i = t
            if (y[t] > 0 and at > tau) or (y[t] < 0 and at < c - tau):
                if v < vmin:
                    vmin = v
                    j = t
        if i < 0 or j < 0 or vmax - vmin <= tol:
            return steps, True
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        lam_i = (c - alpha[i]) if y[i] > 0 else alpha[i]
        lam_j = alpha[j] if y[j] > 0 else (c - alpha[j])
        lam = lam_i if lam_i < lam_j else lam_j
        if eta > 1e-15:
            step = (vmax - vmin) / eta
            if step < lam:
                lam = step
        alpha[i] += lam * y[i]
        alpha[j] -= lam * y[j]
        if alpha[i] < 0.0:
            alpha[i] = 0.0
        elif alpha[i] > c:
            alpha[i] = c
        if alpha[j] < 0.0:
            alpha[j] = 0.0
        elif alpha[j] > c:
            alpha[j] = c
        for t in range(n):
            G[t] += lam * y[t] * (K[t, i] - K[t, j])
        steps += 1
    return steps, False


try:  # pragma: no cover - exercised through train()
    from numba import njit

    _smo_chunk = njit(cache=True)(_smo_chunk_loops)
except ImportError:  # pragma: no cover
    _smo_chunk = _smo_chunk_loops


@dataclass(eq=False)
class TrainedSvm:
    """In-memory SMO result.

    ``alpha`` and ``labels`` keep the full dual solution for diagnostics;
    prediction only needs the support rows.
    """

    config: SvmConfig
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    n_features: int
    alpha: np.ndarray
    labels: np.ndarray
    objective_trace: list
    iterations: int
    converged: bool
    feature_indices: np.ndarray | None = None

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        return decision_function(
            x,
            self.support_vectors,
            self.dual_coef,
            self.bias,
            self.config.kernel,
            self.config.gamma,
        )

    def predict(self, x: np.ndarray) -> np.ndarray:
        d = self.decision_values(x)
        return np.where(d > 0, 1, -1)


def decision_function(x, support_vectors, dual_coef, bias, kernel, gamma=None):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    k = kernel_matrix(x, support_vectors, kernel, gamma)
    return k @ np.asarray(dual_coef, dtype=np.float64) + bias


def _dual_objective(alpha: np.ndarray, G: np.ndarray) -> float:
    # G = Q*alpha - 1, so alpha'Q*alpha = alpha'G + sum(alpha).
    return float(0.5 * (np.sum(alpha) - alpha @ G))


def train(
    X: np.ndarray,
    y: np.ndarray,
    config: SvmConfig,
    tol: float = KKT_TOLERANCE,
    max_iter: int | None = None,
) -> TrainedSvm:
    """Solve the soft-margin dual for (X, y) with y in {-1, +1}.

    X is expected to be z-score normalized by the caller.  Raises on
    single-class labels or a feature matrix whose rows are all identical.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise ValueError("X must be (n_samples, n_features) matching y")
    if not (np.all(np.abs(y) == 1.0) and len(np.unique(y)) == 2):
        raise ValueError("labels must contain both classes coded -1/+1")
    if X.shape[0] >= 2 and float(np.max(np.ptp(X, axis=0), initial=0.0)) == 0.0:
        raise ValueError("degenerate training set: all feature rows identical")
    n = X.shape[0]
    if max_iter is None:
        max_iter = max(20_000, 100 * n)
    K = kernel_matrix(X, X, config.kernel, config.gamma)
    alpha = np.zeros(n)
    G = -np.ones(n)
    trace = [_dual_objective(alpha, G)]
    done = 0
    converged = False
    while done < max_iter and not converged:
        chunk = min(n, max_iter - done)
        steps, converged = _smo_chunk(K, y, alpha, G, float(config.c), tol, chunk)
        done += steps
        trace.append(_dual_objective(alpha, G))
        if steps == 0 and converged:
            break
    if not converged:
        warnings.warn(
            f"SMO stopped after {done} iterations without reaching tol={tol}",
            stacklevel=2,
        )
    tau = 1e-12 * config.c
    free = (alpha > tau) & (alpha < config.c - tau)
    v = -y * G
    if np.any(free):
        bias = float(np.mean(v[free]))
    else:
        up = ((y > 0) & (alpha < config.c - tau)) | ((y < 0) & (alpha > tau))
        low = ((y > 0) & (alpha > tau)) | ((y < 0) & (alpha < config.c - tau))
        hi = np.max(v[up]) if np.any(up) else 0.0
        lo = np.min(v[low]) if np.any(low) else 0.0
        bias = float((hi + lo) / 2.0)
    sv = alpha > tau
    if not np.any(sv):
        raise ValueError("optimizer returned no support vectors")
    return TrainedSvm(
        config=config,
        support_vectors=X[sv].copy(),
        dual_coef=(alpha * y)[sv],
        bias=bias,
        n_features=X.shape[1],
        alpha=alpha,
        labels=y,
        objective_trace=trace,
        iterations=done,
        converged=converged,
    )


def stratified_kfold(y, n_folds: int = DEFAULT_FOLDS, seed: int = DEFAULT_SEED):
    """Deterministic stratified folds; returns (train_idx, test_idx) pairs."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    for cls in np.unique(y):
        idx = np.nonzero(y == cls)[0]
        if len(idx) < n_folds:
            raise ValueError(
                f"class {cls} has {len(idx)} rows, needs at least {n_folds}"
            )
        rng.shuffle(idx)
        fold_of[idx] = np.arange(len(idx)) % n_folds
    folds = []
    for f in range(n_folds):
        test = np.nonzero(fold_of == f)[0]
        train_idx = np.nonzero(fold_of != f)[0]
        folds.append((train_idx, test))
    return folds


def cv_accuracy(
    X, y, config: SvmConfig,
    n_folds: int = DEFAULT_FOLDS, seed: int = DEFAULT_SEED,
) -> float:
    """Pooled held-out accuracy over stratified folds."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    correct = 0
    for train_idx, test_idx in stratified_kfold(y, n_folds, seed):
        model = train(X[train_idx], y[train_idx], config)
        correct += int(np.sum(model.predict(X[test_idx]) == y[test_idx]))
    return correct / len(y)


def _config_sort_key(config: SvmConfig):
    return (0 if config.kernel == "linear" else 1, config.c, config.gamma or 0.0)


def default_grid() -> list:
    configs = [SvmConfig("linear", c) for c in C_GRID]
    configs += [SvmConfig("rbf", c, g) for c in C_GRID for g in GAMMA_GRID]
    return configs


@dataclass(eq=False)
class GridSearchResult:
    configs: list
    accuracies: list
    best_config: SvmConfig
    best_accuracy: float
    rfe: "RfeResult | None" = None


@dataclass(eq=False)
class RfeResult:
    """Backward-elimination outcome for one kernel configuration."""

    selected: np.ndarray
    model: TrainedSvm
    accuracy_trace: list
    sizes: list
    best_size: int


def grid_search(
    X,
    y,
    n_folds: int = DEFAULT_FOLDS,
    seed: int = DEFAULT_SEED,
    select_features: bool = True,
) -> GridSearchResult:
    """Pick (kernel, c, gamma) by CV accuracy, then optionally run RFE.

    Accuracy ties prefer the linear kernel, then smaller c, then smaller
    gamma, so repeated runs on identical input pick the same model.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    configs = default_grid()
    accuracies = [cv_accuracy(X, y, cfg, n_folds, seed) for cfg in configs]
    best_config = None
    best_acc = -1.0
    for cfg, acc in zip(configs, accuracies):
        if acc > best_acc or (
            acc == best_acc and _config_sort_key(cfg) < _config_sort_key(best_config)
        ):
            best_config, best_acc = cfg, acc
    result = GridSearchResult(configs, accuracies, best_config, best_acc)
    if select_features:
        result.rfe = rfe(X, y, best_config, n_folds, seed)
    return result


def _feature_scores(model: TrainedSvm) -> np.ndarray:
    """Per-feature elimination scores; low score = least useful.

    Linear kernels score |w_j|.  RBF kernels score how much the margin
    objective W2 = sum_ij dc_i dc_j K_ij moves when feature j is dropped
    from the kernel (computed on the support set with coefficients held
    fixed).
    """
    sv = model.support_vectors
    dc = model.dual_coef
    if model.config.kernel == "linear":
        return np.abs(sv.T @ dc)
    gamma = model.config.gamma
    k = kernel_matrix(sv, sv, "rbf", gamma)
    weighted = np.outer(dc, dc) * k
    base = float(weighted.sum())
    scores = np.empty(sv.shape[1])
    for f in range(sv.shape[1]):
        diff = sv[:, f][:, None] - sv[:, f][None, :]
        without = weighted * np.exp(gamma * diff * diff)
        scores[f] = abs(base - float(without.sum()))
    return scores


def rfe(
    X,
    y,
    config: SvmConfig,
    n_folds: int = DEFAULT_FOLDS,
    seed: int = DEFAULT_SEED,
) -> RfeResult:
    """Greedy backward feature elimination under a fixed configuration.

    Records CV accuracy at every subset size from all features down to
    one, then returns the subset with the best accuracy (ties go to the
    smaller subset) and a final model trained on it.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    current = list(range(X.shape[1]))
    sizes = []
    accuracy_trace = []
    subsets = {}
    while current:
        acc = cv_accuracy(X[:, current], y, config, n_folds, seed)
        sizes.append(len(current))
        accuracy_trace.append(acc)
        subsets[len(current)] = list(current)
        if len(current) == 1:
            break
        model = train(X[:, current], y, config)
        scores = _feature_scores(model)
        current.pop(int(np.argmin(scores)))
    best_acc = max(accuracy_trace)
    best_size = min(s for s, a in zip(sizes, accuracy_trace) if a == best_acc)
    selected = np.asarray(sorted(subsets[best_size]), dtype=np.int64)
    final = train(X[:, selected], y, config)
    final.feature_indices = selected
    return RfeResult(
        selected=selected,
        model=final,
        accuracy_trace=accuracy_trace,
        sizes=sizes,
        best_size=best_size,
    )
