"""Acceptance suite: the shipped behavioural contract, one criterion per test.

Each test prints a single PASS/FAIL verdict line (also forwarded to the
real stdout so it survives pytest capture). Tolerances are pinned here
and nowhere else; do not loosen them to make a failure go away.
"""

import filecmp
import itertools
import json
import sys
import time
import warnings

import numpy as np
import pytest
from scipy import stats as sps

import oracles
from medstate import calibrate as C
from medstate import features as F
from medstate import inference as I
from medstate import svm as S
from medstate import synthgen as G
from medstate.cli import main as cli_main
from medstate.cli import train_on_recording
from medstate.datamodel import SignalWindow, write_recording
from medstate.featselect import rank_sum, t_test_unpaired
from medstate.preprocess import window_labels

FS = 128.0
FFT_FEATURE_SLOTS = set(range(9 * 3))  # kinds 1..9 over three axes


def _verdict(num, ok, detail):
    line = f"[criterion {num}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()
    assert ok, line


# --- criterion 1: feature-oracle equivalence --------------------------------


def test_criterion_01_feature_oracle_equivalence():
    warm = np.random.default_rng(0).normal(size=(3, 640))
    F.extract(SignalWindow("wrist", FS, *warm, 0))  # JIT warm-up
    oracles.feature_vector(*warm, FS)

    t0 = time.perf_counter()
    worst = 0.0
    worst_slot = -1
    for seed in range(100):
        x, y, z = np.random.default_rng(seed).normal(size=(3, 640))
        got = F.extract(SignalWindow("wrist", FS, x, y, z, 0)).values
        want = np.asarray(oracles.feature_vector(x, y, z, FS))
        for i in range(69):
            rtol = 1e-6 if i in FFT_FEATURE_SLOTS else 1e-9
            bound = 1e-9 + rtol * abs(want[i])
            err = abs(got[i] - want[i])
            if err / bound > worst:
                worst, worst_slot = err / bound, i
            if err > bound:
                _verdict(
                    1, False,
                    f"seed {seed} feature {i} err {err:.3e} > {bound:.3e}",
                )
    elapsed = time.perf_counter() - t0
    ok = elapsed < 10.0
    _verdict(
        1, ok,
        f"69 features x 100 windows match brute-force oracles "
        f"(worst error {worst:.3f}x its bound, slot {worst_slot}) "
        f"in {elapsed:.1f}s (< 10s)",
    )


# --- criterion 2: entropy closed forms ---------------------------------------


def test_criterion_02_entropy_closed_forms():
    const = np.full(640, 3.3)
    checks = [
        ("shannon(const) == 0", F.shannon_entropy(const) == 0.0),
        ("gini(const) == 0", F.gini_index(const) == 0.0),
        ("sampen(const) == 0", F.sample_entropy(const) == 0.0),
    ]
    for k in (4, 16, 32):
        # k values spaced two histogram bins apart, equal occupancy
        x = np.repeat(np.arange(k) * 8.0, 10)
        checks.append(
            (f"shannon({k} bins) == log2(k)", F.shannon_entropy(x) == np.log2(k))
        )
        checks.append(
            (f"gini({k} bins) == 1-1/k", F.gini_index(x) == 1.0 - 1.0 / k)
        )
    bad = [name for name, ok in checks if not ok]
    _verdict(
        2, not bad,
        "constant window gives exact zeros; K-equal-bin windows give "
        "entropy log2(K) and Gini 1-1/K exactly (K in 4/16/32)"
        if not bad else f"failed: {bad}",
    )


# --- criterion 3: statistical-test calibration --------------------------------


def test_criterion_03_test_calibration():
    rng = np.random.default_rng(0)
    p_t = np.empty(500)
    p_r = np.empty(500)
    for i in range(500):
        a = rng.normal(size=200)
        b = rng.normal(size=200)
        p_t[i] = t_test_unpaired(a, b)[1]
        p_r[i] = rank_sum(a, b)[1]
    ks_t = sps.kstest(p_t, "uniform").statistic
    ks_r = sps.kstest(p_r, "uniform").statistic
    frozen_p = t_test_unpaired([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])[1]
    exact_p = rank_sum([1.0, 2.0], [3.0, 4.0])[1]
    ok = (
        ks_t < 0.05
        and ks_r < 0.05
        and abs(frozen_p - 0.0214) <= 5e-4
        and exact_p == 1.0 / 3.0
    )
    _verdict(
        3, ok,
        f"null p-values uniform (KS t={ks_t:.3f}, ranksum={ks_r:.3f} < 0.05), "
        f"frozen t p={frozen_p:.5f} (0.0214 +/- 5e-4), exact ranksum p=1/3",
    )


# --- criterion 4: SVM correctness ----------------------------------------------


def _svm_checks(X, y, config, name, failures):
    model = S.train(X, y, config)
    acc = float(np.mean(model.predict(X) == y))
    if acc != 1.0:
        failures.append(f"{name}: train accuracy {acc:.4f} != 1.0")
    feas = abs(float(np.dot(model.alpha, model.labels)))
    if feas > 1e-6:
        failures.append(f"{name}: |sum(alpha*y)| = {feas:.2e} > 1e-6")
    if model.alpha.min() < -1e-12 or model.alpha.max() > config.c + 1e-12:
        failures.append(f"{name}: alpha outside [0, c]")
    tau = 1e-9 * config.c
    free = (model.alpha > tau) & (model.alpha < config.c - tau)
    if np.any(free):
        margins = model.labels[free] * model.decision_values(X[free])
        worst = float(np.max(np.abs(margins - 1.0)))
        if worst > 1e-2:
            failures.append(f"{name}: free-SV margin error {worst:.2e} > 1e-2")


def test_criterion_04_svm_correctness():
    rng = np.random.default_rng(1)
    failures = []
    t0 = time.perf_counter()

    n = 500
    gap = rng.uniform(0.5, 3.0, size=2 * n)  # first coordinate clears 0
    blobs = np.column_stack([gap, rng.normal(size=(2 * n, 3))])
    blobs[n:, 0] *= -1.0
    y_blobs = np.array([1.0] * n + [-1.0] * n)
    _svm_checks(blobs, y_blobs, S.SvmConfig("linear", 4.0), "blobs-1000",
                failures)

    xor = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    xor = np.vstack([xor + 0.02 * rng.normal(size=(4, 2)) for _ in range(8)])
    y_xor = np.tile([1.0, 1.0, -1.0, -1.0], 8)
    xor = (xor - xor.mean(0)) / xor.std(0)
    _svm_checks(xor, y_xor, S.SvmConfig("rbf", 4.0, 1.0), "xor", failures)

    theta = rng.uniform(0, 2 * np.pi, 1000)
    radius = np.concatenate([np.full(500, 1.0), np.full(500, 3.0)])
    radius = radius + 0.1 * rng.normal(size=1000)
    rings = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    rings = (rings - rings.mean(0)) / rings.std(0)
    _svm_checks(rings, y_blobs, S.SvmConfig("rbf", 4.0, 1.0), "rings-1000",
                failures)

    elapsed = time.perf_counter() - t0
    if elapsed >= 30.0:
        failures.append(f"runtime {elapsed:.1f}s >= 30s")
    _verdict(
        4, not failures,
        f"blobs/xor/rings: 100% train accuracy, feasibility <= 1e-6, "
        f"KKT margins <= 1e-2, {elapsed:.1f}s (< 30s)"
        if not failures else "; ".join(failures),
    )


# --- criterion 5: RFE planted-feature recovery -----------------------------------


def test_criterion_05_rfe_planted_recovery():
    hits = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in range(50):
            rng = np.random.default_rng(seed)
            n = 100
            X = rng.normal(size=(2 * n, 25))
            X[:n, :5] += 0.8
            y = np.array([1.0] * n + [-1.0] * n)
            X = (X - X.mean(0)) / X.std(0)
            result = S.rfe(X, y, S.SvmConfig("linear", 1.0))
            recovered = len(set(result.selected.tolist()) & {0, 1, 2, 3, 4})
            hits += recovered >= 4
    _verdict(
        5, hits >= 45,
        f"RFE recovered >= 4 of 5 planted features in {hits}/50 trials "
        f"(need >= 45)",
    )


# --- criterion 6: Platt calibration -----------------------------------------------


def _grid_nll(d, t):
    # branch-free reference: sum_i [t*u + log(1 + exp(-u))]
    grid = np.linspace(-10.0, 10.0, 201)
    A, B = np.meshgrid(grid, grid, indexing="ij")
    U = A[..., None] * d + B[..., None]
    return float(np.min(np.sum(t * U + np.logaddexp(0.0, -U), axis=-1)))


def test_criterion_06_platt_calibration():
    rng = np.random.default_rng(2)
    worst_gap = -np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(20):
            n = int(rng.integers(20, 80))
            d = rng.normal(scale=rng.uniform(0.5, 2.0), size=n)
            y = np.where(rng.uniform(size=n) < C._sigmoid(1.5 * d), 1.0, -1.0)
            if len(np.unique(y)) < 2:
                y[0], y[1] = 1.0, -1.0
            params = C.platt_fit(d, y)
            n_pos = int(np.sum(y == 1.0))
            n_neg = n - n_pos
            t = np.where(y == 1.0, (n_pos + 1.0) / (n_pos + 2.0),
                         1.0 / (n_neg + 2.0))
            gap = C._nll(d, t, params.a, params.b) - _grid_nll(d, t)
            worst_gap = max(worst_gap, gap)
            if gap > 1e-6:
                _verdict(6, False, f"fitted NLL exceeds grid minimum by {gap:.2e}")

    # branch behaviour at the decision boundary: the M >= 0 branch is
    # used, and the two branch formulas are complementary there
    max_dispatch = 0.0
    max_complement = 0.0
    for _ in range(1000):
        a, b = rng.uniform(-10, 10, size=2)
        at_zero = float(C.certainty(0.0, C.PlattParams(a, b)))
        eq_pos = 1.0 / (1.0 + np.exp(b))          # positive-branch formula at 0
        eq_neg = np.exp(b) / (1.0 + np.exp(b))    # negative-branch formula at 0
        max_dispatch = max(max_dispatch, abs(at_zero - eq_pos))
        max_complement = max(max_complement, abs((eq_pos + eq_neg) - 1.0))
    ok = max_dispatch <= 1e-12 and max_complement <= 1e-12
    _verdict(
        6, ok,
        f"fitted NLL <= 201x201 grid min + 1e-6 on 20 sets "
        f"(worst gap {worst_gap:.2e}); at M=0 dispatch equals the M>=0 "
        f"branch (max dev {max_dispatch:.1e}) and the branches are "
        f"complementary (max dev {max_complement:.1e})",
    )


# --- criterion 7: smoothing robustness ----------------------------------------------


def test_criterion_07_single_flip_immunity():
    counter = 0
    for n in (41, 47, 60):
        for pos in range(n):
            d = np.ones(n)
            d[pos] = -1.0
            if not np.all(I.smooth(d) > 0):
                _verdict(7, False, f"flip at {pos} of +1 run, n={n}")
            if not np.all(I.smooth(-d) < 0):
                _verdict(7, False, f"flip at {pos} of -1 run, n={n}")
            counter += 2
    _verdict(
        7, True,
        f"sign(M) constant under any single flipped window "
        f"({counter} exhaustive cases, n in 41/47/60)",
    )


# --- criterion 8: threshold rule ------------------------------------------------------


def test_criterion_08_threshold_counting_oracle():
    rng = np.random.default_rng(3)
    grid = C.THRESHOLD_GRID
    for trial in range(1000):
        n = int(rng.integers(1, 200))
        p = rng.uniform(0.0, 1.0, size=n)
        if trial % 3 == 0:
            p = np.round(p, 2)  # land values exactly on grid points
        if trial % 5 == 0:
            p = 0.5 + 0.5 * p  # mostly confident sets
        got = C.select_threshold(p)
        feasible = [
            th for th in grid
            if int(np.count_nonzero(p < th)) <= 0.01 * n + 1e-9
        ]
        want = max(feasible) if feasible else grid[0]
        if got != want:
            _verdict(8, False,
                     f"trial {trial}: got {got}, oracle says {want}")
    _verdict(
        8, True,
        "select_threshold matches the counting oracle on 1000 random "
        "certainty sets (largest grid value with <= 1% rejection)",
    )


# --- criteria 9 and 10: synthetic end-to-end study --------------------------------------


@pytest.fixture(scope="module")
def study():
    """Train/predict/evaluate for all five example subjects, timed."""
    results = []
    t0 = time.perf_counter()
    for profile in G.example_profiles():
        training, testing = G.default_study(profile)
        model, _ = train_on_recording(training)
        report = I.run_pipeline(testing, model)
        truth_states, truth_acts = window_labels(testing)
        metrics = I.evaluate(report, truth_states)
        results.append({
            "profile": profile,
            "training": training,
            "testing": testing,
            "metrics": metrics,
            "activity_rows": I.per_activity_table(
                report, truth_states, truth_acts
            ),
        })
    return results, time.perf_counter() - t0


def test_criterion_09_end_to_end_study(study):
    results, elapsed = study
    acc = np.mean([r["metrics"].accuracy for r in results])
    sens = np.mean([r["metrics"].sensitivity for r in results])
    spec = np.mean([r["metrics"].specificity for r in results])
    inconc = np.mean([r["metrics"].inconclusive_rate for r in results])
    ok = (
        acc >= 0.90 and sens >= 0.90 and spec >= 0.85
        and inconc <= 0.05 and elapsed < 300.0
    )
    _verdict(
        9, ok,
        f"5-subject study: accuracy {acc:.4f} (>=0.90), sensitivity "
        f"{sens:.4f} (>=0.90), specificity {spec:.4f} (>=0.85), "
        f"inconclusive {inconc:.4f} (<=0.05), {elapsed:.0f}s (<300s)",
    )


def test_criterion_10_protocol_fidelity(study):
    results, _ = study
    failures = []
    seen = set(G.TRAIN_ACTIVITIES)
    for r in results:
        train_acts = set(r["training"].activity_labels)
        if train_acts != seen:
            failures.append(f"training activities {sorted(train_acts)}")
        labels = r["training"].state_labels
        for state in ("ON", "OFF"):
            minutes = float(np.sum(labels == state)) / FS / 60.0
            if not 3.5 <= minutes <= 4.5:
                failures.append(f"{state} training minutes {minutes:.2f}")
        unseen = set(r["testing"].activity_labels) - train_acts
        if len(unseen) != 3:
            failures.append(f"unseen activities {sorted(unseen)}")

    # pooled per-activity accuracy across subjects
    correct = {}
    conclusive = {}
    for r in results:
        for row in r["activity_rows"]:
            act = row["activity"]
            if row["accuracy"] is None:
                continue
            conclusive[act] = conclusive.get(act, 0) + row["n_conclusive"]
            correct[act] = correct.get(act, 0) + int(
                round(row["accuracy"] * row["n_conclusive"])
            )
    acc_of = {a: correct[a] / conclusive[a] for a in conclusive}
    seen_mean = np.mean([acc_of[a] for a in acc_of if a in seen])
    unseen_accs = {a: acc_of[a] for a in acc_of if a not in seen}
    for act, acc in unseen_accs.items():
        if acc < seen_mean - 0.10:
            failures.append(
                f"{act} accuracy {acc:.3f} more than 10 points below "
                f"seen mean {seen_mean:.3f}"
            )
    detail = (
        f"training = 4 office activities at ~4 min/state; 3 unseen test "
        f"activities; seen-activity mean accuracy {seen_mean:.4f}, unseen "
        + ", ".join(f"{a} {v:.4f}" for a, v in sorted(unseen_accs.items()))
    )
    _verdict(10, not failures, detail if not failures else "; ".join(failures))


# --- criterion 11: determinism ------------------------------------------------------------


def test_criterion_11_byte_identical_runs(tmp_path):
    profile = G.example_profiles()[1]
    recording = G.generate(profile, G.office_visit_schedule())
    rec_path = tmp_path / "visit.csv"
    write_recording(recording, rec_path)
    produced = {}
    for run in ("one", "two"):
        out = tmp_path / run
        out.mkdir()
        assert cli_main([
            "train",
            "--recording", str(rec_path),
            "--model-out", str(out / "model.json"),
        ]) == 0
        assert cli_main([
            "predict",
            "--recording", str(rec_path),
            "--model", str(out / "model.json"),
            "--report-out", str(out / "report.json"),
        ]) == 0
        produced[run] = out
    mismatched = [
        name for name in ("model.json", "report.json", "report.metrics.json")
        if not filecmp.cmp(produced["one"] / name, produced["two"] / name,
                           shallow=False)
    ]
    _verdict(
        11, not mismatched,
        "two identical CLI runs produced byte-identical model, report and "
        "metrics files" if not mismatched else f"files differ: {mismatched}",
    )
