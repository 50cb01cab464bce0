"""Per-second state decisions for new recordings.

Raw window margins are smoothed twice (a 5 s then a 40 s centered
moving average, shrinking at the edges), thresholded at zero (positive
means OFF), and censored to INCONCLUSIVE wherever the calibrated
certainty falls below the model's threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import preprocess
from .calibrate import PlattParams, certainty
from .datamodel import (
    ACTIVITIES,
    Recording,
    STATE_INCONCLUSIVE,
    STATE_OFF,
    STATE_ON,
    StateReport,
    SvmModel,
)
from .features import extract_matrix
from .svm import decision_function

SMOOTH_WIDTH_SHORT = 5
SMOOTH_WIDTH_LONG = 40


def moving_average(x: np.ndarray, width: int) -> np.ndarray:
    """Centered moving average whose window shrinks at the edges.

    Even widths take one more trailing than leading sample.  Output
    length always equals input length.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("input must be one-dimensional")
    if width < 1:
        raise ValueError("width must be at least 1")
    half_left = (width - 1) // 2
    half_right = width // 2
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(len(x))
    lo = np.maximum(idx - half_left, 0)
    hi = np.minimum(idx + half_right + 1, len(x))
    return (csum[hi] - csum[lo]) / (hi - lo)


def smooth(
    decisions: np.ndarray,
    width_short: int = SMOOTH_WIDTH_SHORT,
    width_long: int = SMOOTH_WIDTH_LONG,
) -> np.ndarray:
    """Two-stage fuzzy smoothing of per-second decision values."""
    return moving_average(moving_average(decisions, width_short), width_long)


def predict_states(decisions) -> list:
    """OFF for strictly positive smoothed decisions, ON otherwise."""
    return [STATE_OFF if d > 0 else STATE_ON for d in np.asarray(decisions)]


def censor(states, certainties, threshold: float) -> list:
    """Replace states whose certainty is below the threshold."""
    return [
        STATE_INCONCLUSIVE if p < threshold else s
        for s, p in zip(states, certainties)
    ]


def run_pipeline(
    recording: Recording,
    model: SvmModel,
    window_s: float = preprocess.DEFAULT_WINDOW_S,
    overlap_s: float = preprocess.DEFAULT_OVERLAP_S,
) -> StateReport:
    """Full preprocessing + detection pass over one recording.

    Report timestamps mark the end of each analysis window, in the
    recording's own timebase.
    """
    missing = [s for s in model.sensors if s not in recording.sensor_ids]
    if missing:
        raise ValueError(f"recording lacks sensors required by model: {missing}")
    filt = preprocess.design_bandpass(sample_rate_hz=recording.sample_rate_hz)
    filtered = preprocess.filter_recording(filt, recording)
    segments = preprocess.segment(filtered, window_s, overlap_s)
    matrix = extract_matrix(segments, model.sensors)
    x = (matrix.values[:, model.feature_mask] - model.norm_mean) / model.norm_scale
    raw = decision_function(
        x, model.support_vectors, model.dual_coef, model.bias,
        model.kernel, model.gamma,
    )
    m = smooth(raw)
    certainties = np.clip(certainty(m, PlattParams(model.platt_a, model.platt_b)),
                          0.0, 1.0)
    states = censor(predict_states(m), certainties, model.certainty_threshold)
    starts = np.asarray(
        [w.start_sample for w in segments[model.sensors[0]]], dtype=np.float64
    )
    w_len = len(segments[model.sensors[0]][0])
    times = recording.start_time_s + (starts + w_len) / recording.sample_rate_hz
    return StateReport(
        times=times,
        decisions=m,
        certainties=certainties,
        states=states,
        certainty_threshold=model.certainty_threshold,
    )


@dataclass(eq=False)
class EvaluationResult:
    """Confusion metrics over the conclusive seconds of a report."""

    accuracy: float
    sensitivity: float
    specificity: float
    inconclusive_rate: float
    tp: int
    fp: int
    tn: int
    fn: int
    n_records: int
    n_conclusive: int
    positive_class: str

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "inconclusive_rate": self.inconclusive_rate,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "n_records": self.n_records,
            "n_conclusive": self.n_conclusive,
            "positive_class": self.positive_class,
        }


def evaluate(
    report: StateReport, truth_states, positive: str = STATE_ON
) -> EvaluationResult:
    """Score report decisions against per-window truth labels.

    INCONCLUSIVE seconds are excluded from the confusion counts and
    surface only through ``inconclusive_rate``.  ``positive`` picks which
    state counts as a positive for sensitivity/specificity (default ON).
    """
    if positive not in (STATE_ON, STATE_OFF):
        raise ValueError("positive class must be ON or OFF")
    truth = list(truth_states)
    if len(truth) != len(report):
        raise ValueError(
            f"truth has {len(truth)} entries, report has {len(report)}"
        )
    bad = {t for t in truth if t not in (STATE_ON, STATE_OFF)}
    if bad:
        raise ValueError(f"truth labels must be ON/OFF, found {sorted(map(str, bad))}")
    negative = STATE_OFF if positive == STATE_ON else STATE_ON
    tp = fp = tn = fn = 0
    n_conclusive = 0
    for pred, true in zip(report.states, truth):
        if pred == STATE_INCONCLUSIVE:
            continue
        n_conclusive += 1
        if true == positive:
            if pred == positive:
                tp += 1
            else:
                fn += 1
        else:
            if pred == negative:
                tn += 1
            else:
                fp += 1
    if n_conclusive == 0:
        raise ValueError("report has no conclusive seconds to evaluate")
    accuracy = (tp + tn) / n_conclusive
    sensitivity = tp / (tp + fn) if (tp + fn) > 0 else math.nan
    specificity = tn / (tn + fp) if (tn + fp) > 0 else math.nan
    return EvaluationResult(
        accuracy=accuracy,
        sensitivity=sensitivity,
        specificity=specificity,
        inconclusive_rate=1.0 - n_conclusive / len(truth),
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        n_records=len(truth),
        n_conclusive=n_conclusive,
        positive_class=positive,
    )


def per_activity_table(report: StateReport, truth_states, truth_activities) -> list:
    """Per-activity conclusive-second accuracy rows.

    Rows cover the seven standard activities plus any extra labels seen
    in the truth series; activities without conclusive seconds report a
    null accuracy.
    """
    truth = list(truth_states)
    acts = list(truth_activities)
    if not (len(truth) == len(acts) == len(report)):
        raise ValueError("truth series must match the report length")
    extra = sorted({a for a in acts if a and a not in ACTIVITIES})
    rows = []
    for activity in list(ACTIVITIES) + extra:
        idx = [i for i, a in enumerate(acts) if a == activity]
        n_conclusive = 0
        n_correct = 0
        for i in idx:
            if report.states[i] == STATE_INCONCLUSIVE:
                continue
            n_conclusive += 1
            if report.states[i] == truth[i]:
                n_correct += 1
        rows.append(
            {
                "activity": activity,
                "n_seconds": len(idx),
                "n_conclusive": n_conclusive,
                "accuracy": (n_correct / n_conclusive) if n_conclusive else None,
            }
        )
    return rows
