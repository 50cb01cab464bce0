"""Core data types and file formats for medication-state detection.

Recordings hold synchronized triaxial gyroscope streams (deg/s) from a
wrist and an ankle sensor, optionally labeled per sample with the
subject's medication state (ON/OFF) and current activity.  Models and
state reports are serialized as versioned JSON; recordings travel as
CSV.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

SENSOR_IDS = ("wrist", "ankle")

STATE_ON = "ON"
STATE_OFF = "OFF"
STATE_INCONCLUSIVE = "INCONCLUSIVE"

# Internal label coding used by the classifier: OFF is the positive class
# so a positive decision value means medication OFF.
CODE_OFF = 1
CODE_ON = -1

ACTIVITIES = (
    "resting",
    "walking",
    "drinking",
    "dressing",
    "hair_brushing",
    "unpacking_groceries",
    "cutting_food",
)

MODEL_FORMAT_VERSION = 1
REPORT_FORMAT_VERSION = 1

RECORDING_COLUMNS = ("timestamp_s", "sensor", "gx", "gy", "gz")
OPTIONAL_COLUMNS = ("state", "activity")


def encode_states(states) -> np.ndarray:
    """Map ON/OFF label strings to the internal -1/+1 coding."""
    out = np.empty(len(states), dtype=np.int64)
    for i, s in enumerate(states):
        if s == STATE_OFF:
            out[i] = CODE_OFF
        elif s == STATE_ON:
            out[i] = CODE_ON
        else:
            raise ValueError(f"unknown state label {s!r}")
    return out


def decode_states(codes) -> list:
    return [STATE_OFF if c > 0 else STATE_ON for c in codes]


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(eq=False)
class SensorStream:
    """Triaxial gyroscope stream for one sensor location."""

    sensor_id: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        if self.sensor_id not in SENSOR_IDS:
            raise ValueError(f"unknown sensor id {self.sensor_id!r}")
        self.x = _as_float_array(self.x, "x")
        self.y = _as_float_array(self.y, "y")
        self.z = _as_float_array(self.z, "z")
        if not (len(self.x) == len(self.y) == len(self.z)):
            raise ValueError("axis streams must have equal length")

    def __len__(self) -> int:
        return len(self.x)

    def axes(self) -> np.ndarray:
        """Samples stacked as an (n, 3) array in x, y, z order."""
        return np.column_stack([self.x, self.y, self.z])


@dataclass(eq=False)
class Recording:
    """A labeled multi-sensor gyroscope session."""

    sample_rate_hz: float
    streams: list
    state_labels: np.ndarray | None = None
    activity_labels: np.ndarray | None = None
    start_time_s: float = 0.0

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        if not self.streams:
            raise ValueError("recording needs at least one sensor stream")
        ids = [s.sensor_id for s in self.streams]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate sensor id in recording")
        n = len(self.streams[0])
        if any(len(s) != n for s in self.streams):
            raise ValueError("sensor streams must have equal length")
        for name in ("state_labels", "activity_labels"):
            labels = getattr(self, name)
            if labels is None:
                continue
            labels = np.asarray(labels, dtype=np.str_)
            if labels.shape != (n,):
                raise ValueError(f"{name} must have one entry per sample")
            setattr(self, name, labels)
        if self.state_labels is not None:
            bad = set(np.unique(self.state_labels)) - {STATE_ON, STATE_OFF, ""}
            if bad:
                raise ValueError(f"invalid state labels {sorted(bad)}")

    @property
    def n_samples(self) -> int:
        return len(self.streams[0])

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    @property
    def sensor_ids(self) -> list:
        return [s.sensor_id for s in self.streams]

    def stream(self, sensor_id: str) -> SensorStream:
        for s in self.streams:
            if s.sensor_id == sensor_id:
                return s
        raise KeyError(f"recording has no {sensor_id!r} stream")


@dataclass(eq=False)
class SignalWindow:
    """One fixed-length analysis window of a single sensor stream."""

    sensor_id: str
    sample_rate_hz: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    start_sample: int
    label: str | None = None
    activity: str | None = None

    def __post_init__(self):
        if not (len(self.x) == len(self.y) == len(self.z)):
            raise ValueError("window axes must have equal length")
        if len(self.x) < 4:
            raise ValueError("window too short")
        if self.label is not None and self.label not in (STATE_ON, STATE_OFF):
            raise ValueError(f"invalid window label {self.label!r}")

    def __len__(self) -> int:
        return len(self.x)


@dataclass(eq=False)
class FeatureVector:
    """Feature values for one window of one sensor, in registry order."""

    sensor_id: str
    values: np.ndarray
    flagged: tuple = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("feature values must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")


@dataclass(eq=False)
class SvmModel:
    """Serializable trained detector.

    Support vectors live in the normalized feature space selected by
    ``feature_mask`` (indices into the combined per-sensor feature
    registry).  ``norm_mean``/``norm_scale`` are the training z-score
    parameters for those same columns.
    """

    kernel: str
    c: float
    gamma: float | None
    sensors: tuple
    feature_mask: np.ndarray
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    platt_a: float
    platt_b: float
    certainty_threshold: float
    norm_mean: np.ndarray
    norm_scale: np.ndarray

    def __post_init__(self):
        if self.kernel not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.kernel == "rbf" and not (self.gamma and self.gamma > 0):
            raise ValueError("rbf kernel needs a positive gamma")
        self.sensors = tuple(self.sensors)
        if not self.sensors or any(s not in SENSOR_IDS for s in self.sensors):
            raise ValueError(f"sensors must be a non-empty subset of {SENSOR_IDS}")
        if len(set(self.sensors)) != len(self.sensors):
            raise ValueError("duplicate sensor in model")
        self.feature_mask = np.asarray(self.feature_mask, dtype=np.int64)
        if self.feature_mask.size == 0:
            raise ValueError("feature mask must not be empty")
        if len(np.unique(self.feature_mask)) != self.feature_mask.size:
            raise ValueError("feature mask has duplicate indices")
        self.support_vectors = np.asarray(self.support_vectors, dtype=np.float64)
        self.dual_coef = np.asarray(self.dual_coef, dtype=np.float64)
        if self.support_vectors.ndim != 2:
            raise ValueError("support_vectors must be a matrix")
        if self.support_vectors.shape[0] == 0:
            raise ValueError("model has no support vectors")
        if self.support_vectors.shape[1] != self.feature_mask.size:
            raise ValueError("support vector width does not match feature mask")
        if self.dual_coef.shape != (self.support_vectors.shape[0],):
            raise ValueError("dual_coef length does not match support vectors")
        if not (0.5 <= self.certainty_threshold <= 1.0):
            raise ValueError("certainty_threshold must be in [0.5, 1]")
        self.norm_mean = np.asarray(self.norm_mean, dtype=np.float64)
        self.norm_scale = np.asarray(self.norm_scale, dtype=np.float64)
        for name in ("norm_mean", "norm_scale"):
            arr = getattr(self, name)
            if arr.shape != (self.feature_mask.size,):
                raise ValueError(f"{name} length does not match feature mask")
        if np.any(self.norm_scale <= 0):
            raise ValueError("normalization scale must be positive")
        for name in ("support_vectors", "dual_coef", "norm_mean", "norm_scale"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")
        for name in ("bias", "platt_a", "platt_b"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(eq=False)
class StateReport:
    """Per-second medication-state decisions for one recording."""

    times: np.ndarray
    decisions: np.ndarray
    certainties: np.ndarray
    states: list
    certainty_threshold: float

    def __post_init__(self):
        self.times = _as_float_array(self.times, "times")
        self.decisions = _as_float_array(self.decisions, "decisions")
        self.certainties = _as_float_array(self.certainties, "certainties")
        self.states = list(self.states)
        n = len(self.times)
        if not (len(self.decisions) == len(self.certainties) == len(self.states) == n):
            raise ValueError("report fields must have equal length")
        if np.any((self.certainties < 0) | (self.certainties > 1)):
            raise ValueError("certainties must lie in [0, 1]")
        for state, cert in zip(self.states, self.certainties):
            if state not in (STATE_ON, STATE_OFF, STATE_INCONCLUSIVE):
                raise ValueError(f"invalid report state {state!r}")
            if (cert < self.certainty_threshold) != (state == STATE_INCONCLUSIVE):
                raise ValueError(
                    "state censoring inconsistent with certainty threshold"
                )

    def __len__(self) -> int:
        return len(self.times)

    def _count(self, state: str) -> int:
        return sum(1 for s in self.states if s == state)

    @property
    def minutes_on(self) -> float:
        return self._count(STATE_ON) / 60.0

    @property
    def minutes_off(self) -> float:
        return self._count(STATE_OFF) / 60.0

    @property
    def minutes_inconclusive(self) -> float:
        return self._count(STATE_INCONCLUSIVE) / 60.0

    def summary(self) -> dict:
        return {
            "minutes_on": self.minutes_on,
            "minutes_off": self.minutes_off,
            "minutes_inconclusive": self.minutes_inconclusive,
        }


def read_recording(path, sample_rate_hz: float = 128.0) -> Recording:
    """Read a recording CSV.

    Expected header: timestamp_s,sensor,gx,gy,gz with optional trailing
    state and activity columns.  Rows of each sensor must be ordered by
    timestamp with uniform 1/sample_rate_hz spacing (tolerance 1e-6 s).
    """
    per_sensor = {}
    order = []
    state_col = activity_col = False
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty recording file") from None
        header = [h.strip() for h in header]
        if tuple(header[:5]) != RECORDING_COLUMNS:
            raise ValueError(
                f"{path}: bad header, expected {','.join(RECORDING_COLUMNS)}"
            )
        extra = header[5:]
        if extra and extra != list(OPTIONAL_COLUMNS[: len(extra)]):
            raise ValueError(f"{path}: unexpected columns {extra}")
        state_col = "state" in extra
        activity_col = "activity" in extra
        n_cols = len(header)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_cols:
                raise ValueError(f"{path}: row {row_no}: expected {n_cols} fields")
            try:
                t = float(row[0])
                gx, gy, gz = float(row[2]), float(row[3]), float(row[4])
            except ValueError:
                raise ValueError(f"{path}: row {row_no}: malformed number") from None
            sensor = row[1].strip()
            if sensor not in SENSOR_IDS:
                raise ValueError(f"{path}: row {row_no}: unknown sensor {sensor!r}")
            if sensor not in per_sensor:
                per_sensor[sensor] = {"t": [], "g": [], "state": [], "activity": []}
                order.append(sensor)
            rec = per_sensor[sensor]
            rec["t"].append(t)
            rec["g"].append((gx, gy, gz))
            if state_col:
                state = row[5].strip()
                if state not in (STATE_ON, STATE_OFF, ""):
                    raise ValueError(f"{path}: row {row_no}: bad state {state!r}")
                rec["state"].append(state)
            if activity_col:
                act = row[5 + int(state_col)].strip()
                rec["activity"].append(act)
    if not order:
        raise ValueError(f"{path}: no data rows")
    lengths = {s: len(per_sensor[s]["t"]) for s in order}
    if len(set(lengths.values())) != 1:
        raise ValueError(f"{path}: mismatched stream lengths {lengths}")
    dt = 1.0 / sample_rate_hz
    streams = []
    for sensor in order:
        t = np.asarray(per_sensor[sensor]["t"])
        steps = np.diff(t)
        if np.any(steps <= 0):
            bad = int(np.argmax(steps <= 0))
            raise ValueError(
                f"{path}: non-monotonic timestamps for {sensor} near sample {bad + 1}"
            )
        if np.any(np.abs(steps - dt) > 1e-6):
            bad = int(np.argmax(np.abs(steps - dt) > 1e-6))
            raise ValueError(
                f"{path}: {sensor} timestamps not spaced at "
                f"{dt:.6g} s near sample {bad + 1}"
            )
        g = np.asarray(per_sensor[sensor]["g"])
        streams.append(SensorStream(sensor, g[:, 0], g[:, 1], g[:, 2]))
    first = per_sensor[order[0]]
    state_labels = None
    if state_col and any(first["state"]):
        state_labels = np.asarray(first["state"], dtype=np.str_)
    activity_labels = None
    if activity_col and any(first["activity"]):
        activity_labels = np.asarray(first["activity"], dtype=np.str_)
    return Recording(
        sample_rate_hz=sample_rate_hz,
        streams=streams,
        state_labels=state_labels,
        activity_labels=activity_labels,
        start_time_s=float(per_sensor[order[0]]["t"][0]),
    )


def write_recording(recording: Recording, path) -> None:
    """Write a recording CSV (rows interleaved per sample across sensors)."""
    labeled = recording.state_labels is not None
    with_activity = recording.activity_labels is not None
    header = list(RECORDING_COLUMNS)
    if labeled or with_activity:
        header.append("state")
    if with_activity:
        header.append("activity")
    fs = recording.sample_rate_hz
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(recording.n_samples):
            t = repr(recording.start_time_s + i / fs)
            for stream in recording.streams:
                row = [t, stream.sensor_id,
                       repr(float(stream.x[i])),
                       repr(float(stream.y[i])),
                       repr(float(stream.z[i]))]
                if labeled or with_activity:
                    row.append(recording.state_labels[i] if labeled else "")
                if with_activity:
                    row.append(recording.activity_labels[i])
                writer.writerow(row)


def write_model(model: SvmModel, path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kernel": model.kernel,
        "c": model.c,
        "gamma": model.gamma,
        "sensors": list(model.sensors),
        "feature_mask": model.feature_mask.tolist(),
        "support_vectors": model.support_vectors.tolist(),
        "dual_coef": model.dual_coef.tolist(),
        "bias": model.bias,
        "platt_a": model.platt_a,
        "platt_b": model.platt_b,
        "certainty_threshold": model.certainty_threshold,
        "norm_mean": model.norm_mean.tolist(),
        "norm_scale": model.norm_scale.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_model(path) -> SvmModel:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format_version {version!r}")
    try:
        return SvmModel(
            kernel=doc["kernel"],
            c=doc["c"],
            gamma=doc["gamma"],
            sensors=tuple(doc["sensors"]),
            feature_mask=doc["feature_mask"],
            support_vectors=doc["support_vectors"],
            dual_coef=doc["dual_coef"],
            bias=doc["bias"],
            platt_a=doc["platt_a"],
            platt_b=doc["platt_b"],
            certainty_threshold=doc["certainty_threshold"],
            norm_mean=doc["norm_mean"],
            norm_scale=doc["norm_scale"],
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing model field {exc}") from None


def write_report(report: StateReport, path, fmt: str = "json") -> None:
    if fmt == "json":
        doc = {
            "format_version": REPORT_FORMAT_VERSION,
            "certainty_threshold": report.certainty_threshold,
            "summary": report.summary(),
            "records": [
                {
                    "t": float(t),
                    "decision": float(d),
                    "certainty": float(p),
                    "state": s,
                }
                for t, d, p, s in zip(
                    report.times, report.decisions, report.certainties, report.states
                )
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "decision", "certainty", "state"])
            for t, d, p, s in zip(
                report.times, report.decisions, report.certainties, report.states
            ):
                writer.writerow([repr(float(t)), repr(float(d)), repr(float(p)), s])
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def read_report(path) -> StateReport:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != REPORT_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported report format_version {version!r}")
    records = doc["records"]
    return StateReport(
        times=[r["t"] for r in records],
        decisions=[r["decision"] for r in records],
        certainties=[r["certainty"] for r in records],
        states=[r["state"] for r in records],
        certainty_threshold=doc["certainty_threshold"],
    )
