"""Per-window feature extraction.

Each 5 s window of one sensor yields 69 features: 22 per axis (x, y, z)
plus 3 cross-axis correlations, in a fixed registry order.  Spectral
features come from a single un-windowed periodogram of the window,
zero-padded to the next power of two (640 samples -> 1024 bins).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .datamodel import FeatureVector, SignalWindow

REGISTRY_VERSION = 1

TREMOR_BAND_HZ = (4.0, 6.0)
LOW_BAND_HZ = (1.0, 4.0)
TOTAL_BAND_HZ = (0.5, 15.0)
HIGH_FREQ_SPLIT_HZ = 4.0

HIST_RANGE = (-400.0, 400.0)
HIST_BINS = 200

SAMPEN_M = 2
SAMPEN_R_FACTOR = 0.2

AXES = ("x", "y", "z")

# Per-axis feature kinds in registry order (ids 1..22).
AXIS_FEATURES = (
    "band_power_1_4",
    "band_power_4_6",
    "band_power_total",
    "high_freq_fraction",
    "spectral_entropy",
    "psd_peak1",
    "psd_peak1_freq",
    "psd_peak2",
    "psd_peak2_freq",
    "mean_jerk",
    "std",
    "peak_to_peak",
    "mean",
    "autocorr_peak_count",
    "autocorr_peak_sum",
    "autocorr_first_peak_lag",
    "autocorr_first_peak_value",
    "skewness",
    "kurtosis",
    "shannon_entropy",
    "gini_index",
    "sample_entropy",
)

# Cross-axis feature kinds (ids 23..25).
CROSS_FEATURES = ("cross_corr_xy", "cross_corr_xz", "cross_corr_yz")

N_FEATURES_PER_SENSOR = len(AXIS_FEATURES) * len(AXES) + len(CROSS_FEATURES)


@dataclass(frozen=True)
class FeatureSpec:
    """One slot of the per-sensor feature registry."""

    index: int
    feature_id: int
    axis: str | None
    name: str


def feature_registry() -> tuple:
    """The 69-entry per-sensor registry, axis instances grouped per kind."""
    specs = []
    idx = 0
    for fid, base in enumerate(AXIS_FEATURES, start=1):
        for axis in AXES:
            specs.append(FeatureSpec(idx, fid, axis, f"{base}_{axis}"))
            idx += 1
    for fid, name in enumerate(CROSS_FEATURES, start=len(AXIS_FEATURES) + 1):
        specs.append(FeatureSpec(idx, fid, None, name))
        idx += 1
    return tuple(specs)


_REGISTRY = feature_registry()


def feature_names() -> list:
    return [spec.name for spec in _REGISTRY]


def combined_feature_names(sensors) -> list:
    """Registry names for a sensor set, wrist block first."""
    names = []
    for sensor in sensors:
        names.extend(f"{sensor}_{spec.name}" for spec in _REGISTRY)
    return names


def registry_records(sensors=None) -> list:
    """Registry as JSON-ready records; combined layout when sensors given."""
    if sensors is None:
        return [
            {
                "index": spec.index,
                "feature_id": spec.feature_id,
                "axis": spec.axis,
                "name": spec.name,
            }
            for spec in _REGISTRY
        ]
    records = []
    for si, sensor in enumerate(sensors):
        for spec in _REGISTRY:
            records.append(
                {
                    "index": si * N_FEATURES_PER_SENSOR + spec.index,
                    "sensor": sensor,
                    "feature_id": spec.feature_id,
                    "axis": spec.axis,
                    "name": f"{sensor}_{spec.name}",
                }
            )
    return records


# --- spectral helpers -------------------------------------------------


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def periodogram(x: np.ndarray, sample_rate_hz: float):
    """Un-windowed power spectrum of one window, zero-padded to 2^k bins.

    Power is |FFT|^2 / n with n the window length; the scale is arbitrary
    but fixed, which is all the downstream features need.
    """
    n = len(x)
    nfft = _next_pow2(n)
    spec = np.fft.rfft(x, nfft)
    power = (spec.real**2 + spec.imag**2) / n
    freqs = np.fft.rfftfreq(nfft, 1.0 / sample_rate_hz)
    return freqs, power


def band_power(freqs, power, f_lo: float, f_hi: float) -> float:
    """Sum of periodogram power over bins with f_lo <= f <= f_hi."""
    mask = (freqs >= f_lo - 1e-12) & (freqs <= f_hi + 1e-12)
    if not np.any(mask):
        warnings.warn(
            f"band [{f_lo}, {f_hi}] Hz contains no frequency bins", stacklevel=2
        )
        return 0.0
    return float(np.sum(power[mask]))


def high_freq_fraction(freqs, power, split_hz: float = HIGH_FREQ_SPLIT_HZ) -> float:
    total = float(np.sum(power))
    if total <= 0.0:
        return 0.0
    return float(np.sum(power[freqs > split_hz + 1e-12]) / total)


def spectral_entropy(power) -> float:
    """Shannon entropy (bits) of the power-normalized periodogram."""
    total = float(np.sum(power))
    if total <= 0.0:
        return 0.0
    p = power / total
    p = p[p > 0.0]
    return float(-np.sum(p * np.log2(p)))


def psd_peaks(freqs, power):
    """Dominant and secondary periodogram peaks.

    Returns (peak1, f1, peak2, f2).  The secondary peak is the largest
    strict local maximum outside the dominant bin and its two neighbors;
    (0, 0) when no such maximum exists.
    """
    i1 = int(np.argmax(power))
    peak1 = float(power[i1])
    f1 = float(freqs[i1])
    interior = np.arange(1, len(power) - 1)
    is_max = (power[interior] > power[interior - 1]) & (
        power[interior] > power[interior + 1]
    )
    candidates = interior[is_max]
    candidates = candidates[np.abs(candidates - i1) > 1]
    if candidates.size == 0:
        return peak1, f1, 0.0, 0.0
    i2 = candidates[np.argmax(power[candidates])]
    return peak1, f1, float(power[i2]), float(freqs[i2])


# --- time-domain helpers ----------------------------------------------


def mean_jerk(x: np.ndarray, sample_rate_hz: float) -> float:
    """Signed mean of the second finite difference, scaled to units/s^2."""
    return float(np.mean(np.diff(x, 2)) * sample_rate_hz * sample_rate_hz)


def basic_stats(x: np.ndarray):
    """(std, peak_to_peak, mean, skewness, kurtosis), population moments.

    Kurtosis is non-excess (Gaussian -> 3).  Zero-variance windows get
    skewness 0 and kurtosis 0.
    """
    mu = float(np.mean(x))
    d = x - mu
    var = float(np.mean(d * d))
    std = math.sqrt(var)
    p2p = float(np.max(x) - np.min(x))
    if std == 0.0:
        return std, p2p, mu, 0.0, 0.0
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    return std, p2p, mu, m3 / std**3, m4 / var**2


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Biased autocorrelation for lags 0..n-1, normalized to r[0] = 1."""
    n = len(x)
    nfft = _next_pow2(2 * n - 1)
    spec = np.fft.rfft(x, nfft)
    r = np.fft.irfft(spec.real**2 + spec.imag**2, nfft)[:n]
    if r[0] <= 0.0:
        return np.zeros(n)
    return r / r[0]


def autocorr_peak_features(x: np.ndarray):
    """(count, sum, first lag, first value) of strict autocorrelation maxima.

    Maxima are searched over lags 1..n-2; all four values are 0 when the
    series has none (or zero energy).
    """
    r = autocorrelation(x)
    n = len(r)
    if n < 3:
        return 0.0, 0.0, 0.0, 0.0
    lags = np.arange(1, n - 1)
    is_max = (r[lags] > r[lags - 1]) & (r[lags] > r[lags + 1])
    peaks = lags[is_max]
    if peaks.size == 0:
        return 0.0, 0.0, 0.0, 0.0
    return (
        float(peaks.size),
        float(np.sum(r[peaks])),
        float(peaks[0]),
        float(r[peaks[0]]),
    )


def _histogram_probs(x: np.ndarray) -> np.ndarray:
    lo, hi = HIST_RANGE
    counts, _ = np.histogram(np.clip(x, lo, hi), bins=HIST_BINS, range=HIST_RANGE)
    return counts / len(x)


def shannon_entropy(x: np.ndarray) -> float:
    """Shannon entropy (bits) of the amplitude histogram.

    200 uniform bins spanning (-400, 400) deg/s; out-of-range samples are
    clipped into the edge bins.
    """
    p = _histogram_probs(x)
    p = p[p > 0.0]
    return float(-np.sum(p * np.log2(p)))


def gini_index(x: np.ndarray) -> float:
    """Gini impurity 1 - sum(p^2) of the amplitude histogram."""
    p = _histogram_probs(x)
    return float(1.0 - np.sum(p * p))


def _sampen_counts_py(x: np.ndarray, r: float, m: int):
    # Vectorized pair counting over the shared template range.
    nt = len(x) - m - 1
    if nt < 2:
        return 0, 0
    diff = np.abs(x[:, None] - x[None, :])
    within = diff < r
    cm = within[:nt, :nt].copy()
    for off in range(1, m):
        cm &= within[off : nt + off, off : nt + off]
    cm1 = cm & within[m : nt + m, m : nt + m]
    m2 = (int(np.count_nonzero(cm)) - nt) // 2
    m1 = (int(np.count_nonzero(cm1)) - nt) // 2
    return m1, m2


def _sampen_counts_loops(x, r, m):
    nt = x.shape[0] - m - 1
    m1 = 0
    m2 = 0
    for j in range(nt):
        for k in range(j + 1, nt):
            dm = 0.0
            for t in range(m):
                d = abs(x[j + t] - x[k + t])
                if d > dm:
                    dm = d
                if dm >= r:
                    break
            if dm < r:
                m2 += 1
                d = abs(x[j + m] - x[k + m])
                if d > dm:
                    dm = d
                if dm < r:
                    m1 += 1
    return m1, m2


try:  # pragma: no cover - exercised through sample_entropy
    from numba import njit

    _sampen_counts = njit(cache=True)(_sampen_counts_loops)
except ImportError:  # pragma: no cover
    _sampen_counts = _sampen_counts_py


def sample_entropy(
    x: np.ndarray, m: int = SAMPEN_M, r_factor: float = SAMPEN_R_FACTOR
) -> float:
    """Sample entropy with Chebyshev distance and tolerance r = r_factor*std.

    Counts ordered template pairs (j < k, self-matches excluded) of length
    m and m+1 over the shared start range.  Returns 0 for zero-variance
    windows and the cap log(n*(n-1)) when no length-(m+1) pair matches.
    """
    n = len(x)
    if n < m + 3:
        raise ValueError(f"window too short for sample entropy (m={m})")
    std = float(np.std(x))
    if std == 0.0:
        return 0.0
    r = r_factor * std
    m1, m2 = _sampen_counts(np.ascontiguousarray(x, dtype=np.float64), r, m)
    if m1 == 0 or m2 == 0:
        return math.log(n * (n - 1))
    return -math.log(m1 / m2)


def cross_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation at lag zero; 0 when either axis is constant."""
    da = a - np.mean(a)
    db = b - np.mean(b)
    sa = float(np.sqrt(np.mean(da * da)))
    sb = float(np.sqrt(np.mean(db * db)))
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return float(np.mean(da * db) / (sa * sb))


# --- window-level extraction ------------------------------------------


def _axis_features(x: np.ndarray, sample_rate_hz: float) -> list:
    freqs, power = periodogram(x, sample_rate_hz)
    peak1, f1, peak2, f2 = psd_peaks(freqs, power)
    std, p2p, mu, skew, kurt = basic_stats(x)
    ac_count, ac_sum, ac_lag, ac_val = autocorr_peak_features(x)
    return [
        band_power(freqs, power, *LOW_BAND_HZ),
        band_power(freqs, power, *TREMOR_BAND_HZ),
        band_power(freqs, power, *TOTAL_BAND_HZ),
        high_freq_fraction(freqs, power),
        spectral_entropy(power),
        peak1,
        f1,
        peak2,
        f2,
        mean_jerk(x, sample_rate_hz),
        std,
        p2p,
        mu,
        ac_count,
        ac_sum,
        ac_lag,
        ac_val,
        skew,
        kurt,
        shannon_entropy(x),
        gini_index(x),
        sample_entropy(x),
    ]


def extract(window: SignalWindow) -> FeatureVector:
    """All 69 registry features for one window.

    Non-finite values are replaced with 0 and reported through the
    ``flagged`` index tuple of the returned vector.
    """
    per_axis = [_axis_features(getattr(window, ax), window.sample_rate_hz)
                for ax in AXES]
    values = np.empty(N_FEATURES_PER_SENSOR)
    idx = 0
    for fid in range(len(AXIS_FEATURES)):
        for ai in range(len(AXES)):
            values[idx] = per_axis[ai][fid]
            idx += 1
    values[idx] = cross_correlation(window.x, window.y)
    values[idx + 1] = cross_correlation(window.x, window.z)
    values[idx + 2] = cross_correlation(window.y, window.z)
    bad = ~np.isfinite(values)
    flagged = tuple(int(i) for i in np.nonzero(bad)[0])
    if flagged:
        warnings.warn(
            f"window at sample {window.start_sample}: replaced non-finite "
            f"features {flagged} with 0",
            stacklevel=2,
        )
        values[bad] = 0.0
    return FeatureVector(window.sensor_id, values, flagged)


@dataclass(eq=False)
class FeatureMatrix:
    """Stacked combined feature rows for index-aligned windows."""

    values: np.ndarray
    feature_names: list
    sensors: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature matrix must be two-dimensional")
        if self.values.shape[1] != len(self.feature_names):
            raise ValueError("feature name count does not match matrix width")

    @property
    def n_windows(self) -> int:
        return self.values.shape[0]


def sensor_block_order(sensors) -> tuple:
    """Canonical combined-matrix block order: wrist first, then ankle."""
    known = [s for s in ("wrist", "ankle") if s in sensors]
    if len(known) != len(sensors):
        raise ValueError(f"unknown sensors in {sensors!r}")
    return tuple(known)


def extract_matrix(segments: dict, sensors=None) -> FeatureMatrix:
    """Extract and column-concatenate features for the requested sensors.

    ``segments`` is the per-sensor window dict from preprocess.segment().
    Windows must be index-aligned (equal counts, equal start samples).
    """
    if sensors is None:
        sensors = tuple(segments.keys())
    sensors = sensor_block_order(sensors)
    missing = [s for s in sensors if s not in segments]
    if missing:
        raise ValueError(f"segments missing sensors {missing}")
    counts = {s: len(segments[s]) for s in sensors}
    if len(set(counts.values())) != 1:
        raise ValueError(f"sensors have differing window counts {counts}")
    n = counts[sensors[0]]
    if n == 0:
        raise ValueError("no windows to extract features from")
    for i in range(n):
        starts = {segments[s][i].start_sample for s in sensors}
        if len(starts) != 1:
            raise ValueError(f"window {i} is not aligned across sensors")
    blocks = []
    for sensor in sensors:
        rows = [extract(w).values for w in segments[sensor]]
        blocks.append(np.vstack(rows))
    return FeatureMatrix(
        np.hstack(blocks), combined_feature_names(sensors), sensors
    )
