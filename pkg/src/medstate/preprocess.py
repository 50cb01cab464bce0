"""Signal conditioning: band-pass filtering and window segmentation.

The detector runs on 0.5-15 Hz band-passed gyroscope signals cut into
5 s windows that slide by 1 s (4 s overlap).  Filtering uses a linear
phase windowed-sinc FIR whose group delay is compensated, so window
sample indices line up exactly with the raw recording.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .datamodel import Recording, SensorStream, SignalWindow, STATE_OFF, STATE_ON

DEFAULT_LOW_HZ = 0.5
DEFAULT_HIGH_HZ = 15.0
DEFAULT_ORDER = 512
DEFAULT_WINDOW_S = 5.0
DEFAULT_OVERLAP_S = 4.0

PASSBAND_MAX_RIPPLE_DB = -1.0
STOPBAND_MIN_ATTENUATION_DB = -20.0


@dataclass(eq=False)
class FirFilter:
    """Linear-phase FIR band-pass filter."""

    taps: np.ndarray
    low_hz: float
    high_hz: float
    sample_rate_hz: float

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.float64)
        if self.taps.ndim != 1 or len(self.taps) < 3:
            raise ValueError("taps must be a vector of length >= 3")
        if len(self.taps) % 2 == 0:
            raise ValueError("tap count must be odd (even order)")
        if np.max(np.abs(self.taps - self.taps[::-1])) > 1e-12:
            raise ValueError("taps must be symmetric (linear phase)")

    @property
    def order(self) -> int:
        return len(self.taps) - 1

    @property
    def group_delay_samples(self) -> int:
        return self.order // 2

    def response_at(self, freqs_hz) -> np.ndarray:
        """Complex frequency response at the given frequencies."""
        freqs_hz = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
        k = np.arange(len(self.taps))
        phase = -2j * np.pi * np.outer(freqs_hz, k) / self.sample_rate_hz
        return np.exp(phase) @ self.taps


def _windowed_sinc_lowpass(cutoff_hz: float, sample_rate_hz: float, order: int):
    # Hamming-windowed ideal low-pass, normalized to unit DC gain.
    n = np.arange(order + 1) - order / 2.0
    h = (2.0 * cutoff_hz / sample_rate_hz) * np.sinc(2.0 * cutoff_hz * n / sample_rate_hz)
    h *= np.hamming(order + 1)
    return h / h.sum()


def design_bandpass(
    low_hz: float = DEFAULT_LOW_HZ,
    high_hz: float = DEFAULT_HIGH_HZ,
    sample_rate_hz: float = 128.0,
    order: int = DEFAULT_ORDER,
) -> FirFilter:
    """Design the band-pass FIR as a difference of two unit-gain low-passes.

    The subtraction makes the coefficient sum (DC gain) vanish to float
    rounding.  Raises if the response contract cannot be met at the
    requested order: passband magnitude >= -1 dB between 2*low_hz and
    (2/3)*high_hz, stopband <= -20 dB at low_hz/10 and 2*high_hz.
    """
    nyquist = sample_rate_hz / 2.0
    if not (0.0 < low_hz < high_hz < nyquist):
        raise ValueError(
            f"invalid band edges ({low_hz}, {high_hz}) for fs={sample_rate_hz}"
        )
    if order < 16 or order % 2 != 0:
        raise ValueError("order must be an even integer >= 16")
    taps = _windowed_sinc_lowpass(high_hz, sample_rate_hz, order) - \
        _windowed_sinc_lowpass(low_hz, sample_rate_hz, order)
    filt = FirFilter(taps, low_hz, high_hz, sample_rate_hz)

    dc = abs(taps.sum())
    if dc > 1e-6:
        raise ValueError(f"DC leakage {dc:.3g} exceeds 1e-6")
    pass_lo, pass_hi = 2.0 * low_hz, high_hz * 2.0 / 3.0
    pass_probe = np.linspace(pass_lo, pass_hi, 41)
    gain_db = 20.0 * np.log10(np.abs(filt.response_at(pass_probe)) + 1e-300)
    if gain_db.min() < PASSBAND_MAX_RIPPLE_DB:
        raise ValueError(
            f"order {order} too small: passband dips to {gain_db.min():.2f} dB "
            f"on [{pass_lo:g}, {pass_hi:g}] Hz"
        )
    stop_probe = np.array([low_hz / 10.0, min(2.0 * high_hz, 0.999 * nyquist)])
    stop_db = 20.0 * np.log10(np.abs(filt.response_at(stop_probe)) + 1e-300)
    if stop_db.max() > STOPBAND_MIN_ATTENUATION_DB:
        raise ValueError(
            f"order {order} too small: stopband only reaches {stop_db.max():.2f} dB"
        )
    return filt


def _filter_axis(filt: FirFilter, x: np.ndarray) -> np.ndarray:
    half = filt.group_delay_samples
    if len(x) <= half:
        raise ValueError(
            f"signal length {len(x)} is too short for filter half-length {half}"
        )
    padded = np.pad(x, half, mode="reflect")
    # 'valid' output of the padded signal starts exactly one full filter
    # length in, which cancels the group delay: output[i] aligns with x[i].
    return np.convolve(padded, filt.taps, mode="valid")


def filter_stream(filt: FirFilter, stream: SensorStream) -> SensorStream:
    """Zero-lag band-pass of all three axes; output length equals input."""
    return SensorStream(
        stream.sensor_id,
        _filter_axis(filt, stream.x),
        _filter_axis(filt, stream.y),
        _filter_axis(filt, stream.z),
    )


def filter_recording(filt: FirFilter, recording: Recording) -> Recording:
    if filt.sample_rate_hz != recording.sample_rate_hz:
        raise ValueError("filter and recording sample rates differ")
    return replace(
        recording, streams=[filter_stream(filt, s) for s in recording.streams]
    )


def window_starts(
    n_samples: int, sample_rate_hz: float,
    window_s: float = DEFAULT_WINDOW_S, overlap_s: float = DEFAULT_OVERLAP_S,
):
    """Start indices plus (window, hop) sample counts for segmentation."""
    w = int(round(window_s * sample_rate_hz))
    hop = int(round((window_s - overlap_s) * sample_rate_hz))
    if w < 4:
        raise ValueError("window too short")
    if not 0 < hop <= w:
        raise ValueError("overlap must be shorter than the window")
    if n_samples < w:
        raise ValueError(
            f"recording has {n_samples} samples, needs at least {w} for one window"
        )
    n_windows = (n_samples - w) // hop + 1
    return np.arange(n_windows) * hop, w, hop


def _majority_state(samples) -> str | None:
    on = int(np.sum(samples == STATE_ON))
    off = int(np.sum(samples == STATE_OFF))
    if on == 0 and off == 0:
        return None
    return STATE_ON if on > off else STATE_OFF  # ties go to OFF


def _majority_activity(samples) -> str | None:
    counts = Counter(a for a in samples.tolist() if a)
    if not counts:
        return None
    return counts.most_common(1)[0][0]  # ties: first seen in window


def window_labels(
    recording: Recording,
    window_s: float = DEFAULT_WINDOW_S,
    overlap_s: float = DEFAULT_OVERLAP_S,
):
    """Majority state and activity per window position.

    Returns (states, activities) lists aligned with segment() output.
    Entries are None where the recording carries no labels.
    """
    starts, w, _ = window_starts(
        recording.n_samples, recording.sample_rate_hz, window_s, overlap_s
    )
    states, activities = [], []
    for s0 in starts:
        sl = slice(s0, s0 + w)
        states.append(
            _majority_state(recording.state_labels[sl])
            if recording.state_labels is not None else None
        )
        activities.append(
            _majority_activity(recording.activity_labels[sl])
            if recording.activity_labels is not None else None
        )
    return states, activities


def segment(
    recording: Recording,
    window_s: float = DEFAULT_WINDOW_S,
    overlap_s: float = DEFAULT_OVERLAP_S,
) -> dict:
    """Cut every sensor stream into overlapping windows.

    Windows are index-aligned across sensors: the i-th window of each
    sensor covers the same sample range, so features from the wrist and
    ankle can be concatenated row-wise downstream.
    """
    starts, w, _ = window_starts(
        recording.n_samples, recording.sample_rate_hz, window_s, overlap_s
    )
    states, activities = window_labels(recording, window_s, overlap_s)
    out = {}
    for stream in recording.streams:
        windows = []
        for i, s0 in enumerate(starts):
            sl = slice(s0, s0 + w)
            windows.append(
                SignalWindow(
                    sensor_id=stream.sensor_id,
                    sample_rate_hz=recording.sample_rate_hz,
                    x=stream.x[sl],
                    y=stream.y[sl],
                    z=stream.z[sl],
                    start_sample=int(s0),
                    label=states[i],
                    activity=activities[i],
                )
            )
        out[stream.sensor_id] = windows
    return out
