"""Synthetic two-sensor gyroscope sessions with known ON/OFF truth.

Subjects are parameterized by tremor site/frequency/amplitude, how much
medication attenuates the tremor, a bradykinesia factor that slows and
shrinks voluntary movement while OFF, and a sensor noise floor.
Sessions are schedules of OFF/ON phases, each a sequence of everyday
activities rendered as sums of sinusoids (ankle-dominant walking around
1.6 Hz, wrist-dominant arm tasks between 0.5 and 3 Hz, near-noise rest).
Tremor appears as an amplitude-modulated sinusoid on the tremor-site
sensor.  While OFF, voluntary movement also loses smoothness: a 6.5 to
9.5 Hz roughness component scaled to each axis's movement level is mixed
in, so normalized spectral shape separates the states even for subjects
without tremor and regardless of which activity is being performed.
Everything is deterministic given the profile seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datamodel import (
    ACTIVITIES,
    Recording,
    SensorStream,
    SENSOR_IDS,
    STATE_OFF,
    STATE_ON,
)

TREMOR_SITES = ("none",) + SENSOR_IDS
TREMOR_FREQ_RANGE_HZ = (4.0, 6.0)
TREMOR_AXIS_WEIGHTS = (1.0, 0.65, 0.4)
TREMOR_ENVELOPE_HZ = 0.22

# Voluntary movement slows down as well as shrinks while OFF.
OFF_FREQ_SCALE_BASE = 0.75

# Loss of movement smoothness while OFF: band-limited roughness whose
# amplitude is proportional to the axis's voluntary-movement level, so
# the high-band fraction of the spectrum separates the states no matter
# how large the underlying activity is.
ROUGHNESS_BAND_HZ = (6.5, 9.5)
ROUGHNESS_COMPONENTS = 12
ROUGHNESS_OFF = 0.35
ROUGHNESS_ON = 0.05

TRAIN_ACTIVITIES = ("walking", "drinking", "resting", "dressing")

OFFICE_OFF_MINUTES = 4.0
OFFICE_ON_MINUTES = 3.8


@dataclass(frozen=True)
class SubjectProfile:
    """Symptom parameters of one simulated subject."""

    tremor_site: str = "none"
    tremor_frequency_hz: float = 5.0
    off_tremor_amplitude: float = 40.0
    on_attenuation: float = 0.1
    bradykinesia_factor: float = 0.6
    noise_floor: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.tremor_site not in TREMOR_SITES:
            raise ValueError(f"tremor_site must be one of {TREMOR_SITES}")
        lo, hi = TREMOR_FREQ_RANGE_HZ
        if not lo <= self.tremor_frequency_hz <= hi:
            raise ValueError(f"tremor frequency must lie in [{lo}, {hi}] Hz")
        if self.off_tremor_amplitude < 0:
            raise ValueError("tremor amplitude must be non-negative")
        if not 0.0 <= self.on_attenuation <= 1.0:
            raise ValueError("on_attenuation must lie in [0, 1]")
        if not 0.0 < self.bradykinesia_factor <= 1.0:
            raise ValueError("bradykinesia_factor must lie in (0, 1]")
        if self.noise_floor < 0:
            raise ValueError("noise_floor must be non-negative")


@dataclass(frozen=True)
class Phase:
    """One medication state holding for a sequence of timed activities."""

    state: str
    activities: tuple

    def __post_init__(self):
        if self.state not in (STATE_ON, STATE_OFF):
            raise ValueError("phase state must be ON or OFF")
        object.__setattr__(
            self,
            "activities",
            tuple((str(a), float(d)) for a, d in self.activities),
        )
        if not self.activities:
            raise ValueError("phase needs at least one activity")
        for name, duration in self.activities:
            if name not in ACTIVITIES:
                raise ValueError(f"unknown activity {name!r}")
            if duration <= 0:
                raise ValueError("activity durations must be positive")

    @property
    def duration_s(self) -> float:
        return sum(d for _, d in self.activities)


@dataclass(frozen=True)
class SessionSchedule:
    """Ordered phases making up one recording."""

    phases: tuple

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ValueError("schedule needs at least one phase")
        for phase in self.phases:
            if not isinstance(phase, Phase):
                raise ValueError("schedule entries must be Phase objects")

    @property
    def duration_s(self) -> float:
        return sum(p.duration_s for p in self.phases)

    def segments(self) -> list:
        """Flat (state, activity, duration_s) sequence."""
        out = []
        for phase in self.phases:
            for name, duration in phase.activities:
                out.append((phase.state, name, duration))
        return out


def _activity_components(profile: SubjectProfile) -> dict:
    """Sinusoid mix (freq, per-axis amplitudes) per activity and sensor."""
    nf = profile.noise_floor
    return {
        "resting": {
            "wrist": [(0.9, (2.5 * nf, 2.0 * nf, 1.6 * nf))],
            "ankle": [(0.7, (1.2 * nf, 1.0 * nf, 0.8 * nf))],
        },
        "walking": {
            "wrist": [(1.6, (24.0, 16.0, 10.0))],
            "ankle": [(1.6, (65.0, 40.0, 30.0)), (3.2, (18.0, 12.0, 9.0))],
        },
        "drinking": {
            "wrist": [(1.1, (38.0, 30.0, 18.0)), (2.2, (10.0, 8.0, 5.0))],
            "ankle": [(1.0, (3.0, 2.0, 2.0))],
        },
        "dressing": {
            "wrist": [(0.8, (52.0, 40.0, 28.0)), (1.9, (14.0, 10.0, 7.0))],
            "ankle": [(0.8, (8.0, 6.0, 4.0))],
        },
        "hair_brushing": {
            "wrist": [(2.4, (45.0, 34.0, 22.0)), (1.2, (12.0, 9.0, 6.0))],
            "ankle": [(1.2, (2.5, 2.0, 1.5))],
        },
        "unpacking_groceries": {
            "wrist": [(0.6, (48.0, 36.0, 26.0)), (1.5, (16.0, 12.0, 8.0))],
            "ankle": [(0.6, (10.0, 7.0, 5.0))],
        },
        "cutting_food": {
            "wrist": [(2.8, (40.0, 30.0, 20.0)), (1.4, (10.0, 8.0, 5.0))],
            "ankle": [(1.0, (2.0, 1.5, 1.0))],
        },
    }


def generate(
    profile: SubjectProfile,
    schedule: SessionSchedule,
    sample_rate_hz: float = 128.0,
    start_time_s: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Recording:
    """Render one labeled recording for a subject and schedule."""
    if rng is None:
        rng = np.random.default_rng(profile.seed)
    components = _activity_components(profile)
    # Draw every phase offset up front in a fixed order so the waveform
    # layout is independent of the schedule contents.
    phase_of = {}
    for activity in ACTIVITIES:
        for sensor in SENSOR_IDS:
            for ci in range(len(components[activity][sensor])):
                for axis in range(3):
                    phase_of[(activity, sensor, ci, axis)] = rng.uniform(
                        0.0, 2.0 * math.pi
                    )
    tremor_phases = rng.uniform(0.0, 2.0 * math.pi, size=3)
    envelope_phase = rng.uniform(0.0, 2.0 * math.pi)
    roughness_phases = {
        (sensor, axis): rng.uniform(0.0, 2.0 * math.pi, size=ROUGHNESS_COMPONENTS)
        for sensor in SENSOR_IDS
        for axis in range(3)
    }

    segments = schedule.segments()
    seg_samples = [int(round(d * sample_rate_hz)) for _, _, d in segments]
    n_total = sum(seg_samples)
    if n_total == 0:
        raise ValueError("schedule renders to zero samples")
    t = np.arange(n_total) / sample_rate_hz
    signals = {sensor: np.zeros((n_total, 3)) for sensor in SENSOR_IDS}
    state_labels = np.empty(n_total, dtype="U4")
    activity_labels = np.empty(n_total, dtype="U24")

    # Unit-RMS roughness carrier per sensor axis, shared across segments.
    rough_freqs = np.linspace(*ROUGHNESS_BAND_HZ, ROUGHNESS_COMPONENTS)
    rough_unit = {}
    for key, phases in roughness_phases.items():
        u = np.zeros(n_total)
        for freq, ph in zip(rough_freqs, phases):
            u += np.sin(2.0 * math.pi * freq * t + ph)
        rough_unit[key] = u * math.sqrt(2.0 / ROUGHNESS_COMPONENTS)

    brady = profile.bradykinesia_factor
    off_freq_scale = OFF_FREQ_SCALE_BASE + (1.0 - OFF_FREQ_SCALE_BASE) * brady
    pos = 0
    for (state, activity, _), n_seg in zip(segments, seg_samples):
        sl = slice(pos, pos + n_seg)
        ts = t[sl]
        amp_scale = brady if state == STATE_OFF else 1.0
        freq_scale = off_freq_scale if state == STATE_OFF else 1.0
        rough_scale = ROUGHNESS_OFF if state == STATE_OFF else ROUGHNESS_ON
        for sensor in SENSOR_IDS:
            sig = signals[sensor]
            for axis in range(3):
                level_sq = 0.0
                for ci, (freq, amps) in enumerate(components[activity][sensor]):
                    amp = amp_scale * amps[axis]
                    level_sq += amp * amp / 2.0
                    w = 2.0 * math.pi * freq * freq_scale
                    sig[sl, axis] += amp * np.sin(
                        w * ts + phase_of[(activity, sensor, ci, axis)]
                    )
                sig[sl, axis] += (rough_scale * math.sqrt(level_sq)) * rough_unit[
                    (sensor, axis)
                ][sl]
        state_labels[sl] = state
        activity_labels[sl] = activity
        pos += n_seg

    if profile.tremor_site != "none" and profile.off_tremor_amplitude > 0:
        envelope = 0.65 + 0.35 * np.sin(
            2.0 * math.pi * TREMOR_ENVELOPE_HZ * t + envelope_phase
        )
        gain = np.where(
            state_labels == STATE_OFF, 1.0, profile.on_attenuation
        ) * (profile.off_tremor_amplitude * envelope)
        sig = signals[profile.tremor_site]
        w = 2.0 * math.pi * profile.tremor_frequency_hz
        for axis, weight in enumerate(TREMOR_AXIS_WEIGHTS):
            sig[:, axis] += (weight * gain) * np.sin(w * t + tremor_phases[axis])

    streams = []
    for sensor in SENSOR_IDS:
        sig = signals[sensor] + rng.normal(
            0.0, profile.noise_floor, size=(n_total, 3)
        )
        streams.append(SensorStream(sensor, sig[:, 0], sig[:, 1], sig[:, 2]))
    return Recording(
        sample_rate_hz=sample_rate_hz,
        streams=streams,
        state_labels=state_labels,
        activity_labels=activity_labels,
        start_time_s=start_time_s,
    )


def office_visit_schedule() -> SessionSchedule:
    """Supervised training protocol: OFF then ON over four activities."""
    off_each = OFFICE_OFF_MINUTES * 60.0 / len(TRAIN_ACTIVITIES)
    on_each = OFFICE_ON_MINUTES * 60.0 / len(TRAIN_ACTIVITIES)
    return SessionSchedule(
        (
            Phase(STATE_OFF, tuple((a, off_each) for a in TRAIN_ACTIVITIES)),
            Phase(STATE_ON, tuple((a, on_each) for a in TRAIN_ACTIVITIES)),
        )
    )


def home_monitoring_schedule() -> SessionSchedule:
    """Free-living test protocol: all seven activities in both states."""
    off_durations = {
        "walking": 420.0,
        "resting": 420.0,
        "drinking": 300.0,
        "dressing": 300.0,
        "hair_brushing": 260.0,
        "unpacking_groceries": 260.0,
        "cutting_food": 260.0,
    }
    on_durations = {
        "walking": 150.0,
        "resting": 150.0,
        "drinking": 140.0,
        "dressing": 140.0,
        "hair_brushing": 130.0,
        "unpacking_groceries": 130.0,
        "cutting_food": 120.0,
    }
    return SessionSchedule(
        (
            Phase(STATE_OFF, tuple((a, off_durations[a]) for a in ACTIVITIES)),
            Phase(STATE_ON, tuple((a, on_durations[a]) for a in ACTIVITIES)),
        )
    )


def default_study(profile: SubjectProfile, sample_rate_hz: float = 128.0):
    """(training, testing) recordings for one subject.

    Training covers about four minutes per state over the four office
    activities; testing covers 37 OFF plus 16 ON minutes across all
    seven, starting where the training recording ends so timestamps
    never overlap.
    """
    children = np.random.SeedSequence(profile.seed).spawn(2)
    train_sched = office_visit_schedule()
    test_sched = home_monitoring_schedule()
    training = generate(
        profile,
        train_sched,
        sample_rate_hz,
        start_time_s=0.0,
        rng=np.random.default_rng(children[0]),
    )
    testing = generate(
        profile,
        test_sched,
        sample_rate_hz,
        start_time_s=training.duration_s,
        rng=np.random.default_rng(children[1]),
    )
    return training, testing


def example_profiles() -> tuple:
    """Five study subjects spanning no tremor, wrist tremor, ankle tremor."""
    return (
        SubjectProfile(
            tremor_site="none", bradykinesia_factor=0.45, noise_floor=3.0, seed=101
        ),
        SubjectProfile(
            tremor_site="wrist",
            tremor_frequency_hz=4.8,
            off_tremor_amplitude=45.0,
            on_attenuation=0.06,
            bradykinesia_factor=0.6,
            noise_floor=3.0,
            seed=102,
        ),
        SubjectProfile(
            tremor_site="ankle",
            tremor_frequency_hz=5.3,
            off_tremor_amplitude=40.0,
            on_attenuation=0.08,
            bradykinesia_factor=0.55,
            noise_floor=2.5,
            seed=103,
        ),
        SubjectProfile(
            tremor_site="wrist",
            tremor_frequency_hz=4.2,
            off_tremor_amplitude=30.0,
            on_attenuation=0.12,
            bradykinesia_factor=0.7,
            noise_floor=4.0,
            seed=104,
        ),
        SubjectProfile(
            tremor_site="none", bradykinesia_factor=0.5, noise_floor=2.0, seed=105
        ),
    )
