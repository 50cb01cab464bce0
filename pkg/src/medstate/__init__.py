"""Medication-state detection from wearable gyroscope recordings.

Detects per-second ON/OFF medication state of a monitored subject from
two triaxial gyroscope streams (wrist and ankle).  The pipeline
band-passes the signals, extracts spectral, temporal and entropy
features over sliding windows, screens them statistically, trains a
support vector machine with recursive feature elimination, calibrates
decision values to certainties, and censors low-certainty seconds.
"""

from .datamodel import (
    ACTIVITIES,
    CODE_OFF,
    CODE_ON,
    SENSOR_IDS,
    STATE_INCONCLUSIVE,
    STATE_OFF,
    STATE_ON,
    FeatureVector,
    Recording,
    SensorStream,
    SignalWindow,
    StateReport,
    SvmModel,
    decode_states,
    encode_states,
    read_model,
    read_recording,
    read_report,
    write_model,
    write_recording,
    write_report,
)
from .preprocess import FirFilter, design_bandpass, filter_recording, segment
from .features import FeatureMatrix, extract, extract_matrix, feature_registry
from .featselect import ScreenResult, screen
from .svm import GridSearchResult, RfeResult, SvmConfig, TrainedSvm, grid_search, rfe, train
from .calibrate import PlattParams, certainty, platt_fit, select_threshold
from .inference import EvaluationResult, evaluate, per_activity_table, run_pipeline
from .synthgen import SessionSchedule, SubjectProfile, default_study, example_profiles, generate
from .cli import main, train_on_recording

__version__ = "0.1.0"

__all__ = [
    "ACTIVITIES",
    "CODE_OFF",
    "CODE_ON",
    "SENSOR_IDS",
    "STATE_INCONCLUSIVE",
    "STATE_OFF",
    "STATE_ON",
    "EvaluationResult",
    "FeatureMatrix",
    "FeatureVector",
    "FirFilter",
    "GridSearchResult",
    "PlattParams",
    "Recording",
    "RfeResult",
    "ScreenResult",
    "SensorStream",
    "SessionSchedule",
    "SignalWindow",
    "StateReport",
    "SubjectProfile",
    "SvmConfig",
    "SvmModel",
    "TrainedSvm",
    "certainty",
    "decode_states",
    "default_study",
    "design_bandpass",
    "encode_states",
    "evaluate",
    "example_profiles",
    "extract",
    "extract_matrix",
    "feature_registry",
    "filter_recording",
    "generate",
    "grid_search",
    "main",
    "per_activity_table",
    "platt_fit",
    "read_model",
    "read_recording",
    "read_report",
    "rfe",
    "run_pipeline",
    "screen",
    "segment",
    "select_threshold",
    "train",
    "train_on_recording",
    "write_model",
    "write_recording",
    "write_report",
]
