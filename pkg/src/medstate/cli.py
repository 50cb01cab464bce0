"""Command-line interface.

Subcommands: synth (generate a labeled study), train, predict, evaluate,
and features dump (print the feature registry).  Every flag can also be
supplied through a JSON --config file keyed by flag name.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

import numpy as np

from . import calibrate, features, featselect, inference, preprocess, svm
from .datamodel import (
    SENSOR_IDS,
    SvmModel,
    encode_states,
    read_model,
    read_recording,
    read_report,
    write_model,
    write_recording,
    write_report,
)
from .synthgen import SubjectProfile, default_study

MIN_WINDOWS_PER_CLASS = 8


def train_on_recording(
    recording,
    sensors=SENSOR_IDS,
    seed: int = 0,
    window_s: float = preprocess.DEFAULT_WINDOW_S,
    overlap_s: float = preprocess.DEFAULT_OVERLAP_S,
):
    """Fit a detector on a labeled recording; returns (model, summary).

    Flow: band-pass + segment, extract the combined feature matrix,
    screen features statistically, grid-search the kernel with RFE,
    calibrate certainties on held-out decision values, and pick the
    censoring threshold.
    """
    sensors = features.sensor_block_order(sensors)
    missing = [s for s in sensors if s not in recording.sensor_ids]
    if missing:
        raise ValueError(f"recording lacks sensors {missing}")
    if recording.state_labels is None:
        raise ValueError("training recording carries no state labels")
    filt = preprocess.design_bandpass(sample_rate_hz=recording.sample_rate_hz)
    filtered = preprocess.filter_recording(filt, recording)
    segments = preprocess.segment(filtered, window_s, overlap_s)
    first = segments[sensors[0]]
    labels = [w.label for w in first]
    if any(lbl is None for lbl in labels):
        raise ValueError("every training window needs a state label")
    activities = [w.activity for w in first]
    y = encode_states(labels)
    n_off = int(np.sum(y > 0))
    n_on = int(np.sum(y < 0))
    if min(n_off, n_on) < MIN_WINDOWS_PER_CLASS:
        raise ValueError(
            f"need at least {MIN_WINDOWS_PER_CLASS} windows per class, "
            f"got OFF={n_off} ON={n_on}"
        )
    matrix = features.extract_matrix(segments, sensors)
    screened = featselect.screen(matrix.values, y)
    keep = screened.selected_indices()
    sub = matrix.values[:, keep]
    mean = np.mean(sub, axis=0)
    scale = np.std(sub, axis=0)
    if np.any(scale <= 0):
        bad = [matrix.feature_names[keep[i]] for i in np.nonzero(scale <= 0)[0]]
        raise ValueError(f"screened features are constant: {bad}")
    x = (sub - mean) / scale
    search = svm.grid_search(x, y, seed=seed)
    refined = search.rfe
    final_mask = keep[refined.selected]
    trained = refined.model
    d_train = calibrate.cv_decision_values(
        x[:, refined.selected], y, activities, search.best_config, seed=seed
    )
    platt = calibrate.platt_fit(d_train, y)
    train_certainties = calibrate.certainty(d_train, platt)
    threshold = calibrate.select_threshold(train_certainties)
    model = SvmModel(
        kernel=search.best_config.kernel,
        c=search.best_config.c,
        gamma=search.best_config.gamma,
        sensors=sensors,
        feature_mask=final_mask,
        support_vectors=trained.support_vectors,
        dual_coef=trained.dual_coef,
        bias=trained.bias,
        platt_a=platt.a,
        platt_b=platt.b,
        certainty_threshold=threshold,
        norm_mean=mean[refined.selected],
        norm_scale=scale[refined.selected],
    )
    summary = {
        "n_windows": int(len(y)),
        "n_windows_off": n_off,
        "n_windows_on": n_on,
        "screening": screened.to_records(matrix.feature_names),
        "n_screened": int(len(keep)),
        "kernel": search.best_config.kernel,
        "c": search.best_config.c,
        "gamma": search.best_config.gamma,
        "grid_accuracy": search.best_accuracy,
        "rfe_sizes": refined.sizes,
        "rfe_accuracy_trace": refined.accuracy_trace,
        "rfe_best_size": int(refined.best_size),
        "selected_features": [matrix.feature_names[i] for i in final_mask],
        "platt_a": platt.a,
        "platt_b": platt.b,
        "certainty_threshold": threshold,
        "train_rejection_table": calibrate.rejection_table(train_certainties),
    }
    return model, summary


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _cmd_synth(args) -> None:
    profile_kwargs = _load_json(args.profile) if args.profile else {}
    if args.seed is not None:
        profile_kwargs["seed"] = args.seed
    profile = SubjectProfile(**profile_kwargs)
    training, testing = default_study(profile)
    write_recording(training, args.out_train)
    write_recording(testing, args.out_test)
    print(f"wrote {args.out_train} ({training.duration_s / 60:.1f} min)")
    print(f"wrote {args.out_test} ({testing.duration_s / 60:.1f} min)")


def _parse_sensors(value: str) -> tuple:
    if value == "both":
        return SENSOR_IDS
    if value in SENSOR_IDS:
        return (value,)
    raise ValueError(f"--sensors must be wrist, ankle or both, not {value!r}")


def _cmd_train(args) -> None:
    recording = read_recording(args.recording, args.sample_rate)
    model, summary = train_on_recording(
        recording, sensors=_parse_sensors(args.sensors), seed=args.seed
    )
    write_model(model, args.model_out)
    print(
        f"trained {model.kernel} model on {summary['n_windows']} windows; "
        f"kept {len(model.feature_mask)} of {summary['n_screened']} screened "
        f"features; threshold {model.certainty_threshold:.2f}"
    )
    if args.summary_out:
        with open(args.summary_out, "w") as fh:
            json.dump(summary, fh, indent=1)
            fh.write("\n")
        print(f"wrote {args.summary_out}")
    if args.diagnostics_out:
        _write_diagnostics(args.diagnostics_out, model, summary)
        print(f"wrote {args.diagnostics_out}")
    print(f"wrote {args.model_out}")


def _write_diagnostics(path, model, summary) -> None:
    import csv as _csv

    params = calibrate.PlattParams(model.platt_a, model.platt_b)
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["section", "x", "y"])
        for row in summary["train_rejection_table"]:
            writer.writerow(
                ["rejection_vs_threshold", row["threshold"], row["rejected_fraction"]]
            )
        for row in calibrate.sigmoid_curve(params, -5.0, 5.0):
            writer.writerow(["certainty_vs_decision", row["decision"],
                             row["certainty"]])


def _predict_one(recording_path, model, report_path, fmt, sample_rate) -> list:
    recording = read_recording(recording_path, sample_rate)
    report = inference.run_pipeline(recording, model)
    written = []
    if fmt in ("json", "both"):
        write_report(report, report_path, "json")
        written.append(report_path)
    if fmt in ("csv", "both"):
        csv_path = (
            str(report_path).removesuffix(".json") + ".csv"
            if fmt == "both"
            else report_path
        )
        write_report(report, csv_path, "csv")
        written.append(csv_path)
    # A labeled recording doubles as its own test set.
    if recording.state_labels is not None:
        truth, _ = preprocess.window_labels(recording)
        result = inference.evaluate(report, truth)
        metrics_path = str(report_path).removesuffix(".json") + ".metrics.json"
        with open(metrics_path, "w") as fh:
            json.dump(result.to_dict(), fh, indent=1)
            fh.write("\n")
        written.append(metrics_path)
    return written


def _cmd_predict(args) -> None:
    model = read_model(args.model)
    paths = args.recording
    if len(paths) == 1:
        targets = [args.report_out]
    else:
        os.makedirs(args.report_out, exist_ok=True)
        ext = "csv" if args.report_format == "csv" else "json"
        targets = [
            os.path.join(
                args.report_out,
                os.path.splitext(os.path.basename(p))[0] + f".report.{ext}",
            )
            for p in paths
        ]
    jobs = max(1, args.jobs)
    if jobs == 1 or len(paths) == 1:
        written = [
            _predict_one(src, model, dst, args.report_format, args.sample_rate)
            for src, dst in zip(paths, targets)
        ]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(
                    _predict_one, src, model, dst, args.report_format,
                    args.sample_rate,
                )
                for src, dst in zip(paths, targets)
            ]
            written = [future.result() for future in futures]
    for group in written:
        for dst in group:
            print(f"wrote {dst}")


def _cmd_evaluate(args) -> None:
    report = read_report(args.report)
    recording = read_recording(args.recording, args.sample_rate)
    if recording.state_labels is None:
        raise ValueError("evaluation recording carries no state labels")
    truth_states, truth_activities = preprocess.window_labels(recording)
    result = inference.evaluate(report, truth_states, positive=args.positive_class)
    doc = {"metrics": result.to_dict()}
    if recording.activity_labels is not None:
        doc["per_activity"] = inference.per_activity_table(
            report, truth_states, truth_activities
        )
    text = json.dumps(doc, indent=1)
    if args.metrics_out:
        with open(args.metrics_out, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.metrics_out}")
    else:
        print(text)


def _cmd_features(args) -> None:
    if args.action != "dump":
        raise ValueError(f"unknown features action {args.action!r}")
    doc = {
        "registry_version": features.REGISTRY_VERSION,
        "per_sensor": features.registry_records(),
        "combined": features.registry_records(_parse_sensors(args.sensors)),
    }
    text = json.dumps(doc, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medstate",
        description="Detect per-second medication ON/OFF state from "
        "wrist and ankle gyroscope recordings.",
    )
    parser.add_argument(
        "--config",
        help="JSON file whose keys (flag names with dashes or underscores) "
        "provide defaults for any flag",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    # "required" flags stay optional at parse time so --config can supply
    # them; main() checks they are present after the merge.
    p = sub.add_parser("synth", help="generate a synthetic labeled study")
    p.add_argument("--profile", help="JSON file with subject profile fields")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-train")
    p.add_argument("--out-test")
    p.set_defaults(func=_cmd_synth, stage="synth",
                   required=("out_train", "out_test"))

    p = sub.add_parser("train", help="fit a detector on a labeled recording")
    p.add_argument("--recording")
    p.add_argument("--model-out")
    p.add_argument("--sensors", default="both", choices=["wrist", "ankle", "both"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-rate", type=float, default=128.0)
    p.add_argument("--summary-out")
    p.add_argument("--diagnostics-out")
    p.set_defaults(func=_cmd_train, stage="train",
                   required=("recording", "model_out"))

    p = sub.add_parser("predict", help="write per-second state reports")
    p.add_argument("--recording", nargs="+")
    p.add_argument("--model")
    p.add_argument(
        "--report-out",
        help="report path (directory when multiple recordings are given)",
    )
    p.add_argument("--report-format", default="json", choices=["json", "csv", "both"])
    p.add_argument("--sample-rate", type=float, default=128.0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_predict, stage="predict",
                   required=("recording", "model", "report_out"))

    p = sub.add_parser("evaluate", help="score a report against labeled truth")
    p.add_argument("--report")
    p.add_argument("--recording")
    p.add_argument("--positive-class", default="ON", choices=["ON", "OFF"])
    p.add_argument("--sample-rate", type=float, default=128.0)
    p.add_argument("--metrics-out")
    p.set_defaults(func=_cmd_evaluate, stage="evaluate",
                   required=("report", "recording"))

    p = sub.add_parser("features", help="inspect the feature registry")
    p.add_argument("action", choices=["dump"])
    p.add_argument("--sensors", default="both", choices=["wrist", "ankle", "both"])
    p.add_argument("--out")
    p.set_defaults(func=_cmd_features, stage="features")
    return parser


def _apply_config(parser, argv, args):
    if not args.config:
        return args
    overrides = _load_json(args.config)
    if not isinstance(overrides, dict):
        raise ValueError("--config must contain a JSON object")
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ValueError(f"--config has unknown key {key!r}")
        # flags given on the command line win over config values
        if _flag_given(argv, dest):
            continue
        setattr(args, dest, value)
    return args


def _flag_given(argv, dest: str) -> bool:
    flag = "--" + dest.replace("_", "-")
    return any(a == flag or a.startswith(flag + "=") for a in argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    stage = getattr(args, "stage", "cli")
    try:
        args = _apply_config(parser, argv, args)
        for dest in getattr(args, "required", ()):
            if getattr(args, dest) in (None, []):
                flag = "--" + dest.replace("_", "-")
                raise ValueError(f"missing required flag {flag}")
        args.func(args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"[{stage}] error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
