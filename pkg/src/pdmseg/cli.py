"""Command-line entry points for every pipeline stage."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np
import pandas as pd

from . import data_io, prep, windowing
from .changefinder import PRESETS, ChangeFinderConfig, detect_change_points, score_multichannel
from .config import ConfigError, PipelineConfig, parse_kv
from .detectors import DetectorModel, fit_gbt, fit_random_forest
from .ensemble_eval import (
    EnsembleModel,
    EvalReport,
    classification_report,
    compare_runs,
    comparison_csv,
    ensemble_predict,
)
from .health import compute_health, health_csv
from .pipeline import StageError, run_pipeline, segmentation_csv
from .seeds import component_seed
from .trees import BoostParams, ForestParams
from .tuner import ParamGrid, grid_search, leaderboard_csv


def _cf_from_args(args) -> ChangeFinderConfig:
    if args.preset:
        if args.preset not in PRESETS:
            raise SystemExit(f"unknown preset {args.preset!r} (have: {', '.join(PRESETS)})")
        return PRESETS[args.preset]
    return ChangeFinderConfig(
        r=args.r, order=args.order, smooth=args.smooth, threshold=args.threshold
    )


def _add_cf_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="named parameter preset")
    p.add_argument("--r", type=float, default=0.05)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--smooth", type=int, default=5)
    p.add_argument("--threshold", type=float, default=1.8)


def _load_labeled(data_path: str, noc_path: str | None):
    frame = data_io.load_csv(data_path)
    if noc_path:
        frame = data_io.label_from_noc(frame, data_io.load_noc(noc_path))
    return frame


def cmd_synth(args) -> int:
    cfg = data_io.SynthConfig(
        n_samples=args.n_samples,
        n_channels=args.n_channels,
        n_regime_shifts=args.n_regime_shifts,
        anomaly_fraction=args.anomaly_fraction,
        noise_sigma=args.noise_sigma,
        shift_magnitude_sigma=args.shift_magnitude_sigma,
        seed=args.seed,
    )
    frame, noc, cps = data_io.generate_synthetic(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    data_io.write_csv(frame, os.path.join(args.out_dir, "data.csv"))
    data_io.write_noc(noc, os.path.join(args.out_dir, "noc.csv"))
    data_io.write_change_points(cps, os.path.join(args.out_dir, "change_points.txt"))
    print(f"wrote {frame.n_samples} samples x {frame.n_channels} channels to {args.out_dir}")
    return 0


def cmd_prep(args) -> int:
    frame = _load_labeled(args.data, args.noc)
    plan = prep.fit_prep(frame, frame.labels)
    plan.save(args.out)
    print(f"plan: {len(plan.selected_channels)} channels selected -> {args.out}")
    return 0


def cmd_tune(args) -> int:
    frame = _load_labeled(args.data, args.noc)
    with open(args.grid_file, "r", encoding="utf-8") as fh:
        raw = parse_kv(fh.read())

    def listify(v):
        return v if isinstance(v, list) else [v]

    grid = ParamGrid(
        r_values=listify(raw["r"]),
        order_values=listify(raw["order"]),
        smooth_values=listify(raw["smooth"]),
        threshold_values=listify(raw["threshold"]),
    )
    board = grid_search(
        frame, frame.labels, grid,
        objective=args.objective, tolerance=args.tolerance, threads=args.threads,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(leaderboard_csv(board))
    best = board.best.config
    print(f"best ({args.objective}): r={best.r} order={best.order} "
          f"smooth={best.smooth} threshold={best.threshold}")
    return 0


def cmd_segment(args) -> int:
    frame = _load_labeled(args.data, args.noc)
    cf = _cf_from_args(args)
    scores = score_multichannel(frame, cf)
    seg = detect_change_points(scores, cf.threshold, cf.effective_min_gap, cf.absolute_threshold)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(segmentation_csv(frame, scores, seg))
    print(f"{len(seg.change_points)} change points -> {args.out}")
    return 0


def cmd_featurize(args) -> int:
    frame = _load_labeled(args.data, args.noc)
    if args.plan:
        frame = prep.apply_prep(prep.PrepPlan.load(args.plan), frame)
    spec = windowing.WindowSpec.from_cadence(
        frame, args.minutes, args.stride, args.horizon
    )
    ds = windowing.make_windows(frame, spec)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(windowing.dataset_csv(ds))
    print(f"{ds.n_windows} windows x {len(ds.feature_names)} features -> {args.out}")
    return 0


def _load_window_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    df = pd.read_csv(path, comment="#")
    y = df["label_anomalous"].to_numpy(dtype=bool)
    X = df.drop(columns=["start", "end", "horizon_end", "label_anomalous"]).to_numpy(dtype=float)
    return X, y


def cmd_train(args) -> int:
    X, y = _load_window_csv(args.windows)
    os.makedirs(args.out_dir, exist_ok=True)
    rf = fit_random_forest(X, y, dataclasses.replace(
        ForestParams(), seed=component_seed(args.seed, "random_forest")))
    gbt = fit_gbt(X, y, dataclasses.replace(
        BoostParams(), seed=component_seed(args.seed, "gbt")))
    rf.save(os.path.join(args.out_dir, "model_random_forest.json"))
    gbt.save(os.path.join(args.out_dir, "model_gbt.json"))
    print(f"trained random_forest + gbt on {X.shape[0]} windows -> {args.out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    X, y = _load_window_csv(args.windows)
    members = [DetectorModel.load(p) for p in args.model]
    probs = (
        ensemble_predict(EnsembleModel(members), X)
        if len(members) > 1 else members[0].predict_proba(X)
    )
    report = classification_report(probs, y, threshold=args.threshold)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=1)
    with open(os.path.splitext(args.out)[0] + ".txt", "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    if args.probs_out:
        with open(args.probs_out, "w", encoding="utf-8") as fh:
            fh.write("window_index,prob,label_anomalous\n")
            for i, (p, lab) in enumerate(zip(probs, y)):
                fh.write(f"{i},{repr(float(p))},{1 if lab else 0}\n")
    print(report.to_text())
    return 0


def _report_from_json(path: str) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    return EvalReport(
        per_class={int(k): v for k, v in d["per_class"].items()},
        confusion=d["confusion"],
        auc_roc=d["auc_roc"],
        decision_threshold=d["decision_threshold"],
        n=d["n"],
    )


def cmd_compare(args) -> int:
    delta = compare_runs(_report_from_json(args.report_a), _report_from_json(args.report_b))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(comparison_csv(delta))
    print(f"delta AUC-ROC: {delta['auc_roc']:+.4f} -> {args.out}")
    return 0


def cmd_health(args) -> int:
    df = pd.read_csv(args.probs, comment="#")
    probs = df["prob"].to_numpy(dtype=float)
    series = compute_health(probs, args.window)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(health_csv(series))
    print(f"{series.warnings.size} warnings, {series.alerts.size} alerts -> {args.out}")
    return 0


def cmd_pipeline(args) -> int:
    config = PipelineConfig.from_file(args.config)
    if args.threads is not None:
        config.threads = args.threads
    result = run_pipeline(config, args.mode)
    print(result.report.to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdmseg",
                                description="Segmentation-aware anomaly detection pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--n-samples", type=int, default=50_000)
    s.add_argument("--n-channels", type=int, default=10)
    s.add_argument("--n-regime-shifts", type=int, default=12)
    s.add_argument("--anomaly-fraction", type=float, default=0.0156)
    s.add_argument("--noise-sigma", type=float, default=1.0)
    s.add_argument("--shift-magnitude-sigma", type=float, default=5.0)
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("prep", help="fit a preprocessing plan")
    s.add_argument("--data", required=True)
    s.add_argument("--noc", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_prep)

    s = sub.add_parser("tune", help="grid-search change-detector parameters")
    s.add_argument("--data", required=True)
    s.add_argument("--noc", required=True)
    s.add_argument("--grid-file", required=True)
    s.add_argument("--objective", choices=["f1", "cs"], default="f1")
    s.add_argument("--tolerance", type=int, default=None)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_tune)

    s = sub.add_parser("segment", help="score and segment a series")
    s.add_argument("--data", required=True)
    s.add_argument("--noc", default=None)
    _add_cf_flags(s)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_segment)

    s = sub.add_parser("featurize", help="emit the window feature dataset")
    s.add_argument("--data", required=True)
    s.add_argument("--noc", required=True)
    s.add_argument("--plan", default=None, help="apply this preprocessing plan first")
    s.add_argument("--minutes", type=float, default=30.0)
    s.add_argument("--stride", type=int, default=None)
    s.add_argument("--horizon", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_featurize)

    s = sub.add_parser("train", help="train the ensemble members on a window CSV")
    s.add_argument("--windows", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("evaluate", help="evaluate saved models on a window CSV")
    s.add_argument("--windows", required=True)
    s.add_argument("--model", action="append", required=True,
                   help="model JSON (repeat for an ensemble)")
    s.add_argument("--threshold", type=float, default=0.5)
    s.add_argument("--out", required=True)
    s.add_argument("--probs-out", default=None)
    s.set_defaults(fn=cmd_evaluate)

    s = sub.add_parser("compare", help="delta table between two evaluation reports")
    s.add_argument("--report-a", required=True)
    s.add_argument("--report-b", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_compare)

    s = sub.add_parser("health", help="health index trace from a probability CSV")
    s.add_argument("--probs", required=True)
    s.add_argument("--window", type=int, default=60)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_health)

    s = sub.add_parser("pipeline", help="run the full pipeline from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--mode", choices=["segmented", "unsegmented"], required=True)
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(fn=cmd_pipeline)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
