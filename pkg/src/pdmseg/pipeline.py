"""End-to-end orchestration: ingest -> prep -> (segment) -> windows -> ensemble.

``run_pipeline`` writes every intermediate artifact with a provenance header;
``run_pipeline_frames`` is the in-memory core used both by the CLI and by
ablation experiments.  A failed stage aborts with the stage name and cause.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import data_io, prep, windowing
from .changefinder import ScoreSeries, Segmentation, detect_change_points, score_multichannel
from .config import PipelineConfig
from .data_io import NocIntervals, TimeSeriesFrame
from .detectors import DetectorModel, fit_gbt, fit_random_forest
from .ensemble_eval import EnsembleModel, EvalReport, classification_report, ensemble_predict
from .health import HealthSeries, compute_health, health_csv
from .seeds import component_seed


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    mode: str
    plan: prep.PrepPlan
    scores: Optional[ScoreSeries]
    segmentation: Optional[Segmentation]
    models: dict[str, DetectorModel]
    ensemble: EnsembleModel
    report: EvalReport
    health: HealthSeries
    test_probs: np.ndarray
    test_timestamps: np.ndarray


def _stage(name):
    def deco(fn):
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
        return wrapper
    return deco


def _fit_member(kind: str, X, y, config: PipelineConfig) -> DetectorModel:
    if kind == "random_forest":
        params = dataclasses.replace(config.rf, seed=component_seed(config.seed, "random_forest"))
        return fit_random_forest(X, y, params)
    if kind == "gbt":
        params = dataclasses.replace(config.gbt, seed=component_seed(config.seed, "gbt"))
        return fit_gbt(X, y, params)
    raise ValueError(f"unsupported ensemble member {kind!r}")


def run_pipeline_frames(
    frame: TimeSeriesFrame,
    noc: NocIntervals,
    config: PipelineConfig,
    mode: str,
) -> PipelineResult:
    """Run the full pipeline on in-memory data; returns all fitted artifacts."""
    if mode not in ("segmented", "unsegmented"):
        raise ValueError("mode must be 'segmented' or 'unsegmented'")

    labeled = _stage("label")(data_io.label_from_noc)(frame, noc)
    n = labeled.n_samples
    split_index = int(round(config.split_fraction * n))

    @_stage("prep")
    def do_prep():
        train = TimeSeriesFrame(
            labeled.timestamps[:split_index],
            list(labeled.channels),
            labeled.values[:split_index],
            labeled.labels[:split_index],
        )
        plan = prep.fit_prep(train, train.labels, config.prep)
        return plan, prep.apply_prep(plan, labeled)

    plan, prepped = do_prep()

    scores = seg = None
    if mode == "segmented":
        @_stage("segment")
        def do_segment():
            cf = config.changefinder_config()
            s = score_multichannel(prepped, cf)
            return s, detect_change_points(
                s, cf.threshold, cf.effective_min_gap, cf.absolute_threshold
            )
        scores, seg = do_segment()

    @_stage("windows")
    def do_windows():
        spec = windowing.WindowSpec.from_cadence(
            prepped, config.window_minutes, config.window_stride, config.window_horizon
        )
        train_part = TimeSeriesFrame(
            prepped.timestamps[:split_index],
            list(prepped.channels),
            prepped.values[:split_index],
            prepped.labels[:split_index],
        )
        thresholds = windowing.fit_exceedance_thresholds(train_part)
        ds = windowing.make_windows(prepped, spec, thresholds)
        if mode == "segmented":
            ds = windowing.augment_with_segmentation(ds, scores, seg)
        return windowing.temporal_split(ds, split_index)

    train_ds, test_ds = do_windows()

    @_stage("train")
    def do_train():
        members = {}
        for kind in config.ensemble_members:
            members[kind] = _fit_member(kind, train_ds.features, train_ds.labels, config)
        return members, EnsembleModel(list(members.values()))

    models, ensemble = do_train()

    @_stage("evaluate")
    def do_evaluate():
        probs = ensemble_predict(ensemble, test_ds.features)
        return probs, classification_report(probs, test_ds.labels)

    test_probs, report = do_evaluate()

    @_stage("health")
    def do_health():
        return compute_health(test_probs, config.health_window)

    health = do_health()
    test_ts = prepped.timestamps[test_ds.window_meta[:, 1] - 1]
    return PipelineResult(
        mode=mode,
        plan=plan,
        scores=scores,
        segmentation=seg,
        models=models,
        ensemble=ensemble,
        report=report,
        health=health,
        test_probs=test_probs,
        test_timestamps=test_ts,
    )


def _write_json(path: str, payload: dict, config: PipelineConfig) -> None:
    payload = dict(payload)
    payload.setdefault("schema_version", 1)
    payload["provenance"] = config.provenance()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)


def _csv_header(config: PipelineConfig) -> str:
    prov = config.provenance().strip().replace("\n", "; ")
    return f"# schema_version=1\n# config: {prov}\n"


def segmentation_csv(
    frame: TimeSeriesFrame, scores: ScoreSeries, seg: Segmentation
) -> str:
    """Plot-ready change-score trace: the data behind the segmentation figures."""
    cps = set(seg.change_points)
    agg = frame.values.mean(axis=1)
    lines = ["index,timestamp,value_or_aggregate,outlier_score,change_score,is_change_point"]
    for i in range(frame.n_samples):
        lines.append(
            f"{i},{repr(float(frame.timestamps[i]))},{repr(float(agg[i]))},"
            f"{repr(float(scores.outlier_score[i]))},{repr(float(scores.change_score[i]))},"
            f"{1 if i in cps else 0}"
        )
    return "\n".join(lines) + "\n"


def run_pipeline(config: PipelineConfig, mode: str) -> PipelineResult:
    """Run on the configured CSV inputs and persist all artifacts."""
    @_stage("ingest")
    def do_ingest():
        frame = data_io.load_csv(config.data_path)
        noc = data_io.load_noc(config.noc_path)
        return frame, noc

    frame, noc = do_ingest()
    result = run_pipeline_frames(frame, noc, config, mode)

    @_stage("persist")
    def do_persist():
        out = os.path.join(config.output_dir, mode)
        os.makedirs(out, exist_ok=True)
        _write_json(os.path.join(out, "prep_plan.json"), result.plan.to_dict(), config)
        for kind, model in result.models.items():
            _write_json(os.path.join(out, f"model_{kind}.json"), model.to_dict(), config)
        _write_json(os.path.join(out, "eval_report.json"), result.report.to_dict(), config)
        with open(os.path.join(out, "eval_report.txt"), "w", encoding="utf-8") as fh:
            fh.write(result.report.to_text())
        with open(os.path.join(out, "health.csv"), "w", encoding="utf-8") as fh:
            fh.write(_csv_header(config))
            fh.write(health_csv(result.health, result.test_timestamps))
        if result.scores is not None:
            labeled = data_io.label_from_noc(frame, noc)
            prepped = prep.apply_prep(result.plan, labeled)
            with open(os.path.join(out, "segmentation.csv"), "w", encoding="utf-8") as fh:
                fh.write(_csv_header(config))
                fh.write(segmentation_csv(prepped, result.scores, result.segmentation))
        return out

    do_persist()
    return result
