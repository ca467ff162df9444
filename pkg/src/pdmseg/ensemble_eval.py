"""Soft-voting ensembles and the evaluation suite (per-class metrics, rank AUC)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detectors import DetectorModel


class EvalError(ValueError):
    pass


@dataclass
class EnsembleModel:
    """Unweighted mean-of-probabilities combination of heterogeneous members."""

    members: list[DetectorModel]

    def __post_init__(self):
        if len(self.members) < 2:
            raise EvalError("ensemble needs at least 2 members")

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return ensemble_predict(self, X)


def ensemble_predict(model: EnsembleModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.mean([m.predict_proba(X) for m in model.members], axis=0)


@dataclass(frozen=True)
class EvalReport:
    per_class: dict                 # {0: {precision, recall, f1}, 1: {...}}
    confusion: dict                 # tn, fp, fn, tp
    auc_roc: float
    decision_threshold: float
    n: int

    def to_dict(self) -> dict:
        return {
            "per_class": {str(k): dict(v) for k, v in self.per_class.items()},
            "confusion": dict(self.confusion),
            "auc_roc": self.auc_roc,
            "decision_threshold": self.decision_threshold,
            "n": self.n,
        }

    def to_text(self) -> str:
        lines = [
            "case  precision  recall  f1-score",
        ]
        for c in (0, 1):
            m = self.per_class[c]
            lines.append(
                f"{c}     {m['precision']:.4f}     {m['recall']:.4f}  {m['f1']:.4f}"
            )
        cm = self.confusion
        lines.append(f"confusion: tn={cm['tn']} fp={cm['fp']} fn={cm['fn']} tp={cm['tp']}")
        lines.append(f"AUC-ROC: {self.auc_roc:.4f}  (threshold {self.decision_threshold})")
        return "\n".join(lines) + "\n"


def _prf(tp: int, fp: int, fn: int) -> dict:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def classification_report(
    probs: np.ndarray, labels: np.ndarray, threshold: float = 0.5
) -> EvalReport:
    """Per-class precision/recall/F1 at a single decision threshold, plus AUC."""
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if np.any(p < 0) or np.any(p > 1):
        raise EvalError("probabilities must lie in [0,1]")
    pred = p >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    tn = int(np.sum(~pred & ~y))
    per_class = {
        1: _prf(tp, fp, fn),
        0: _prf(tn, fn, fp),
    }
    auc = auc_roc(p, y) if y.any() and not y.all() else float("nan")
    return EvalReport(
        per_class=per_class,
        confusion={"tn": tn, "fp": fp, "fn": fn, "tp": tp},
        auc_roc=auc,
        decision_threshold=threshold,
        n=int(y.shape[0]),
    )


def midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values assigned their average rank."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.shape[0])
    i = 0
    n = x.shape[0]
    while i < n:
        j = i
        while j + 1 < n and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i: j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auc_roc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC via midranks; equals trapezoidal ROC area."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    n_pos = int(y.sum())
    n_neg = int(y.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise EvalError("AUC needs both classes")
    ranks = midranks(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def compare_runs(report_a: EvalReport, report_b: EvalReport) -> dict:
    """Pointwise metric deltas (a - b), one row per class."""
    if report_a.n != report_b.n:
        raise EvalError("reports cover different test sets")
    out = {"auc_roc": report_a.auc_roc - report_b.auc_roc, "per_class": {}}
    for c in (0, 1):
        out["per_class"][c] = {
            k: report_a.per_class[c][k] - report_b.per_class[c][k]
            for k in ("precision", "recall", "f1")
        }
    return out


def comparison_csv(delta: dict) -> str:
    lines = ["case,delta_precision,delta_recall,delta_f1,delta_auc_roc"]
    for c in (0, 1):
        m = delta["per_class"][c]
        auc = delta["auc_roc"] if c == 0 else ""
        lines.append(f"{c},{m['precision']},{m['recall']},{m['f1']},{auc}")
    return "\n".join(lines) + "\n"
