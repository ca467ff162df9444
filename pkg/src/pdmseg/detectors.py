"""Anomaly scorers behind one interface: every model emits a probability in [0,1].

Supervised models (random forest, boosted trees) output native probabilities;
unsupervised raw scores pass through a min-max calibration fitted on training
scores.  All models serialize to versioned JSON and round-trip exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import trees
from .trees import BoostedModel, BoostParams, ForestParams, TreeNode

MODEL_SCHEMA_VERSION = 1


class DetectorError(ValueError):
    pass


@dataclass(frozen=True)
class Calibration:
    """Min-max mapping from training raw scores to [0,1], clamped."""

    lo: float
    hi: float

    @staticmethod
    def fit(raw_scores: np.ndarray) -> "Calibration":
        return Calibration(float(np.min(raw_scores)), float(np.max(raw_scores)))

    def apply(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        if self.hi <= self.lo:
            return np.full(raw.shape, 0.5)
        return np.clip((raw - self.lo) / (self.hi - self.lo), 0.0, 1.0)


class DetectorModel:
    """Fitted scorer: kind + parameters + optional calibration."""

    def __init__(self, kind: str, params: dict, calibration: Optional[Calibration] = None):
        self.kind = kind
        self.params = params
        self.calibration = calibration

    # ---- scoring ----

    def predict_raw(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.kind == "random_forest":
            return trees.predict_forest(self.params["trees"], X)
        if self.kind == "gbt":
            return self.params["model"].predict_proba(X)
        if self.kind == "isolation_forest":
            return _iforest_score(self.params, X)
        if self.kind == "pca":
            return _pca_score(self.params, X)
        if self.kind == "kmeans":
            centroids = self.params["centroids"]
            d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
            return np.sqrt(d2.min(axis=1))
        raise DetectorError(f"unknown model kind {self.kind!r}")

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        raw = self.predict_raw(X)
        if self.calibration is not None:
            return self.calibration.apply(raw)
        return np.clip(raw, 0.0, 1.0)

    # ---- serialization ----

    def to_dict(self) -> dict:
        out = {"schema_version": MODEL_SCHEMA_VERSION, "kind": self.kind}
        if self.calibration is not None:
            out["calibration"] = {"lo": self.calibration.lo, "hi": self.calibration.hi}
        p = self.params
        if self.kind == "random_forest":
            out["trees"] = [t.to_dict() for t in p["trees"]]
        elif self.kind == "gbt":
            m: BoostedModel = p["model"]
            out["base_score"] = m.base_score
            out["learning_rate"] = m.learning_rate
            out["trees"] = [t.to_dict() for t in m.trees]
            out["train_losses"] = m.train_losses
        elif self.kind == "isolation_forest":
            out["subsample"] = p["subsample"]
            out["trees"] = p["trees"]
        elif self.kind == "pca":
            out["mean"] = p["mean"].tolist()
            out["components"] = p["components"].tolist()
        elif self.kind == "kmeans":
            out["centroids"] = p["centroids"].tolist()
        else:
            raise DetectorError(f"unknown model kind {self.kind!r}")
        return out

    @staticmethod
    def from_dict(d: dict) -> "DetectorModel":
        if d.get("schema_version") != MODEL_SCHEMA_VERSION:
            raise DetectorError(f"unsupported model schema_version {d.get('schema_version')}")
        kind = d["kind"]
        cal = None
        if "calibration" in d:
            cal = Calibration(d["calibration"]["lo"], d["calibration"]["hi"])
        if kind == "random_forest":
            params = {"trees": [TreeNode.from_dict(t) for t in d["trees"]]}
        elif kind == "gbt":
            model = BoostedModel(
                base_score=float(d["base_score"]),
                learning_rate=float(d["learning_rate"]),
                trees=[TreeNode.from_dict(t) for t in d["trees"]],
                train_losses=list(d["train_losses"]),
            )
            params = {"model": model}
        elif kind == "isolation_forest":
            params = {"subsample": int(d["subsample"]), "trees": d["trees"]}
        elif kind == "pca":
            params = {
                "mean": np.asarray(d["mean"], dtype=float),
                "components": np.asarray(d["components"], dtype=float),
            }
        elif kind == "kmeans":
            params = {"centroids": np.asarray(d["centroids"], dtype=float)}
        else:
            raise DetectorError(f"unknown model kind {kind!r}")
        return DetectorModel(kind, params, cal)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @staticmethod
    def load(path: str) -> "DetectorModel":
        with open(path, "r", encoding="utf-8") as fh:
            return DetectorModel.from_dict(json.load(fh))


# ---- supervised ----

def fit_random_forest(X, y, params: ForestParams = ForestParams()) -> DetectorModel:
    return DetectorModel("random_forest", {"trees": trees.fit_random_forest(X, y, params)})


def fit_gbt(X, y, params: BoostParams = BoostParams()) -> DetectorModel:
    return DetectorModel("gbt", {"model": trees.fit_gbt(X, y, params)})


# ---- isolation forest ----

def _harmonic(n: int) -> float:
    return float(np.sum(1.0 / np.arange(1, n + 1)))


def average_path_length(n: int) -> float:
    """c(n) = 2 H(n-1) - 2 (n-1)/n; expected BST path length normalizer."""
    if n <= 1:
        return 0.0
    return 2.0 * _harmonic(n - 1) - 2.0 * (n - 1) / n


def _build_iso_tree(X: np.ndarray, depth: int, max_depth: int, rng) -> dict:
    n = X.shape[0]
    if n <= 1 or depth >= max_depth:
        return {"size": int(n)}
    f = int(rng.integers(X.shape[1]))
    lo, hi = float(X[:, f].min()), float(X[:, f].max())
    if hi <= lo:
        return {"size": int(n)}
    thr = float(rng.uniform(lo, hi))
    mask = X[:, f] < thr
    return {
        "feature": f,
        "threshold": thr,
        "left": _build_iso_tree(X[mask], depth + 1, max_depth, rng),
        "right": _build_iso_tree(X[~mask], depth + 1, max_depth, rng),
    }


def _iso_path_length(node: dict, x: np.ndarray, depth: int) -> float:
    while "feature" in node:
        node = node["left"] if x[node["feature"]] < node["threshold"] else node["right"]
        depth += 1
    return depth + average_path_length(node["size"])


def fit_isolation_forest(
    X,
    n_trees: int = 100,
    subsample: int = 256,
    seed: int = 0,
) -> DetectorModel:
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise DetectorError("need at least 2 samples")
    sub = min(subsample, n)
    max_depth = int(math.ceil(math.log2(sub)))
    forest = []
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(t,)))
        idx = rng.choice(n, size=sub, replace=False)
        forest.append(_build_iso_tree(X[idx], 0, max_depth, rng))
    params = {"subsample": sub, "trees": forest}
    model = DetectorModel("isolation_forest", params)
    model.calibration = Calibration.fit(model.predict_raw(X))
    return model


def _iforest_score(params: dict, X: np.ndarray) -> np.ndarray:
    c = average_path_length(params["subsample"])
    out = np.empty(X.shape[0])
    for i, x in enumerate(X):
        eh = np.mean([_iso_path_length(t, x, 0) for t in params["trees"]])
        out[i] = 2.0 ** (-eh / c)
    return out


# ---- PCA reconstruction ----

def fit_pca_detector(X_normal: np.ndarray, n_components: int) -> DetectorModel:
    """Reconstruction-error detector fitted on normal-labeled rows only."""
    X = np.asarray(X_normal, dtype=float)
    n, d = X.shape
    if n_components > d:
        raise DetectorError("n_components must be <= feature count")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / n
    if not np.any(cov):
        raise DetectorError("zero-variance data")
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:n_components]
    comps = evecs[:, order].T
    # deterministic sign: largest-|entry| coordinate made positive
    for i in range(comps.shape[0]):
        j = int(np.argmax(np.abs(comps[i])))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    params = {"mean": mean, "components": comps}
    model = DetectorModel("pca", params)
    model.calibration = Calibration.fit(model.predict_raw(X))
    return model


def _pca_score(params: dict, X: np.ndarray) -> np.ndarray:
    mean, comps = params["mean"], params["components"]
    Xc = X - mean
    proj = Xc @ comps.T
    recon = proj @ comps
    return np.sum((Xc - recon) ** 2, axis=1)


# ---- k-means distance ----

def fit_kmeans_detector(X, k: int, seed: int = 0, max_iter: int = 100) -> DetectorModel:
    """Lloyd's algorithm with greedy farthest-point initialization."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < k:
        raise DetectorError("need n >= k samples")
    rng = np.random.default_rng(seed)

    def nearest_d2(cents):
        return ((X[:, None, :] - np.asarray(cents)[None, :, :]) ** 2).sum(axis=2).min(axis=1)

    centroids = [X[int(rng.integers(n))]]
    while len(centroids) < k:
        centroids.append(X[int(np.argmax(nearest_d2(centroids)))])
    C = np.array(centroids)
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        newC = np.empty_like(C)
        for j in range(k):
            members = X[assign == j]
            if members.shape[0] == 0:
                newC[j] = X[int(np.argmax(d2.min(axis=1)))]
            else:
                newC[j] = members.mean(axis=0)
        shift = float(np.sqrt(((newC - C) ** 2).sum(axis=1)).max())
        C = newC
        if shift < 1e-6:
            break
    params = {"centroids": C}
    model = DetectorModel("kmeans", params)
    model.calibration = Calibration.fit(model.predict_raw(X))
    return model


def calibrate(raw_scores_on_training: np.ndarray, raw_score) -> np.ndarray | float:
    """Standalone min-max calibration of raw scores against a training set."""
    cal = Calibration.fit(np.asarray(raw_scores_on_training, dtype=float))
    out = cal.apply(np.atleast_1d(np.asarray(raw_score, dtype=float)))
    if np.isscalar(raw_score) or np.asarray(raw_score).ndim == 0:
        return float(out[0])
    return out
