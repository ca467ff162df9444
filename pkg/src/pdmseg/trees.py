"""From-scratch tree learners: CART, bootstrap forest, second-order boosting.

All split searches are exact over midpoints of sorted distinct values; ties in
gain break toward the lower feature index, then the lower threshold, making
every fit a deterministic function of (data, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

_GAIN_EPS = 1e-12


@dataclass
class TreeNode:
    feature: int = -1           # -1 marks a leaf
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "TreeNode":
        if "feature" not in d:
            return TreeNode(value=float(d["value"]))
        return TreeNode(
            feature=int(d["feature"]),
            threshold=float(d["threshold"]),
            left=TreeNode.from_dict(d["left"]),
            right=TreeNode.from_dict(d["right"]),
        )


def predict_tree(root: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    for i, row in enumerate(X):
        node = root
        while not node.is_leaf:
            node = node.left if row[node.feature] <= node.threshold else node.right
        out[i] = node.value
    return out


def _best_gini_split(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    features: np.ndarray,
    min_samples_leaf: int,
) -> Optional[tuple[int, float, float]]:
    """Best (feature, threshold, gain) by weighted Gini impurity decrease."""
    W = w.sum()
    P = float(w @ y)
    parent_imp = 2.0 * P * (W - P) / W  # W * gini(parent)
    best = None
    best_gain = _GAIN_EPS
    n = y.shape[0]
    for f in features:
        order = np.argsort(X[:, f], kind="mergesort")
        xs = X[order, f]
        ws = w[order]
        wys = ws * y[order]
        cw = np.cumsum(ws)
        cwy = np.cumsum(wys)
        distinct = np.nonzero(xs[:-1] < xs[1:])[0]
        for i in distinct:
            if i + 1 < min_samples_leaf or n - i - 1 < min_samples_leaf:
                continue
            wl, pl = cw[i], cwy[i]
            wr, pr = W - wl, P - pl
            imp = 2.0 * pl * (wl - pl) / wl + 2.0 * pr * (wr - pr) / wr
            gain = parent_imp - imp
            if gain > best_gain:
                best_gain = gain
                best = (int(f), float((xs[i] + xs[i + 1]) / 2.0), float(gain))
    return best


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    weights: Optional[np.ndarray] = None,
    max_depth: int = 8,
    min_samples_leaf: int = 1,
    max_features: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> TreeNode:
    """Greedy CART classifier tree; leaf value = weighted positive fraction."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("empty input")
    w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    d = X.shape[1]

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        yi, wi = y[idx], w[idx]
        value = float((wi @ yi) / wi.sum())
        if depth >= max_depth or idx.shape[0] < 2 * min_samples_leaf or value in (0.0, 1.0):
            return TreeNode(value=value)
        if max_features is not None and max_features < d:
            feats = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            feats = np.arange(d)
        split = _best_gini_split(X[idx], yi, wi, feats, min_samples_leaf)
        if split is None:
            return TreeNode(value=value)
        f, thr, _ = split
        left_mask = X[idx, f] <= thr
        if not left_mask.any() or left_mask.all():
            return TreeNode(value=value)
        node = TreeNode(feature=f, threshold=thr, value=value)
        node.left = build(idx[left_mask], depth + 1)
        node.right = build(idx[~left_mask], depth + 1)
        return node

    return build(np.arange(X.shape[0]), 0)


def class_weights(y: np.ndarray) -> np.ndarray:
    """Inverse-frequency weights: each class contributes equal total weight."""
    y = np.asarray(y, dtype=bool)
    n = y.shape[0]
    n_pos = int(y.sum())
    n_neg = n - n_pos
    w = np.empty(n)
    w[y] = n / (2.0 * n_pos) if n_pos else 0.0
    w[~y] = n / (2.0 * n_neg) if n_neg else 0.0
    return w


@dataclass
class ForestParams:
    n_trees: int = 50
    max_depth: int = 8
    min_samples_leaf: int = 2
    class_weighting: str = "inverse_frequency"
    bootstrap: bool = True
    max_features: Optional[int] = None   # default ceil(sqrt(d))
    seed: int = 0


def fit_random_forest(X: np.ndarray, y: np.ndarray, params: ForestParams) -> list[TreeNode]:
    """Bootstrap forest with per-tree RNG streams derived from (seed, tree index)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=bool)
    if y.all() or not y.any():
        raise ValueError("need both classes to fit a forest")
    n, d = X.shape
    mtry = params.max_features or int(math.ceil(math.sqrt(d)))
    base_w = class_weights(y) if params.class_weighting == "inverse_frequency" else np.ones(n)
    trees = []
    for t in range(params.n_trees):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=params.seed, spawn_key=(t,)))
        idx = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        trees.append(
            fit_tree(
                X[idx], y[idx].astype(float), base_w[idx],
                max_depth=params.max_depth,
                min_samples_leaf=params.min_samples_leaf,
                max_features=mtry,
                rng=rng,
            )
        )
    return trees


def predict_forest(trees: list[TreeNode], X: np.ndarray) -> np.ndarray:
    return np.mean([predict_tree(t, X) for t in trees], axis=0)


@dataclass
class BoostParams:
    n_rounds: int = 60
    max_depth: int = 3
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_samples_leaf: int = 1
    class_weighting: str = "inverse_frequency"
    seed: int = 0


def _best_grad_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    lam: float,
    gamma: float,
    min_samples_leaf: int,
) -> Optional[tuple[int, float]]:
    G, H = g.sum(), h.sum()
    parent = G * G / (H + lam)
    best = None
    best_gain = _GAIN_EPS
    n, d = X.shape
    for f in range(d):
        order = np.argsort(X[:, f], kind="mergesort")
        xs = X[order, f]
        cg = np.cumsum(g[order])
        ch = np.cumsum(h[order])
        distinct = np.nonzero(xs[:-1] < xs[1:])[0]
        distinct = distinct[
            (distinct + 1 >= min_samples_leaf) & (n - distinct - 1 >= min_samples_leaf)
        ]
        if distinct.size == 0:
            continue
        gl, hl = cg[distinct], ch[distinct]
        gr, hr = G - gl, H - hl
        gains = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent) - gamma
        j = int(np.argmax(gains))
        if gains[j] > best_gain:
            best_gain = float(gains[j])
            i = distinct[j]
            best = (f, float((xs[i] + xs[i + 1]) / 2.0))
    return best


def _fit_grad_tree(
    X: np.ndarray, g: np.ndarray, h: np.ndarray, params: BoostParams, idx: np.ndarray, depth: int
) -> TreeNode:
    gi, hi = g[idx], h[idx]
    leaf_w = float(-gi.sum() / (hi.sum() + params.reg_lambda))
    if depth >= params.max_depth or idx.shape[0] < 2 * params.min_samples_leaf:
        return TreeNode(value=leaf_w)
    split = _best_grad_split(
        X[idx], gi, hi, params.reg_lambda, params.gamma, params.min_samples_leaf
    )
    if split is None:
        return TreeNode(value=leaf_w)
    f, thr = split
    left_mask = X[idx, f] <= thr
    node = TreeNode(feature=f, threshold=thr, value=leaf_w)
    node.left = _fit_grad_tree(X, g, h, params, idx[left_mask], depth + 1)
    node.right = _fit_grad_tree(X, g, h, params, idx[~left_mask], depth + 1)
    return node


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


@dataclass
class BoostedModel:
    base_score: float
    learning_rate: float
    trees: list[TreeNode] = field(default_factory=list)
    train_losses: list[float] = field(default_factory=list)

    def decision(self, X: np.ndarray) -> np.ndarray:
        z = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            z += self.learning_rate * predict_tree(tree, X)
        return z

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision(X))


def fit_gbt(X: np.ndarray, y: np.ndarray, params: BoostParams) -> BoostedModel:
    """Second-order logistic boosting; records weighted train logloss per round."""
    X = np.asarray(X, dtype=float)
    yb = np.asarray(y, dtype=bool)
    if yb.all() or not yb.any():
        raise ValueError("need both classes to fit boosted trees")
    yf = yb.astype(float)
    w = class_weights(yb) if params.class_weighting == "inverse_frequency" else np.ones(yb.shape[0])
    p0 = float((w @ yf) / w.sum())
    base = math.log(p0 / (1.0 - p0))
    model = BoostedModel(base_score=base, learning_rate=params.learning_rate)
    z = np.full(X.shape[0], base)

    def logloss(p):
        p = np.clip(p, 1e-15, 1 - 1e-15)
        return float(-(w @ (yf * np.log(p) + (1 - yf) * np.log(1 - p))) / w.sum())

    for _ in range(params.n_rounds):
        p = _sigmoid(z)
        g = w * (p - yf)
        h = np.maximum(w * p * (1.0 - p), 1e-16)
        tree = _fit_grad_tree(X, g, h, params, np.arange(X.shape[0]), 0)
        model.trees.append(tree)
        z += params.learning_rate * predict_tree(tree, X)
        model.train_losses.append(logloss(_sigmoid(z)))
    return model
