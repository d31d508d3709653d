"""Per-prediction Shapley attributions of the margin (log-odds)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, MissingCover
from ..gbdt.model import BoostedModel, Booster
from . import _treeshap

DEFAULT_SUMMARY_INSTANCES = 2000


@dataclass
class ShapExplanation:
    phi: np.ndarray
    base_value: float
    label: str
    margin: float
    feature_names: list

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "base_value": self.base_value,
            "margin": self.margin,
            "phi": {n: float(v) for n, v in zip(self.feature_names, self.phi)},
        }


def tree_depth(tree) -> int:
    depth = np.zeros(tree.n_nodes, dtype=np.int64)
    for i in range(tree.n_nodes):
        if tree.feature[i] >= 0:
            depth[tree.left[i]] = depth[tree.right[i]] = depth[i] + 1
    return int(depth.max()) if tree.n_nodes else 0


def expected_value(tree) -> float:
    """Cover-weighted mean leaf value: the tree's output with no features known."""
    leaves = tree.feature < 0
    return float(np.sum(tree.leaf_value[leaves] * tree.cover[leaves]) / tree.cover[0])


def _flatten(trees):
    for t in trees:
        if t.cover is None or len(t.cover) != t.n_nodes or np.any(~(t.cover > 0)):
            raise MissingCover("every node needs a positive cover for TreeSHAP")
    offsets = np.cumsum([0] + [t.n_nodes for t in trees[:-1]]).astype(np.int64)
    cat = lambda a: np.ascontiguousarray(np.concatenate(a))  # noqa: E731
    return (
        cat([t.feature for t in trees]).astype(np.int64),
        cat([t.threshold for t in trees]).astype(np.float64),
        cat([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(trees, offsets)]).astype(np.int64),
        cat([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(trees, offsets)]).astype(np.int64),
        cat([t.leaf_value for t in trees]).astype(np.float64),
        cat([t.cover for t in trees]).astype(np.float64),
        offsets,
    )


def booster_base_value(booster: Booster) -> float:
    return booster.base_score + sum(expected_value(t) for t in booster.trees)


def shap_matrix(booster: Booster, X: np.ndarray):
    """(phi of shape (n, d), base value) for one label's forest."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    if not booster.trees:
        return np.zeros(X.shape), float(booster.base_score)
    arrays = _flatten(booster.trees)
    max_depth = max(tree_depth(t) for t in booster.trees)
    phi = _treeshap.forest_shap(X, *arrays, max_depth)
    return phi, booster_base_value(booster)


def _booster(model: BoostedModel, label) -> Booster:
    if isinstance(label, (int, np.integer)):
        return model.boosters[int(label)]
    for b in model.boosters:
        if b.label == label:
            return b
    raise KeyError(f"model has no label {label!r}")


def shap_values(model: BoostedModel, x, label) -> ShapExplanation:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != len(model.feature_names):
        raise DimensionMismatch(f"model expects {len(model.feature_names)} features, got {x.shape[0]}")
    b = _booster(model, label)
    phi, base = shap_matrix(b, x[None, :])
    margin = float(model.predict_margin(x[None, :])[0, model.boosters.index(b)])
    return ShapExplanation(phi[0], float(base), b.label, margin, list(model.feature_names))


def shap_summary(model: BoostedModel, X, max_instances: int = DEFAULT_SUMMARY_INSTANCES, seed: int = 42) -> dict:
    """Mean |phi| per feature over a seeded sample of at most ``max_instances`` rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] > max_instances:
        rows = np.sort(np.random.default_rng(seed).choice(X.shape[0], max_instances, replace=False))
        X = X[rows]
    per_label = {}
    for b in model.boosters:
        phi, _ = shap_matrix(b, X)
        per_label[b.label] = np.abs(phi).mean(axis=0)
    overall = np.mean(list(per_label.values()), axis=0) if per_label else np.zeros(len(model.feature_names))
    return {
        "n_instances": int(X.shape[0]),
        "overall": dict(zip(model.feature_names, map(float, overall))),
        "per_label": {k: dict(zip(model.feature_names, map(float, v))) for k, v in per_label.items()},
    }
