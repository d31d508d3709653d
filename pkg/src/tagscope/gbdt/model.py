"""Second-order gradient boosting with logistic loss, one booster per label."""

from __future__ import annotations

import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError, DimensionMismatch, MissingCover, NumericFailure
from . import _kernels

log = logging.getLogger(__name__)

BASE_SCORE_CLAMP = 10.0
MODEL_FORMAT = "tagscope-gbdt/1"
_MIN_HESS = 1e-16


@dataclass
class Params:
    n_trees: int = 200
    max_depth: int = 6
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    subsample: float = 0.8
    colsample: float = 0.8
    seed: int = 42

    def validate(self):
        if self.n_trees < 0 or self.max_depth < 0:
            raise ValueError("n_trees and max_depth must be >= 0")
        if not (0 < self.subsample <= 1 and 0 < self.colsample <= 1):
            raise ValueError("subsample and colsample must be in (0, 1]")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise ValueError("reg_lambda, gamma and min_child_weight must be >= 0")
        return self


@dataclass
class Tree:
    """Node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_value: np.ndarray
    cover: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] < 0

    def to_dict(self) -> dict:
        return {
            "feature": [int(v) for v in self.feature],
            "threshold": [float(v) for v in self.threshold],
            "left": [int(v) for v in self.left],
            "right": [int(v) for v in self.right],
            "leaf_value": [float(v) for v in self.leaf_value],
            "cover": [float(v) for v in self.cover],
            "gain": [float(v) for v in self.gain],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        if "cover" not in d:
            raise MissingCover("tree node arrays lack 'cover'")
        ints = lambda k: np.asarray(d[k], dtype=np.int64)  # noqa: E731
        flts = lambda k: np.asarray(d[k], dtype=np.float64)  # noqa: E731
        return cls(ints("feature"), flts("threshold"), ints("left"), ints("right"),
                   flts("leaf_value"), flts("cover"), flts("gain"))

    @classmethod
    def stump(cls, feature, threshold, left_value, right_value, left_cover=1.0, right_cover=1.0, gain=0.0):
        return cls(
            np.array([feature, -1, -1]),
            np.array([threshold, 0.0, 0.0]),
            np.array([1, -1, -1]),
            np.array([2, -1, -1]),
            np.array([0.0, left_value, right_value]),
            np.array([left_cover + right_cover, left_cover, right_cover]),
            np.array([gain, 0.0, 0.0]),
        )


@dataclass
class Booster:
    label: str
    base_score: float
    trees: list = field(default_factory=list)


def _flatten(trees):
    if not trees:
        e = np.zeros(0, dtype=np.int64)
        return e, np.zeros(0), e, e, np.zeros(0), e
    offsets = np.cumsum([0] + [t.n_nodes for t in trees[:-1]])
    feature = np.concatenate([t.feature for t in trees])
    threshold = np.concatenate([t.threshold for t in trees])
    value = np.concatenate([t.leaf_value for t in trees])
    left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(trees, offsets)])
    right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(trees, offsets)])
    return feature, threshold, left, right, value, offsets.astype(np.int64)


def forest_margin(trees, base_score: float, X: np.ndarray) -> np.ndarray:
    feature, threshold, left, right, value, roots = _flatten(trees)
    return _kernels.predict_forest(np.ascontiguousarray(X, dtype=np.float64),
                                   feature, threshold, left, right, value, roots, float(base_score))


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


@dataclass
class BoostedModel:
    boosters: list
    params: Params
    feature_names: list
    task_kind: str = "multilabel"
    scaler: dict | None = None
    split: dict | None = None

    @property
    def labels(self) -> list:
        return [b.label for b in self.boosters]

    def _check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != len(self.feature_names):
            raise DimensionMismatch(f"model expects {len(self.feature_names)} features, got {X.shape[1]}")
        return X

    def predict_margin(self, X) -> np.ndarray:
        X = self._check(X)
        return np.column_stack([forest_margin(b.trees, b.base_score, X) for b in self.boosters]) \
            if self.boosters else np.zeros((X.shape[0], 0))

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.predict_margin(X))

    def predict_class(self, X) -> np.ndarray:
        return np.argmax(self.predict_margin(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "params": asdict(self.params),
            "feature_names": list(self.feature_names),
            "task_kind": self.task_kind,
            "labels": [
                {"name": b.label, "base_score": b.base_score, "trees": [t.to_dict() for t in b.trees]}
                for b in self.boosters
            ],
            "scaler": self.scaler,
            "split": self.split,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_dict(cls, d: dict) -> "BoostedModel":
        if d.get("format") != MODEL_FORMAT:
            raise DataError(f"unsupported model format {d.get('format')!r}")
        boosters = [Booster(b["name"], float(b["base_score"]), [Tree.from_dict(t) for t in b["trees"]])
                    for b in d["labels"]]
        return cls(boosters, Params(**d["params"]), list(d["feature_names"]), d["task_kind"],
                   d.get("scaler"), d.get("split"))

    @classmethod
    def load(cls, path) -> "BoostedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def base_score_for(y: np.ndarray) -> float:
    pos = float(np.count_nonzero(y))
    neg = float(len(y) - pos)
    if pos == 0:
        return -BASE_SCORE_CLAMP
    if neg == 0:
        return BASE_SCORE_CLAMP
    return float(np.clip(np.log(pos / neg), -BASE_SCORE_CLAMP, BASE_SCORE_CLAMP))


def logloss(y: np.ndarray, margin: np.ndarray) -> float:
    # log(1 + e^-m) for positives, log(1 + e^m) for negatives
    return float(np.mean(np.logaddexp(0.0, np.where(y > 0, -margin, margin))))


class _Scanner:
    """Runs the split scan over feature chunks and folds results in feature order."""

    def __init__(self, jobs: int):
        self.jobs = max(1, int(jobs))
        self.pool = ThreadPoolExecutor(self.jobs) if self.jobs > 1 else None

    def __call__(self, sorted_x, sorted_idx, node_of_row, g, h, G, H, features, lam, gamma, mcw):
        if self.pool is None or len(features) < 2:
            return _kernels.split_scan(sorted_x, sorted_idx, node_of_row, g, h, G, H, features, lam, gamma, mcw)
        chunks = [c for c in np.array_split(features, min(self.jobs, len(features))) if len(c)]
        results = list(self.pool.map(
            lambda c: _kernels.split_scan(sorted_x, sorted_idx, node_of_row, g, h, G, H, c, lam, gamma, mcw), chunks))
        best_gain, best_feat, best_thr = (a.copy() for a in results[0])
        for gain, feat, thr in results[1:]:
            better = gain > best_gain
            best_gain[better], best_feat[better], best_thr[better] = gain[better], feat[better], thr[better]
        return best_gain, best_feat, best_thr

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def grow_tree(X, sorted_x, sorted_idx, g, h, rows, features, params: Params, scan) -> Tree:
    """Depth-wise exact greedy growth on the sampled ``rows``."""
    n = X.shape[0]
    lam = params.reg_lambda
    node_of_row = np.full(n, -1, dtype=np.int64)
    node_of_row[rows] = 0
    feature, threshold, left, right, gain = [-1], [0.0], [-1], [-1], [0.0]
    frontier = [0]
    final_node = np.full(n, -1, dtype=np.int64)
    final_node[rows] = 0
    for _ in range(params.max_depth):
        slot = np.full(len(feature), -1, dtype=np.int64)
        slot[frontier] = np.arange(len(frontier))
        active = final_node >= 0
        compact = np.full(n, -1, dtype=np.int64)
        compact[active] = slot[final_node[active]]
        live = compact >= 0
        G = np.bincount(compact[live], weights=g[live], minlength=len(frontier))
        H = np.bincount(compact[live], weights=h[live], minlength=len(frontier))
        best_gain, best_feat, best_thr = scan(sorted_x, sorted_idx, compact, g, h, G, H, features,
                                              lam, params.gamma, params.min_child_weight)
        next_frontier = []
        # slot -> (left child id, right child id); -1 for slots that stay leaves
        child = np.full((len(frontier), 2), -1, dtype=np.int64)
        for s, node in enumerate(frontier):
            f = int(best_feat[s])
            if f < 0:
                continue
            li, ri = len(feature), len(feature) + 1
            feature[node], threshold[node], left[node], right[node], gain[node] = f, float(best_thr[s]), li, ri, float(best_gain[s])
            feature += [-1, -1]
            threshold += [0.0, 0.0]
            left += [-1, -1]
            right += [-1, -1]
            gain += [0.0, 0.0]
            child[s] = li, ri
            next_frontier += [li, ri]
        if not next_frontier:
            break
        members = np.flatnonzero(live)
        s_of = compact[members]
        splits = child[s_of, 0] >= 0
        members, s_of = members[splits], s_of[splits]
        go_right = X[members, best_feat[s_of]] >= best_thr[s_of]
        final_node[members] = child[s_of, go_right.astype(np.int64)]
        frontier = next_frontier

    m = len(feature)
    feature = np.asarray(feature, dtype=np.int64)
    left = np.asarray(left, dtype=np.int64)
    right = np.asarray(right, dtype=np.int64)
    sampled = final_node >= 0
    Gn = np.bincount(final_node[sampled], weights=g[sampled], minlength=m)
    Hn = np.bincount(final_node[sampled], weights=h[sampled], minlength=m)
    cover = Hn.copy()
    # children always have larger indices than their parent
    for i in range(m - 1, -1, -1):
        if feature[i] >= 0:
            cover[i] = cover[left[i]] + cover[right[i]]
            Gn[i] = Gn[left[i]] + Gn[right[i]]
    value = params.learning_rate * (-Gn / (cover + lam))
    return Tree(feature, np.asarray(threshold), left, right, value, cover, np.asarray(gain))


def _presort(X):
    """(row order per feature, values in that order), both (n_features, n_rows)."""
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    return order, np.ascontiguousarray(np.take_along_axis(X.T, order, axis=1))


def train(X, Y, params: Params | None = None, feature_names=None, label_names=None,
          task_kind: str = "multilabel", jobs: int = 1) -> BoostedModel:
    params = (params or Params()).validate()
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    if X.shape[0] == 0:
        raise DataError("empty training set")
    if not np.all(np.isfinite(X)):
        raise DataError("training matrix contains non-finite values")
    n, d = X.shape
    feature_names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(d)]
    label_names = list(label_names) if label_names is not None else [f"label{j}" for j in range(Y.shape[1])]
    sorted_idx, sorted_x = _presort(X)
    scan = _Scanner(jobs)
    boosters = []
    try:
        for j in range(Y.shape[1]):
            y = (Y[:, j] > 0).astype(np.float64)
            base = base_score_for(y)
            booster = Booster(label_names[j], base)
            boosters.append(booster)
            if y.min() == y.max():
                warnings.warn(f"label {label_names[j]!r} has a single class; booster keeps its base score",
                              stacklevel=2)
                continue
            rng = np.random.default_rng([params.seed, j])
            margin = np.full(n, base)
            n_rows = max(1, int(round(params.subsample * n)))
            n_cols = max(1, int(round(params.colsample * d)))
            for _ in range(params.n_trees):
                p = 1.0 / (1.0 + np.exp(-margin))
                g = p - y
                h = np.maximum(p * (1.0 - p), _MIN_HESS)
                rows = np.arange(n) if n_rows == n else np.sort(rng.choice(n, n_rows, replace=False))
                cols = np.arange(d) if n_cols == d else np.sort(rng.choice(d, n_cols, replace=False))
                tree = grow_tree(X, sorted_x, sorted_idx, g, h, rows, cols.astype(np.int64), params, scan)
                booster.trees.append(tree)
                margin = margin + forest_margin([tree], 0.0, X)
                loss = logloss(y, margin)
                if not np.isfinite(loss):
                    raise NumericFailure(f"non-finite training loss for label {label_names[j]!r}")
            log.debug("label %s: %d trees", label_names[j], len(booster.trees))
    finally:
        scan.close()
    return BoostedModel(boosters, params, feature_names, task_kind)


def training_loss_curve(model: BoostedModel, X, Y) -> np.ndarray:
    """Logistic loss after 0..n_trees rounds, one row per label."""
    X = model._check(X)
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    curves = []
    for j, b in enumerate(model.boosters):
        y = (Y[:, j] > 0).astype(np.float64)
        margin = np.full(X.shape[0], b.base_score)
        losses = [logloss(y, margin)]
        for t in b.trees:
            margin = margin + forest_margin([t], 0.0, X)
            losses.append(logloss(y, margin))
        curves.append(losses)
    return np.array(curves)
