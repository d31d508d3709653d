"""Split-frequency, split-gain and permutation feature importance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..gbdt.metrics import macro_auc
from ..gbdt.model import BoostedModel, forest_margin

METRICS = ("macro_auc", "accuracy")
DEFAULT_REPEATS = 5
SEED_STRIDE = 1000003


@dataclass
class ImportanceReport:
    method: str  # weight | gain | permutation
    scores: dict
    dispersion: dict | None = None
    scope: str = "global"
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"method": self.method, "scope": self.scope, "scores": self.scores}
        if self.dispersion is not None:
            d["dispersion"] = self.dispersion
        d.update(self.extra)
        return d


def _tally(boosters, n_features, kind):
    out = np.zeros(n_features, dtype=np.int64 if kind == "weight" else np.float64)
    for b in boosters:
        for t in b.trees:
            internal = t.feature >= 0
            if kind == "weight":
                out += np.bincount(t.feature[internal], minlength=n_features)
            else:
                np.add.at(out, t.feature[internal], t.gain[internal])
    return out


def weight_importance(model: BoostedModel, label=None, kind: str = "weight") -> ImportanceReport:
    """Internal-node counts (``weight``) or summed split gain (``gain``) per feature.

    ``label=None`` sums over every label's trees.
    """
    if kind not in ("weight", "gain"):
        raise ValueError(f"kind must be weight or gain, got {kind!r}")
    boosters = model.boosters if label is None else [b for b in model.boosters if b.label == label]
    if label is not None and not boosters:
        raise KeyError(f"model has no label {label!r}")
    vals = _tally(boosters, len(model.feature_names), kind)
    cast = int if kind == "weight" else float
    return ImportanceReport(kind, {n: cast(v) for n, v in zip(model.feature_names, vals)},
                            scope="global" if label is None else label)


def score(metric: str, margins: np.ndarray, Y: np.ndarray, task_kind: str) -> float:
    if metric == "macro_auc":
        value, _, _ = macro_auc(margins, Y)
        if value is None:
            raise ValueError("macro AUC undefined: every label is single-class")
        return value
    if metric == "accuracy":
        if task_kind == "multiclass":
            return float(np.mean(margins.argmax(axis=1) == Y.argmax(axis=1)))
        return float(np.mean((margins > 0) == (Y > 0)))
    raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")


def permutation_importance(model: BoostedModel, X, Y, metric: str = "macro_auc",
                           repeats: int = DEFAULT_REPEATS, seed: int = 42) -> ImportanceReport:
    """Mean and std over repeats of (baseline score - score with one column shuffled).

    The shuffle for feature f, repeat r is seeded with seed + f * 1000003 + r.
    Only labels whose trees split on f are re-predicted; the rest are unchanged.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y)
    base_margins = model.predict_margin(X)
    baseline = score(metric, base_margins, Y, model.task_kind)
    users = [{int(f) for t in b.trees for f in t.feature[t.feature >= 0]} for b in model.boosters]
    means, stds = {}, {}
    n = X.shape[0]
    for f, name in enumerate(model.feature_names):
        affected = [j for j, u in enumerate(users) if f in u]
        drops = []
        for r in range(repeats):
            rng = np.random.default_rng(seed + f * SEED_STRIDE + r)
            perm = rng.permutation(n)
            margins = base_margins
            if affected:
                Xp = X.copy()
                Xp[:, f] = X[perm, f]
                margins = base_margins.copy()
                for j in affected:
                    b = model.boosters[j]
                    margins[:, j] = forest_margin(b.trees, b.base_score, Xp)
            drops.append(baseline - score(metric, margins, Y, model.task_kind))
        means[name] = float(np.mean(drops))
        stds[name] = float(np.std(drops))
    return ImportanceReport("permutation", means, stds,
                            extra={"metric": metric, "baseline": baseline, "repeats": repeats, "seed": seed})
