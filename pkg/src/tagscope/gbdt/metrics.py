"""ROC-AUC, accuracy and F1 for multilabel and multiclass taggers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SingleClass


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    sv = values[order]
    starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
    ends = np.r_[starts[1:], len(sv)]
    ranks = np.empty(len(sv))
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + 1 + e)
    return ranks


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied positive/negative pairs count one half."""
    labels = np.asarray(labels) > 0
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC-AUC needs at least one positive and one negative")
    ranks = average_ranks(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class Metrics:
    macro_auc: float | None = None
    per_label_auc: dict = field(default_factory=dict)
    accuracy: float | None = None
    per_class_f1: dict = field(default_factory=dict)
    confusion: list | None = None
    excluded_labels: list = field(default_factory=list)
    n_rows: int = 0

    def to_dict(self) -> dict:
        return {
            "macro_auc": self.macro_auc,
            "per_label_auc": self.per_label_auc,
            "accuracy": self.accuracy,
            "per_class_f1": self.per_class_f1,
            "confusion": self.confusion,
            "excluded_labels": self.excluded_labels,
            "n_rows": self.n_rows,
        }


def macro_auc(scores: np.ndarray, Y: np.ndarray, names=None):
    """Mean AUC over labels; single-class labels are excluded and reported."""
    names = names if names is not None else [str(j) for j in range(Y.shape[1])]
    per, excluded = {}, []
    for j, name in enumerate(names):
        try:
            per[name] = roc_auc(scores[:, j], Y[:, j])
        except SingleClass:
            excluded.append(name)
    macro = float(np.mean(list(per.values()))) if per else None
    return macro, per, excluded


def confusion_matrix(true_idx, pred_idx, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(true_idx), np.asarray(pred_idx)), 1)
    return cm


def f1_scores(cm: np.ndarray) -> np.ndarray:
    tp = np.diag(cm).astype(np.float64)
    pred = cm.sum(axis=0)
    true = cm.sum(axis=1)
    prec = np.divide(tp, pred, out=np.zeros_like(tp), where=pred > 0)
    rec = np.divide(tp, true, out=np.zeros_like(tp), where=true > 0)
    denom = prec + rec
    return np.divide(2 * prec * rec, denom, out=np.zeros_like(tp), where=denom > 0)


def classification_metrics(margins: np.ndarray, Y: np.ndarray, names, task_kind: str) -> Metrics:
    Y = np.asarray(Y)
    m = Metrics(n_rows=int(Y.shape[0]))
    m.macro_auc, m.per_label_auc, m.excluded_labels = macro_auc(margins, Y, names)
    if task_kind == "multiclass":
        true_idx = Y.argmax(axis=1)
        pred_idx = margins.argmax(axis=1)
        cm = confusion_matrix(true_idx, pred_idx, Y.shape[1])
        m.accuracy = float(np.mean(true_idx == pred_idx))
        m.per_class_f1 = {n: float(v) for n, v in zip(names, f1_scores(cm))}
        m.confusion = cm.tolist()
    return m


def evaluate(model, X, Y) -> Metrics:
    return classification_metrics(model.predict_margin(X), np.asarray(Y), model.labels, model.task_kind)
