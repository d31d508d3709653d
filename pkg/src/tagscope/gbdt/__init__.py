from ._kernels import split_gain
from .metrics import Metrics, evaluate, macro_auc, roc_auc
from .model import (
    BoostedModel,
    Booster,
    Params,
    Tree,
    base_score_for,
    forest_margin,
    sigmoid,
    train,
    training_loss_curve,
)

__all__ = [
    "BoostedModel",
    "Booster",
    "Metrics",
    "Params",
    "Tree",
    "base_score_for",
    "evaluate",
    "forest_margin",
    "macro_auc",
    "roc_auc",
    "sigmoid",
    "split_gain",
    "train",
    "training_loss_curve",
]
