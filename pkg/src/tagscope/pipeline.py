"""Store + labels -> split -> scaler -> booster, and evaluation on a split part."""

from __future__ import annotations

import logging

import numpy as np

from .errors import DataError
from .gbdt import BoostedModel, Params, train
from .gbdt.metrics import Metrics, classification_metrics
from .tabular import FeatureStore, LabelMatrix, SplitSpec, StandardScaler, split

log = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.8, 0.1, 0.1)


def common_ids(store: FeatureStore, labels: LabelMatrix) -> list:
    labelled = set(labels.track_ids)
    ids = [t for t in store.track_ids if t in labelled]
    dropped = len(store.track_ids) - len(ids)
    if dropped:
        log.warning("%d feature rows have no labels and are ignored", dropped)
    if not ids:
        raise DataError("no track ids shared by the feature store and the label file")
    return ids


def fit(store: FeatureStore, labels: LabelMatrix, params: Params | None = None,
        fractions=DEFAULT_FRACTIONS, seed: int = 42, jobs: int = 1,
        split_spec: SplitSpec | None = None, columns=None) -> BoostedModel:
    """Split, standardise on the train part, boost; scaler and split go into the model."""
    params = params or Params(seed=seed)
    spec = split_spec or split(common_ids(store, labels), labels, fractions, seed)
    cols = np.arange(len(store.names)) if columns is None else np.asarray(columns)
    Xtr = store.rows(spec.train)[:, cols]
    scaler = StandardScaler.fit(Xtr)
    model = train(scaler.transform(Xtr), labels.rows(spec.train), params,
                  [store.names[c] for c in cols], labels.tag_names, labels.task_kind, jobs)
    model.scaler = scaler.to_dict()
    model.split = spec.to_dict()
    return model


def model_inputs(model: BoostedModel, store: FeatureStore, ids) -> np.ndarray:
    """Rows for ``ids`` restricted to the model's features and standardised."""
    col = {n: i for i, n in enumerate(store.names)}
    missing = [n for n in model.feature_names if n not in col]
    if missing:
        raise DataError(f"feature store lacks model features {missing[:3]}")
    X = store.rows(ids)[:, [col[n] for n in model.feature_names]]
    if model.scaler is not None:
        X = StandardScaler.from_dict(model.scaler).transform(X)
    return X


def part_ids(model: BoostedModel, store: FeatureStore, labels: LabelMatrix, part: str) -> list:
    if part == "all" or model.split is None:
        return common_ids(store, labels)
    return list(model.split[part])


def evaluate(model: BoostedModel, store: FeatureStore, labels: LabelMatrix, part: str = "test") -> Metrics:
    ids = part_ids(model, store, labels, part)
    margins = model.predict_margin(model_inputs(model, store, ids))
    return classification_metrics(margins, labels.rows(ids), model.labels, model.task_kind)
