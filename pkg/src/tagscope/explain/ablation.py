"""Retrain on every non-empty combination of the three feature groups."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import pipeline
from ..gbdt import Params
from ..tabular import GROUPS, FeatureStore, LabelMatrix, SplitSpec, split

log = logging.getLogger(__name__)

SUBSETS = (
    ("harmonic",),
    ("midlevel",),
    ("signal",),
    ("harmonic", "midlevel"),
    ("harmonic", "signal"),
    ("midlevel", "signal"),
    ("harmonic", "midlevel", "signal"),
)


def subset_name(groups) -> str:
    return "all" if set(groups) == set(GROUPS) else "+".join(groups)


@dataclass
class AblationReport:
    metric_name: str
    rows: list = field(default_factory=list)
    seed: int = 42

    def to_dict(self) -> dict:
        return {"metric": self.metric_name, "seed": self.seed, "rows": self.rows}

    def row(self, name: str) -> dict:
        return next(r for r in self.rows if r["name"] == name)

    def scores(self) -> dict:
        return {r["name"]: r["metric"] for r in self.rows if r["metric"] is not None}


def params_hash(params: Params, columns) -> str:
    blob = json.dumps({"params": asdict(params), "columns": list(columns)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def ablation(store: FeatureStore, labels: LabelMatrix, params: Params | None = None,
             fractions=pipeline.DEFAULT_FRACTIONS, seed: int = 42, jobs: int = 1,
             split_spec: SplitSpec | None = None) -> AblationReport:
    """One row per group subset, all trained and scored on the same split."""
    params = params or Params(seed=seed)
    spec = split_spec or split(pipeline.common_ids(store, labels), labels, fractions, seed)
    metric_name = "accuracy" if labels.task_kind == "multiclass" else "macro_auc"
    report = AblationReport(metric_name, seed=seed)
    for groups in SUBSETS:
        mask = store.group_mask(groups)
        cols = np.flatnonzero(mask)
        names = [store.names[c] for c in cols]
        row = {
            "name": subset_name(groups),
            "groups": list(groups),
            "n_features": int(len(cols)),
            "metric": None,
            "params_hash": params_hash(params, names),
            "error": None,
        }
        try:
            if len(cols) == 0:
                raise ValueError(f"no features tagged {groups}")
            model = pipeline.fit(store, labels, params, seed=seed, jobs=jobs, split_spec=spec, columns=cols)
            m = pipeline.evaluate(model, store, labels, "test")
            row["metric"] = m.accuracy if metric_name == "accuracy" else m.macro_auc
        except Exception as exc:  # a failing subset must not abort the remaining rows
            log.warning("ablation row %s failed: %s", row["name"], exc)
            row["error"] = f"{type(exc).__name__}: {exc}"
        report.rows.append(row)
    return report
