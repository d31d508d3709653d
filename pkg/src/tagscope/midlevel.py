"""Mid-level perceptual features from pooled MFCC statistics via ridge regression."""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import decode
from .errors import DataError, DegenerateDesign
from .signal_features import N_MFCC, mfcc

log = logging.getLogger(__name__)

MIDLEVEL_NAMES = [
    "melodiousness",
    "articulation",
    "rhythmic_stability",
    "rhythmic_complexity",
    "dissonance",
    "tonal_stability",
    "minorness",
]
POOLED_DIM = 2 * N_MFCC
DEFAULT_RIDGE_LAMBDA = 1.0
_CONST_STD = 1e-12
_MAX_COND = 1e12


def pool_mfcc(K: np.ndarray) -> np.ndarray:
    """Per-coefficient mean then population std over frames (80 values)."""
    K = np.atleast_2d(np.asarray(K, dtype=np.float64))
    return np.concatenate([K.mean(axis=0), K.std(axis=0)])


@dataclass
class MidLevelModel:
    weights: np.ndarray
    bias: np.ndarray
    input_mean: np.ndarray
    input_std: np.ndarray
    ridge_lambda: float = DEFAULT_RIDGE_LAMBDA
    target_min: np.ndarray = field(default_factory=lambda: np.zeros(len(MIDLEVEL_NAMES)))
    target_max: np.ndarray = field(default_factory=lambda: np.ones(len(MIDLEVEL_NAMES)))
    train_mse: float | None = None

    @property
    def constant(self) -> np.ndarray:
        return self.input_std <= _CONST_STD

    def standardize(self, pooled: np.ndarray) -> np.ndarray:
        pooled = np.atleast_2d(pooled)
        scale = np.where(self.constant, 1.0, self.input_std)
        z = (pooled - self.input_mean) / scale
        z[:, self.constant] = 0.0
        return z

    def predict_raw(self, pooled: np.ndarray) -> np.ndarray:
        """Affine output before clamping, one row per pooled vector."""
        return self.standardize(pooled) @ self.weights + self.bias

    def to_dict(self) -> dict:
        return {
            "kind": "midlevel-ridge",
            "outputs": MIDLEVEL_NAMES,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "input_stats": {"mean": self.input_mean.tolist(), "std": self.input_std.tolist()},
            "ridge_lambda": self.ridge_lambda,
            "target_scaling": {"min": self.target_min.tolist(), "max": self.target_max.tolist()},
            "train_mse": self.train_mse,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MidLevelModel":
        return cls(
            weights=np.asarray(d["weights"], dtype=np.float64).reshape(POOLED_DIM, len(MIDLEVEL_NAMES)),
            bias=np.asarray(d["bias"], dtype=np.float64),
            input_mean=np.asarray(d["input_stats"]["mean"], dtype=np.float64),
            input_std=np.asarray(d["input_stats"]["std"], dtype=np.float64),
            ridge_lambda=float(d["ridge_lambda"]),
            target_min=np.asarray(d["target_scaling"]["min"], dtype=np.float64),
            target_max=np.asarray(d["target_scaling"]["max"], dtype=np.float64),
            train_mse=d.get("train_mse"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "MidLevelModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def neutral_model() -> MidLevelModel:
    """Zero-weight model emitting 0.5 for every output; used when none is supplied."""
    p = len(MIDLEVEL_NAMES)
    return MidLevelModel(
        weights=np.zeros((POOLED_DIM, p)),
        bias=np.full(p, 0.5),
        input_mean=np.zeros(POOLED_DIM),
        input_std=np.ones(POOLED_DIM),
        ridge_lambda=0.0,
    )


def _ridge(Z, Yc, lam):
    gram = Z.T @ Z + lam * np.eye(Z.shape[1])
    if np.linalg.cond(gram) > _MAX_COND:
        raise np.linalg.LinAlgError("ill-conditioned normal equations")
    return np.linalg.solve(gram, Z.T @ Yc)


def train_midlevel(rows, ridge_lambda: float = DEFAULT_RIDGE_LAMBDA) -> MidLevelModel:
    """Closed-form ridge per output on standardised pooled inputs.

    ``rows`` is a sequence of (80-vector, 7-vector) pairs with targets already
    in [0, 1]. The intercept is not penalised.
    """
    if len(rows) < 2:
        raise DegenerateDesign(f"need at least 2 training rows, got {len(rows)}")
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be >= 0")
    X = np.array([np.asarray(r[0], dtype=np.float64) for r in rows])
    Y = np.array([np.asarray(r[1], dtype=np.float64) for r in rows])
    if X.shape[1] != POOLED_DIM or Y.shape[1] != len(MIDLEVEL_NAMES):
        raise DataError(f"expected {POOLED_DIM} inputs and {len(MIDLEVEL_NAMES)} targets per row")
    mean, std = X.mean(axis=0), X.std(axis=0)
    model = MidLevelModel(np.zeros((POOLED_DIM, Y.shape[1])), Y.mean(axis=0), mean, std, ridge_lambda)
    active = ~model.constant
    Z = model.standardize(X)[:, active]
    Yc = Y - model.bias
    lam = ridge_lambda
    while True:
        try:
            W = _ridge(Z, Yc, lam)
            break
        except np.linalg.LinAlgError:
            lam = max(1e-6, 10.0 * lam)
            warnings.warn(f"degenerate design; retrying with ridge_lambda={lam:g}", stacklevel=2)
    model.ridge_lambda = lam
    model.weights[active] = W
    model.train_mse = float(np.mean((model.predict_raw(X) - Y) ** 2))
    return model


def predict_midlevel(model: MidLevelModel, K: np.ndarray) -> np.ndarray:
    """Seven values in [0, 1] for one MFCC matrix."""
    return np.clip(model.predict_raw(pool_mfcc(K))[0], 0.0, 1.0)


def _find_clip(audio_dir: Path, clip_id: str) -> Path:
    for ext in (".wav", ".au", ".snd"):
        p = audio_dir / f"{clip_id}{ext}"
        if p.exists():
            return p
    raise DataError(f"no audio file for clip {clip_id!r} in {audio_dir}")


def train_from_files(csv_path, audio_dir, ridge_lambda: float = DEFAULT_RIDGE_LAMBDA) -> MidLevelModel:
    """Train from a ``clip_id,<7 targets>`` CSV plus a directory of clips.

    Targets are min-max scaled with the file's own extrema; the extrema are
    kept in the model so outputs can be mapped back.
    """
    audio_dir = Path(audio_dir)
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [n for n in ["clip_id"] + MIDLEVEL_NAMES if n not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{csv_path}: missing columns {missing}")
        records = [(r["clip_id"], [float(r[n]) for n in MIDLEVEL_NAMES]) for r in reader]
    targets = np.array([t for _, t in records], dtype=np.float64)
    lo, hi = targets.min(axis=0), targets.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    scaled = (targets - lo) / span
    pooled = []
    for clip_id, _ in records:
        pooled.append(pool_mfcc(mfcc(decode(_find_clip(audio_dir, clip_id)))))
        log.debug("pooled %s", clip_id)
    model = train_midlevel(list(zip(pooled, scaled)), ridge_lambda)
    model.target_min, model.target_max = lo, hi
    return model
