"""Feature assembly, standardisation, the CSV feature store and dataset label loaders."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ClassTooSmall,
    DataError,
    DuplicateTrackId,
    EmptyGenreDir,
    MalformedRow,
)
from .harmony import HARMONIC_FEATURE_NAMES
from .midlevel import MIDLEVEL_NAMES
from .signal_features import SIGNAL_FEATURE_NAMES

log = logging.getLogger(__name__)

FEATURE_NAMES = list(HARMONIC_FEATURE_NAMES) + list(MIDLEVEL_NAMES) + list(SIGNAL_FEATURE_NAMES)
GROUPS = ("harmonic", "midlevel", "signal")
FEATURE_GROUPS = (
    ["harmonic"] * len(HARMONIC_FEATURE_NAMES)
    + ["midlevel"] * len(MIDLEVEL_NAMES)
    + ["signal"] * len(SIGNAL_FEATURE_NAMES)
)
SCALER_EPS = 1e-12
AUDIO_EXTENSIONS = (".au", ".wav", ".snd")
JAMENDO_FULL_SIZE = 18486


@dataclass
class FeatureVector:
    track_id: str
    values: np.ndarray
    names: list = field(default_factory=lambda: list(FEATURE_NAMES))
    missing_chords: bool = False


def _part(x, dim, what):
    v = x.as_array() if hasattr(x, "as_array") else np.asarray(x, dtype=np.float64)
    if v.shape != (dim,):
        raise DataError(f"{what} block has shape {v.shape}, expected ({dim},)")
    return v


def assemble(x_h, x_m, x_s, track_id: str, missing_chords: bool = False) -> FeatureVector:
    """Concatenate harmonic, mid-level and signal blocks in canonical order."""
    values = np.concatenate(
        [
            _part(x_h, len(HARMONIC_FEATURE_NAMES), "harmonic"),
            _part(x_m, len(MIDLEVEL_NAMES), "midlevel"),
            _part(x_s, len(SIGNAL_FEATURE_NAMES), "signal"),
        ]
    )
    if not np.all(np.isfinite(values)):
        raise DataError(f"{track_id}: non-finite feature values")
    if missing_chords:
        log.debug("%s: no chord annotation, harmonic block is zero", track_id)
    return FeatureVector(track_id, values, missing_chords=missing_chords)


@dataclass
class StandardScaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "StandardScaler":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1:
            raise DataError("scaler needs a non-empty 2-D training matrix")
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        # exactly constant columns get std 0 so they map to 0, not rounding noise / eps
        const = X.max(axis=0) == X.min(axis=0)
        mean[const] = X[0, const]
        std[const] = 0.0
        return cls(mean, std)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return (X - self.mean) / np.maximum(self.std, SCALER_EPS)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d) -> "StandardScaler":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def fit_scaler(train) -> StandardScaler:
    if isinstance(train, (list, tuple)) and train and isinstance(train[0], FeatureVector):
        train = np.array([v.values for v in train])
    return StandardScaler.fit(train)


def transform(scaler: StandardScaler, v):
    if isinstance(v, FeatureVector):
        return FeatureVector(v.track_id, scaler.transform(v.values[None, :])[0], list(v.names))
    return scaler.transform(v)


# feature store


@dataclass
class FeatureStore:
    track_ids: list
    X: np.ndarray
    names: list = field(default_factory=lambda: list(FEATURE_NAMES))
    groups: list = field(default_factory=lambda: list(FEATURE_GROUPS))
    manifest: dict = field(default_factory=dict)

    def rows(self, ids) -> np.ndarray:
        index = {t: i for i, t in enumerate(self.track_ids)}
        try:
            return self.X[[index[t] for t in ids]]
        except KeyError as exc:
            raise DataError(f"track {exc.args[0]!r} not in feature store") from exc

    def group_mask(self, groups) -> np.ndarray:
        return np.array([g in groups for g in self.groups])


def manifest_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".manifest.json")


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def write_store(csv_path, vectors, config: dict | None = None, extra: dict | None = None) -> None:
    """Write rows sorted by track id plus the sidecar JSON manifest."""
    vectors = sorted(vectors, key=lambda v: v.track_id)
    names = vectors[0].names if vectors else list(FEATURE_NAMES)
    groups = list(FEATURE_GROUPS) if names == FEATURE_NAMES else (extra or {}).get("groups")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["track_id"] + list(names))
        for v in vectors:
            w.writerow([v.track_id] + [repr(float(x)) for x in v.values])
    manifest = {
        "feature_names": list(names),
        "groups": dict(zip(names, groups)),
        "scaler": None,
        "config": config or {},
        "config_hash": config_hash(config or {}),
        "n_tracks": len(vectors),
        "missing_chords": sorted(v.track_id for v in vectors if v.missing_chords),
    }
    manifest.update({k: v for k, v in (extra or {}).items() if k != "groups"})
    manifest_path(csv_path).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def read_store(csv_path) -> FeatureStore:
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "track_id":
            raise DataError(f"{csv_path}: header must start with track_id")
        ids, rows = [], []
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(header):
                raise MalformedRow(f"{csv_path}: expected {len(header)} fields", lineno)
            ids.append(row[0])
            rows.append([float(x) for x in row[1:]])
    if len(set(ids)) != len(ids):
        raise DuplicateTrackId(f"{csv_path}: duplicate track ids")
    names = header[1:]
    mpath = manifest_path(csv_path)
    manifest = json.loads(mpath.read_text()) if mpath.exists() else {}
    group_map = manifest.get("groups") or dict(zip(FEATURE_NAMES, FEATURE_GROUPS))
    missing = [n for n in names if n not in group_map]
    if missing:
        raise DataError(f"{csv_path}: no group tag for features {missing[:3]}")
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    if not np.all(np.isfinite(X)):
        raise DataError(f"{csv_path}: non-finite values in feature store")
    return FeatureStore(ids, X, names, [group_map[n] for n in names], manifest)


# labels


@dataclass
class LabelMatrix:
    track_ids: list
    tag_names: list
    Y: np.ndarray
    task_kind: str  # "multilabel" | "multiclass"

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=np.int8).reshape(len(self.track_ids), len(self.tag_names))
        if self.task_kind not in ("multilabel", "multiclass"):
            raise DataError(f"unknown task kind {self.task_kind!r}")
        if self.task_kind == "multiclass" and len(self.track_ids) and not np.all(self.Y.sum(axis=1) == 1):
            raise DataError("multiclass label rows must each have exactly one class")

    def rows(self, ids) -> np.ndarray:
        index = {t: i for i, t in enumerate(self.track_ids)}
        try:
            return self.Y[[index[t] for t in ids]]
        except KeyError as exc:
            raise DataError(f"no labels for track {exc.args[0]!r}") from exc

    def class_index(self) -> np.ndarray:
        return self.Y.argmax(axis=1)


def write_labels(path, labels: LabelMatrix) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# task_kind={labels.task_kind}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["track_id"] + list(labels.tag_names))
        for tid, row in zip(labels.track_ids, labels.Y):
            w.writerow([tid] + [int(v) for v in row])


def read_labels(path, task_kind: str | None = None) -> LabelMatrix:
    """Indicator CSV (``track_id,<tags>``, optional ``# task_kind=...`` line) or a Jamendo TSV."""
    path = Path(path)
    if path.suffix == ".tsv":
        _, labels = load_jamendo(path)
        return labels
    lines = path.read_text().splitlines()
    declared = None
    if lines and lines[0].startswith("#"):
        key, _, value = lines[0][1:].strip().partition("=")
        if key.strip() == "task_kind":
            declared = value.strip()
        lines = lines[1:]
    reader = csv.reader(lines)
    header = next(reader, None)
    if not header or header[0] != "track_id":
        raise DataError(f"{path}: header must start with track_id")
    ids, rows = [], []
    for lineno, row in enumerate(reader, 2 + (declared is not None)):
        if len(row) != len(header):
            raise MalformedRow(f"{path}: expected {len(header)} fields", lineno)
        try:
            rows.append([int(v) for v in row[1:]])
        except ValueError as exc:
            raise MalformedRow(f"{path}: non-integer indicator", lineno) from exc
        ids.append(row[0])
    if len(set(ids)) != len(ids):
        raise DuplicateTrackId(f"{path}: duplicate track ids")
    kind = task_kind or declared or "multilabel"
    return LabelMatrix(ids, header[1:], np.array(rows).reshape(len(ids), len(header) - 1), kind)


def load_gtzan(root):
    """``root/<genre>/<files>`` -> ([(track_id, path)], multiclass LabelMatrix)."""
    root = Path(root)
    genres = sorted(p.name for p in root.iterdir() if p.is_dir()) if root.is_dir() else []
    if not genres:
        raise EmptyGenreDir(f"{root}: no genre directories")
    tracks, classes, seen = [], [], set()
    for gi, genre in enumerate(genres):
        files = sorted(p for p in (root / genre).iterdir() if p.suffix.lower() in AUDIO_EXTENSIONS)
        if not files:
            raise EmptyGenreDir(f"{root / genre}: no audio files")
        for f in files:
            tid = f.stem
            if tid in seen:
                raise DuplicateTrackId(f"{tid} appears more than once under {root}")
            seen.add(tid)
            tracks.append((tid, f))
            classes.append(gi)
    Y = np.zeros((len(tracks), len(genres)), dtype=np.int8)
    Y[np.arange(len(tracks)), classes] = 1
    log.info("GTZAN: %d tracks in %d genres (%s)", len(tracks), len(genres),
             ", ".join(f"{g}={int(n)}" for g, n in zip(genres, Y.sum(axis=0))))
    return tracks, LabelMatrix([t for t, _ in tracks], genres, Y, "multiclass")


def load_jamendo(tsv):
    """MTG-Jamendo style TSV -> ([(track_id, path)], multilabel LabelMatrix).

    Accepts the published layout (header ``TRACK_ID ... PATH DURATION TAGS``)
    and the bare layout ``track_id<TAB>path<TAB>tag<TAB>tag...``.
    """
    lines = Path(tsv).read_text().splitlines()
    start, id_col, path_col, tag_col = 0, 0, 1, 2
    if lines and lines[0].split("\t")[0].upper() == "TRACK_ID":
        header = [h.strip().upper() for h in lines[0].split("\t")]
        if "PATH" not in header or "TAGS" not in header:
            raise MalformedRow(f"{tsv}: header lacks PATH or TAGS", 1)
        start, path_col, tag_col = 1, header.index("PATH"), header.index("TAGS")
    tracks, tag_lists, seen = [], [], set()
    for lineno, line in enumerate(lines[start:], start + 1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) <= path_col or not cols[path_col].strip():
            raise MalformedRow(f"{tsv}: missing path column", lineno)
        tid = cols[id_col].strip()
        if tid in seen:
            raise DuplicateTrackId(f"{tsv}: {tid} listed twice")
        seen.add(tid)
        tracks.append((tid, cols[path_col].strip()))
        tag_lists.append({t.strip() for t in cols[tag_col:] if t.strip()})
    vocab = sorted(set().union(*tag_lists)) if tag_lists else []
    col = {t: i for i, t in enumerate(vocab)}
    Y = np.zeros((len(tracks), len(vocab)), dtype=np.int8)
    for i, tags in enumerate(tag_lists):
        Y[i, [col[t] for t in tags]] = 1
    log.info("Jamendo: %d tracks, %d tags%s", len(tracks), len(vocab),
             " (full published set)" if len(tracks) == JAMENDO_FULL_SIZE else "")
    return tracks, LabelMatrix([t for t, _ in tracks], vocab, Y, "multilabel")


# splits


@dataclass
class SplitSpec:
    train: list
    validation: list
    test: list
    seed: int

    def to_dict(self) -> dict:
        return {"seed": self.seed, "train": self.train, "validation": self.validation, "test": self.test}

    @classmethod
    def from_dict(cls, d) -> "SplitSpec":
        return cls(list(d["train"]), list(d["validation"]), list(d["test"]), int(d["seed"]))

    def part(self, name: str) -> list:
        return {"train": self.train, "validation": self.validation, "test": self.test}[name]


def _largest_remainder(n: int, fractions) -> np.ndarray:
    raw = np.asarray(fractions) * n
    counts = np.floor(raw + 1e-9).astype(int)
    order = np.argsort(-(raw - counts), kind="stable")
    for i in order[: n - counts.sum()]:
        counts[i] += 1
    return counts


def split(ids, labels: LabelMatrix, fractions=(0.8, 0.1, 0.1), seed: int = 42) -> SplitSpec:
    ids = list(ids)
    fractions = np.asarray(fractions, dtype=np.float64)
    if len(fractions) != 3 or abs(fractions.sum() - 1.0) > 1e-9 or np.any(fractions < 0):
        raise ValueError("fractions must be three non-negative numbers summing to 1")
    Y = labels.rows(ids)
    rng = np.random.default_rng(seed)
    assign = np.full(len(ids), -1)
    if labels.task_kind == "multiclass":
        parts = int(np.count_nonzero(fractions))
        cls = Y.argmax(axis=1)
        for c in range(Y.shape[1]):
            members = np.flatnonzero(cls == c)
            if len(members) == 0:
                continue
            if len(members) < parts:
                raise ClassTooSmall(f"class {labels.tag_names[c]!r} has {len(members)} members for {parts} parts")
            members = members[rng.permutation(len(members))]
            counts = _largest_remainder(len(members), fractions)
            assign[members] = np.repeat(np.arange(3), counts)
    else:
        assign = _iterative_stratify(Y, fractions, rng)
    return SplitSpec(*[[ids[i] for i in np.flatnonzero(assign == p)] for p in range(3)], seed=seed)


def _iterative_stratify(Y: np.ndarray, fractions: np.ndarray, rng) -> np.ndarray:
    """Greedy rarest-label-first balancing of a multilabel indicator matrix."""
    n = Y.shape[0]
    order = rng.permutation(n)
    want_total = fractions * n
    want_label = fractions[:, None] * Y.sum(axis=0)[None, :].astype(np.float64)
    assign = np.full(n, -1)
    pending = Y[order].astype(bool)
    while True:
        open_rows = assign[order] < 0
        counts = (pending & open_rows[:, None]).sum(axis=0)
        live = np.flatnonzero(counts > 0)
        if len(live) == 0:
            break
        j = live[np.argmin(counts[live])]
        for k in np.flatnonzero(pending[:, j] & open_rows):
            r = order[k]
            best = np.flatnonzero(want_label[:, j] == want_label[:, j].max())
            if len(best) > 1:
                best = best[np.flatnonzero(want_total[best] == want_total[best].max())]
            p = best[0]
            assign[r] = p
            want_label[p] -= Y[r]
            want_total[p] -= 1
    for r in order:
        if assign[r] < 0:
            p = int(np.argmax(want_total))
            assign[r] = p
            want_total[p] -= 1
    return assign
