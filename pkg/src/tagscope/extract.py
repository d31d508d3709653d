"""Audio + chord annotations -> 62-dim feature rows."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .audio_io import CANONICAL_RATE, decode
from .errors import DataError, DuplicateTrackId, TagscopeError
from .harmony import harmonic_vector, parse_key, read_lab
from .midlevel import MidLevelModel, neutral_model, predict_midlevel
from .signal_features import mfcc, signal_descriptors
from .tabular import AUDIO_EXTENSIONS, FeatureVector, assemble

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChordEntry:
    chords: str | None = None  # resolved .lab path
    key: str | None = None
    vocal: float | None = None


def find_audio(audio_dir) -> list:
    """(track_id, path) for every audio file below ``audio_dir``, sorted by id."""
    root = Path(audio_dir)
    if not root.is_dir():
        raise DataError(f"{root}: not a directory")
    found = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.suffix.lower() in AUDIO_EXTENSIONS:
            if p.stem in found:
                raise DuplicateTrackId(f"{p.stem} appears more than once under {root}")
            found[p.stem] = p
    return sorted(found.items())


def read_chords_manifest(path) -> dict:
    """TSV ``track_id  chords  [key]  [vocal]``; chord paths resolve against the file's folder."""
    path = Path(path)
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if not reader.fieldnames or "track_id" not in reader.fieldnames:
            raise DataError(f"{path}: header must include track_id")
        for row in reader:
            tid = (row.get("track_id") or "").strip()
            if not tid:
                continue
            lab = (row.get("chords") or "").strip()
            vocal = (row.get("vocal") or "").strip()
            out[tid] = ChordEntry(
                str(path.parent / lab) if lab else None,
                (row.get("key") or "").strip() or None,
                float(vocal) if vocal else None,
            )
    return out


def extract_track(track_id: str, audio_path, entry: ChordEntry | None = None,
                  midlevel: MidLevelModel | None = None) -> FeatureVector:
    entry = entry or ChordEntry()
    clip = decode(audio_path, CANONICAL_RATE)
    chords = None
    if entry.chords is not None:
        if Path(entry.chords).exists():
            chords = read_lab(entry.chords)
        else:
            log.warning("%s: chord file %s not found, harmonic block is zero", track_id, entry.chords)
    key = parse_key(entry.key) if entry.key else None
    x_h = harmonic_vector(chords, key)
    x_m = predict_midlevel(midlevel or neutral_model(), mfcc(clip))
    x_s = signal_descriptors(clip, chords, entry.vocal)
    missing = not chords or not any(c.root is not None for c in chords)
    return assemble(x_h, x_m, x_s, track_id, missing_chords=missing)


def _work(args):
    track_id, path, entry, model_dict = args
    model = MidLevelModel.from_dict(model_dict) if model_dict else None
    try:
        return track_id, extract_track(track_id, path, entry, model), None
    except (TagscopeError, OSError, ValueError) as exc:
        return track_id, None, f"{type(exc).__name__}: {exc}"


def extract_corpus(tracks, chords: dict | None = None, midlevel: MidLevelModel | None = None,
                   jobs: int = 1):
    """Features for every (track_id, path); failures are logged and skipped.

    Returns (vectors sorted by id, {track_id: error}). Worker count never
    changes the output, only its speed.
    """
    chords = chords or {}
    model_dict = midlevel.to_dict() if midlevel is not None else None
    tasks = [(tid, str(p), chords.get(tid), model_dict) for tid, p in tracks]
    jobs = max(1, min(int(jobs), len(tasks) or 1))
    if jobs == 1:
        results = list(map(_work, tasks))
    else:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_work, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    vectors, failed = [], {}
    for tid, vec, err in results:
        if err is None:
            vectors.append(vec)
        else:
            log.warning("skipping %s: %s", tid, err)
            failed[tid] = err
    return sorted(vectors, key=lambda v: v.track_id), failed


def default_jobs() -> int:
    raw = os.environ.get("TAGSCOPE_JOBS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring TAGSCOPE_JOBS=%r (not an integer)", raw)
        return 1
