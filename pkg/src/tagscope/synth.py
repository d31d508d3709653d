"""Seeded synthetic corpus: DSP fixtures, chord files, planted-signal tables, a toy genre set.

Everything written here is a pure function of the seed, so two runs with the
same seed give byte-identical files (``manifest.json`` lists their sha256).
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .audio_io import CANONICAL_RATE, write_wav
from .harmony import NOTE_PC, ChordEvent, parse_chord_label, write_lab
from .midlevel import MIDLEVEL_NAMES
from .signal_features import FRAME_SIZE, HOP
from .tabular import FEATURE_GROUPS, FEATURE_NAMES, GROUPS, LabelMatrix, assemble, write_labels, write_store

SR = CANONICAL_RATE
FIXTURE_SECONDS = 4.0
CLICK_SECONDS = 12.0
N_PLANTED = 2000
N_TAGS = 8
POSITIVE_RATE = 0.3
GENRES = ("noisy", "rhythmic", "tonal")
CLIPS_PER_GENRE = 20
GENRE_SECONDS = 6.0
N_MIDLEVEL_CLIPS = 24
MIDLEVEL_SECONDS = 3.0

# planted logit weights per group: a tag draws this many columns from each group
PLANTED = {"signal": (3, 2.0), "midlevel": (1, 1.0), "harmonic": (2, 0.35)}
PLANTED_NOISE = 0.5

PROGRESSION = ("C", "F", "G:7", "C")
_PC_NAME = ("C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B")


def _t(seconds: float, sr: int = SR) -> np.ndarray:
    return np.arange(int(round(seconds * sr))) / sr


def sine(freq: float, seconds: float, amp: float = 0.5, sr: int = SR) -> np.ndarray:
    return amp * np.sin(2 * np.pi * freq * _t(seconds, sr))


def click_track(bpm: float, seconds: float, amp: float = 0.8, sr: int = SR, click_ms: float = 5.0) -> np.ndarray:
    """Decaying 2 kHz blips on every beat, first beat at t = 0."""
    x = np.zeros(int(round(seconds * sr)))
    n_click = int(click_ms * sr / 1000)
    blip = amp * np.sin(2 * np.pi * 2000 * np.arange(n_click) / sr) * np.exp(-np.arange(n_click) / (n_click / 4))
    period = 60.0 / bpm
    for k in range(int(seconds / period) + 1):
        i = int(round(k * period * sr))
        seg = x[i:i + n_click]
        seg += blip[:len(seg)]
    return x


def white_noise(rng, seconds: float, amp: float = 0.25, sr: int = SR) -> np.ndarray:
    return np.clip(amp * rng.standard_normal(int(round(seconds * sr))), -1.0, 1.0)


def impulse_train(period: int, seconds: float, amp: float = 0.5, sr: int = SR) -> np.ndarray:
    x = np.zeros(int(round(seconds * sr)))
    x[::period] = amp
    return x


def chord_events(labels, seconds_each: float = 1.0, start: float = 0.0) -> list:
    out = []
    for i, lab in enumerate(labels):
        root, quality = parse_chord_label(lab)
        out.append(ChordEvent(start + i * seconds_each, start + (i + 1) * seconds_each, root, quality, lab))
    return out


def transpose_label(label: str, k: int) -> str:
    root, _, rest = label.partition(":")
    name = _PC_NAME[(NOTE_PC[root[0]] + root.count("#") - root.count("b") + k) % 12]
    return name + (":" + rest if rest else "")


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


# DSP fixtures


def dsp_fixtures(out: Path, rng) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    bin_hz = SR / FRAME_SIZE
    truth = {}

    def put(name, x, sr=SR, **expect):
        write_wav(out / f"{name}.wav", x, sr)
        truth[name] = {"file": f"dsp/{name}.wav", "sample_rate": sr, **expect}

    put("sine_1000", sine(1000.0, FIXTURE_SECONDS), f0=1000.0, spectral_centroid=1000.0,
        centroid_tolerance=bin_hz, argmax_bin=int(round(1000 * FRAME_SIZE / SR)),
        zero_crossing_rate=2000.0, spectral_flux_max=1e-3, loudness_db=float(10 * np.log10(0.125)))
    put("sine_100", sine(100.0, FIXTURE_SECONDS), f0=100.0, zero_crossing_rate=200.0, zcr_rel_tolerance=0.005)
    stereo = np.stack([sine(440.0, 1.0, sr=44100), sine(440.0, 1.0, sr=44100)], axis=1)
    put("sine_440_stereo_44k", stereo, sr=44100, f0=440.0, decoded_rate=SR, decoded_samples=SR)
    for bpm in (90, 120):
        put(f"click_{bpm:03d}", click_track(bpm, CLICK_SECONDS), bpm=float(bpm), bpm_tolerance=2.0)
    put("white_noise", white_noise(rng, FIXTURE_SECONDS), spectral_rolloff=0.85 * SR / 2, rolloff_rel_tolerance=0.03)
    put("silence", np.zeros(int(FIXTURE_SECONDS * SR)), loudness_db=-120.0, zero_crossing_rate=0.0)
    put("impulses_1024", impulse_train(HOP, FIXTURE_SECONDS), spectral_decrease=0.0)
    return truth


# chord fixtures


def chord_fixtures(out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    truth = {}
    for k in range(12):
        labels = [transpose_label(lab, k) for lab in PROGRESSION]
        name = f"cfg7c_t{k:02d}"
        write_lab(out / f"{name}.lab", chord_events(labels))
        truth[name] = {
            "file": f"chords/{name}.lab",
            "labels": labels,
            "key": f"{_PC_NAME[k]}:maj",
            "functions": ["ton", "sub", "glob", "ton"],
            "dominants_ratio": 0.25,
            "subdominants_ratio": 0.25,
        }
    return truth


# planted-signal table


def planted_weights(rng) -> np.ndarray:
    """(62, 8) logit weights: strong signal, moderate mid-level, weak harmonic columns."""
    groups = np.array(FEATURE_GROUPS)
    W = np.zeros((len(FEATURE_NAMES), N_TAGS))
    for j in range(N_TAGS):
        for group, (count, scale) in PLANTED.items():
            cols = rng.choice(np.flatnonzero(groups == group), count, replace=False)
            W[cols, j] = scale * rng.choice([-1.0, 1.0], count)
    return W


def planted_dataset(rng, n: int = N_PLANTED):
    """(ids, raw X, Y, W, column offsets, column scales) with Y planted through W on standardized columns."""
    d = len(FEATURE_NAMES)
    W = planted_weights(rng)
    Z = rng.standard_normal((n, d))
    # give columns arbitrary units so that standardisation matters
    loc = np.round(rng.uniform(-5, 5, d), 3)
    scale = np.round(np.exp(rng.uniform(-2, 2, d)), 3)
    logits = Z @ W + PLANTED_NOISE * rng.standard_normal((n, N_TAGS))
    cut = np.quantile(logits, 1 - POSITIVE_RATE, axis=0)
    Y = (logits > cut).astype(np.int8)
    ids = [f"p{i:04d}" for i in range(n)]
    return ids, loc + scale * Z, Y, W, loc, scale


def planted_files(out: Path, rng) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    ids, X, Y, W, loc, scale = planted_dataset(rng)
    nh, nm = FEATURE_GROUPS.count("harmonic"), FEATURE_GROUPS.count("midlevel")
    vectors = [assemble(x[:nh], x[nh:nh + nm], x[nh + nm:], tid) for tid, x in zip(ids, X)]
    write_store(out / "features.csv", vectors, config={"source": "planted", "n": len(ids)})
    tags = [f"tag{j}" for j in range(N_TAGS)]
    write_labels(out / "labels.csv", LabelMatrix(ids, tags, Y, "multilabel"))
    shuffled = Y[rng.permutation(len(ids))]
    write_labels(out / "labels_shuffled.csv", LabelMatrix(ids, tags, shuffled, "multilabel"))
    return {
        "store": "planted/features.csv",
        "labels": "planted/labels.csv",
        "shuffled_labels": "planted/labels_shuffled.csv",
        "n_rows": len(ids),
        "tags": tags,
        "noise": PLANTED_NOISE,
        "positive_rate": POSITIVE_RATE,
        "weights": {t: {FEATURE_NAMES[i]: float(W[i, j]) for i in np.flatnonzero(W[:, j])} for j, t in enumerate(tags)},
        "column_loc": dict(zip(FEATURE_NAMES, map(float, loc))),
        "column_scale": dict(zip(FEATURE_NAMES, map(float, scale))),
    }


# 3-genre audio corpus


def _diatonic_progression(rng, n: int) -> tuple[list, str]:
    tonic = int(rng.integers(12))
    degrees = [(0, ""), (5, ""), (7, ":7"), (9, ":min"), (2, ":min")]
    picks = [0] + list(rng.integers(0, len(degrees), n - 2)) + [0]
    labels = [_PC_NAME[(tonic + degrees[p][0]) % 12] + degrees[p][1] for p in picks]
    return labels, f"{_PC_NAME[tonic]}:maj"


def genre_clip(genre: str, rng, seconds: float = GENRE_SECONDS):
    """(samples, chord labels or None) for one clip of a synthetic genre."""
    t = _t(seconds)
    if genre == "tonal":
        labels, _ = _diatonic_progression(rng, 6)
        seg = seconds / len(labels)
        x = np.zeros_like(t)
        for i, lab in enumerate(labels):
            root, quality = parse_chord_label(lab)
            f = 220.0 * 2 ** (root / 12)
            third = 3 if quality == "min" else 4
            on = (t >= i * seg) & (t < (i + 1) * seg)
            for semis in (0, third, 7):
                x[on] += 0.15 * np.sin(2 * np.pi * f * 2 ** (semis / 12) * t[on])
        x *= 0.8 + 0.2 * np.sin(2 * np.pi * rng.uniform(0.1, 0.5) * t)
        return x + 0.002 * rng.standard_normal(len(t)), labels
    if genre == "rhythmic":
        x = click_track(float(rng.uniform(80, 150)), seconds, amp=float(rng.uniform(0.5, 0.9)))
        return x + 0.003 * rng.standard_normal(len(t)), None
    if genre == "noisy":
        x = white_noise(rng, seconds, amp=float(rng.uniform(0.1, 0.3)))
        if rng.random() < 0.5:  # some brown-ish noise
            x = np.cumsum(x)
            x = 0.3 * x / (np.abs(x).max() + 1e-12)
        return x, None
    raise ValueError(f"unknown genre {genre!r}")


def genre_corpus(out: Path, rng) -> dict:
    audio = out / "audio"
    labs = out / "chords"
    for d in [audio / g for g in GENRES] + [labs]:
        d.mkdir(parents=True, exist_ok=True)
    rows = []
    for g in GENRES:
        for i in range(CLIPS_PER_GENRE):
            tid = f"{g}.{i:05d}"
            x, labels = genre_clip(g, rng)
            write_wav(audio / g / f"{tid}.wav", x, SR)
            if labels is not None:
                write_lab(labs / f"{tid}.lab", chord_events(labels, GENRE_SECONDS / len(labels)))
                rows.append((tid, f"chords/{tid}.lab", "", ""))
    with open(out / "chords.tsv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["track_id", "chords", "key", "vocal"])
        w.writerows(rows)
    return {
        "audio_dir": "genres/audio",
        "chords_manifest": "genres/chords.tsv",
        "genres": list(GENRES),
        "clips_per_genre": CLIPS_PER_GENRE,
        "seconds": GENRE_SECONDS,
    }


# mid-level training clips


def midlevel_corpus(out: Path, rng) -> dict:
    """Short clips mixing tone, clicks and noise; targets are noisy linear maps of the mix."""
    clips = out / "clips"
    clips.mkdir(parents=True, exist_ok=True)
    mix_to_target = np.round(rng.uniform(-3, 3, (3, len(MIDLEVEL_NAMES))), 3)
    rows = []
    for i in range(N_MIDLEVEL_CLIPS):
        mix = rng.dirichlet(np.ones(3))
        x = (mix[0] * sine(float(rng.uniform(200, 800)), MIDLEVEL_SECONDS)
             + mix[1] * click_track(float(rng.uniform(80, 150)), MIDLEVEL_SECONDS)
             + mix[2] * white_noise(rng, MIDLEVEL_SECONDS, 0.3))
        cid = f"m{i:03d}"
        write_wav(clips / f"{cid}.wav", x, SR)
        target = 5.0 + mix @ mix_to_target + 0.1 * rng.standard_normal(len(MIDLEVEL_NAMES))
        rows.append([cid] + [f"{v:.4f}" for v in target])
    with open(out / "annotations.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["clip_id"] + MIDLEVEL_NAMES)
        w.writerows(rows)
    return {"clips": "midlevel/clips", "annotations": "midlevel/annotations.csv",
            "mix_to_target": mix_to_target.tolist()}


def generate(out_dir, seed: int = 42) -> dict:
    """Write the full corpus under ``out_dir``; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # one child stream per part so adding a fixture never shifts another part's draws
    streams = dict(zip(("dsp", "planted", "genres", "midlevel"), np.random.SeedSequence(seed).spawn(4)))
    truth = {
        "seed": seed,
        "groups": list(GROUPS),
        "dsp": dsp_fixtures(out / "dsp", np.random.default_rng(streams["dsp"])),
        "chords": chord_fixtures(out / "chords"),
        "planted": planted_files(out / "planted", np.random.default_rng(streams["planted"])),
        "genres": genre_corpus(out / "genres", np.random.default_rng(streams["genres"])),
        "midlevel": midlevel_corpus(out / "midlevel", np.random.default_rng(streams["midlevel"])),
    }
    _dump(out / "truth.json", truth)
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "seed": seed,
        "fixtures": sorted(truth["dsp"]) + sorted(truth["chords"]),
        "files": {p.relative_to(out).as_posix(): _sha(p) for p in files},
    }
    _dump(out / "manifest.json", manifest)
    return manifest


def corpus_checksum(manifest: dict) -> str:
    return hashlib.sha256(json.dumps(manifest["files"], sort_keys=True).encode()).hexdigest()
