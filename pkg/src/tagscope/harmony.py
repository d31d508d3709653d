"""Chord-label parsing, key estimation, functional labelling and the 32-dim harmonic vector."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, NoPitchedChords, ParseError

NOTE_PC = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
NO_CHORD_LABELS = ("N", "X")
QUALITIES = ("maj", "min", "dim", "aug", "maj7", "min7", "dom7", "sus2", "sus4", "other")

_QUALITY_TOKENS = {
    "maj": "maj",
    "min": "min",
    "dim": "dim",
    "aug": "aug",
    "maj7": "maj7",
    "min7": "min7",
    "7": "dom7",
    "sus2": "sus2",
    "sus4": "sus4",
    # remaining standard shorthands parse but carry no functional weight
    "dim7": "other",
    "hdim7": "other",
    "minmaj7": "other",
    "maj6": "other",
    "min6": "other",
    "9": "other",
    "maj9": "other",
    "min9": "other",
    "11": "other",
    "13": "other",
    "5": "other",
    "1": "other",
    "": "other",  # bare interval list, e.g. "C:(1,3,5)"
}


@dataclass(frozen=True)
class ChordEvent:
    start: float
    end: float
    root: int | None
    quality: str | None
    raw_label: str = ""

    def transposed(self, k: int) -> "ChordEvent":
        if self.root is None:
            return self
        return ChordEvent(self.start, self.end, (self.root + k) % 12, self.quality, self.raw_label)


@dataclass(frozen=True)
class KeyEstimate:
    tonic: int
    mode: str  # "major" | "minor"
    confidence: float = 1.0


class HarmonicFunction(str, enum.Enum):
    TON = "ton"
    DOM = "dom"
    SUB = "sub"
    GLOB = "glob"
    OTHER = "other"


def _offset(label: str, i: int) -> int:
    return len(label[:i].encode("utf-8"))


def parse_chord_label(label: str):
    """Parse ``Root[:quality][(extensions)][/bass]``; returns (root, quality).

    The no-chord symbols ``N`` and ``X`` return ``(None, None)``.
    """
    if not label:
        raise ParseError("empty chord label", 0)
    if label in NO_CHORD_LABELS:
        return None, None
    letter = label[0]
    if letter not in NOTE_PC:
        raise ParseError(f"unknown note name {letter!r}", 0)
    root = NOTE_PC[letter]
    i = 1
    while i < len(label) and label[i] in "#b":
        root += 1 if label[i] == "#" else -1
        i += 1
    root %= 12
    if i == len(label) or label[i] == "/":
        return root, "maj"
    if label[i] != ":":
        raise ParseError(f"expected ':' after root, got {label[i]!r}", _offset(label, i))
    i += 1
    j = i
    while j < len(label) and label[j] not in "/(":
        j += 1
    token = label[i:j]
    if token not in _QUALITY_TOKENS:
        raise ParseError(f"unknown chord quality {token!r}", _offset(label, i))
    return root, _QUALITY_TOKENS[token]


def parse_key(text: str) -> KeyEstimate:
    """Key override syntax, e.g. ``C:maj`` or ``F#:min``."""
    root, quality = parse_chord_label(text.strip())
    if root is None or quality not in ("maj", "min"):
        raise ParseError(f"key must be <note>:maj or <note>:min, got {text!r}", 0)
    return KeyEstimate(root, "major" if quality == "maj" else "minor", 1.0)


def read_lab(path) -> list[ChordEvent]:
    """Read a three-column ``start end label`` chord annotation file."""
    events = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 3:
            raise DataError(f"{path}:{lineno}: expected 'start end label'")
        try:
            start, end = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad time value") from exc
        if not end > start:
            continue
        root, quality = parse_chord_label(parts[2])
        events.append(ChordEvent(start, end, root, quality, parts[2]))
    return events


def write_lab(path, events) -> None:
    Path(path).write_text(
        "".join(f"{e.start:.6f} {e.end:.6f} {e.raw_label}\n" for e in events)
    )


# key-relative templates: degree -> qualities that fit the diatonic chord on it
_TEMPLATES = {
    "major": {
        0: {"maj", "maj7"},
        2: {"min", "min7"},
        4: {"min", "min7"},
        5: {"maj", "maj7"},
        7: {"maj", "dom7"},
        9: {"min", "min7"},
        11: {"dim"},
    },
    "minor": {
        0: {"min", "min7"},
        2: {"dim"},
        3: {"maj", "maj7"},
        5: {"min", "min7"},
        7: {"maj", "dom7", "min", "min7"},
        8: {"maj", "maj7"},
        10: {"maj", "dom7"},
        11: {"dim"},
    },
}
_TONIC_BONUS = 0.5


def key_score(chords, tonic: int, mode: str) -> float:
    template = _TEMPLATES[mode]
    score = 0.0
    for c in chords:
        if c.root is None:
            continue
        deg = (c.root - tonic) % 12
        fits = template.get(deg)
        if fits is None:
            continue
        w = c.end - c.start
        if c.quality in fits:
            score += w * (1.0 + (_TONIC_BONUS if deg == 0 else 0.0))
        else:
            score += 0.5 * w
    return score


def estimate_key(chords) -> KeyEstimate:
    pitched = [c for c in chords if c.root is not None]
    if not pitched:
        raise NoPitchedChords("no pitched chords to estimate a key from")
    best = None
    for tonic in range(12):
        for mode in ("major", "minor"):
            s = key_score(pitched, tonic, mode)
            if best is None or s > best[0]:
                best = (s, tonic, mode)
    total = sum(c.end - c.start for c in pitched) * (1.0 + _TONIC_BONUS)
    confidence = min(1.0, best[0] / total) if total > 0 else 0.0
    return KeyEstimate(best[1], best[2], confidence)


def _collapse(chords):
    out = []
    for c in chords:
        if c.root is None:
            continue
        if out and (out[-1].root, out[-1].quality) == (c.root, c.quality):
            continue
        out.append(c)
    return out


def functional_labels(chords, key: KeyEstimate) -> list[HarmonicFunction]:
    dom_degrees = {7, 11} if key.mode == "major" else {7, 10, 11}
    sub_degrees = {2, 5}
    labels: list[HarmonicFunction] = []
    for i, c in enumerate(_collapse(chords)):
        deg = (c.root - key.tonic) % 12
        if deg in dom_degrees:
            f = HarmonicFunction.GLOB if c.quality in ("maj", "dom7") else HarmonicFunction.DOM
        elif deg in sub_degrees:
            f = HarmonicFunction.SUB
        elif labels and labels[-1] in (HarmonicFunction.DOM, HarmonicFunction.GLOB):
            f = HarmonicFunction.TON
        elif i == 0 and deg == 0:
            f = HarmonicFunction.TON
        else:
            f = HarmonicFunction.OTHER
        labels.append(f)
    return labels


_SYMBOLS = ("ton", "dom", "sub")
_EXCLUDED_TRIGRAMS = {
    ("ton", "ton", "ton"),
    ("dom", "dom", "dom"),
    ("sub", "sub", "sub"),
    ("dom", "dom", "ton"),
    ("sub", "sub", "ton"),
    ("ton", "ton", "dom"),
}
NGRAM_VOCAB: tuple[tuple[str, ...], ...] = tuple(itertools.product(_SYMBOLS, repeat=2)) + tuple(
    g for g in itertools.product(_SYMBOLS, repeat=3) if g not in _EXCLUDED_TRIGRAMS
)
HARMONIC_FEATURE_NAMES = ["dominants_ratio", "subdominants_ratio"] + [
    "ngram_" + "_".join(g) for g in NGRAM_VOCAB
]


@dataclass
class HarmonicFeatures:
    dominants_ratio: float = 0.0
    subdominants_ratio: float = 0.0
    ngram_ratios: dict = field(default_factory=lambda: {g: 0.0 for g in NGRAM_VOCAB})

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.dominants_ratio, self.subdominants_ratio]
            + [self.ngram_ratios[g] for g in NGRAM_VOCAB],
            dtype=np.float64,
        )


def _matches(pattern, gram) -> bool:
    # a glob is a dominant for vocabulary purposes
    return all(p == g or (p == "dom" and g == "glob") for p, g in zip(pattern, gram))


def harmonic_features(functions) -> HarmonicFeatures:
    n = len(functions)
    if n == 0:
        return HarmonicFeatures()
    n_dom = sum(f in (HarmonicFunction.DOM, HarmonicFunction.GLOB) for f in functions)
    n_sub = sum(f == HarmonicFunction.SUB for f in functions)
    stream = [HarmonicFunction(f).value for f in functions if f != HarmonicFunction.OTHER]
    grams = {
        2: [tuple(stream[i : i + 2]) for i in range(len(stream) - 1)],
        3: [tuple(stream[i : i + 3]) for i in range(len(stream) - 2)],
    }
    ratios = {}
    for pattern in NGRAM_VOCAB:
        pool = grams[len(pattern)]
        hits = sum(_matches(pattern, g) for g in pool)
        ratios[pattern] = hits / len(pool) if pool else 0.0
    return HarmonicFeatures(n_dom / n, n_sub / n, ratios)


def harmonic_vector(chords, key: KeyEstimate | None = None) -> np.ndarray:
    """Chord events to the 32-dim vector; zeros when nothing is pitched."""
    if not any(c.root is not None for c in chords or ()):
        return np.zeros(len(HARMONIC_FEATURE_NAMES))
    if key is None:
        key = estimate_key(chords)
    return harmonic_features(functional_labels(chords, key)).as_array()
