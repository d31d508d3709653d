"""Frame-level spectral analysis, the 23 scalar signal descriptors, tempo and MFCC."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from .audio_io import AudioClip
from .errors import TooShort

FRAME_SIZE = 2048
HOP = 1024
# onset/tempo analysis runs on a finer grid than the descriptor frames
ONSET_FRAME = 1024
ONSET_HOP = 256
N_MFCC = 40
N_MELS = 64
MFCC_SECONDS = 15.0
MEL_POWER_FLOOR = 1e-10
LOUDNESS_FLOOR_DB = -120.0
ROLLOFF_FRACTION = 0.85
PEAK_THRESHOLD = 0.005
SALIENCE_LAG_HZ = (100.0, 5000.0)
BANDS_HZ = {
    "energy_low": (20.0, 150.0),
    "energy_mid_low": (150.0, 800.0),
    "energy_mid_high": (800.0, 4000.0),
    "energy_high": (4000.0, 11025.0),
}
TEMPO_RANGE = (60.0, 180.0)
MIN_TEMPO_SECONDS = 3.0
BEAT_WINDOW_S = 0.05


@dataclass
class Spectrogram:
    frames: np.ndarray
    frame_size: int
    hop: int
    sample_rate: int

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.frame_size

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.frames.shape[1]) * self.bin_hz


@dataclass
class SignalFeatures:
    danceability: float
    loudness_db: float
    chords_changes_rate: float
    dynamic_complexity_db: float
    zero_crossing_rate: float
    chords_number_rate: float
    pitch_salience: float
    spectral_centroid: float
    spectral_complexity: float
    spectral_decrease: float
    energy_high: float
    energy_low: float
    energy_mid_high: float
    energy_mid_low: float
    spectral_entropy: float
    spectral_flux: float
    spectral_rolloff: float
    spectral_spread: float
    onset_rate: float
    length_s: float
    bpm: float
    beats_loud: float
    vocal_instrumental: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


SIGNAL_FEATURE_NAMES = [f.name for f in fields(SignalFeatures)]


def hann(n: int) -> np.ndarray:
    # periodic form: the centre tap is exactly 1.0
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _frame(x: np.ndarray, frame_size: int, hop: int) -> np.ndarray:
    n = 1 + (len(x) - frame_size) // hop
    return np.lib.stride_tricks.sliding_window_view(x, frame_size)[::hop][:n]


def stft(clip: AudioClip, frame_size: int = FRAME_SIZE, hop: int = HOP) -> Spectrogram:
    x = np.asarray(clip.samples, dtype=np.float64)
    if len(x) < frame_size:
        raise TooShort(f"{len(x)} samples, need at least {frame_size}")
    mags = np.abs(np.fft.rfft(_frame(x, frame_size, hop) * hann(frame_size), axis=1))
    return Spectrogram(mags, frame_size, hop, clip.sample_rate)


# frame-wise spectral descriptors; each returns one value per row of ``m``


def _safe_div(num, den):
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def spectral_centroid(m, freqs):
    return _safe_div(m @ freqs, m.sum(axis=1))


def spectral_spread(m, freqs):
    c = spectral_centroid(m, freqs)
    var = _safe_div(((freqs[None, :] - c[:, None]) ** 2 * m).sum(axis=1), m.sum(axis=1))
    return np.sqrt(var)


def spectral_rolloff(m, freqs, fraction=ROLLOFF_FRACTION):
    cum = np.cumsum(m**2, axis=1)
    total = cum[:, -1]
    idx = np.argmax(cum >= fraction * total[:, None], axis=1)
    return np.where(total > 0, freqs[idx], 0.0)


def spectral_flux(m):
    if m.shape[0] < 2:
        return np.zeros(0)
    norms = np.linalg.norm(m, axis=1)
    u = _safe_div(m, norms[:, None])
    return np.linalg.norm(np.diff(u, axis=0), axis=1)


def spectral_entropy(m):
    """Shannon entropy in bits of the sum-normalised magnitude spectrum."""
    q = _safe_div(m, m.sum(axis=1)[:, None])
    logs = np.zeros_like(q)
    np.log2(q, out=logs, where=q > 0)
    return -(q * logs).sum(axis=1)


def spectral_decrease(m):
    k = np.arange(1, m.shape[1])
    num = ((m[:, 1:] - m[:, :1]) / k).sum(axis=1)
    return _safe_div(num, m[:, 1:].sum(axis=1))


def spectral_complexity(m, threshold=PEAK_THRESHOLD):
    mid = m[:, 1:-1]
    is_peak = (mid > m[:, :-2]) & (mid >= m[:, 2:]) & (mid > threshold * m.max(axis=1)[:, None])
    return is_peak.sum(axis=1).astype(np.float64)


def band_energy(m, freqs, lo, hi):
    p = m**2
    sel = (freqs >= lo) & (freqs < hi) if hi < freqs[-1] else (freqs >= lo) & (freqs <= hi)
    return _safe_div(p[:, sel].sum(axis=1), p.sum(axis=1))


def pitch_salience(m, bin_hz):
    k = m.shape[1]
    spec = np.fft.rfft(m, n=2 * k, axis=1)
    r = np.fft.irfft(spec * np.conj(spec), n=2 * k, axis=1)[:, :k]
    lo = max(1, int(np.ceil(SALIENCE_LAG_HZ[0] / bin_hz)))
    hi = min(k - 1, int(np.floor(SALIENCE_LAG_HZ[1] / bin_hz)))
    ratio = _safe_div(r[:, lo : hi + 1], r[:, :1])
    return np.clip(ratio.max(axis=1), 0.0, 1.0)


def _mean(v) -> float:
    return float(np.mean(v)) if len(v) else 0.0


# time-domain descriptors


def zero_crossing_rate(x: np.ndarray, sample_rate: int) -> float:
    pos = x >= 0
    return float(np.count_nonzero(pos[1:] != pos[:-1])) * sample_rate / len(x)


def loudness_db(x: np.ndarray) -> float:
    power = float(np.mean(x * x))
    if power <= 0:
        return LOUDNESS_FLOOR_DB
    return float(max(LOUDNESS_FLOOR_DB, 10.0 * np.log10(power)))


def frame_rms(x: np.ndarray, frame_size: int = FRAME_SIZE, hop: int = HOP) -> np.ndarray:
    return np.sqrt(np.mean(_frame(x, frame_size, hop) ** 2, axis=1))


def dynamic_complexity_db(rms: np.ndarray) -> float:
    floor = 10.0 ** (LOUDNESS_FLOOR_DB / 20.0)
    db = 20.0 * np.log10(np.maximum(rms, floor))
    return float(np.mean(np.abs(db - db.mean())))


def dfa_exponent(series: np.ndarray) -> float | None:
    """Detrended fluctuation analysis slope; None when undefined."""
    n = len(series)
    if n < 16:
        return None
    profile = np.cumsum(series - series.mean())
    sizes = np.unique(np.round(np.logspace(np.log10(4), np.log10(n // 4), 10)).astype(int))
    scales, flucts = [], []
    for s in sizes:
        segs = profile[: (n // s) * s].reshape(-1, s)
        t = np.arange(s)
        coef = np.polynomial.polynomial.polyfit(t, segs.T, 1)
        trend = coef[0][:, None] + coef[1][:, None] * t[None, :]
        f = np.sqrt(np.mean((segs - trend) ** 2))
        if f > 0:
            scales.append(s)
            flucts.append(f)
    if len(scales) < 2:
        return None
    return float(np.polyfit(np.log(scales), np.log(flucts), 1)[0])


def danceability(rms: np.ndarray) -> float:
    alpha = dfa_exponent(rms)
    if alpha is None:
        return 0.0
    return float(np.clip(max(0.0, 3.0 - alpha) / 3.0, 0.0, 1.0))


# onsets and tempo


def onset_novelty(clip: AudioClip):
    """Half-wave rectified spectral flux on log-compressed magnitudes.

    Returns (novelty, frame rate, mean per-frame log-magnitude sum); the last
    value scales the absolute onset floor so stationary signals stay silent.
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    if len(x) < ONSET_FRAME:
        return np.zeros(0), clip.sample_rate / ONSET_HOP, 0.0
    m = np.log1p(100.0 * stft(clip, ONSET_FRAME, ONSET_HOP).frames)
    nov = np.zeros(m.shape[0])
    nov[1:] = np.maximum(np.diff(m, axis=0), 0.0).sum(axis=1)
    return nov, clip.sample_rate / ONSET_HOP, float(m.sum(axis=1).mean())


def pick_onsets(nov: np.ndarray, frame_rate: float, level: float) -> np.ndarray:
    """Local maxima above a moving-median threshold, at least 50 ms apart."""
    if len(nov) < 3 or nov.max() <= 0:
        return np.zeros(0, dtype=int)
    half = max(1, int(round(0.25 * frame_rate)))
    padded = np.pad(nov, half, mode="edge")
    med = np.median(np.lib.stride_tricks.sliding_window_view(padded, 2 * half + 1), axis=1)
    thresh = np.maximum(1.5 * med + 0.1 * nov.max(), 0.05 * level)
    cand = np.flatnonzero(
        (nov[1:-1] >= nov[:-2]) & (nov[1:-1] > nov[2:]) & (nov[1:-1] > thresh[1:-1])
    ) + 1
    min_gap = max(1, int(round(0.05 * frame_rate)))
    keep = []
    for c in cand:
        if not keep or c - keep[-1] >= min_gap:
            keep.append(c)
    return np.asarray(keep, dtype=int)


def _tempo_lag(nov: np.ndarray, frame_rate: float) -> float | None:
    centered = nov - nov.mean()
    n = len(centered)
    spec = np.fft.rfft(centered, n=2 * n)
    acf = np.fft.irfft(spec * np.conj(spec), n=2 * n)[:n]
    lo = int(np.floor(60.0 * frame_rate / TEMPO_RANGE[1]))
    hi = min(n - 2, int(np.ceil(60.0 * frame_rate / TEMPO_RANGE[0])))
    if hi <= lo + 1 or acf[0] <= 0:
        return None
    lags = np.arange(lo, hi + 1)
    bpms = 60.0 * frame_rate / lags
    prior = np.exp(-0.5 * np.log2(bpms / 120.0) ** 2)
    best = lags[np.argmax(acf[lags] * prior)]
    if acf[best] <= 0:
        return None
    a, b, c = acf[best - 1], acf[best], acf[best + 1]
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom < 0 else 0.0
    return best + float(np.clip(shift, -0.5, 0.5))


def estimate_tempo(clip: AudioClip):
    """Return (bpm, beat times in seconds, onset rate per second)."""
    nov, frame_rate, level = onset_novelty(clip)
    onsets = pick_onsets(nov, frame_rate, level)
    onset_rate = len(onsets) / clip.duration_seconds
    if clip.duration_seconds < MIN_TEMPO_SECONDS or len(onsets) == 0:
        return 0.0, [], onset_rate
    lag = _tempo_lag(nov, frame_rate)
    if lag is None:
        return 0.0, [], onset_rate
    bpm = 60.0 * frame_rate / lag
    lo, hi = TEMPO_RANGE
    while bpm > hi:
        bpm /= 2.0
    while bpm < lo:
        bpm *= 2.0
    # phase: offset whose beat grid collects the most novelty
    n = len(nov)
    phases = np.arange(int(np.ceil(lag)))
    scores = [nov[np.round(np.arange(p, n - 0.5, lag)).astype(int).clip(0, n - 1)].sum() for p in phases]
    grid = np.arange(phases[int(np.argmax(scores))], n - 0.5, lag)
    beats = [float(t) * ONSET_HOP / clip.sample_rate for t in grid]
    return float(bpm), beats, onset_rate


def beats_loudness(x: np.ndarray, sample_rate: int, beats) -> float:
    if not beats:
        return 0.0
    half = int(round(BEAT_WINDOW_S * sample_rate))
    vals = []
    for t in beats:
        c = int(round(t * sample_rate))
        seg = x[max(0, c - half) : c + half + 1]
        if len(seg):
            vals.append(np.sqrt(np.mean(seg * seg)))
    return float(np.mean(vals)) if vals else 0.0


# MFCC


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int = FRAME_SIZE, n_mels: int = N_MELS) -> np.ndarray:
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(sample_rate / 2.0), n_mels + 2))
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs[None, :] - lower) / (centre - lower)
    down = (upper - freqs[None, :]) / (upper - centre)
    return np.maximum(0.0, np.minimum(up, down))


def dct_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Orthonormal DCT-II rows 0..n_out-1."""
    k = np.arange(n_out)[:, None]
    n = np.arange(n_in)[None, :]
    d = np.cos(np.pi * k * (2 * n + 1) / (2 * n_in)) * np.sqrt(2.0 / n_in)
    d[0] /= np.sqrt(2.0)
    return d


def mfcc(clip: AudioClip) -> np.ndarray:
    """S x 40 MFCC matrix over the first 15 s (frame/FFT 2048, hop 1024)."""
    x = np.asarray(clip.samples[: int(MFCC_SECONDS * clip.sample_rate)], dtype=np.float64)
    if len(x) == 0:
        raise TooShort("empty clip")
    if len(x) < FRAME_SIZE:
        x = np.pad(x, (0, FRAME_SIZE - len(x)))
    power = stft(AudioClip(x, clip.sample_rate), FRAME_SIZE, HOP).frames ** 2
    mel = power @ mel_filterbank(clip.sample_rate).T
    logmel = np.log(np.maximum(mel, MEL_POWER_FLOOR))
    return logmel @ dct_matrix(N_MFCC, N_MELS).T


# chord-derived rates


def chord_rates(chords, duration: float):
    """(changes per second, distinct chords per second) over pitched events."""
    if not chords:
        return 0.0, 0.0
    pitched = [(c.root, c.quality) for c in sorted(chords, key=lambda c: c.start) if c.root is not None]
    changes = sum(1 for a, b in zip(pitched, pitched[1:]) if a != b)
    return changes / duration, len(set(pitched)) / duration


def signal_descriptors(clip: AudioClip, chords=None, vocal_flag=None) -> SignalFeatures:
    x = np.asarray(clip.samples, dtype=np.float64)
    spec = stft(clip)
    m, freqs = spec.frames, spec.freqs
    rms = frame_rms(x)
    bpm, beats, onset_rate = estimate_tempo(clip)
    changes_rate, number_rate = chord_rates(chords, clip.duration_seconds)
    bands = {name: _mean(band_energy(m, freqs, lo, hi)) for name, (lo, hi) in BANDS_HZ.items()}
    return SignalFeatures(
        danceability=danceability(rms),
        loudness_db=loudness_db(x),
        chords_changes_rate=changes_rate,
        dynamic_complexity_db=dynamic_complexity_db(rms),
        zero_crossing_rate=zero_crossing_rate(x, clip.sample_rate),
        chords_number_rate=number_rate,
        pitch_salience=_mean(pitch_salience(m, spec.bin_hz)),
        spectral_centroid=_mean(spectral_centroid(m, freqs)),
        spectral_complexity=_mean(spectral_complexity(m)),
        spectral_decrease=_mean(spectral_decrease(m)),
        energy_high=bands["energy_high"],
        energy_low=bands["energy_low"],
        energy_mid_high=bands["energy_mid_high"],
        energy_mid_low=bands["energy_mid_low"],
        spectral_entropy=_mean(spectral_entropy(m)),
        spectral_flux=_mean(spectral_flux(m)),
        spectral_rolloff=_mean(spectral_rolloff(m, freqs)),
        spectral_spread=_mean(spectral_spread(m, freqs)),
        onset_rate=onset_rate,
        length_s=clip.duration_seconds,
        bpm=bpm,
        beats_loud=beats_loudness(x, clip.sample_rate, beats),
        vocal_instrumental=0.5 if vocal_flag is None else float(vocal_flag),
    )
