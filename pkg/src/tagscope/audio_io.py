"""Decode RIFF/WAVE and Sun AU files into normalised mono clips."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._accel import njit
from .errors import CorruptHeader, DataError, EmptyAudio, UnsupportedFormat

CANONICAL_RATE = 22050
RESAMPLE_TAPS = 64
KAISER_BETA = 8.0

_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_FLOAT = 3
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE

# AU encoding id -> (bytes per sample, numpy dtype, full-scale divisor or None for float)
_AU_ENCODINGS = {
    2: (1, ">i1", 128.0),
    3: (2, ">i2", 32768.0),
    4: (3, None, 8388608.0),
    6: (4, ">f4", None),
}


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    source_path: str = ""

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate


def _int24(raw: bytes, big_endian: bool) -> np.ndarray:
    b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
    if big_endian:
        v = (b[:, 0] << 16) | (b[:, 1] << 8) | b[:, 2]
    else:
        v = (b[:, 2] << 16) | (b[:, 1] << 8) | b[:, 0]
    return np.where(v >= 1 << 23, v - (1 << 24), v)


def _read_wav(data: bytes, path: str):
    if len(data) < 12 or data[8:12] != b"WAVE":
        raise UnsupportedFormat(f"{path}: RIFF container is not WAVE")
    pos = 12
    fmt = None
    pcm = None
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4 : pos + 8])
        body = pos + 8
        if cid == b"fmt ":
            if size < 16 or body + size > len(data):
                raise CorruptHeader(f"{path}: truncated fmt chunk")
            tag, channels, rate, _, block_align, bits = struct.unpack(
                "<HHIIHH", data[body : body + 16]
            )
            if tag == _WAVE_FORMAT_EXTENSIBLE and size >= 40:
                (tag,) = struct.unpack("<H", data[body + 24 : body + 26])
            fmt = (tag, channels, rate, block_align, bits)
        elif cid == b"data":
            if body + size > len(data):
                raise CorruptHeader(
                    f"{path}: data chunk declares {size} bytes, {len(data) - body} present"
                )
            pcm = data[body : body + size]
            break
        pos = body + size + (size & 1)
    if fmt is None or pcm is None:
        raise CorruptHeader(f"{path}: missing fmt or data chunk")
    tag, channels, rate, block_align, bits = fmt
    if channels < 1 or rate < 1:
        raise CorruptHeader(f"{path}: {channels} channels at {rate} Hz")
    if block_align != channels * bits // 8 or len(pcm) % block_align:
        raise CorruptHeader(f"{path}: data length not a whole number of frames")
    if tag == _WAVE_FORMAT_PCM and bits == 16:
        x = np.frombuffer(pcm, dtype="<i2") / 32768.0
    elif tag == _WAVE_FORMAT_PCM and bits == 24:
        x = _int24(pcm, big_endian=False) / 8388608.0
    elif tag == _WAVE_FORMAT_FLOAT and bits == 32:
        x = np.frombuffer(pcm, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedFormat(f"{path}: WAVE format tag {tag} with {bits} bits")
    return x.reshape(-1, channels), rate


def _read_au(data: bytes, path: str):
    if len(data) < 24:
        raise CorruptHeader(f"{path}: AU header shorter than 24 bytes")
    offset, size, encoding, rate, channels = struct.unpack(">IIIII", data[4:24])
    if offset < 24 or offset > len(data):
        raise CorruptHeader(f"{path}: data offset {offset} out of range")
    if encoding not in _AU_ENCODINGS:
        raise UnsupportedFormat(f"{path}: AU encoding {encoding}")
    if channels < 1 or rate < 1:
        raise CorruptHeader(f"{path}: {channels} channels at {rate} Hz")
    avail = len(data) - offset
    if size == 0xFFFFFFFF:
        size = avail
    elif size > avail:
        raise CorruptHeader(f"{path}: AU declares {size} data bytes, {avail} present")
    width, dtype, scale = _AU_ENCODINGS[encoding]
    frame = width * channels
    raw = data[offset : offset + size - size % frame]
    if encoding == 4:
        x = _int24(raw, big_endian=True) / scale
    elif scale is None:
        x = np.frombuffer(raw, dtype=dtype).astype(np.float64)
    else:
        x = np.frombuffer(raw, dtype=dtype) / scale
    return x.reshape(-1, channels), rate


@njit
def _bessel_i0(x):
    total = 1.0
    term = 1.0
    k = 1.0
    while term > 1e-17 * total:
        term *= (x / (2.0 * k)) ** 2
        total += term
        k += 1.0
    return total


@njit
def _sinc_resample(x, ratio, n_out, taps, beta):
    """Windowed-sinc interpolation; ratio = out_rate / in_rate."""
    n_in = x.shape[0]
    cutoff = min(1.0, ratio)
    half = taps // 2
    norm = _bessel_i0(beta)
    out = np.zeros(n_out)
    for i in range(n_out):
        t = i / ratio
        base = int(np.floor(t))
        acc = 0.0
        wsum = 0.0
        for k in range(base - half + 1, base + half + 1):
            d = t - k
            u = d / half
            if u <= -1.0 or u >= 1.0:
                continue
            arg = np.pi * cutoff * d
            s = cutoff if arg == 0.0 else cutoff * np.sin(arg) / arg
            h = s * _bessel_i0(beta * np.sqrt(1.0 - u * u)) / norm
            wsum += h
            if 0 <= k < n_in:
                acc += h * x[k]
        out[i] = acc / wsum if wsum != 0.0 else 0.0
    return out


def resample(samples: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    """Kaiser-windowed sinc resampler (64 taps); passes through equal rates."""
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    if src_rate == dst_rate:
        return samples.copy()
    n_out = int(round(len(samples) * dst_rate / src_rate))
    return _sinc_resample(samples, dst_rate / src_rate, n_out, RESAMPLE_TAPS, KAISER_BETA)


def decode(path, target_rate: int = CANONICAL_RATE) -> AudioClip:
    path = str(path)
    data = Path(path).read_bytes()
    if data[:4] == b"RIFF":
        frames, rate = _read_wav(data, path)
    elif data[:4] == b".snd":
        frames, rate = _read_au(data, path)
    else:
        raise UnsupportedFormat(f"{path}: unknown magic {data[:4]!r}")
    if frames.shape[0] == 0:
        raise EmptyAudio(f"{path}: zero samples")
    if not np.all(np.isfinite(frames)):
        raise DataError(f"{path}: non-finite samples")
    mono = frames.mean(axis=1) if frames.shape[1] > 1 else frames[:, 0].astype(np.float64)
    mono = resample(mono, rate, target_rate)
    return AudioClip(np.clip(mono, -1.0, 1.0), int(target_rate), path)


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """16-bit PCM writer; inverse of the decoder's /32768 scaling.

    ``samples`` is (n,) for mono or (n, channels), interleaved on write.
    """
    x = np.asarray(samples, dtype=np.float64)
    ch = 1 if x.ndim == 1 else x.shape[1]
    q = np.clip(np.round(x * 32768.0), -32768, 32767)
    pcm = q.astype("<i2").tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    fmt = b"fmt " + struct.pack("<IHHIIHH", 16, _WAVE_FORMAT_PCM, ch, sample_rate, sample_rate * 2 * ch, 2 * ch, 16)
    Path(path).write_bytes(header + fmt + b"data" + struct.pack("<I", len(pcm)) + pcm)


def write_au(path, samples: np.ndarray, sample_rate: int) -> None:
    """16-bit big-endian Sun AU writer (encoding 3)."""
    q = np.clip(np.round(np.asarray(samples, dtype=np.float64) * 32768.0), -32768, 32767)
    pcm = q.astype(">i2").tobytes()
    header = b".snd" + struct.pack(">IIIII", 24, len(pcm), 3, sample_rate, 1)
    Path(path).write_bytes(header + pcm)
