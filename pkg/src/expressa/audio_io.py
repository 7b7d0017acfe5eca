"""Mono WAV decoding/encoding, silence normalization, and manifest I/O."""

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChannelCountError,
    CorruptFileError,
    DuplicateError,
    FormatError,
    LabelError,
    SilentClipError,
)

EMOTIONS = ("Anger", "Disgust", "Fear", "Happiness", "Sadness", "Surprise", "Neutral")
_EMOTION_LOOKUP = {e.lower(): e for e in EMOTIONS}

SILENCE_RMS_WINDOW = 0.010  # seconds of moving RMS used for silence detection


@dataclass(frozen=True)
class AudioClip:
    """Decoded mono audio: float samples in [-1, 1] plus the sample rate."""

    samples: np.ndarray
    sample_rate: int
    source_bit_depth: int = 0

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        self.samples.setflags(write=False)

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class RecordingMeta:
    path: str
    performer_id: str
    emotion: str


def decode_wav(path):
    """Decode a mono RIFF/WAVE file (PCM 16/24-bit or IEEE float 32)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise CorruptFileError(f"{path}: short fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            if len(body) < size:
                raise CorruptFileError(f"{path}: data chunk truncated "
                                       f"({len(body)} of {size} bytes)")
            payload = body
        pos += 8 + size + (size & 1)

    if fmt is None or payload is None:
        raise CorruptFileError(f"{path}: missing fmt or data chunk")
    audio_format, channels, sample_rate, _, block_align, bits = fmt
    if channels != 1:
        raise ChannelCountError(f"{path}: {channels} channels, expected mono")

    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(payload, dtype="<i2").astype(np.float64)
        samples = raw / 32768.0
    elif audio_format == 1 and bits == 24:
        b = np.frombuffer(payload, dtype=np.uint8)
        if len(b) % 3:
            raise CorruptFileError(f"{path}: 24-bit payload not a multiple of 3 bytes")
        b = b.reshape(-1, 3).astype(np.int64)
        raw = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        raw -= (raw & 0x800000) << 1  # sign-extend
        samples = raw / 8388608.0
    elif audio_format == 3 and bits == 32:
        samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported codec (format={audio_format}, bits={bits})")

    return AudioClip(samples=samples, sample_rate=sample_rate, source_bit_depth=bits)


def encode_wav(path, clip, bit_depth=24):
    """Write a mono PCM WAV file; the default 24-bit matches the corpus format."""
    if bit_depth not in (16, 24):
        raise FormatError(f"unsupported write bit depth {bit_depth}")
    full_scale = 1 << (bit_depth - 1)
    raw = np.clip(np.rint(clip.samples * full_scale), -full_scale, full_scale - 1)
    raw = raw.astype(np.int64)
    if bit_depth == 16:
        payload = raw.astype("<i2").tobytes()
    else:
        u = raw & 0xFFFFFF
        b = np.empty((len(u), 3), dtype=np.uint8)
        b[:, 0] = u & 0xFF
        b[:, 1] = (u >> 8) & 0xFF
        b[:, 2] = (u >> 16) & 0xFF
        payload = b.tobytes()
    byte_rate = clip.sample_rate * bit_depth // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, clip.sample_rate,
                                    byte_rate, bit_depth // 8, bit_depth)
    header += b"data" + struct.pack("<I", len(payload))
    with open(path, "wb") as fh:
        fh.write(header + payload)


def moving_rms(samples, sample_rate, window=SILENCE_RMS_WINDOW):
    """Trailing moving RMS over `window` seconds (zero-padded at the start)."""
    w = max(1, int(round(window * sample_rate)))
    sq = np.asarray(samples, dtype=np.float64) ** 2
    acc = np.convolve(sq, np.ones(w) / w, mode="full")[:len(sq)]
    return np.sqrt(np.maximum(acc, 0.0))


def active_span(samples, sample_rate, threshold_db=-60.0):
    """(first, last) sample indices whose moving RMS exceeds the threshold."""
    rms = moving_rms(samples, sample_rate)
    thr = 10.0 ** (threshold_db / 20.0)
    hot = np.flatnonzero(rms > thr)
    if hot.size == 0:
        raise SilentClipError("no samples above the silence threshold")
    return int(hot[0]), int(hot[-1])


def _strip_exact_zeros(x):
    nz = np.flatnonzero(x)
    if nz.size == 0:
        return x[:0]
    return x[nz[0]:nz[-1] + 1]


def normalize_silence(clip, pad=0.5, threshold_db=-60.0):
    """Trim/pad so leading and trailing silence are exactly `pad` seconds.

    Idempotent: the retained core starts at the backed-off first RMS crossing
    and ends at the last one, with exact-zero fringes stripped before padding.
    """
    sr = clip.sample_rate
    x = _strip_exact_zeros(clip.samples)
    if x.size == 0:
        raise SilentClipError("clip is entirely zero")
    first, last = active_span(x, sr, threshold_db)
    w = max(1, int(round(SILENCE_RMS_WINDOW * sr)))
    start = max(first - (w - 1), 0)
    core = _strip_exact_zeros(x[start:last + 1])
    if core.size == 0:
        raise SilentClipError("no signal left after trimming")
    n_pad = int(round(pad * sr))
    out = np.concatenate([np.zeros(n_pad), core, np.zeros(n_pad)])
    return AudioClip(samples=out, sample_rate=sr,
                     source_bit_depth=clip.source_bit_depth)


def load_manifest(path):
    """Read a `path,performer,emotion` CSV into RecordingMeta records."""
    records = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        expected = ["path", "performer", "emotion"]
        if [f.strip() for f in reader.fieldnames] != expected:
            raise LabelError(f"{path}: expected header {','.join(expected)}")
        for i, row in enumerate(reader, start=2):
            emotion = _EMOTION_LOOKUP.get(row["emotion"].strip().lower())
            if emotion is None:
                raise LabelError(f"{path}:{i}: unknown emotion {row['emotion']!r}")
            key = (row["performer"].strip(), emotion)
            if key in seen:
                raise DuplicateError(f"{path}:{i}: duplicate performer/emotion {key}")
            seen.add(key)
            records.append(RecordingMeta(path=row["path"].strip(),
                                         performer_id=row["performer"].strip(),
                                         emotion=emotion))
    return records


def save_manifest(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "performer", "emotion"])
        for r in records:
            writer.writerow([r.path, r.performer_id, r.emotion.lower()])
