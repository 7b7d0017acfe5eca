"""Shared fixtures and signal-building helpers for the test suite."""

import numpy as np
import pytest

from expressa.audio_io import AudioClip
from expressa.config import PipelineConfig
from expressa.dsp import PartialSet, magnitude_spectrum

SR = 44100


@pytest.fixture
def cfg():
    return PipelineConfig().validate()


def sine(freq, amp=1.0, duration=1.0, sr=SR, phase=0.0):
    t = np.arange(int(round(duration * sr))) / sr
    return amp * np.sin(2.0 * np.pi * freq * t + phase)


def sine_clip(freq, amp=1.0, duration=1.0, sr=SR):
    return AudioClip(samples=sine(freq, amp, duration, sr), sample_rate=sr)


def harmonic_tone(f0, amps, duration=1.0, sr=SR, detune=None):
    """Steady additive tone; detune is a per-harmonic fractional offset."""
    t = np.arange(int(round(duration * sr))) / sr
    x = np.zeros_like(t)
    for h, a in enumerate(amps, start=1):
        d = 0.0 if detune is None else detune[h - 1]
        x += a * np.sin(2.0 * np.pi * h * f0 * (1.0 + d) * t)
    return x


def steady_spectrum(samples, sr=SR, frame_size=2048, window="hann", offset=None):
    """Spectrum of one steady-state frame (default: centred in the signal)."""
    if offset is None:
        offset = (len(samples) - frame_size) // 2
    frame = samples[offset:offset + frame_size]
    return magnitude_spectrum(frame, sr, window=window)


def partials(f0, amps, freqs=None, harmonics=None):
    """Hand-built PartialSet for scalar-formula oracles."""
    amps = np.asarray(amps, dtype=np.float64)
    if harmonics is None:
        harmonics = np.arange(1, len(amps) + 1)
    harmonics = np.asarray(harmonics, dtype=int)
    if freqs is None:
        freqs = harmonics * float(f0)
    return PartialSet(f0=float(f0), harmonics=harmonics,
                      freqs=np.asarray(freqs, dtype=np.float64), amps=amps)
