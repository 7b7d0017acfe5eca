"""Ground-truth corpus synthesis: additive tones with controlled tempo,
dynamics, harmonic content, noise, and detune.

Every random quantity flows from numpy's PCG64 generator seeded from a
SeedSequence, so identical seeds give bit-identical corpora on any platform.
The emotion presets are test fixtures: they encode archetypes (fast/loud/
bright vs slow/soft/legato) so that every feature family carries class
information.  Two deliberate exceptions act as negative controls for the
feature gate: the per-note level jitter and the per-harmonic amplitude
wobble are calibrated per emotion so that the measured attack-leap spread
and envelope-deviation spread come out statistically flat across emotions.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .audio_io import EMOTIONS, AudioClip, RecordingMeta, encode_wav, save_manifest
from .errors import ConfigError, DomainError


@dataclass
class TonePreset:
    f0: float
    harmonic_amps: tuple
    detune: tuple = ()            # fractional offset per harmonic; () = none
    noise_mix: float = 0.0        # noise energy fraction of total
    attack: float = 0.02
    release: float = 0.04


@dataclass
class PerformancePreset:
    label: str
    bpm: float
    level: float
    legato: float
    tone: TonePreset
    # per-note jitter half-ranges; level_jitter and wobble act as negative
    # controls: they are calibrated per emotion so the *measured* spreads
    # (attack-leap IQR, envelope-deviation IQR) are statistically flat
    # across emotions, and their magnitude is re-drawn per clip to widen
    # the within-class variance the gate has to beat
    level_jitter: float = 0.03    # absolute amplitude
    timing_jitter: float = 0.008  # seconds
    tilt_jitter: float = 0.0      # spectral tilt exponent per note
    detune_jitter: float = 0.0    # fractional frequency per note
    wobble: float = 0.10          # fractional per-harmonic amplitude wobble
    tilt: float = 0.0             # fixed spectral tilt exponent
    comb: float = 0.0             # fixed even-harmonic attenuation depth
    seed: int = 0


def _note_envelope(n, sr, attack, release):
    env = np.ones(n)
    na = min(int(round(attack * sr)), n)
    env[:na] = np.linspace(0.0, 1.0, na, endpoint=False)
    nr = min(int(round(release * sr)), n)
    if nr > 0:
        t = np.arange(nr) / sr
        env[n - nr:] *= np.exp(-t / (release / 5.0))
    return env


def _shape_amps(base, tilt, comb):
    h = np.arange(1, len(base) + 1)
    amps = np.asarray(base, dtype=np.float64) * h.astype(np.float64) ** tilt
    if comb:
        amps = amps * np.where(h % 2 == 0, 1.0 - comb, 1.0)
    return amps


def synth_tone(preset, duration, sample_rate, rng=None, amp_offsets=None):
    """Additive tone + enveloped noise; returns (AudioClip, truth record)."""
    amps = np.asarray(preset.harmonic_amps, dtype=np.float64)
    h = np.arange(1, len(amps) + 1)
    detune = np.zeros(len(amps))
    if preset.detune:
        detune[:len(preset.detune)] = preset.detune
    freqs = h * preset.f0 * (1.0 + detune)
    if freqs.max() >= sample_rate / 2:
        raise DomainError("highest partial exceeds the Nyquist frequency")
    if amp_offsets is not None:
        amps = np.maximum(amps + amp_offsets, 0.0)

    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    x = np.zeros(n)
    for fh, ah in zip(freqs, amps):
        if ah > 0:
            x += ah * np.sin(2.0 * np.pi * fh * t)
    harmonic_power = float(np.sum(amps ** 2) / 2.0)

    noise_power = 0.0
    if preset.noise_mix > 0.0:
        if not 0.0 <= preset.noise_mix < 1.0:
            raise DomainError("noise_mix must be in [0, 1)")
        noise_power = harmonic_power * preset.noise_mix / (1.0 - preset.noise_mix)
        gen = rng if rng is not None else np.random.default_rng(0)
        x += np.sqrt(noise_power) * gen.standard_normal(n)

    x *= _note_envelope(n, sample_rate, preset.attack, preset.release)
    truth = {
        "f0": preset.f0,
        "partials": [{"h": int(hh), "freq": float(fh), "amp": float(ah)}
                     for hh, fh, ah in zip(h, freqs, amps) if ah > 0],
        "harmonic_power": harmonic_power,
        "noise_power": noise_power,
        "noise_mix": preset.noise_mix,
    }
    return AudioClip(samples=x, sample_rate=sample_rate, source_bit_depth=24), truth


def synth_performance(preset, n_notes=10, sample_rate=44100, pad=0.5):
    """A sequence of notes at 60/bpm spacing with seeded per-note jitter."""
    if n_notes < 2:
        raise DomainError("a performance needs at least 2 notes")
    rng = np.random.default_rng(np.random.SeedSequence(preset.seed))
    ioi = 60.0 / preset.bpm
    note_dur = preset.legato * ioi

    base_amps = _shape_amps(preset.tone.harmonic_amps, preset.tilt, preset.comb)
    base_amps = base_amps / base_amps.sum()  # unit peak before level scaling

    # per-clip re-draw of the negative-control jitter magnitudes: widens the
    # within-class spread of the derived IQR features without moving means
    jitter_scale = rng.uniform(0.7, 1.3)
    wobble_scale = rng.uniform(0.5, 1.5)

    total = (n_notes - 1) * ioi + note_dur + 0.1
    n_total = int(round((total + 2 * pad) * sample_rate))
    out = np.zeros(n_total)
    onset_times = []
    notes = []
    for k in range(n_notes):
        t_on = pad + k * ioi + rng.uniform(-preset.timing_jitter,
                                           preset.timing_jitter)
        t_on = max(t_on, 0.0)
        level = preset.level + jitter_scale * rng.uniform(-preset.level_jitter,
                                                          preset.level_jitter)
        tilt = rng.uniform(-preset.tilt_jitter, preset.tilt_jitter)
        det = rng.uniform(-preset.detune_jitter, preset.detune_jitter)
        h = np.arange(1, len(base_amps) + 1)
        amps = base_amps * h.astype(np.float64) ** tilt
        amps = level * amps / amps.sum()
        # energy-preserving wobble: reshapes the harmonic envelope per note
        # without moving the note's level, so it cannot leak into the
        # attack-leap or energy features
        wob = wobble_scale * rng.uniform(-preset.wobble, preset.wobble,
                                         size=len(amps))
        wobbled = np.maximum(amps * (1.0 + wob), 0.0)
        e = np.sum(wobbled ** 2)
        if e > 0.0:
            amps = wobbled * np.sqrt(np.sum(amps ** 2) / e)

        note_tone = TonePreset(
            f0=preset.tone.f0,
            harmonic_amps=tuple(amps),
            detune=tuple(np.asarray(
                preset.tone.detune if preset.tone.detune
                else np.zeros(len(amps)))[:len(amps)] + det * h / h.max()),
            noise_mix=preset.tone.noise_mix,
            attack=preset.tone.attack,
            release=preset.tone.release,
        )
        clip, truth = synth_tone(note_tone, note_dur, sample_rate, rng=rng)
        start = int(round(t_on * sample_rate))
        end = min(start + len(clip.samples), n_total)
        out[start:end] += clip.samples[:end - start]
        onset_times.append(float(t_on))
        notes.append({"onset": float(t_on), "level": float(level),
                      "tilt": float(tilt), "detune": float(det),
                      "tone": truth})

    out = np.clip(out, -1.0, 1.0)
    truth = {"label": preset.label, "bpm": preset.bpm, "ioi": ioi,
             "onsets": onset_times, "notes": notes,
             "legato": preset.legato, "level": preset.level,
             "noise_mix": preset.tone.noise_mix}
    return AudioClip(samples=out, sample_rate=sample_rate,
                     source_bit_depth=24), truth


def default_presets():
    """One archetypal preset per emotion.

    Values chosen so each of the 24 analyzed features separates at least
    some emotions.  level_jitter and wobble are calibrated per emotion
    (empirically, against the extraction chain) so that ATK_IQR and
    HRD_IQR stay class-independent and fail the ANOVA gate by design.
    """
    def tone(f0, rolloff, noise, detune_mag):
        amps = tuple((1.0 / h) ** rolloff for h in range(1, 13))
        detune = tuple(detune_mag * ((-1) ** h) * h / 12.0 for h in range(1, 13))
        return TonePreset(f0=f0, harmonic_amps=amps, detune=detune,
                          noise_mix=noise)

    return {
        "Anger": PerformancePreset(
            label="Anger", bpm=140.0, level=0.62, legato=0.50,
            tone=tone(130.8, 0.6, 0.22, 0.0030),
            tilt=0.25, comb=0.15, tilt_jitter=0.05, detune_jitter=0.0020,
            level_jitter=0.046, wobble=0.11),
        "Disgust": PerformancePreset(
            label="Disgust", bpm=72.0, level=0.30, legato=0.62,
            tone=tone(98.0, 1.0, 0.20, 0.0085),
            tilt=-0.10, comb=0.55, tilt_jitter=0.03, detune_jitter=0.0060,
            level_jitter=0.026, wobble=0.16),
        "Fear": PerformancePreset(
            label="Fear", bpm=60.0, level=0.22, legato=0.72,
            tone=tone(103.8, 1.3, 0.14, 0.0020),
            tilt=-0.25, comb=0.30, tilt_jitter=0.06, detune_jitter=0.0035,
            level_jitter=0.022, wobble=0.33),
        "Happiness": PerformancePreset(
            label="Happiness", bpm=120.0, level=0.45, legato=0.34,
            tone=tone(123.5, 0.7, 0.05, 0.0012),
            tilt=0.35, comb=0.08, tilt_jitter=0.08, detune_jitter=0.0008,
            level_jitter=0.053, wobble=0.12),
        "Sadness": PerformancePreset(
            label="Sadness", bpm=52.0, level=0.14, legato=0.94,
            tone=tone(87.3, 1.6, 0.012, 0.0003),
            tilt=-0.45, comb=0.04, tilt_jitter=0.015, detune_jitter=0.0002,
            level_jitter=0.022, wobble=1.00),
        "Surprise": PerformancePreset(
            label="Surprise", bpm=100.0, level=0.52, legato=0.50,
            tone=tone(116.5, 0.85, 0.09, 0.0050),
            tilt=0.12, comb=0.04, tilt_jitter=0.04, detune_jitter=0.0045,
            level_jitter=0.030, wobble=0.10),
        "Neutral": PerformancePreset(
            label="Neutral", bpm=85.0, level=0.38, legato=0.80,
            tone=tone(110.0, 1.1, 0.03, 0.0006),
            tilt=0.0, comb=0.22, tilt_jitter=0.045, detune_jitter=0.0015,
            level_jitter=0.035, wobble=0.17),
    }


def synth_corpus(out_dir, presets=None, n_performers=10, master_seed=20160111,
                 n_notes=10, sample_rate=44100):
    """Write a full synthetic corpus: WAVs, manifest CSV, and truth JSON.

    Each simulated performer gets systematic level/tempo/tilt offsets applied
    to all 7 clips, which per-performer normalization should later remove.
    """
    if presets is None:
        presets = default_presets()
    labels = sorted(presets.keys())
    if labels != sorted(EMOTIONS):
        raise ConfigError("need exactly one preset per emotion label")

    os.makedirs(out_dir, exist_ok=True)
    master = np.random.SeedSequence(master_seed)
    records = []
    truth_table = {"master_seed": master_seed, "n_performers": n_performers,
                   "n_notes": n_notes, "sample_rate": sample_rate,
                   "recordings": []}
    for p in range(n_performers):
        performer = f"P{p + 1:02d}"
        offs_rng = np.random.default_rng(np.random.SeedSequence(
            entropy=master_seed, spawn_key=(p,)))
        level_scale = offs_rng.uniform(0.85, 1.15)
        bpm_scale = offs_rng.uniform(0.92, 1.08)
        tilt_offset = offs_rng.uniform(-0.06, 0.06)
        for e_idx, emotion in enumerate(EMOTIONS):
            base = presets[emotion]
            seed = int(np.random.default_rng(np.random.SeedSequence(
                entropy=master_seed, spawn_key=(p, e_idx))).integers(2 ** 31))
            preset = PerformancePreset(
                label=base.label, bpm=base.bpm * bpm_scale,
                level=min(base.level * level_scale, 0.9),
                legato=base.legato, tone=base.tone,
                level_jitter=base.level_jitter,
                timing_jitter=base.timing_jitter,
                tilt_jitter=base.tilt_jitter,
                detune_jitter=base.detune_jitter,
                wobble=base.wobble, tilt=base.tilt + tilt_offset,
                comb=base.comb, seed=seed)
            clip, truth = synth_performance(preset, n_notes=n_notes,
                                            sample_rate=sample_rate)
            fname = f"{performer}_{emotion.lower()}.wav"
            encode_wav(os.path.join(out_dir, fname), clip, bit_depth=24)
            records.append(RecordingMeta(path=fname, performer_id=performer,
                                         emotion=emotion))
            truth["performer"] = performer
            truth["performer_offsets"] = {"level_scale": level_scale,
                                          "bpm_scale": bpm_scale,
                                          "tilt_offset": tilt_offset}
            truth["path"] = fname
            truth_table["recordings"].append(truth)

    manifest_path = os.path.join(out_dir, "manifest.csv")
    save_manifest(records, manifest_path)
    truth_path = os.path.join(out_dir, "truth.json")
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth_table, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path, truth_path
