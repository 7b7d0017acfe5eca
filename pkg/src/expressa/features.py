"""The 26-feature extraction chain: 4 global scalars plus 11 time-varying
tracks collapsed to median / interquartile range.

Track-level functions operate on dsp products and return plain values; the
orchestrating `extract_features` runs the whole per-recording chain.
"""

from dataclasses import dataclass

import numpy as np

from . import dsp
from .audio_io import active_span, normalize_silence
from .dataset import summarize_track
from .errors import (
    FeatureUndefinedError,
    InsufficientOnsetsError,
    SilentClipError,
)

TRACKED = ("ATK", "HAE", "NOE", "NSN", "HRD", "EBF", "T1", "T3", "INH", "ROH", "OER")
GLOBALS = ("BPM", "BPM_nn", "RMS", "LOW")

FEATURE_NAMES = tuple(
    list(GLOBALS) + [f"{f}_{s}" for f in TRACKED for s in ("M", "IQR")])


def feature_names(include_t2=False):
    names = list(FEATURE_NAMES)
    if include_t2:
        names += ["T2_M", "T2_IQR"]
    return tuple(names)


@dataclass
class FeatureTrack:
    feature_id: str
    values: list
    frame_indices: list


def bpm(onsets, clamp=(30.0, 300.0)):
    """Tempo as 60 / median inter-onset interval, clamped to a sane range."""
    if len(onsets) < 3:
        raise InsufficientOnsetsError(
            f"need at least 3 onsets for tempo, got {len(onsets)}")
    ioi = np.diff(onsets.onsets)
    return float(np.clip(60.0 / np.median(ioi), clamp[0], clamp[1]))


def rms_global(clip, threshold_db=-60.0):
    """RMS between the first and last above-threshold samples (pads excluded)."""
    first, last = active_span(clip.samples, clip.sample_rate, threshold_db)
    region = clip.samples[first:last + 1]
    return float(np.sqrt(np.mean(region ** 2)))


def low_energy(clip, frame_seconds=0.050, threshold_db=-60.0):
    """Fraction of non-overlapping frames with RMS strictly below the mean."""
    first, last = active_span(clip.samples, clip.sample_rate, threshold_db)
    region = clip.samples[first:last + 1]
    w = int(round(frame_seconds * clip.sample_rate))
    n = len(region) // w
    if n < 1:
        raise SilentClipError("clip shorter than one low-energy frame")
    frames = region[:n * w].reshape(n, w)
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    return float(np.mean(rms < rms.mean()))


def attack_leaps(env, onsets):
    """Envelope rise across each note's attack: local min before the onset to
    the first local max after it."""
    v = env.values
    leaps = []
    for t in onsets.onsets:
        n = int(np.searchsorted(env.times, t))
        n = min(max(n, 0), len(v) - 1)
        i = n
        while i > 0 and v[i - 1] <= v[i]:
            i -= 1
        j = n
        while j < len(v) - 1 and v[j + 1] >= v[j]:
            j += 1
        leaps.append(max(float(v[j] - v[i]), 0.0))
    return FeatureTrack("ATK", leaps, list(range(len(leaps))))


def harmonic_noise_split(spec, partials):
    """(HAE, NOE, NSN) for one voiced frame.

    Total frame energy is taken from the unwindowed time-domain RMS and
    expressed in summed-sine-amplitude-squared units (2·power), which makes
    it directly comparable with Σ a_h².
    """
    if len(partials) == 0:
        return None
    hae = float(np.sum(partials.amps ** 2))
    total = 2.0 * spec.frame_rms ** 2
    if total <= 0.0:
        return None
    noe = max(total - hae, 0.0)
    return hae, noe, noe / total


def harmonic_spectral_deviation(partials):
    """Mean absolute deviation of partial amplitudes from their 3-point
    moving mean (2-point at the endpoints); needs >= 3 partials."""
    a = partials.amps
    if len(a) < 3:
        return None
    se = np.empty_like(a)
    se[0] = 0.5 * (a[0] + a[1])
    se[-1] = 0.5 * (a[-2] + a[-1])
    se[1:-1] = (a[:-2] + a[1:-1] + a[2:]) / 3.0
    return float(np.mean(np.abs(a - se)))


def brightness(spec, cutoff=1000.0):
    """Fraction of spectral energy strictly above the cutoff frequency."""
    e = spec.magnitudes ** 2
    total = e.sum()
    if total <= 0.0:
        return None
    return float(e[spec.bin_freqs > cutoff].sum() / total)


def tristimulus(partials):
    """(T1, T2, T3): energy fractions of h=1, h=2..4, and h>=5."""
    if len(partials) == 0:
        return None
    e = partials.amps ** 2
    total = e.sum()
    if total <= 0.0:
        return None
    h = partials.harmonics
    t1 = e[h == 1].sum() / total
    t2 = e[(h >= 2) & (h <= 4)].sum() / total
    t3 = e[h >= 5].sum() / total
    return float(t1), float(t2), float(t3)


def inharmonicity(partials):
    """Energy-weighted partial deviation from the harmonic series, / (f0/2)."""
    if len(partials) < 2 or partials.f0 <= 0:
        return None
    e = partials.amps ** 2
    dev = np.abs(partials.freqs - partials.harmonics * partials.f0)
    return float((2.0 / partials.f0) * np.sum(e * dev) / np.sum(e))


def _plomp_levelt(f1, f2):
    """Pairwise sensory-dissonance weight for two partial frequencies."""
    s = 0.24 / (0.0207 * np.minimum(f1, f2) + 18.96)
    df = np.abs(f1 - f2)
    return np.exp(-3.5 * s * df) - np.exp(-5.75 * s * df)


def roughness(partials, normalized=False):
    """Summed pairwise Plomp-Levelt dissonance, amplitude-product weighted."""
    n = len(partials)
    if n == 0:
        return None
    if n == 1:
        return 0.0
    f = partials.freqs
    a = partials.amps
    iu, ju = np.triu_indices(n, k=1)
    w = a[iu] * a[ju]
    total = np.sum(w * _plomp_levelt(f[iu], f[ju]))
    if normalized:
        wsum = np.sum(w)
        return float(total / wsum) if wsum > 0 else 0.0
    return float(total)


def odd_even_ratio(partials, cap=100.0):
    """Odd-over-even harmonic energy ratio, clamped to [1/cap, cap]."""
    if len(partials) < 2:
        return None
    e = partials.amps ** 2
    odd = e[partials.harmonics % 2 == 1].sum()
    even = e[partials.harmonics % 2 == 0].sum()
    if even <= 0.0:
        return float(cap)
    return float(np.clip(odd / even, 1.0 / cap, cap))


def extract_features(clip, config):
    """Run the full per-recording chain and return the named scalar map.

    BPM_nn equals the raw BPM here; the two only diverge at normalization
    time (global vs per-performer z-scoring).
    """
    clip = normalize_silence(clip, pad=config.silence_pad,
                             threshold_db=config.silence_db)
    env = dsp.amplitude_envelope(clip, hop=config.hop,
                                 smooth=config.envelope_smooth)
    onsets = dsp.detect_onsets(env, min_gap=config.onset_min_gap,
                               mad_k=config.onset_mad_k)
    tempo = bpm(onsets)

    vec = {
        "BPM": tempo,
        "BPM_nn": tempo,
        "RMS": rms_global(clip, config.silence_db),
        "LOW": low_energy(clip, config.low_energy_frame, config.silence_db),
    }

    tracks = {name: [] for name in TRACKED}
    tracks["T2"] = []
    tracks["ATK"] = attack_leaps(env, onsets).values

    frames = dsp.frame_signal(clip.samples, config.frame_size, config.hop)
    freqs, mags, rms = dsp.magnitude_spectrogram(frames, clip.sample_rate,
                                                 config.window)
    for k in range(frames.shape[0]):
        spec = dsp.Spectrum(bin_freqs=freqs, magnitudes=mags[k], frame_index=k,
                            frame_rms=float(rms[k]), window=config.window,
                            frame_size=config.frame_size)
        f0 = dsp.estimate_f0(spec, search=(config.f0_min, config.f0_max),
                             order=config.hps_order, salience=config.hps_salience,
                             silence_db=config.silence_db)
        if f0 is None:
            continue
        ebf = brightness(spec, config.brightness_cutoff)
        if ebf is not None:
            tracks["EBF"].append(ebf)
        partials = dsp.extract_partials(spec, f0, max_h=config.max_harmonics,
                                        tol=config.partial_tol,
                                        floor_db=config.peak_floor_db)
        split = harmonic_noise_split(spec, partials)
        if split is not None:
            tracks["HAE"].append(split[0])
            tracks["NOE"].append(split[1])
            tracks["NSN"].append(split[2])
        hrd = harmonic_spectral_deviation(partials)
        if hrd is not None:
            tracks["HRD"].append(hrd)
        tri = tristimulus(partials)
        if tri is not None:
            tracks["T1"].append(tri[0])
            tracks["T2"].append(tri[1])
            tracks["T3"].append(tri[2])
        inh = inharmonicity(partials)
        if inh is not None:
            tracks["INH"].append(inh)
        roh = roughness(partials, normalized=config.roughness_normalized)
        if roh is not None:
            tracks["ROH"].append(roh)
        oer = odd_even_ratio(partials, cap=config.oer_cap)
        if oer is not None:
            tracks["OER"].append(oer)

    wanted = TRACKED + (("T2",) if config.include_t2 else ())
    for name in wanted:
        values = tracks[name]
        if not values:
            raise FeatureUndefinedError(f"no values for feature {name}")
        m, iqr = summarize_track(values)
        vec[f"{name}_M"] = m
        vec[f"{name}_IQR"] = iqr
    return vec
