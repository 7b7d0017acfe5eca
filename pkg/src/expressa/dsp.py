"""Signal-analysis substrate: framing, spectra, f0, partials, envelope, onsets.

All functions are pure; frame-level work is independent across frames, so
callers may parallelize freely and reassemble by frame index.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError, InputTooShortError

_EPS = 1e-12


@dataclass(frozen=True)
class Spectrum:
    bin_freqs: np.ndarray
    magnitudes: np.ndarray      # scaled so a full-scale sine reports its amplitude
    frame_index: int
    frame_rms: float            # unwindowed time-domain RMS of the frame
    window: str
    frame_size: int

    @property
    def bin_width(self):
        return float(self.bin_freqs[1] - self.bin_freqs[0])


@dataclass(frozen=True)
class PartialSet:
    f0: float
    harmonics: np.ndarray       # int harmonic indices, strictly increasing
    freqs: np.ndarray           # Hz
    amps: np.ndarray            # linear amplitude

    def __len__(self):
        return len(self.harmonics)


@dataclass(frozen=True)
class Envelope:
    times: np.ndarray
    values: np.ndarray
    hop_seconds: float


@dataclass(frozen=True)
class OnsetList:
    onsets: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self):
        return len(self.onsets)


def make_window(name, n):
    if name == "hann":
        # periodic form: exact amplitude recovery for on-bin sines
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    if name == "rectangular":
        return np.ones(n)
    raise ConfigError(f"unknown window {name!r}")


def frame_signal(samples, frame_size, hop):
    """Split into overlapping frames; the last partial frame is zero-padded."""
    samples = np.asarray(samples, dtype=np.float64)
    if frame_size > len(samples):
        raise InputTooShortError(
            f"signal of {len(samples)} samples shorter than frame {frame_size}")
    if hop <= 0 or hop > frame_size:
        raise ConfigError("need 0 < hop <= frame_size")
    n_frames = int(np.ceil((len(samples) - frame_size) / hop)) + 1
    out = np.zeros((n_frames, frame_size))
    for k in range(n_frames):
        chunk = samples[k * hop:k * hop + frame_size]
        out[k, :len(chunk)] = chunk
    return out


def magnitude_spectrum(frame, sample_rate, window="hann", frame_index=0):
    """Single-sided magnitude spectrum, scaled by 2/sum(window)."""
    frame = np.asarray(frame, dtype=np.float64)
    n = len(frame)
    if n & (n - 1):
        raise ConfigError(f"frame length {n} is not a power of two")
    w = make_window(window, n)
    mags = np.abs(np.fft.rfft(frame * w)) * (2.0 / w.sum())
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    return Spectrum(bin_freqs=freqs, magnitudes=mags, frame_index=frame_index,
                    frame_rms=float(np.sqrt(np.mean(frame ** 2))),
                    window=window, frame_size=n)


def magnitude_spectrogram(frames, sample_rate, window="hann"):
    """Vectorized magnitude_spectrum over a frame matrix; returns (freqs, mags, rms)."""
    frames = np.asarray(frames, dtype=np.float64)
    n = frames.shape[1]
    if n & (n - 1):
        raise ConfigError(f"frame length {n} is not a power of two")
    w = make_window(window, n)
    mags = np.abs(np.fft.rfft(frames * w, axis=1)) * (2.0 / w.sum())
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    return freqs, mags, rms


def windowed_energy(spec):
    """Invert the magnitude scaling back to the windowed-frame energy Σ(w·x)²."""
    w = make_window(spec.window, spec.frame_size)
    unscaled = spec.magnitudes * (w.sum() / 2.0)
    e = unscaled[0] ** 2 + unscaled[-1] ** 2 + 2.0 * np.sum(unscaled[1:-1] ** 2)
    return float(e / spec.frame_size)


def _parabolic(logm, k):
    """Refine a peak at integer bin k on log magnitudes; returns (offset, log_amp)."""
    a, b, c = logm[k - 1], logm[k], logm[k + 1]
    denom = a - 2.0 * b + c
    if denom >= 0.0 or abs(denom) < _EPS:
        return 0.0, b
    p = 0.5 * (a - c) / denom
    p = float(np.clip(p, -0.5, 0.5))
    return p, b - 0.25 * (a - c) * p


def _refine_candidate(spec, logm, k0, order):
    """Refine a coarse HPS bin: energy-weighted mean of per-harmonic
    parabolic peak frequencies divided by their harmonic number.

    Only true local maxima contribute, and a contribution is dropped when
    its implied fundamental falls outside the candidate's pooling slack;
    otherwise the leakage shoulder of a neighbouring harmonic can pull the
    mean several Hz off (classic failure on missing-fundamental tones).
    """
    n_bins = len(spec.magnitudes)
    bw = spec.bin_width
    mags = spec.magnitudes
    num = 0.0
    den = 0.0
    for m in range(1, order + 1):
        center = m * k0
        half = max(1, int(np.ceil(0.5 * m)) + 1)
        a = max(center - half, 1)
        b = min(center + half, n_bins - 2)
        if b < a:
            continue
        band = mags[a:b + 1]
        local = np.flatnonzero((band >= mags[a - 1:b]) & (band >= mags[a + 1:b + 2]))
        if local.size == 0:
            continue
        k = a + int(local[np.argmax(band[local])])
        off, _ = _parabolic(logm, k)
        if abs((k + off) / m - k0) > (np.ceil(0.5 * m) + 0.5) / m:
            continue
        amp = mags[k]
        num += amp * amp * (k + off) * bw / m
        den += amp * amp
    if den <= 0.0:
        return float(k0 * bw)
    return float(num / den)


def _refine_fine(spec, logm, f0, order):
    """Second refinement pass around a coarse f0 estimate.

    Windows are centred on the estimated harmonics with a tight gate on the
    implied fundamental, so candidates seeded from neighbouring coarse bins
    converge to the same value instead of carrying a bin-sized bias into
    the explained-energy tie-break.
    """
    n_bins = len(spec.magnitudes)
    bw = spec.bin_width
    mags = spec.magnitudes
    gate = min(0.45 * bw, 0.9 * f0 / order)
    num = 0.0
    den = 0.0
    for m in range(1, order + 1):
        center = int(round(m * f0 / bw))
        half = int(np.ceil(0.4 * m)) + 1
        a = max(center - half, 1)
        b = min(center + half, n_bins - 2)
        if b < a:
            continue
        band = mags[a:b + 1]
        local = np.flatnonzero((band >= mags[a - 1:b]) & (band >= mags[a + 1:b + 2]))
        if local.size == 0:
            continue
        k = a + int(local[np.argmax(band[local])])
        off, _ = _parabolic(logm, k)
        if abs((k + off) * bw / m - f0) > gate:
            continue
        amp = mags[k]
        num += amp * amp * (k + off) * bw / m
        den += amp * amp
    if den <= 0.0:
        return float(f0)
    return float(num / den)


def _explained_energy(spec, f0, floor, max_h=30):
    """Summed squared magnitudes of spectral peaks lying at multiples of f0.

    A harmonic counts only if a local peak's interpolated frequency falls
    within max(0.6 bins, 1% of the harmonic frequency) of m·f0, so sloppy
    candidates cannot claim off-grid peaks.
    """
    n_bins = len(spec.magnitudes)
    bw = spec.bin_width
    logm = np.log(spec.magnitudes + _EPS)
    total = 0.0
    for m in range(1, max_h + 1):
        target = m * f0
        center = target / bw
        if center >= n_bins - 2:
            break
        a = max(int(round(center)) - 1, 1)
        b = min(int(round(center)) + 1, n_bins - 2)
        k = a + int(np.argmax(spec.magnitudes[a:b + 1]))
        peak = spec.magnitudes[k]
        if peak <= floor:
            continue
        if not (spec.magnitudes[k - 1] <= peak >= spec.magnitudes[k + 1]):
            continue
        off, _ = _parabolic(logm, k)
        if abs((k + off) * bw - target) <= max(0.6 * bw, 0.01 * target):
            total += peak * peak
    return total


def estimate_f0(spec, search=(40.0, 500.0), order=5, salience=1.5,
                silence_db=-60.0):
    """Fundamental frequency via harmonic product spectrum; None when unvoiced.

    The product uses magnitudes floored at -50 dB relative to the spectrum
    maximum and max-pooled over a small drift window per harmonic, which
    keeps low fundamentals from losing product terms to bin rounding.
    Near-tied candidates (classic octave/sub-harmonic ambiguity) are settled
    by how much spectral peak energy each refined f0 explains, preferring
    the higher f0 on effective ties.
    """
    if spec.frame_rms < 10.0 ** (silence_db / 20.0):
        return None
    bw = spec.bin_width
    lo = max(int(np.ceil(search[0] / bw)), 1)
    hi = int(np.floor(search[1] / bw))
    n_bins = len(spec.magnitudes)
    hi = min(hi, (n_bins - 1) // order)
    if hi <= lo:
        return None

    peak_mag = spec.magnitudes.max()
    if peak_mag <= 0.0:
        return None
    # normalize to unit peak so the estimate is exactly amplitude-invariant
    # (the log epsilon below would otherwise break scale invariance)
    spec = replace(spec, magnitudes=spec.magnitudes / peak_mag)
    floor = 10.0 ** (-50.0 / 20.0)
    clamped = np.maximum(spec.magnitudes, floor)
    logm_cl = np.log(clamped)
    logm = np.log(spec.magnitudes + _EPS)

    ks = np.arange(lo, hi + 1)
    hps = np.zeros(len(ks))
    for m in range(1, order + 1):
        delta = int(np.ceil(m / 2))
        pooled = np.empty(len(ks))
        for i, k in enumerate(ks):
            a = max(m * k - delta, 0)
            b = min(m * k + delta + 1, n_bins)
            pooled[i] = logm_cl[a:b].max()
        hps += pooled
    if (hps.max() - np.median(hps)) / np.log(10.0) < salience:
        return None

    margin = 6.0  # about half a product term at the -50 dB floor
    candidates = []
    for k0 in ks[hps >= hps.max() - margin]:
        f0 = _refine_candidate(spec, logm, int(k0), order)
        if f0 > 0:
            f0 = _refine_fine(spec, logm, f0, order)
            candidates.append((_explained_energy(spec, f0, floor), f0))
    if not candidates:
        return None
    e_max = max(e for e, _ in candidates)
    return max(f0 for e, f0 in candidates if e >= 0.95 * e_max)


def _window_response(window, p):
    """Mainlobe magnitude of the analysis window at fractional offset p,
    relative to its on-bin value (continuous-transform approximation)."""
    if abs(p) < 1e-9:
        return 1.0
    s = np.sinc(p)
    if window == "hann":
        if abs(abs(p) - 1.0) < 1e-9:
            return 0.5
        return abs(s / (1.0 - p * p))
    return abs(s)


def extract_partials(spec, f0, max_h=20, tol=0.03, floor_db=-60.0):
    """Pick the largest in-band spectral peak for each harmonic of f0.

    The search band is the tolerance band widened to whole bins (a sub-bin
    band would otherwise lose peaks straddling a bin edge); amplitudes are
    corrected by the known window mainlobe shape at the interpolated offset.
    """
    if f0 <= 0:
        raise DomainError(f"f0 must be positive, got {f0}")
    bw = spec.bin_width
    nyquist = spec.bin_freqs[-1]
    n_bins = len(spec.magnitudes)
    floor = spec.magnitudes.max() * 10.0 ** (floor_db / 20.0)
    logm = np.log(spec.magnitudes + _EPS)

    hs, fs, amps = [], [], []
    for h in range(1, max_h + 1):
        target = h * f0
        if target * (1.0 + tol) >= nyquist:
            break
        a = max(int(np.floor(target * (1.0 - tol) / bw)), 1)
        b = min(int(np.ceil(target * (1.0 + tol) / bw)), n_bins - 2)
        if b < a:
            continue
        band = spec.magnitudes[a:b + 1]
        local = np.flatnonzero(
            (band >= spec.magnitudes[a - 1:b]) & (band >= spec.magnitudes[a + 1:b + 2]))
        if local.size == 0:
            continue
        k = a + int(local[np.argmax(band[local])])
        if spec.magnitudes[k] < floor:
            continue
        off, _ = _parabolic(logm, k)
        hs.append(h)
        fs.append((k + off) * bw)
        amps.append(float(spec.magnitudes[k] / _window_response(spec.window, off)))
    return PartialSet(f0=float(f0), harmonics=np.array(hs, dtype=int),
                      freqs=np.array(fs), amps=np.array(amps))


def amplitude_envelope(clip, hop=512, smooth=0.020):
    """Per-hop RMS over a 2·hop window, one-pole smoothed (time constant `smooth`)."""
    if hop <= 0:
        raise ConfigError("hop must be positive")
    x = clip.samples
    sr = clip.sample_rate
    n = max(1, int(np.ceil(len(x) / hop)))
    raw = np.zeros(n)
    for k in range(n):
        chunk = x[k * hop:k * hop + 2 * hop]
        if chunk.size:
            raw[k] = np.sqrt(np.mean(chunk ** 2))
    hop_dt = hop / sr
    alpha = np.exp(-hop_dt / smooth) if smooth > 0 else 0.0
    values = np.empty(n)
    acc = 0.0
    for k in range(n):
        acc = alpha * acc + (1.0 - alpha) * raw[k]
        values[k] = acc
    times = (np.arange(n) * hop + hop) / sr
    return Envelope(times=times, values=values, hop_seconds=hop_dt)


def detect_onsets(env, min_gap=0.080, mad_k=3.0, min_rise=0.1):
    """Onsets at peaks of the half-wave-rectified log-envelope derivative.

    Threshold is adaptive (median + mad_k·MAD over a 1 s context) with an
    absolute floor `min_rise` in log units to reject numeric jitter on
    steady tones.
    """
    v = env.values
    if len(v) < 3:
        return OnsetList()
    eps = max(v.max() * 1e-4, _EPS)
    d = np.diff(np.log(v + eps))
    d = np.maximum(d, 0.0)

    half = max(1, int(round(0.5 / env.hop_seconds)))
    onsets = []
    last = -np.inf
    for n in range(1, len(d) - 1):
        if not (d[n] > d[n - 1] and d[n] >= d[n + 1]):
            continue
        a, b = max(0, n - half), min(len(d), n + half + 1)
        ctx = d[a:b]
        med = np.median(ctx)
        mad = np.median(np.abs(ctx - med))
        thr = max(med + mad_k * mad, min_rise)
        if d[n] < thr:
            continue
        t = float(env.times[n + 1])  # the frame that has risen
        if t - last >= min_gap:
            onsets.append(t)
            last = t
    return OnsetList(onsets=np.array(onsets))
