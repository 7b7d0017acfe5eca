"""Pipeline configuration: one flat key/value file drives every stage.

The file format is deliberately plain text, one ``key = value`` per line,
``#`` for comments.  Unknown keys are rejected so that typos never silently
fall back to defaults.
"""

from dataclasses import dataclass, fields, asdict

from .errors import ConfigError

SCHEMA_VERSION = 1


@dataclass
class PipelineConfig:
    schema_version: int = SCHEMA_VERSION

    # dsp-core
    frame_size: int = 2048
    hop: int = 512
    window: str = "hann"           # hann | rectangular
    f0_min: float = 40.0
    f0_max: float = 500.0
    hps_order: int = 5
    hps_salience: float = 1.5      # log10 peak-over-median salience gate
    max_harmonics: int = 20
    partial_tol: float = 0.03
    peak_floor_db: float = -60.0   # partial peaks below this (rel. spectrum max) are dropped
    silence_db: float = -60.0      # moving-RMS silence threshold, dBFS
    silence_pad: float = 0.5
    envelope_smooth: float = 0.020
    onset_mad_k: float = 3.0
    onset_min_gap: float = 0.080

    # features
    low_energy_frame: float = 0.050
    brightness_cutoff: float = 1000.0
    oer_cap: float = 100.0
    include_t2: bool = False
    roughness_normalized: bool = False

    # stats
    alpha: float = 0.05
    posthoc: str = "welch"         # welch | welch-bonferroni

    # classify
    svm_c: float = 1.0
    kernel: str = "linear"         # linear | rbf
    rbf_gamma: float = 0.1
    pca_refit: bool = True
    subset_use_bpm_nn: bool = False

    # dataset
    quantile_convention: str = "linear"

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.frame_size <= 0 or self.frame_size & (self.frame_size - 1):
            raise ConfigError("frame_size must be a positive power of two")
        if not 0 < self.hop <= self.frame_size:
            raise ConfigError("hop must satisfy 0 < hop <= frame_size")
        if self.window not in ("hann", "rectangular"):
            raise ConfigError(f"unknown window {self.window!r}")
        if not 0 < self.f0_min < self.f0_max:
            raise ConfigError("need 0 < f0_min < f0_max")
        if not 0 < self.partial_tol < 0.5:
            raise ConfigError("partial_tol must be in (0, 0.5)")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        if self.posthoc not in ("welch", "welch-bonferroni"):
            raise ConfigError(f"unknown posthoc method {self.posthoc!r}")
        if self.svm_c <= 0:
            raise ConfigError("svm_c must be positive")
        if self.kernel not in ("linear", "rbf"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.oer_cap <= 1:
            raise ConfigError("oer_cap must exceed 1")
        if self.quantile_convention != "linear":
            raise ConfigError("only the 'linear' quantile convention is implemented")
        return self


def _parse_value(raw, ftype):
    raw = raw.strip()
    if ftype is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected boolean, got {raw!r}")
    try:
        return ftype(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r}: {exc}") from exc


def load_config(path):
    """Read a flat key/value config file; unknown keys raise ConfigError."""
    known = {f.name: f.type for f in fields(PipelineConfig)}
    types = {"int": int, "float": float, "str": str, "bool": bool,
             int: int, float: float, str: str, bool: bool}
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = line.split("=", 1)
            key = key.strip()
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(raw, types[known[key]])
    return PipelineConfig(**values).validate()


def save_config(cfg, path):
    """Serialize a config to the flat key/value format (round-trips load_config)."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in asdict(cfg).items():
            fh.write(f"{key} = {value}\n")


def config_as_dict(cfg):
    return asdict(cfg)
