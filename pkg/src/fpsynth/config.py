"""Experiment configuration: flat `section.key = value` text files.

Every key has a default; a config file only lists what it changes. Unknown
keys are rejected by name. Values are plain scalars except comma-separated
integer tuples (network widths) and the literal `auto` for sigma_w.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .dataset import NormalizationParams
from .diffusion import DiffusionTrainConfig
from .errors import ConfigError, ParseError
from .initializer import DensityParams
from .localizer import LocalizerHyperparams
from .synthesizer import AugmentationConfig


@dataclass(frozen=True)
class SyntheticSpec:
    """Grid geometry and radio parameters of the synthetic benchmark world."""

    grid_nx: int = 10
    grid_ny: int = 10
    width_m: float = 50.0
    height_m: float = 50.0
    ap_count: int = 20
    tx_power_dbm: float = -30.0
    path_loss_exponent: float = 2.5
    shadowing_sigma_db: float = 4.0
    reference_distance_m: float = 1.0
    detection_threshold_dbm: float = -95.0
    samples_per_location: int = 8
    test_samples_per_location: int = 4

    def __post_init__(self):
        if self.grid_nx < 2 or self.grid_ny < 2:
            raise ConfigError("grid_nx and grid_ny must be >= 2")
        if self.width_m <= 0 or self.height_m <= 0:
            raise ConfigError("width_m and height_m must be > 0")
        if self.samples_per_location < 1 or self.test_samples_per_location < 1:
            raise ConfigError("samples per location must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    source: str = "synthetic"  # synthetic | file
    file_path: str | None = None
    file_test_fraction: float = 0.25
    norm: NormalizationParams = field(default_factory=NormalizationParams)
    synth: SyntheticSpec = field(default_factory=SyntheticSpec)
    split_strategy: str = "density"  # density | random | grid
    unseen_fraction: float = 0.5
    density: DensityParams = field(default_factory=DensityParams)
    augment: AugmentationConfig = field(default_factory=AugmentationConfig)
    augmenter: str = "diffusion"  # diffusion | interpolator | none
    samples_per_unseen: int = 8
    interpolator_k: int = 3
    diffusion: DiffusionTrainConfig = field(default_factory=DiffusionTrainConfig)
    localizer_variant: str = "knn"
    localizer: LocalizerHyperparams = field(default_factory=LocalizerHyperparams)
    minutes_per_location: float = 12.0 / 7.0
    seed: int = 0

    def __post_init__(self):
        if self.source not in ("synthetic", "file"):
            raise ConfigError(f"data.source must be 'synthetic' or 'file', got {self.source!r}")
        if self.source == "file" and not self.file_path:
            raise ConfigError("data.source=file requires data.file.path")
        if not 0.0 < self.file_test_fraction < 1.0:
            raise ConfigError(
                f"data.file.test_fraction must be in (0, 1), got {self.file_test_fraction}"
            )
        if self.split_strategy not in ("density", "random", "grid"):
            raise ConfigError(f"unknown split.strategy {self.split_strategy!r}")
        if not 0.0 <= self.unseen_fraction < 1.0:
            raise ConfigError(
                f"split.unseen_fraction must be in [0, 1), got {self.unseen_fraction}"
            )
        if self.augmenter not in ("diffusion", "interpolator", "none"):
            raise ConfigError(f"unknown augmenter.kind {self.augmenter!r}")
        if self.samples_per_unseen < 1:
            raise ConfigError("augmenter.samples_per_unseen must be >= 1")
        if self.interpolator_k < 1:
            raise ConfigError("augmenter.interpolator_k must be >= 1")
        if self.localizer_variant not in ("knn", "feedforward"):
            raise ConfigError(f"unknown localizer.variant {self.localizer_variant!r}")
        if self.minutes_per_location <= 0:
            raise ConfigError("overhead.minutes_per_location must be > 0")


# ---------------------------------------------------------------------------
# Flat-key schema: key -> (parser, target path)


def _parse_int(s: str) -> int:
    return int(s)


def _parse_float(s: str) -> float:
    return float(s)


def _parse_str(s: str) -> str:
    return s


def _parse_int_tuple(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in s.split(",") if p.strip())


def _parse_sigma_w(s: str):
    return None if s == "auto" else float(s)


_SCHEMA: dict[str, tuple] = {
    "data.source": (_parse_str, "source"),
    "data.file.path": (_parse_str, "file_path"),
    "data.file.test_fraction": (_parse_float, "file_test_fraction"),
    "norm.rss_min": (_parse_float, "norm.rss_min"),
    "norm.rss_max": (_parse_float, "norm.rss_max"),
    "norm.sentinel": (_parse_float, "norm.sentinel_raw"),
    "norm.detect_floor": (_parse_float, "norm.detect_floor"),
    "synth.grid_nx": (_parse_int, "synth.grid_nx"),
    "synth.grid_ny": (_parse_int, "synth.grid_ny"),
    "synth.width_m": (_parse_float, "synth.width_m"),
    "synth.height_m": (_parse_float, "synth.height_m"),
    "synth.ap_count": (_parse_int, "synth.ap_count"),
    "synth.tx_power_dbm": (_parse_float, "synth.tx_power_dbm"),
    "synth.path_loss_exponent": (_parse_float, "synth.path_loss_exponent"),
    "synth.shadowing_sigma_db": (_parse_float, "synth.shadowing_sigma_db"),
    "synth.reference_distance_m": (_parse_float, "synth.reference_distance_m"),
    "synth.detection_threshold_dbm": (_parse_float, "synth.detection_threshold_dbm"),
    "synth.samples_per_location": (_parse_int, "synth.samples_per_location"),
    "synth.test_samples_per_location": (_parse_int, "synth.test_samples_per_location"),
    "split.strategy": (_parse_str, "split_strategy"),
    "split.unseen_fraction": (_parse_float, "unseen_fraction"),
    "split.k_neighbors": (_parse_int, "density.k_neighbors"),
    "split.batch_per_iteration": (_parse_int, "density.batch_per_iteration"),
    "augment.noise_sigma": (_parse_float, "augment.noise_sigma"),
    "augment.drop_threshold": (_parse_float, "augment.drop_threshold"),
    "augment.replicas_per_sample": (_parse_int, "augment.replicas_per_sample"),
    "augmenter.kind": (_parse_str, "augmenter"),
    "augmenter.samples_per_unseen": (_parse_int, "samples_per_unseen"),
    "augmenter.interpolator_k": (_parse_int, "interpolator_k"),
    "diffusion.T": (_parse_int, "diffusion.T"),
    "diffusion.beta_start": (_parse_float, "diffusion.beta_start"),
    "diffusion.beta_end": (_parse_float, "diffusion.beta_end"),
    "diffusion.learning_rate": (_parse_float, "diffusion.learning_rate"),
    "diffusion.lr_decay": (_parse_float, "diffusion.lr_decay"),
    "diffusion.batch_size": (_parse_int, "diffusion.batch_size"),
    "diffusion.epochs": (_parse_int, "diffusion.epochs"),
    "diffusion.sigma_w": (_parse_sigma_w, "diffusion.sigma_w"),
    "diffusion.kernel": (_parse_str, "diffusion.kernel"),
    "diffusion.hidden": (_parse_int_tuple, "diffusion.hidden"),
    "diffusion.activation": (_parse_str, "diffusion.activation"),
    "diffusion.cond_freqs": (_parse_int, "diffusion.cond_freqs"),
    "diffusion.time_dim": (_parse_int, "diffusion.time_dim"),
    "diffusion.optimizer": (_parse_str, "diffusion.optimizer"),
    "localizer.variant": (_parse_str, "localizer_variant"),
    "localizer.k": (_parse_int, "localizer.k"),
    "localizer.hidden": (_parse_int_tuple, "localizer.hidden"),
    "localizer.learning_rate": (_parse_float, "localizer.learning_rate"),
    "localizer.epochs": (_parse_int, "localizer.epochs"),
    "localizer.batch_size": (_parse_int, "localizer.batch_size"),
    "overhead.minutes_per_location": (_parse_float, "minutes_per_location"),
    "seed": (_parse_int, "seed"),
}


def parse_flat_config(text: str, origin: str = "<config>") -> dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment; duplicates are errors."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(f"{origin}: line {lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ParseError(f"{origin}: line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"{origin}: line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config_file(path) -> dict[str, str]:
    return parse_flat_config(Path(path).read_text(encoding="utf-8"), origin=str(path))


def build_experiment_config(flat: dict[str, str]) -> ExperimentConfig:
    """Validate keys against the schema and assemble an ExperimentConfig."""
    for key in flat:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
    top: dict = {}
    nested: dict[str, dict] = {"norm": {}, "synth": {}, "augment": {}, "diffusion": {}, "localizer": {}, "density": {}}
    for key, raw in flat.items():
        parser, target = _SCHEMA[key]
        try:
            value = parser(raw)
        except ValueError as e:
            raise ConfigError(f"config key {key!r}: bad value {raw!r} ({e})") from e
        if "." in target:
            section, attr = target.split(".", 1)
            nested[section][attr] = value
        else:
            top[target] = value
    cfg = ExperimentConfig(
        norm=NormalizationParams(**nested["norm"]),
        synth=SyntheticSpec(**nested["synth"]),
        density=DensityParams(**nested["density"]),
        augment=AugmentationConfig(**nested["augment"]),
        diffusion=DiffusionTrainConfig(**nested["diffusion"]),
        localizer=LocalizerHyperparams(**nested["localizer"]),
        **top,
    )
    return cfg


def apply_overrides(flat: dict[str, str], overrides) -> dict[str, str]:
    """Apply `key=value` strings on top of a parsed config dict."""
    out = dict(flat)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve_config(path=None, overrides=(), seed=None) -> ExperimentConfig:
    """Config file (optional) + --set overrides + --seed flag -> ExperimentConfig."""
    flat = load_config_file(path) if path else {}
    flat = apply_overrides(flat, overrides)
    cfg = build_experiment_config(flat)
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    return cfg
