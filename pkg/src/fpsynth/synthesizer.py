"""Heuristic augmentation of surveyed data, mimicking temporal signal variation.

Two effects are simulated: channel noise (Gaussian jitter on detected readings)
and flaky weak transmitters (readings under a threshold zeroed out). Absent
transmitters are never resurrected: a zero entry stays exactly zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import Fingerprint, FingerprintDataset, make_dataset
from .errors import ConfigError, ConsistencyError
from .initializer import LocationSplit


@dataclass(frozen=True)
class AugmentationConfig:
    """Knobs for replica generation, all on the normalized RSS scale."""

    noise_sigma: float = 0.02
    drop_threshold: float = 0.15
    replicas_per_sample: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 <= self.drop_threshold < 1.0:
            raise ConfigError(f"drop_threshold must be in [0, 1), got {self.drop_threshold}")
        if self.replicas_per_sample < 0:
            raise ConfigError(
                f"replicas_per_sample must be >= 0, got {self.replicas_per_sample}"
            )


def inject_gaussian_noise(
    fp: Fingerprint, sigma: float, rng: np.random.Generator, detect_floor: float = 0.1
) -> Fingerprint:
    """Add N(0, sigma^2) to each detected entry, clamped to [detect_floor, 1].

    Zero entries (absent transmitters) are untouched; the location is kept.
    """
    if sigma < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma}")
    rss = np.array(fp.rss)
    detected = rss > 0.0
    noisy = np.clip(rss + rng.standard_normal(rss.shape) * sigma, detect_floor, 1.0)
    rss = np.where(detected, noisy, 0.0)
    return Fingerprint(rss, fp.location, fp.collector_id)


def drop_weak_transmitters(fp: Fingerprint, threshold: float) -> Fingerprint:
    """Zero out detected entries strictly below `threshold`; idempotent."""
    if not 0.0 <= threshold < 1.0:
        raise ConfigError(f"threshold must be in [0, 1), got {threshold}")
    rss = np.array(fp.rss)
    rss = np.where((rss > 0.0) & (rss < threshold), 0.0, rss)
    return Fingerprint(rss, fp.location, fp.collector_id)


def augment_seen(
    data: FingerprintDataset, split: LocationSplit, cfg: AugmentationConfig
) -> FingerprintDataset:
    """Originals at seen locations plus `replicas_per_sample` noisy copies each.

    Replicas go through noise injection first, then weak-transmitter dropout,
    so that jitter can push a borderline reading under the threshold. Samples
    at unseen locations are excluded entirely. Replica RNG streams are derived
    per source sample, so output is independent of any parallel scheduling.
    """
    seen_set = set(split.seen)
    data_locs = set(data.locations)
    missing = seen_set - data_locs
    if missing:
        raise ConsistencyError(
            f"split references {len(missing)} seen coordinate(s) absent from the dataset, "
            f"e.g. {sorted(missing)[0]}"
        )
    floor = data.norm_params.detect_floor
    if cfg.drop_threshold < floor:
        warnings.warn(
            f"drop_threshold {cfg.drop_threshold} is below detect_floor {floor}; "
            "dropout will be a no-op",
            stacklevel=2,
        )
    originals = [s for s in data.samples if s.location in seen_set]
    children = np.random.SeedSequence(cfg.seed).spawn(len(originals))
    out = list(originals)
    for src, child in zip(originals, children):
        rng = np.random.default_rng(child)
        for _ in range(cfg.replicas_per_sample):
            fp = inject_gaussian_noise(src, cfg.noise_sigma, rng, floor)
            fp = drop_weak_transmitters(fp, cfg.drop_threshold)
            out.append(fp)
    return make_dataset(out, data.ap_count, data.norm_params)
