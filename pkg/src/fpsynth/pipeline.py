"""End-to-end experiment orchestration.

Flow: build (or load) data -> split locations -> heuristically augment seen
samples -> train the diffusion generator (if selected) -> generate the unseen
map -> merge into the full fingerprint map -> fit the localizer -> evaluate on
the held-out test set.

Every stochastic stage draws its seed deterministically from the experiment
seed, so a monolithic run and the equivalent staged CLI run (which passes
datasets through files) produce identical results; datasets are canonicalized
through the file codec at stage boundaries to keep that exact.

Test protocol: for the synthetic source, an independent draw at ALL grid
locations with a fresh seed; for file sources, a per-location holdout of
`file_test_fraction` of each location's samples (seeded shuffle).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import knn_spatial_interpolate
from .config import ExperimentConfig
from .dataset import (
    Coordinate,
    Fingerprint,
    FingerprintDataset,
    SyntheticEnvironment,
    canonicalize_dataset,
    generate_synthetic,
    load_dataset,
    make_dataset,
    merge_datasets,
)
from .diffusion import TrainResult, generate_unseen_map, train
from .errors import ConfigError, FpsynthError, SizeError, StageError
from .initializer import (
    LocationSplit,
    select_unseen_density,
    select_unseen_grid,
    select_unseen_random,
)
from .localizer import LocalizationReport, evaluate, fit_localizer
from .synthesizer import augment_seen


_STAGES = {
    "env": 0,
    "data": 1,
    "test": 2,
    "split": 3,
    "augment": 4,
    "train": 5,
    "generate": 6,
    "fit": 7,
}


def stage_seed(base_seed: int, stage: str) -> int:
    """Derive a per-stage integer seed from the experiment seed."""
    ss = np.random.SeedSequence((int(base_seed), _STAGES[stage]))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class ExperimentResult:
    report: LocalizationReport
    collection_overhead_min: float
    n_seen: int
    n_unseen: int
    split: LocationSplit
    config: ExperimentConfig
    wall_seconds: float = field(compare=False)


def collection_overhead(n_seen: int, minutes_per_location: float) -> float:
    """Survey cost in minutes: exactly n_seen * minutes_per_location."""
    if n_seen < 0:
        raise SizeError(f"n_seen must be >= 0, got {n_seen}")
    return n_seen * minutes_per_location


def synthetic_grid(cfg: ExperimentConfig) -> list[Coordinate]:
    s = cfg.synth
    return [
        Coordinate(s.width_m * ix / (s.grid_nx - 1), s.height_m * iy / (s.grid_ny - 1))
        for iy in range(s.grid_ny)
        for ix in range(s.grid_nx)
    ]


def build_environment(cfg: ExperimentConfig) -> SyntheticEnvironment:
    """AP positions are drawn once per experiment seed ('env' stage)."""
    s = cfg.synth
    rng = np.random.default_rng(stage_seed(cfg.seed, "env"))
    ap_xy = rng.random((s.ap_count, 2)) * np.array([s.width_m, s.height_m])
    return SyntheticEnvironment(
        ap_positions=tuple(Coordinate(float(x), float(y)) for x, y in ap_xy),
        tx_power_dbm=s.tx_power_dbm,
        path_loss_exponent=s.path_loss_exponent,
        shadowing_sigma_db=s.shadowing_sigma_db,
        reference_distance_m=s.reference_distance_m,
        detection_threshold_dbm=s.detection_threshold_dbm,
    )


def build_data(cfg: ExperimentConfig) -> tuple[FingerprintDataset, FingerprintDataset]:
    """(train pool, test set) for the configured source; seed-deterministic."""
    if cfg.source == "synthetic":
        env = build_environment(cfg)
        grid = synthetic_grid(cfg)
        train_pool = generate_synthetic(
            env, grid, cfg.synth.samples_per_location, stage_seed(cfg.seed, "data"), cfg.norm
        )
        test_set = generate_synthetic(
            env, grid, cfg.synth.test_samples_per_location, stage_seed(cfg.seed, "test"), cfg.norm
        )
        return train_pool, test_set
    full = load_dataset(cfg.file_path, cfg.norm)
    return _holdout_split(full, cfg.file_test_fraction, stage_seed(cfg.seed, "test"))


def _holdout_split(full, test_fraction, seed):
    rng = np.random.default_rng(seed)
    by_loc: dict[Coordinate, list[int]] = {}
    for i, s in enumerate(full.samples):
        by_loc.setdefault(s.location, []).append(i)
    test_idx: set[int] = set()
    for loc in full.locations:
        idx = by_loc[loc]
        n_test = int(len(idx) * test_fraction)
        if n_test:
            chosen = rng.choice(len(idx), size=n_test, replace=False)
            test_idx.update(idx[int(c)] for c in chosen)
    train_samples = [s for i, s in enumerate(full.samples) if i not in test_idx]
    test_samples = [s for i, s in enumerate(full.samples) if i in test_idx]
    if not train_samples or not test_samples:
        raise SizeError("file holdout produced an empty train or test set")
    return (
        make_dataset(train_samples, full.ap_count, full.norm_params),
        make_dataset(test_samples, full.ap_count, full.norm_params),
    )


def compute_split(cfg: ExperimentConfig, locations) -> LocationSplit:
    locations = list(locations)
    n = len(locations)
    n_unseen = int(cfg.unseen_fraction * n + 0.5)
    if cfg.split_strategy == "density":
        n_seen = n - n_unseen
        if n_seen < cfg.density.k_neighbors + 1:
            raise ConfigError(
                f"unseen_fraction {cfg.unseen_fraction} leaves {n_seen} seen locations; "
                f"density selection needs at least k_neighbors+1 = {cfg.density.k_neighbors + 1}"
            )
        return select_unseen_density(locations, n_unseen, cfg.density)
    if cfg.split_strategy == "random":
        return select_unseen_random(locations, n_unseen, stage_seed(cfg.seed, "split"))
    return select_unseen_grid(locations, n_unseen)


def _interpolated_map(aug, split, cfg) -> FingerprintDataset:
    samples: list[Fingerprint] = []
    for loc in split.unseen:
        fp = knn_spatial_interpolate(aug, loc, cfg.interpolator_k)
        samples.extend([fp] * cfg.samples_per_unseen)
    return FingerprintDataset(tuple(samples), aug.ap_count, aug.norm_params, tuple(split.unseen))


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run the full pipeline once. Deterministic given cfg (wall time aside)."""
    t0 = time.perf_counter()
    with _stage("data"):
        train_pool, test_set = build_data(cfg)
    with _stage("split"):
        split = compute_split(cfg, train_pool.locations)
    with _stage("augment"):
        aug_cfg = replace(cfg.augment, seed=stage_seed(cfg.seed, "augment"))
        aug = canonicalize_dataset(augment_seen(train_pool, split, aug_cfg))
    generated: FingerprintDataset | None = None
    if split.unseen and cfg.augmenter == "diffusion":
        with _stage("train-diffusion"):
            diff_cfg = replace(cfg.diffusion, seed=stage_seed(cfg.seed, "train"))
            result: TrainResult = train(aug, split, diff_cfg)
        with _stage("generate"):
            generated = canonicalize_dataset(
                generate_unseen_map(
                    result.network,
                    split,
                    result.schedule,
                    cfg.samples_per_unseen,
                    stage_seed(cfg.seed, "generate"),
                    cfg.norm,
                )
            )
    elif split.unseen and cfg.augmenter == "interpolator":
        with _stage("generate"):
            generated = canonicalize_dataset(_interpolated_map(aug, split, cfg))
    # augmenter == "none" (or no unseen locations): the map is the seen data alone
    with _stage("evaluate"):
        fingerprint_map = merge_datasets(aug, generated) if generated is not None else aug
        model = fit_localizer(
            fingerprint_map, cfg.localizer_variant, cfg.localizer, stage_seed(cfg.seed, "fit")
        )
        report = evaluate(model, test_set)
    return ExperimentResult(
        report=report,
        collection_overhead_min=collection_overhead(len(split.seen), cfg.minutes_per_location),
        n_seen=len(split.seen),
        n_unseen=len(split.unseen),
        split=split,
        config=cfg,
        wall_seconds=time.perf_counter() - t0,
    )


class _stage:
    """Attach the stage name to any package error raised inside the block."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, FpsynthError) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def sweep_ratio(cfg: ExperimentConfig, fractions) -> list[ExperimentResult]:
    """run_experiment per unseen fraction, sharing the base seed."""
    return [run_experiment(replace(cfg, unseen_fraction=float(f))) for f in fractions]


def save_sweep(results, path) -> None:
    lines = ["unseen_fraction,n_seen,n_unseen,collection_overhead_min,mean_error_m,median_error_m"]
    for r in results:
        lines.append(
            ",".join(
                [
                    repr(float(r.config.unseen_fraction)),
                    str(r.n_seen),
                    str(r.n_unseen),
                    repr(float(r.collection_overhead_min)),
                    repr(float(r.report.mean_error_m)),
                    repr(float(r.report.median_error_m)),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
