"""Downstream localization models used to score fingerprint-map quality.

The kNN variant is the deterministic workhorse: inverse-distance-weighted
average of the k nearest stored fingerprints in RSS space. The feedforward
variant regresses coordinates with a small MLP trained by Adam on squared
coordinate error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Coordinate, FingerprintDataset
from .errors import ConfigError, ParseError, ShapeError, SizeError
from .nets import AdamOptimizer, Mlp


@dataclass(frozen=True)
class LocalizerHyperparams:
    k: int = 5  # knn
    hidden: tuple[int, ...] = (64, 64)  # feedforward
    learning_rate: float = 1e-2
    epochs: int = 150
    batch_size: int = 32

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("learning_rate, epochs, batch_size must be positive")


class KnnLocalizer:
    """Stores the training fingerprints verbatim; variant tag 'knn'."""

    variant = "knn"

    def __init__(self, rss: np.ndarray, coords: np.ndarray, k: int):
        self.rss = rss
        self.coords = coords
        self.k = k

    def predict(self, rss: np.ndarray) -> Coordinate:
        rss = np.asarray(rss, dtype=np.float64)
        if rss.shape != (self.rss.shape[1],):
            raise ShapeError(f"query must have shape ({self.rss.shape[1]},), got {rss.shape}")
        diff = self.rss - rss
        d = np.sqrt(np.sum(diff * diff, axis=1))
        order = np.argsort(d, kind="stable")[: self.k]
        dk = d[order]
        if dk[0] == 0.0:
            i = int(order[0])
            return Coordinate(float(self.coords[i, 0]), float(self.coords[i, 1]))
        w = 1.0 / dk
        xy = (w[:, None] * self.coords[order]).sum(axis=0) / w.sum()
        return Coordinate(float(xy[0]), float(xy[1]))


class FeedforwardLocalizer:
    """MLP regressor RSS -> (x, y); variant tag 'feedforward'."""

    variant = "feedforward"

    def __init__(self, mlp: Mlp):
        self.mlp = mlp

    def predict(self, rss: np.ndarray) -> Coordinate:
        rss = np.asarray(rss, dtype=np.float64)
        if rss.shape != (self.mlp.dims[0],):
            raise ShapeError(f"query must have shape ({self.mlp.dims[0]},), got {rss.shape}")
        xy = self.mlp.forward(rss[None, :])[0]
        return Coordinate(float(xy[0]), float(xy[1]))


LocalizationModel = KnnLocalizer | FeedforwardLocalizer


def fit_localizer(
    train: FingerprintDataset,
    variant: str = "knn",
    hyperparams: LocalizerHyperparams = LocalizerHyperparams(),
    seed: int = 0,
) -> LocalizationModel:
    if len(train) == 0:
        raise SizeError("training dataset is empty")
    if variant == "knn":
        if hyperparams.k > len(train):
            raise ConfigError(f"k={hyperparams.k} exceeds training size {len(train)}")
        return KnnLocalizer(train.rss_matrix(), train.coords_matrix(), hyperparams.k)
    if variant == "feedforward":
        return _fit_feedforward(train, hyperparams, seed)
    raise ConfigError(f"unknown localizer variant {variant!r}")


def _fit_feedforward(train, hp: LocalizerHyperparams, seed) -> FeedforwardLocalizer:
    x = train.rss_matrix()
    y = train.coords_matrix()
    n, a = x.shape
    rng = np.random.default_rng(seed)
    mlp = Mlp.create((a, *hp.hidden, 2), "silu", rng)
    opt = AdamOptimizer(mlp.theta.shape[0], hp.learning_rate)
    for _epoch in range(hp.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, hp.batch_size):
            j = perm[lo : lo + hp.batch_size]
            out, cache = mlp.forward_cached(x[j])
            r = out - y[j]
            dout = (2.0 / j.shape[0]) * r
            opt.step(mlp.theta, mlp.backward(cache, dout))
    return FeedforwardLocalizer(mlp)


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class LocalizationReport:
    mean_error_m: float
    median_error_m: float
    error_cdf: tuple[tuple[float, float], ...]  # (error_m, cumulative fraction)
    per_sample_errors: tuple[float, ...] = field(repr=False)


def evaluate(model: LocalizationModel, test: FingerprintDataset) -> LocalizationReport:
    """Per-sample Euclidean error in meters with mean, median and empirical CDF."""
    if len(test) == 0:
        raise SizeError("test dataset is empty")
    errors = []
    for s in test.samples:
        pred = model.predict(s.rss)
        errors.append(pred.distance_to(s.location))
    arr = np.array(errors)
    values, counts = np.unique(arr, return_counts=True)
    fractions = np.cumsum(counts) / arr.shape[0]
    cdf = tuple((float(v), float(f)) for v, f in zip(values, fractions))
    return LocalizationReport(
        mean_error_m=float(arr.mean()),
        median_error_m=float(np.median(arr)),
        error_cdf=cdf,
        per_sample_errors=tuple(float(e) for e in errors),
    )


def save_report(report: LocalizationReport, path) -> None:
    """Metrics file: summary header+row, then the CDF rows (plot-ready)."""
    lines = [
        "mean_error_m,median_error_m",
        f"{report.mean_error_m!r},{report.median_error_m!r}",
        "error_m,cumulative_fraction",
    ]
    for e, f in report.error_cdf:
        lines.append(f"{e!r},{f!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_report(path) -> LocalizationReport:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 3 or lines[0] != "mean_error_m,median_error_m":
        raise ParseError(f"{path}: not a localization report")
    mean_s, median_s = lines[1].split(",")
    cdf = []
    for line in lines[3:]:
        if not line.strip():
            continue
        e, f = line.split(",")
        cdf.append((float(e), float(f)))
    return LocalizationReport(
        mean_error_m=float(mean_s),
        median_error_m=float(median_s),
        error_cdf=tuple(cdf),
        per_sample_errors=(),
    )
