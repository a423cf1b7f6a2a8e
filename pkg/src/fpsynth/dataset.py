"""Fingerprint datasets: normalization, file I/O, and a synthetic radio oracle.

RSS values are stored normalized to [0, 1]: exactly 0.0 means "transmitter not
detected", detected readings occupy [detect_floor, 1]. The gap (0, detect_floor)
is deliberately empty so that generation noise can never blur the line between
a weak detection and an absent transmitter.

Files keep the raw dBm convention of wide-format survey dumps: one column per
access point (AP001..), then X, Y and an optional COLLECTOR column, with a
sentinel value standing for "not detected". A 520-AP public survey file loads
directly after trivial column selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConsistencyError, ParseError, RangeError, SizeError


@dataclass(frozen=True, order=True)
class Coordinate:
    """A 2-D survey position in meters. Ordering is lexicographic (x, then y)."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise RangeError(f"coordinate must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: "Coordinate") -> float:
        dx = self.x - other.x
        dy = self.y - other.y
        return math.sqrt(dx * dx + dy * dy)


@dataclass(frozen=True)
class NormalizationParams:
    """Affine map between raw dBm readings and the normalized [0, 1] scale.

    sentinel_raw is the raw value meaning "not detected"; it normalizes to
    exactly 0.0. Detected values map onto [detect_floor, 1].
    """

    rss_min: float = -104.0
    rss_max: float = 0.0
    sentinel_raw: float = 100.0
    detect_floor: float = 0.1

    def __post_init__(self):
        if not self.rss_min < self.rss_max:
            raise ConfigError(f"rss_min ({self.rss_min}) must be < rss_max ({self.rss_max})")
        if not 0.0 < self.detect_floor <= 0.5:
            raise ConfigError(f"detect_floor must be in (0, 0.5], got {self.detect_floor}")


@dataclass(frozen=True)
class Fingerprint:
    """One normalized RSS vector tagged with the position it was measured at."""

    rss: np.ndarray
    location: Coordinate
    collector_id: int | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.rss, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "rss", arr)


def normalize_rss(raw: float, params: NormalizationParams) -> float:
    """Map a raw dBm-or-sentinel reading onto {0} ∪ [detect_floor, 1]."""
    if raw == params.sentinel_raw:
        return 0.0
    if not params.rss_min <= raw <= params.rss_max:
        raise RangeError(
            f"raw RSS {raw} outside [{params.rss_min}, {params.rss_max}] and not the sentinel"
        )
    f = params.detect_floor
    v = f + (raw - params.rss_min) / (params.rss_max - params.rss_min) * (1.0 - f)
    return min(max(v, f), 1.0)


def denormalize_rss(v: float, params: NormalizationParams) -> float:
    """Inverse of normalize_rss; values in (0, detect_floor) clamp to the sentinel."""
    if not 0.0 <= v <= 1.0:
        raise RangeError(f"normalized value {v} outside [0, 1]")
    f = params.detect_floor
    if v < f:
        return params.sentinel_raw
    raw = params.rss_min + (v - f) / (1.0 - f) * (params.rss_max - params.rss_min)
    return min(max(raw, params.rss_min), params.rss_max)


def _normalize_array(raw: np.ndarray, params: NormalizationParams) -> np.ndarray:
    f = params.detect_floor
    detected = raw != params.sentinel_raw
    span = params.rss_max - params.rss_min
    v = f + (raw - params.rss_min) / span * (1.0 - f)
    v = np.clip(v, f, 1.0)
    return np.where(detected, v, 0.0)


def _denormalize_array(v: np.ndarray, params: NormalizationParams) -> np.ndarray:
    f = params.detect_floor
    detected = v >= f
    raw = params.rss_min + (v - f) / (1.0 - f) * (params.rss_max - params.rss_min)
    raw = np.clip(raw, params.rss_min, params.rss_max)
    return np.where(detected, raw, params.sentinel_raw)


@dataclass(frozen=True)
class FingerprintDataset:
    """A collection of fingerprints sharing one AP universe and normalization.

    `locations` lists the distinct survey coordinates in first-appearance
    order; every sample's location is one of them.
    """

    samples: tuple[Fingerprint, ...]
    ap_count: int
    norm_params: NormalizationParams
    locations: tuple[Coordinate, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "locations", tuple(self.locations))
        if self.ap_count < 1:
            raise ConfigError(f"ap_count must be positive, got {self.ap_count}")
        if len(set(self.locations)) != len(self.locations):
            raise ConsistencyError("dataset locations must be distinct")
        loc_set = set(self.locations)
        f = self.norm_params.detect_floor
        for i, s in enumerate(self.samples):
            if s.rss.shape != (self.ap_count,):
                raise ConsistencyError(
                    f"sample {i} has {s.rss.shape[0]} RSS entries, expected {self.ap_count}"
                )
            v = s.rss
            ok = (v == 0.0) | ((v >= f) & (v <= 1.0))
            if not ok.all():
                bad = float(v[~ok][0])
                raise RangeError(
                    f"sample {i} has RSS entry {bad} outside {{0}} ∪ [{f}, 1]"
                )
            if s.location not in loc_set:
                raise ConsistencyError(f"sample {i} located at {s.location} which is not in locations")

    def __len__(self) -> int:
        return len(self.samples)

    def rss_matrix(self) -> np.ndarray:
        """All sample RSS vectors stacked into an (N, A) array."""
        if not self.samples:
            return np.zeros((0, self.ap_count))
        return np.stack([s.rss for s in self.samples])

    def coords_matrix(self) -> np.ndarray:
        """Per-sample (x, y) positions as an (N, 2) array."""
        return np.array([[s.location.x, s.location.y] for s in self.samples], dtype=np.float64).reshape(-1, 2)

    def location_coords(self) -> np.ndarray:
        return np.array([[c.x, c.y] for c in self.locations], dtype=np.float64).reshape(-1, 2)

    def bounding_box(self) -> tuple[float, float, float, float]:
        xy = self.location_coords()
        return (
            float(xy[:, 0].min()),
            float(xy[:, 1].min()),
            float(xy[:, 0].max()),
            float(xy[:, 1].max()),
        )

    def subset_at(self, locations) -> "FingerprintDataset":
        """Samples whose location is in `locations` (dataset order preserved)."""
        keep = set(locations)
        samples = tuple(s for s in self.samples if s.location in keep)
        locs = _distinct_locations(samples)
        return FingerprintDataset(samples, self.ap_count, self.norm_params, locs)


def _distinct_locations(samples) -> tuple[Coordinate, ...]:
    seen: dict[Coordinate, None] = {}
    for s in samples:
        seen.setdefault(s.location, None)
    return tuple(seen)


def make_dataset(samples, ap_count: int, params: NormalizationParams) -> FingerprintDataset:
    """Build a dataset, collecting distinct sample locations in first-appearance order."""
    samples = tuple(samples)
    return FingerprintDataset(samples, ap_count, params, _distinct_locations(samples))


def merge_datasets(first: FingerprintDataset, *rest: FingerprintDataset) -> FingerprintDataset:
    """Concatenate datasets sharing ap_count and normalization (order preserved)."""
    samples = list(first.samples)
    for ds in rest:
        if ds.ap_count != first.ap_count:
            raise ConsistencyError(
                f"cannot merge datasets with ap_count {ds.ap_count} and {first.ap_count}"
            )
        if ds.norm_params != first.norm_params:
            raise ConsistencyError("cannot merge datasets with different normalization params")
        samples.extend(ds.samples)
    return make_dataset(samples, first.ap_count, first.norm_params)


def canonicalize_dataset(ds: FingerprintDataset) -> FingerprintDataset:
    """Round every RSS value through the raw-dBm codec.

    Equivalent to saving the dataset and loading it back. The pipeline applies
    this at stage boundaries so a monolithic run and a staged run (which passes
    through files) operate on bit-identical data.
    """
    samples = []
    for s in ds.samples:
        rss = _normalize_array(_denormalize_array(s.rss, ds.norm_params), ds.norm_params)
        samples.append(Fingerprint(rss, s.location, s.collector_id))
    return FingerprintDataset(tuple(samples), ds.ap_count, ds.norm_params, ds.locations)


# ---------------------------------------------------------------------------
# Synthetic radio environment (desk-scale ground-truth oracle)


@dataclass(frozen=True)
class SyntheticEnvironment:
    """Log-distance path-loss world with i.i.d. Gaussian shadowing.

    Raw RSS at distance d from an AP:
        tx_power_dbm - 10 * n * log10(max(d, d0) / d0) + Normal(0, shadowing_sigma_db^2)
    Readings below detection_threshold_dbm are reported as "not detected".
    """

    ap_positions: tuple[Coordinate, ...]
    tx_power_dbm: float = -30.0
    path_loss_exponent: float = 2.5
    shadowing_sigma_db: float = 4.0
    reference_distance_m: float = 1.0
    detection_threshold_dbm: float = -95.0

    def __post_init__(self):
        object.__setattr__(self, "ap_positions", tuple(self.ap_positions))
        if len(self.ap_positions) < 1:
            raise ConfigError("environment needs at least one AP")
        if self.path_loss_exponent <= 0:
            raise ConfigError(f"path_loss_exponent must be > 0, got {self.path_loss_exponent}")
        if self.shadowing_sigma_db < 0:
            raise ConfigError(f"shadowing_sigma_db must be >= 0, got {self.shadowing_sigma_db}")
        if self.reference_distance_m <= 0:
            raise ConfigError(f"reference_distance_m must be > 0, got {self.reference_distance_m}")


def generate_synthetic(
    env: SyntheticEnvironment,
    grid,
    samples_per_location: int,
    seed,
    params: NormalizationParams = NormalizationParams(),
) -> FingerprintDataset:
    """Draw `samples_per_location` fingerprints at every grid coordinate.

    Deterministic given seed. Raw values are clamped into the normalization
    range after the detection threshold is applied, so the effective floor for
    detected readings is max(detection_threshold_dbm, rss_min).
    """
    grid = tuple(grid)
    if not grid:
        raise SizeError("grid must be nonempty")
    if samples_per_location < 1:
        raise ConfigError(f"samples_per_location must be >= 1, got {samples_per_location}")
    rng = np.random.default_rng(seed)
    ap_xy = np.array([[c.x, c.y] for c in env.ap_positions])
    grid_xy = np.array([[c.x, c.y] for c in grid])
    dx = grid_xy[:, 0][:, None] - ap_xy[:, 0][None, :]
    dy = grid_xy[:, 1][:, None] - ap_xy[:, 1][None, :]
    d = np.sqrt(dx * dx + dy * dy)
    d_eff = np.maximum(d, env.reference_distance_m)
    mean_rss = env.tx_power_dbm - 10.0 * env.path_loss_exponent * np.log10(
        d_eff / env.reference_distance_m
    )
    shadow = rng.standard_normal((len(grid), samples_per_location, len(env.ap_positions)))
    raw = mean_rss[:, None, :] + env.shadowing_sigma_db * shadow
    detected = raw >= env.detection_threshold_dbm
    raw = np.clip(raw, params.rss_min, params.rss_max)
    raw = np.where(detected, raw, params.sentinel_raw)
    norm = _normalize_array(raw, params)
    samples = []
    for li, loc in enumerate(grid):
        for si in range(samples_per_location):
            samples.append(Fingerprint(norm[li, si], loc))
    return FingerprintDataset(tuple(samples), len(env.ap_positions), params, grid)


# ---------------------------------------------------------------------------
# File format: AP001..AP{A},X,Y[,COLLECTOR] with raw dBm values


def _fmt(x: float) -> str:
    return repr(float(x))


def _ap_header(ap_count: int) -> list[str]:
    width = max(3, len(str(ap_count)))
    return [f"AP{i + 1:0{width}d}" for i in range(ap_count)]


def save_dataset(ds: FingerprintDataset, path) -> None:
    """Write the dataset in the raw-dBm wide format (UTF-8, '.' decimals).

    Floats are written at full round-trip precision so that load(save(ds))
    reproduces the normalized values up to one normalization round trip.
    """
    has_collector = any(s.collector_id is not None for s in ds.samples)
    header = _ap_header(ds.ap_count) + ["X", "Y"] + (["COLLECTOR"] if has_collector else [])
    lines = [",".join(header)]
    for s in ds.samples:
        raw = _denormalize_array(s.rss, ds.norm_params)
        fields = [_fmt(v) for v in raw]
        fields.append(_fmt(s.location.x))
        fields.append(_fmt(s.location.y))
        if has_collector:
            fields.append("" if s.collector_id is None else str(s.collector_id))
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path, params: NormalizationParams = NormalizationParams()) -> FingerprintDataset:
    """Load a raw-dBm wide-format file and normalize it.

    Raises ParseError (naming the line) on malformed rows and RangeError on
    raw values outside [rss_min, rss_max] that are not the sentinel.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file, expected a header row")
    header = [h.strip() for h in lines[0].split(",")]
    ap_count = 0
    while ap_count < len(header) and header[ap_count].startswith("AP"):
        ap_count += 1
    if ap_count == 0:
        raise ParseError(f"{path}: header has no AP columns")
    tail = header[ap_count:]
    if tail not in (["X", "Y"], ["X", "Y", "COLLECTOR"]):
        raise ParseError(
            f"{path}: expected columns X,Y[,COLLECTOR] after the AP block, got {tail}"
        )
    has_collector = len(tail) == 3
    n_fields = len(header)
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n_fields:
            raise ParseError(f"{path}: line {lineno}: expected {n_fields} fields, got {len(parts)}")
        try:
            raw = np.array([float(p) for p in parts[:ap_count]])
            x = float(parts[ap_count])
            y = float(parts[ap_count + 1])
        except ValueError as e:
            raise ParseError(f"{path}: line {lineno}: non-numeric field ({e})") from e
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError(f"{path}: line {lineno}: non-finite coordinate ({x}, {y})")
        bad = ~(
            (raw == params.sentinel_raw) | ((raw >= params.rss_min) & (raw <= params.rss_max))
        )
        if bad.any():
            raise RangeError(
                f"{path}: line {lineno}: raw RSS {raw[bad][0]} outside "
                f"[{params.rss_min}, {params.rss_max}] and not the sentinel"
            )
        collector = None
        if has_collector:
            field = parts[ap_count + 2].strip()
            if field:
                try:
                    collector = int(field)
                except ValueError as e:
                    raise ParseError(f"{path}: line {lineno}: bad collector id {field!r}") from e
        samples.append(Fingerprint(_normalize_array(raw, params), Coordinate(x, y), collector))
    return make_dataset(samples, ap_count, params)
