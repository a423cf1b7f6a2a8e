"""Location-conditioned denoising diffusion over RSS fingerprints.

The forward process corrupts a clean fingerprint M0 with Gaussian noise along
a linear variance schedule; a skip-connected MLP is trained to predict M0 from
(timestep, location condition, noisy fingerprint). Training minimizes a
vicinity-weighted squared error: every (unseen condition, seen sample) pair is
weighted by a distance kernel w(unseen, seen), so the model concentrates on
reconstructing the signal distribution around the locations it will later be
asked to generate.

The double sum over pairs is estimated by importance sampling: for each seen
sample in a minibatch one unseen condition is drawn with probability
proportional to its kernel weight, and the pair's loss term is scaled by the
sample's total kernel mass, keeping the estimator's expectation proportional
to the full sum. An exact pair enumeration is kept as a slow reference mode.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Coordinate, Fingerprint, FingerprintDataset, NormalizationParams
from .errors import (
    ConfigError,
    ConsistencyError,
    CoverageError,
    RangeError,
    ShapeError,
    SizeError,
)
from .initializer import LocationSplit
from .nets import AdamOptimizer, DenoiserArch, DenoiserNetwork, SgdOptimizer


# ---------------------------------------------------------------------------
# Noise schedule and forward process


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear beta schedule with cached alpha products (all length T)."""

    T: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray


def build_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ConfigError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    if T == 1:
        betas = np.array([beta_start])
    else:
        betas = np.linspace(beta_start, beta_end, T)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    for arr in (betas, alphas, alpha_bars):
        arr.setflags(write=False)
    return NoiseSchedule(T=T, betas=betas, alphas=alphas, alpha_bars=alpha_bars)


def _check_step(t: int, T: int) -> None:
    if not 1 <= t <= T:
        raise RangeError(f"step index t={t} outside [1, {T}]")


def forward_diffuse(m0: np.ndarray, t: int, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """Closed-form marginal of the forward process: sqrt(ab_t)*M0 + sqrt(1-ab_t)*eps."""
    _check_step(t, schedule.T)
    m0 = np.asarray(m0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if m0.shape != eps.shape:
        raise ShapeError(f"m0 {m0.shape} and eps {eps.shape} must match")
    ab = schedule.alpha_bars[t - 1]
    return np.sqrt(ab) * m0 + np.sqrt(1.0 - ab) * eps


def _forward_diffuse_batch(m0, t_arr, eps, schedule):
    ab = schedule.alpha_bars[t_arr - 1][:, None]
    return np.sqrt(ab) * m0 + np.sqrt(1.0 - ab) * eps


# ---------------------------------------------------------------------------
# Vicinity kernel


@dataclass(frozen=True)
class VicinityKernel:
    """Distance-decaying weight coupling an unseen condition to a seen sample.

    gaussian: w(d) = exp(-d^2 / (2 sigma_w^2)); hard: w(d) = 1 if d <= sigma_w else 0.
    """

    sigma_w: float
    form: str = "gaussian"

    def __post_init__(self):
        if self.sigma_w <= 0:
            raise ConfigError(f"sigma_w must be > 0, got {self.sigma_w}")
        if self.form not in ("gaussian", "hard"):
            raise ConfigError(f"kernel form must be 'gaussian' or 'hard', got {self.form!r}")

    def weight(self, d):
        d = np.asarray(d, dtype=np.float64)
        if self.form == "gaussian":
            return np.exp(-(d * d) / (2.0 * self.sigma_w * self.sigma_w))
        return np.where(d <= self.sigma_w, 1.0, 0.0)


def vicinity_weight(unseen: Coordinate, seen: Coordinate, kernel: VicinityKernel) -> float:
    return float(kernel.weight(unseen.distance_to(seen)))


def _pair_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    dx = a[:, 0] - b[:, 0]
    dy = a[:, 1] - b[:, 1]
    return np.sqrt(dx * dx + dy * dy)


# ---------------------------------------------------------------------------
# Condition and time embeddings


def _check_bounds(bounds) -> tuple[float, float, float, float]:
    xmin, ymin, xmax, ymax = (float(b) for b in bounds)
    if not (xmax > xmin and ymax > ymin):
        raise ConfigError(f"degenerate bounds {bounds}: both extents must be positive")
    return xmin, ymin, xmax, ymax


def embed_condition_batch(locs: np.ndarray, bounds, n_freqs: int) -> np.ndarray:
    xmin, ymin, xmax, ymax = _check_bounds(bounds)
    locs = np.asarray(locs, dtype=np.float64).reshape(-1, 2)
    u = (locs[:, 0] - xmin) / (xmax - xmin)
    v = (locs[:, 1] - ymin) / (ymax - ymin)
    feats = [u, v]
    for k in range(n_freqs):
        w = (2.0**k) * math.pi
        feats.extend([np.sin(w * u), np.cos(w * u), np.sin(w * v), np.cos(w * v)])
    return np.stack(feats, axis=1)


def embed_condition(loc: Coordinate, bounds, n_freqs: int = 4) -> np.ndarray:
    """Min-max scale the coordinate by `bounds`, then apply a sinusoidal
    feature map of length 2 + 4*n_freqs. The raw scaled pair is included, so
    distinct locations always get distinct embeddings."""
    return embed_condition_batch(np.array([[loc.x, loc.y]]), bounds, n_freqs)[0]


def embed_time_table(T: int, dim: int) -> np.ndarray:
    """Sinusoidal encodings of t/T for t = 1..T, rows indexed by t-1.

    Half the channels are sines, half cosines, with frequencies geometric from
    1 to 1e4. The slowest sine is strictly increasing on (0, 1], so distinct
    steps always get distinct encodings; all entries lie in [-1, 1].
    """
    if dim < 4 or dim % 2:
        raise ConfigError(f"time embedding dim must be even and >= 4, got {dim}")
    half = dim // 2
    freqs = np.exp(np.linspace(0.0, math.log(1e4), half))
    x = np.arange(1, T + 1, dtype=np.float64)[:, None] / T
    ang = x * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def embed_time(t: int, T: int, dim: int = 16) -> np.ndarray:
    _check_step(t, T)
    return embed_time_table(T, dim)[t - 1]


# ---------------------------------------------------------------------------
# Denoiser forward and the vicinity-weighted loss


def _assemble_input(mt: np.ndarray, cond: np.ndarray, temb: np.ndarray) -> np.ndarray:
    return np.concatenate([mt, cond, temb], axis=1)


def denoiser_forward(
    net: DenoiserNetwork, t: int, cond: np.ndarray, mt: np.ndarray, schedule: NoiseSchedule
) -> np.ndarray:
    """Predict the clean fingerprint from one noisy vector at step t."""
    _check_step(t, schedule.T)
    cond = np.asarray(cond, dtype=np.float64)
    mt = np.asarray(mt, dtype=np.float64)
    if cond.shape != (net.arch.cond_dim,):
        raise ShapeError(f"condition must have shape ({net.arch.cond_dim},), got {cond.shape}")
    if mt.shape != (net.arch.ap_count,):
        raise ShapeError(f"mt must have shape ({net.arch.ap_count},), got {mt.shape}")
    temb = embed_time(t, schedule.T, net.arch.time_dim)
    x = _assemble_input(mt[None, :], cond[None, :], temb[None, :])
    return net.forward(x)[0]


@dataclass(frozen=True)
class LossBatch:
    """One (seen sample, unseen condition, timestep, noise draw) per row."""

    m0: np.ndarray  # (B, A) clean seen fingerprints
    seen_locs: np.ndarray  # (B, 2)
    cond_locs: np.ndarray  # (B, 2) unseen conditioning coordinates
    t: np.ndarray  # (B,) int steps in [1, T]
    eps: np.ndarray  # (B, A) standard normal draws

    def __post_init__(self):
        m0 = np.asarray(self.m0, dtype=np.float64)
        if m0.ndim != 2 or m0.shape[0] == 0:
            raise SizeError("batch must be a nonempty (B, A) array")
        b = m0.shape[0]
        for name, arr, shape in (
            ("seen_locs", self.seen_locs, (b, 2)),
            ("cond_locs", self.cond_locs, (b, 2)),
            ("t", self.t, (b,)),
            ("eps", self.eps, m0.shape),
        ):
            if np.asarray(arr).shape != shape:
                raise ShapeError(f"{name} must have shape {shape}, got {np.asarray(arr).shape}")


def _loss_terms(net, batch, kernel, schedule, weights=None):
    t_arr = np.asarray(batch.t, dtype=np.int64)
    if t_arr.min() < 1 or t_arr.max() > schedule.T:
        raise RangeError(f"batch steps outside [1, {schedule.T}]")
    if weights is None:
        d = _pair_distances(np.asarray(batch.cond_locs), np.asarray(batch.seen_locs))
        weights = kernel.weight(d)
    mt = _forward_diffuse_batch(np.asarray(batch.m0), t_arr, np.asarray(batch.eps), schedule)
    cond = embed_condition_batch(batch.cond_locs, net.arch.bounds, net.arch.cond_freqs)
    temb = embed_time_table(schedule.T, net.arch.time_dim)[t_arr - 1]
    x = _assemble_input(mt, cond, temb)
    return x, weights


def spatial_loss(net, batch: LossBatch, kernel: VicinityKernel, schedule: NoiseSchedule) -> float:
    """Mean over the batch of w(unseen, seen) * ||predicted M0 - M0||^2."""
    x, w = _loss_terms(net, batch, kernel, schedule)
    r = net.forward(x) - batch.m0
    return float(np.mean(w * np.sum(r * r, axis=1)))


def spatial_loss_and_grad(
    net, batch: LossBatch, kernel: VicinityKernel, schedule: NoiseSchedule, weights=None
):
    """Loss plus its analytic gradient w.r.t. the flat parameter vector.

    `weights` overrides the kernel weights (used by training's importance
    sampling correction); otherwise weights come from the kernel.
    """
    x, w = _loss_terms(net, batch, kernel, schedule, weights)
    out, cache = net.forward_cached(x)
    r = out - batch.m0
    loss = float(np.mean(w * np.sum(r * r, axis=1)))
    dout = (2.0 / r.shape[0]) * w[:, None] * r
    return loss, net.backward(cache, dout)


def pair_batch(
    seen_m0: np.ndarray,
    seen_locs: np.ndarray,
    unseen_locs: np.ndarray,
    t: np.ndarray,
    eps: np.ndarray,
) -> LossBatch:
    """Materialize every (unseen, seen) pair for the exact-sum reference mode.

    `t` and `eps` are per seen sample and are repeated across conditions, so
    the pair (i, j) reuses sample j's noise draw.
    """
    seen_m0 = np.asarray(seen_m0, dtype=np.float64)
    seen_locs = np.asarray(seen_locs, dtype=np.float64)
    unseen_locs = np.asarray(unseen_locs, dtype=np.float64).reshape(-1, 2)
    n, u = seen_m0.shape[0], unseen_locs.shape[0]
    return LossBatch(
        m0=np.tile(seen_m0, (u, 1)),
        seen_locs=np.tile(seen_locs, (u, 1)),
        cond_locs=np.repeat(unseen_locs, n, axis=0),
        t=np.tile(np.asarray(t, dtype=np.int64), u),
        eps=np.tile(np.asarray(eps, dtype=np.float64), (u, 1)),
    )


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class DiffusionTrainConfig:
    T: int = 200
    beta_start: float = 1e-4
    beta_end: float = 0.02
    learning_rate: float = 2e-3
    lr_decay: float = 0.98  # per-epoch multiplier
    batch_size: int = 64
    epochs: int = 80
    sigma_w: float | None = None  # None = AUTO_SIGMA_FACTOR * median seen NN distance
    kernel: str = "gaussian"
    seed: int = 0
    hidden: tuple[int, int, int] = (128, 64, 128)
    activation: str = "silu"
    cond_freqs: int = 4
    time_dim: int = 16
    optimizer: str = "adam"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError(f"lr_decay must be in (0, 1], got {self.lr_decay}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if self.sigma_w is not None and self.sigma_w <= 0:
            raise ConfigError(f"sigma_w must be > 0, got {self.sigma_w}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")


@dataclass
class TrainResult:
    network: DenoiserNetwork
    trace: list[tuple[int, float]]  # (step, minibatch loss)
    schedule: NoiseSchedule
    sigma_w: float


# Auto vicinity bandwidth: a fraction of the median seen nearest-neighbor
# distance. The full median over-smooths the conditional mixture (each unseen
# location couples to a wide ring of seen samples), which measurably biases
# the generated fingerprints on grid-like surveys.
AUTO_SIGMA_FACTOR = 0.6


def median_nn_distance(coords: np.ndarray) -> float:
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    if coords.shape[0] < 2:
        raise ConfigError("need at least two locations for a nearest-neighbor distance")
    dx = coords[:, 0][:, None] - coords[:, 0][None, :]
    dy = coords[:, 1][:, None] - coords[:, 1][None, :]
    d = np.sqrt(dx * dx + dy * dy)
    np.fill_diagonal(d, np.inf)
    return float(np.median(d.min(axis=1)))


def _training_bounds(split: LocationSplit) -> tuple[float, float, float, float]:
    xy = np.vstack([split.seen_coords(), split.unseen_coords()])
    xmin, ymin = xy.min(axis=0)
    xmax, ymax = xy.max(axis=0)
    # Pad zero-extent axes so the embedding stays well defined.
    if xmax == xmin:
        xmin, xmax = xmin - 0.5, xmax + 0.5
    if ymax == ymin:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    return float(xmin), float(ymin), float(xmax), float(ymax)


def train(data: FingerprintDataset, split: LocationSplit, cfg: DiffusionTrainConfig) -> TrainResult:
    """Fit the conditional denoiser on seen-location samples.

    Per step: draw a minibatch of seen samples; per sample draw a uniform
    timestep, a noise vector, and one unseen condition with probability
    proportional to its vicinity weight; minimize the corrected weighted
    squared error. Deterministic given cfg.seed.
    """
    if len(data) == 0:
        raise SizeError("training data is empty")
    if not split.unseen:
        raise SizeError("split.unseen is empty: nothing to condition generation on")
    seen_set = set(split.seen)
    for s in data.samples:
        if s.location not in seen_set:
            raise ConsistencyError(
                f"training sample at {s.location} is not at a seen location"
            )

    schedule = build_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
    m0 = data.rss_matrix()
    sample_locs = data.coords_matrix()
    unseen_xy = split.unseen_coords()
    n, a = m0.shape
    u = unseen_xy.shape[0]

    if cfg.sigma_w is not None:
        sigma_w = cfg.sigma_w
    else:
        sigma_w = AUTO_SIGMA_FACTOR * median_nn_distance(split.seen_coords())
    kernel = VicinityKernel(sigma_w, cfg.kernel)

    dx = unseen_xy[:, 0][None, :] - sample_locs[:, 0][:, None]
    dy = unseen_xy[:, 1][None, :] - sample_locs[:, 1][:, None]
    wmat = kernel.weight(np.sqrt(dx * dx + dy * dy))  # (N, U)
    mass = wmat.sum(axis=1)
    if not np.any(mass > 0.0):
        raise CoverageError(
            "no unseen location lies within kernel support of any seen sample; "
            "the split cannot supervise generation"
        )
    safe_mass = np.where(mass > 0.0, mass, 1.0)
    cdf = np.cumsum(wmat / safe_mass[:, None], axis=1)

    bounds = _training_bounds(split)
    arch = DenoiserArch(
        ap_count=a,
        cond_freqs=cfg.cond_freqs,
        time_dim=cfg.time_dim,
        hidden=cfg.hidden,
        activation=cfg.activation,
        bounds=bounds,
    )
    rng = np.random.default_rng(cfg.seed)
    net = DenoiserNetwork.create(arch, rng)
    if cfg.optimizer == "adam":
        opt = AdamOptimizer(arch.param_count, cfg.learning_rate)
    else:
        opt = SgdOptimizer(arch.param_count, cfg.learning_rate)

    cond_table = embed_condition_batch(unseen_xy, bounds, cfg.cond_freqs)
    time_table = embed_time_table(schedule.T, cfg.time_dim)
    trace: list[tuple[int, float]] = []
    step = 0
    for _epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            j = perm[lo : lo + cfg.batch_size]
            b = j.shape[0]
            t_arr = rng.integers(1, schedule.T + 1, size=b)
            eps = rng.standard_normal((b, a))
            draws = rng.random(b)
            i_idx = np.minimum((cdf[j] < draws[:, None]).sum(axis=1), u - 1)
            mt = _forward_diffuse_batch(m0[j], t_arr, eps, schedule)
            x = _assemble_input(mt, cond_table[i_idx], time_table[t_arr - 1])
            out, cache = net.forward_cached(x)
            r = out - m0[j]
            omega = mass[j]
            loss = float(np.mean(omega * np.sum(r * r, axis=1)))
            dout = (2.0 / b) * omega[:, None] * r
            grad = net.backward(cache, dout)
            opt.step(net.theta, grad)
            step += 1
            trace.append((step, loss))
        opt.lr *= cfg.lr_decay
    return TrainResult(network=net, trace=trace, schedule=schedule, sigma_w=sigma_w)


# ---------------------------------------------------------------------------
# Ancestral sampling


def sample(
    net: DenoiserNetwork,
    unseen: Coordinate,
    schedule: NoiseSchedule,
    n: int,
    seed,
    detect_floor: float = 0.1,
) -> list[Fingerprint]:
    """Generate n fingerprints at `unseen` by reverse diffusion from pure noise.

    Each step clamps the predicted clean vector to [0, 1] and moves to the
    standard posterior mean given (M_t, M0_hat), adding posterior-variance
    noise except at t=1. Final vectors snap entries below detect_floor to 0
    and clamp the rest to [detect_floor, 1].
    """
    if n < 1:
        raise SizeError(f"n must be >= 1, got {n}")
    a = net.arch.ap_count
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, a))
    cond = embed_condition(unseen, net.arch.bounds, net.arch.cond_freqs)
    cond_tiled = np.tile(cond, (n, 1))
    time_table = embed_time_table(schedule.T, net.arch.time_dim)
    for t in range(schedule.T, 0, -1):
        inp = _assemble_input(x, cond_tiled, np.tile(time_table[t - 1], (n, 1)))
        x0 = np.clip(net.forward(inp), 0.0, 1.0)
        ab_t = schedule.alpha_bars[t - 1]
        ab_prev = schedule.alpha_bars[t - 2] if t > 1 else 1.0
        beta = schedule.betas[t - 1]
        alpha = schedule.alphas[t - 1]
        c0 = math.sqrt(ab_prev) * beta / (1.0 - ab_t)
        ct = math.sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab_t)
        mean = c0 * x0 + ct * x
        if t > 1:
            var = (1.0 - ab_prev) / (1.0 - ab_t) * beta
            x = mean + math.sqrt(var) * rng.standard_normal((n, a))
        else:
            x = mean
    final = np.where(x < detect_floor, 0.0, np.clip(x, detect_floor, 1.0))
    return [Fingerprint(final[i], unseen) for i in range(n)]


def generate_unseen_map(
    net: DenoiserNetwork,
    split: LocationSplit,
    schedule: NoiseSchedule,
    samples_per_unseen: int,
    seed,
    norm_params: NormalizationParams = NormalizationParams(),
) -> FingerprintDataset:
    """Sample every unseen location with per-location derived seeds."""
    if not split.unseen:
        raise SizeError("split has no unseen locations to generate")
    children = np.random.SeedSequence(seed).spawn(len(split.unseen))
    samples: list[Fingerprint] = []
    for loc, child in zip(split.unseen, children):
        samples.extend(
            sample(net, loc, schedule, samples_per_unseen, child, norm_params.detect_floor)
        )
    return FingerprintDataset(
        tuple(samples), net.arch.ap_count, norm_params, tuple(split.unseen)
    )


# ---------------------------------------------------------------------------
# Checkpoint and loss-trace files

_CKPT_MAGIC = b"FPSYNTH-CKPT-1\n"


def save_checkpoint(net: DenoiserNetwork, schedule: NoiseSchedule, path) -> None:
    """Binary container: magic, uint32-LE header length, JSON header (arch +
    schedule endpoints + param count), then theta as little-endian float64."""
    header = json.dumps(
        {
            "arch": net.arch.to_dict(),
            "schedule": {
                "T": schedule.T,
                "beta_start": float(schedule.betas[0]),
                "beta_end": float(schedule.betas[-1]),
            },
            "param_count": int(net.theta.shape[0]),
        },
        sort_keys=True,
    ).encode("utf-8")
    blob = net.theta.astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(blob)


def load_checkpoint(path) -> tuple[DenoiserNetwork, NoiseSchedule]:
    raw = Path(path).read_bytes()
    if not raw.startswith(_CKPT_MAGIC):
        raise ConsistencyError(f"{path}: not a checkpoint file (bad magic)")
    off = len(_CKPT_MAGIC)
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    header = json.loads(raw[off : off + hlen].decode("utf-8"))
    off += hlen
    arch = DenoiserArch.from_dict(header["arch"])
    theta = np.frombuffer(raw, dtype="<f8", offset=off, count=header["param_count"]).copy()
    sched = header["schedule"]
    schedule = build_schedule(int(sched["T"]), sched["beta_start"], sched["beta_end"])
    return DenoiserNetwork(arch, theta), schedule


def save_loss_trace(trace, path) -> None:
    lines = ["step,loss"] + [f"{s},{float(v)!r}" for s, v in trace]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
