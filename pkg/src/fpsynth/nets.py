"""Small fully connected networks with hand-written backprop.

Everything runs in float64 on a single flat parameter vector so that
checkpoints are trivially bit-exact and analytic gradients can be checked
against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _silu_forward(z):
    s = _sigmoid(z)
    return z * s, s


def _silu_backward(z, s):
    return s * (1.0 + z * (1.0 - s))


def _tanh_forward(z):
    a = np.tanh(z)
    return a, a


def _tanh_backward(z, a):
    return 1.0 - a * a


ACTIVATIONS = {"silu": (_silu_forward, _silu_backward), "tanh": (_tanh_forward, _tanh_backward)}


def _xavier_limit(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


@dataclass(frozen=True)
class DenoiserArch:
    """Shape of the conditional denoiser.

    Input = noisy RSS vector (ap_count) + location features (2 + 4*cond_freqs)
    + time features (time_dim); output = predicted clean RSS vector. Three
    hidden layers with a skip connection from the first to the third, so the
    outer widths must match.
    """

    ap_count: int
    cond_freqs: int = 4
    time_dim: int = 16
    hidden: tuple[int, int, int] = (256, 128, 256)
    activation: str = "silu"
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        if self.ap_count < 1:
            raise ConfigError(f"ap_count must be >= 1, got {self.ap_count}")
        if self.cond_freqs < 1:
            raise ConfigError(f"cond_freqs must be >= 1, got {self.cond_freqs}")
        if self.time_dim < 4 or self.time_dim % 2:
            raise ConfigError(f"time_dim must be even and >= 4, got {self.time_dim}")
        if len(self.hidden) != 3 or any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden must be three positive widths, got {self.hidden}")
        if self.hidden[0] != self.hidden[2]:
            raise ConfigError(
                f"skip connection needs hidden[0] == hidden[2], got {self.hidden}"
            )
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    @property
    def cond_dim(self) -> int:
        return 2 + 4 * self.cond_freqs

    @property
    def input_dim(self) -> int:
        return self.ap_count + self.cond_dim + self.time_dim

    @property
    def layer_shapes(self) -> tuple[tuple[int, int], ...]:
        h1, h2, h3 = self.hidden
        return ((h1, self.input_dim), (h2, h1), (h3, h2), (self.ap_count, h3))

    @property
    def param_count(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes)

    def to_dict(self) -> dict:
        return {
            "ap_count": self.ap_count,
            "cond_freqs": self.cond_freqs,
            "time_dim": self.time_dim,
            "hidden": list(self.hidden),
            "activation": self.activation,
            "bounds": list(self.bounds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DenoiserArch":
        return cls(
            ap_count=int(d["ap_count"]),
            cond_freqs=int(d["cond_freqs"]),
            time_dim=int(d["time_dim"]),
            hidden=tuple(d["hidden"]),
            activation=str(d["activation"]),
            bounds=tuple(d["bounds"]),
        )


def _layout(layer_shapes):
    """(weight_slice, bias_slice, shape) triples over the flat parameter vector."""
    out = []
    off = 0
    for o, i in layer_shapes:
        w = slice(off, off + o * i)
        off += o * i
        b = slice(off, off + o)
        off += o
        out.append((w, b, (o, i)))
    return out, off


class DenoiserNetwork:
    """Skip-connected MLP predicting the clean RSS vector from a noisy one.

        h1 = act(W1 x + b1)
        h2 = act(W2 h1 + b2)
        h3 = act(W3 h2 + b3 + h1)   # skip
        out = W4 h3 + b4
    """

    def __init__(self, arch: DenoiserArch, theta: np.ndarray):
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        if theta.shape != (arch.param_count,):
            raise ShapeError(
                f"theta has {theta.shape[0] if theta.ndim == 1 else theta.shape} entries, "
                f"architecture needs {arch.param_count}"
            )
        self.arch = arch
        self.theta = theta
        layout, total = _layout(arch.layer_shapes)
        assert total == arch.param_count
        self._views = [
            (theta[w].reshape(shape), theta[b]) for w, b, shape in layout
        ]

    @classmethod
    def create(cls, arch: DenoiserArch, seed) -> "DenoiserNetwork":
        """Xavier-uniform weights, zero biases, deterministic given seed."""
        rng = np.random.default_rng(seed)
        theta = np.zeros(arch.param_count)
        layout, _ = _layout(arch.layer_shapes)
        for w, _b, (o, i) in layout:
            lim = _xavier_limit(i, o)
            theta[w] = rng.uniform(-lim, lim, size=o * i)
        return cls(arch, theta)

    @classmethod
    def zeros(cls, arch: DenoiserArch) -> "DenoiserNetwork":
        return cls(arch, np.zeros(arch.param_count))

    @classmethod
    def constant_output(cls, arch: DenoiserArch, value: np.ndarray) -> "DenoiserNetwork":
        """A network returning `value` for every input (all-zero weights, output bias)."""
        net = cls.zeros(arch)
        value = np.asarray(value, dtype=np.float64)
        if value.shape != (arch.ap_count,):
            raise ShapeError(f"constant value must have shape ({arch.ap_count},)")
        net._views[3][1][:] = value
        return net

    def copy(self) -> "DenoiserNetwork":
        return DenoiserNetwork(self.arch, self.theta.copy())

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.arch.input_dim:
            raise ShapeError(
                f"input must be (batch, {self.arch.input_dim}), got {x.shape}"
            )
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x: np.ndarray):
        x = self._check_input(x)
        act, _ = ACTIVATIONS[self.arch.activation]
        (w1, b1), (w2, b2), (w3, b3), (w4, b4) = self._views
        z1 = x @ w1.T + b1
        a1, s1 = act(z1)
        z2 = a1 @ w2.T + b2
        a2, s2 = act(z2)
        z3 = a2 @ w3.T + b3 + a1
        a3, s3 = act(z3)
        out = a3 @ w4.T + b4
        cache = (x, z1, s1, a1, z2, s2, a2, z3, s3, a3)
        return out, cache

    def backward(self, cache, dout: np.ndarray) -> np.ndarray:
        """Gradient of sum(dout * out) w.r.t. the flat parameter vector."""
        x, z1, s1, a1, z2, s2, a2, z3, s3, a3 = cache
        _, dact = ACTIVATIONS[self.arch.activation]
        (w1, _), (w2, _), (w3, _), (w4, _) = self._views
        grad = np.zeros_like(self.theta)
        layout, _ = _layout(self.arch.layer_shapes)

        dW4 = dout.T @ a3
        db4 = dout.sum(axis=0)
        da3 = dout @ w4
        dz3 = da3 * dact(z3, s3)
        dW3 = dz3.T @ a2
        db3 = dz3.sum(axis=0)
        da2 = dz3 @ w3
        dz2 = da2 * dact(z2, s2)
        dW2 = dz2.T @ a1
        db2 = dz2.sum(axis=0)
        da1 = dz2 @ w2 + dz3  # skip path
        dz1 = da1 * dact(z1, s1)
        dW1 = dz1.T @ x
        db1 = dz1.sum(axis=0)

        for (wsl, bsl, _), dW, db in zip(layout, (dW1, dW2, dW3, dW4), (db1, db2, db3, db4)):
            grad[wsl] = dW.ravel()
            grad[bsl] = db
        return grad


class Mlp:
    """Plain sequential MLP (activation on hidden layers, linear output)."""

    def __init__(self, dims: tuple[int, ...], activation: str, theta: np.ndarray):
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ConfigError(f"dims must be at least (in, out) positive sizes, got {dims}")
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        self.dims = tuple(int(d) for d in dims)
        self.activation = activation
        shapes = tuple((dims[i + 1], dims[i]) for i in range(len(dims) - 1))
        layout, total = _layout(shapes)
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        if theta.shape != (total,):
            raise ShapeError(f"theta has wrong size {theta.shape}, expected ({total},)")
        self.theta = theta
        self._shapes = shapes
        self._layout = layout
        self._views = [(theta[w].reshape(shape), theta[b]) for w, b, shape in layout]

    @classmethod
    def create(cls, dims, activation: str, seed) -> "Mlp":
        dims = tuple(int(d) for d in dims)
        shapes = tuple((dims[i + 1], dims[i]) for i in range(len(dims) - 1))
        layout, total = _layout(shapes)
        rng = np.random.default_rng(seed)
        theta = np.zeros(total)
        for w, _b, (o, i) in layout:
            lim = _xavier_limit(i, o)
            theta[w] = rng.uniform(-lim, lim, size=o * i)
        return cls(dims, activation, theta)

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dims[0]:
            raise ShapeError(f"input must be (batch, {self.dims[0]}), got {x.shape}")
        act, _ = ACTIVATIONS[self.activation]
        a = x
        zs, ss, acts = [], [], [a]
        for li, (w, b) in enumerate(self._views):
            z = a @ w.T + b
            if li < len(self._views) - 1:
                a, s = act(z)
            else:
                a, s = z, None
            zs.append(z)
            ss.append(s)
            acts.append(a)
        return a, (zs, ss, acts)

    def backward(self, cache, dout: np.ndarray) -> np.ndarray:
        zs, ss, acts = cache
        _, dact = ACTIVATIONS[self.activation]
        grad = np.zeros_like(self.theta)
        d = dout
        for li in range(len(self._views) - 1, -1, -1):
            wsl, bsl, _ = self._layout[li]
            w, _b = self._views[li]
            grad[wsl] = (d.T @ acts[li]).ravel()
            grad[bsl] = d.sum(axis=0)
            if li > 0:
                d = (d @ w) * dact(zs[li - 1], ss[li - 1])
        return grad


class AdamOptimizer:
    """Standard Adam on a flat parameter vector, updated in place."""

    def __init__(self, n_params: int, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1**self.t)
        vhat = self.v / (1.0 - self.beta2**self.t)
        theta -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


class SgdOptimizer:
    """Plain stochastic gradient descent, updated in place."""

    def __init__(self, n_params: int, lr: float):
        self.lr = lr

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        theta -= self.lr * grad
