"""Layer primitives for fixed-topology sequential networks.

Each layer exposes ``forward(x, train, rng) -> (y, cache)`` and
``backward(grad_y, cache) -> (grad_x, param_grads)``. Parameters live in the
``params`` dict (trainable) and ``buffers`` dict (running statistics).
"""

from __future__ import annotations

import numpy as np


def glorot_init(shape, rng: np.random.Generator, dtype=np.float64) -> np.ndarray:
    """Uniform Glorot/Xavier initialisation on +-sqrt(6 / (fan_in + fan_out))."""
    if len(shape) != 2:
        raise ValueError(f"glorot_init needs a 2-D shape, got {tuple(shape)}")
    fan_in, fan_out = shape
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=tuple(shape)).astype(dtype)


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def config(self) -> dict:
        return {"type": self.kind}

    def astype(self, dtype) -> None:
        for store in (self.params, self.buffers):
            for k in store:
                store[k] = store[k].astype(dtype)

    def forward(self, x, train, rng):
        raise NotImplementedError

    def backward(self, grad, cache, want_params=True, want_input=True):
        raise NotImplementedError


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator | None = None,
                 dtype=np.float64):
        super().__init__()
        self.n_in, self.n_out = int(n_in), int(n_out)
        if rng is None:
            w = np.zeros((self.n_in, self.n_out), dtype=dtype)
        else:
            w = glorot_init((self.n_in, self.n_out), rng, dtype)
        self.params = {"W": w, "b": np.zeros(self.n_out, dtype=dtype)}

    def config(self):
        return {"type": self.kind, "in": self.n_in, "out": self.n_out}

    def forward(self, x, train, rng):
        return x @ self.params["W"] + self.params["b"], x

    def backward(self, grad, x, want_params=True, want_input=True):
        gx = grad @ self.params["W"].T if want_input else None
        if not want_params:
            return gx, {}
        return gx, {"W": x.T @ grad, "b": grad.sum(axis=0)}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, train, rng):
        mask = x > 0
        return x * mask, mask

    def backward(self, grad, mask, want_params=True, want_input=True):
        return grad * mask, {}


class Softplus(Layer):
    kind = "softplus"

    def forward(self, x, train, rng):
        return np.logaddexp(0.0, x).astype(x.dtype, copy=False), x

    def backward(self, grad, x, want_params=True, want_input=True):
        # d/dx log(1 + e^x) = sigmoid(x), evaluated without overflow
        sig = np.exp(-np.logaddexp(0.0, -x)).astype(x.dtype, copy=False)
        return grad * sig, {}


class GaussianNoise(Layer):
    """Additive N(0, std^2) noise, active only in train mode."""

    kind = "noise"

    def __init__(self, std: float = 0.5):
        super().__init__()
        if std < 0:
            raise ValueError("noise std must be >= 0")
        self.std = float(std)

    def config(self):
        return {"type": self.kind, "std": self.std}

    def forward(self, x, train, rng):
        if not train or self.std == 0.0:
            return x, None
        if rng is None:
            raise ValueError("GaussianNoise in train mode needs an rng")
        if x.dtype == np.float32:
            noise = rng.standard_normal(x.shape, dtype=np.float32)
        else:
            noise = rng.standard_normal(x.shape)
        return x + self.std * noise, None

    def backward(self, grad, cache, want_params=True, want_input=True):
        return grad, {}


class BatchNorm(Layer):
    kind = "batchnorm"

    def __init__(self, dim: int, momentum: float = 0.9, eps: float = 1e-8, dtype=np.float64):
        super().__init__()
        if not 0.0 < momentum < 1.0:
            raise ValueError("momentum must lie in (0, 1)")
        if eps <= 0:
            raise ValueError("eps must be > 0")
        self.dim, self.momentum, self.eps = int(dim), float(momentum), float(eps)
        self.params = {"gamma": np.ones(dim, dtype=dtype), "beta": np.zeros(dim, dtype=dtype)}
        self.buffers = {"running_mean": np.zeros(dim, dtype=dtype),
                        "running_var": np.ones(dim, dtype=dtype)}

    def config(self):
        return {"type": self.kind, "dim": self.dim, "momentum": self.momentum, "eps": self.eps}

    def forward(self, x, train, rng):
        g, b = self.params["gamma"], self.params["beta"]
        if not train:
            rm, rv = self.buffers["running_mean"], self.buffers["running_var"]
            inv = 1.0 / np.sqrt(rv + self.eps)
            xhat = (x - rm) * inv
            return xhat * g + b, ("infer", xhat, inv)
        if x.shape[0] < 2:
            raise ValueError("batch norm in train mode needs a batch of at least 2")
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv
        m = self.momentum
        self.buffers["running_mean"] = m * self.buffers["running_mean"] + (1 - m) * mu
        self.buffers["running_var"] = m * self.buffers["running_var"] + (1 - m) * var
        return xhat * g + b, ("train", xhat, inv)

    def backward(self, grad, cache, want_params=True, want_input=True):
        g = self.params["gamma"]
        mode, xhat, inv = cache
        dgamma = (grad * xhat).sum(axis=0)
        dbeta = grad.sum(axis=0)
        gx = grad * g
        if mode == "infer":
            return gx * inv, {"gamma": dgamma, "beta": dbeta}
        n = grad.shape[0]
        dx = inv / n * (n * gx - gx.sum(axis=0) - xhat * (gx * xhat).sum(axis=0))
        return dx, {"gamma": dgamma, "beta": dbeta}


LAYER_TYPES = {cls.kind: cls for cls in (Dense, ReLU, Softplus, GaussianNoise, BatchNorm)}


def layer_from_config(cfg: dict, dtype=np.float64) -> Layer:
    kind = cfg["type"]
    if kind == "dense":
        return Dense(cfg["in"], cfg["out"], None, dtype)
    if kind == "batchnorm":
        return BatchNorm(cfg["dim"], cfg["momentum"], cfg["eps"], dtype)
    if kind == "noise":
        return GaussianNoise(cfg["std"])
    if kind in LAYER_TYPES:
        return LAYER_TYPES[kind]()
    raise ValueError(f"unknown layer type {kind!r}")
