"""Sequential networks with explicit forward traces and reverse-mode backward."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hapticgan.nn.layers import Layer, layer_from_config
from hapticgan.seeding import keyed_rng


class StaleTraceError(RuntimeError):
    """Raised when a trace is used after the network's parameters changed."""


class Network:
    """A fixed sequential stack of layers sharing one floating-point dtype."""

    def __init__(self, layers: list[Layer], dtype=np.float64):
        self.layers = list(layers)
        self.dtype = np.dtype(dtype)
        self.version = 0
        for layer in self.layers:
            layer.astype(self.dtype)

    @property
    def in_dim(self) -> int | None:
        """First sized layer's input width; None for purely elementwise networks."""
        for layer in self.layers:
            if layer.kind == "dense":
                return layer.n_in
            if layer.kind == "batchnorm":
                return layer.dim
        return None

    @property
    def out_dim(self) -> int | None:
        for layer in reversed(self.layers):
            if layer.kind == "dense":
                return layer.n_out
            if layer.kind == "batchnorm":
                return layer.dim
        return None

    def params(self) -> dict[str, np.ndarray]:
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers) for k, v in layer.params.items()}

    def buffers(self) -> dict[str, np.ndarray]:
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers) for k, v in layer.buffers.items()}

    def set_tensor(self, name: str, value: np.ndarray) -> None:
        idx, key = name.split(".", 1)
        layer = self.layers[int(idx)]
        store = layer.params if key in layer.params else layer.buffers
        if key not in store:
            raise KeyError(name)
        if store[key].shape != value.shape:
            raise ValueError(f"{name}: shape {value.shape} != {store[key].shape}")
        store[key] = np.asarray(value, dtype=self.dtype).copy()
        self.version += 1

    def architecture(self) -> list[dict]:
        return [layer.config() for layer in self.layers]

    @classmethod
    def from_architecture(cls, arch: list[dict], dtype=np.float64) -> "Network":
        return cls([layer_from_config(c, dtype) for c in arch], dtype)

    def n_params(self) -> int:
        return sum(v.size for v in self.params().values())


@dataclass
class Trace:
    """Everything backward() needs: per-layer caches plus each layer's output."""

    network_id: int
    version: int
    inputs: np.ndarray
    caches: list = field(default_factory=list)
    activations: list = field(default_factory=list)

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1] if self.activations else self.inputs


def forward(net: Network, x, mode: str = "train", rng: tuple | None = None,
            upto: int | None = None) -> Trace:
    """Run ``net`` on a batch ``x`` of shape (n, in_dim).

    ``rng`` is a key tuple; noise layer ``i`` draws from ``keyed_rng(*rng, i)``.
    ``upto`` stops after layer index ``upto`` (inclusive).
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    x = np.asarray(x, dtype=net.dtype)
    if x.ndim != 2 or (net.in_dim is not None and x.shape[1] != net.in_dim):
        raise ValueError(f"input shape {x.shape} does not match network input dim {net.in_dim}")
    train = mode == "train"
    last = len(net.layers) - 1 if upto is None else upto
    trace = Trace(id(net), net.version, x)
    h = x
    for i, layer in enumerate(net.layers[: last + 1]):
        gen = None
        if train and layer.kind == "noise" and layer.std > 0:
            if rng is None:
                raise ValueError("train-mode forward through a noise layer needs an rng key")
            gen = keyed_rng(*rng, i)
        h, cache = layer.forward(h, train, gen)
        trace.caches.append(cache)
        trace.activations.append(h)
    return trace


@dataclass
class Gradients:
    params: dict[str, np.ndarray]
    inputs: np.ndarray


def backward(net: Network, trace: Trace, output_grad, taps: dict[int, np.ndarray] | None = None,
             param_grads: bool = True, input_grad: bool = True) -> Gradients:
    """Reverse pass. ``taps`` injects extra upstream gradient at layer outputs.

    ``param_grads=False`` skips weight gradients (the network is frozen) and
    ``input_grad=False`` skips the first layer's input gradient.
    """
    if trace.network_id != id(net) or trace.version != net.version:
        raise StaleTraceError("trace does not match the network's current parameters")
    taps = taps or {}
    n_run = len(trace.caches)
    grad = np.asarray(output_grad, dtype=net.dtype)
    if grad.shape != trace.output.shape:
        raise ValueError(f"output grad shape {grad.shape} != {trace.output.shape}")
    grads: dict[str, np.ndarray] = {}
    for i in range(n_run - 1, -1, -1):
        if i in taps:
            grad = grad + taps[i]
        layer = net.layers[i]
        want_input = input_grad or i > 0
        grad, pg = layer.backward(grad, trace.caches[i], param_grads, want_input)
        for k, v in pg.items():
            grads[f"{i}.{k}"] = v
    if not param_grads:
        return Gradients({}, grad)
    for i, layer in enumerate(net.layers[n_run:], start=n_run):
        for k, v in layer.params.items():
            grads[f"{i}.{k}"] = np.zeros_like(v)
    return Gradients(grads, grad)


def softmax_logsumexp(logits) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise softmax and log-normalizer with max-shift stabilisation."""
    z = np.asarray(logits)
    if z.shape[-1] == 0:
        raise ValueError("softmax over an empty dimension")
    zmax = z.max(axis=-1, keepdims=True)
    shifted = z - zmax
    e = np.exp(shifted)
    s = e.sum(axis=-1, keepdims=True)
    return e / s, (zmax + np.log(s))[..., 0]


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits)
    _, lse = softmax_logsumexp(z)
    return z - lse[..., None]
