"""Semi-supervised GAN with a K+1-class discriminator and feature matching.

The discriminator emits K real-class logits plus one "fake" logit. Its loss is

    L_sup   = -mean_labeled  log p(y | x, y <= K)
    L_unsup = -mean_unlabeled log(1 - p(fake | x_u)) - mean_generated log p(fake | G(z))

and the generator minimises ||mean f(x_u) - mean f(G(z))||^2 where f is the
last hidden ReLU activation of the discriminator.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from hapticgan.data.records import MATERIALS
from hapticgan.nn import (
    AdamState,
    BatchNorm,
    Dense,
    GaussianNoise,
    Network,
    ReLU,
    Softplus,
    backward,
    forward,
    load_checkpoint,
    network_step,
    save_checkpoint,
    softmax_logsumexp,
)
from hapticgan.seeding import keyed_rng

BUNDLE_FORMAT = "hapticgan-bundle/1"
DESK_GEN_HIDDEN = (256, 256)
DESK_DISC_HIDDEN = (256, 128, 64, 64, 64)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 100
    lr: float = 0.0006
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    n_classes: int = 6
    noise_dim: int = 100
    noise_std: float = 0.5
    gen_hidden: tuple[int, int] = (500, 500)
    disc_hidden: tuple[int, ...] = (1000, 500, 250, 250, 250)
    bn_momentum: float = 0.9
    dtype: str = "float32"

    def __post_init__(self):
        self.gen_hidden = tuple(int(h) for h in self.gen_hidden)
        self.disc_hidden = tuple(int(h) for h in self.disc_hidden)
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if len(self.gen_hidden) != 2:
            raise ValueError("generator has exactly two hidden layers")
        if len(self.disc_hidden) != 5:
            raise ValueError("discriminator has exactly five hidden layers (six dense layers)")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """Narrower networks that fit single-core CI budgets; everything else unchanged."""
        return cls(**{"gen_hidden": DESK_GEN_HIDDEN, "disc_hidden": DESK_DISC_HIDDEN, **overrides})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gen_hidden"] = list(self.gen_hidden)
        d["disc_hidden"] = list(self.disc_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def build_generator(out_dim: int, cfg: TrainConfig, rng: np.random.Generator) -> Network:
    h1, h2 = cfg.gen_hidden
    layers = [
        Dense(cfg.noise_dim, h1, rng), Softplus(), BatchNorm(h1, cfg.bn_momentum),
        Dense(h1, h2, rng), Softplus(),
        Dense(h2, out_dim, rng),
    ]
    return Network(layers, cfg.dtype)


def build_discriminator(in_dim: int, cfg: TrainConfig, rng: np.random.Generator,
                        n_out: int | None = None) -> Network:
    """Six dense layers; ReLU then Gaussian noise after each hidden one."""
    layers = []
    prev = in_dim
    for h in cfg.disc_hidden:
        layers += [Dense(prev, h, rng), ReLU(), GaussianNoise(cfg.noise_std)]
        prev = h
    layers.append(Dense(prev, cfg.n_classes + 1 if n_out is None else n_out, rng))
    return Network(layers, cfg.dtype)


def feature_tap(disc: Network) -> int:
    """Index of the last hidden ReLU (its output is the matched feature)."""
    return max(i for i, layer in enumerate(disc.layers) if layer.kind == "relu")


# -- losses ------------------------------------------------------------------------------------


@dataclass
class DiscLoss:
    supervised: float
    unlabeled: float
    generated: float
    logit_grads: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def unsupervised(self) -> float:
        return self.unlabeled + self.generated

    @property
    def total(self) -> float:
        return self.supervised + self.unsupervised


def k_plus_one_terms(logits_l, y, logits_u, logits_g, n_classes: int = 6) -> DiscLoss:
    """Discriminator loss terms and their gradients w.r.t. the three logit batches."""
    K = n_classes
    y = np.asarray(y, dtype=np.int64)
    if np.any(y < 0) or np.any(y >= K):
        raise ValueError(f"labels must lie in [0, {K})")
    for z in (logits_l, logits_u, logits_g):
        if z.shape[0] == 0:
            raise ValueError("discriminator loss batches must be non-empty")
        if z.shape[1] != K + 1:
            raise ValueError(f"expected {K + 1} logits, got {z.shape[1]}")
    nl, nu, ng = len(logits_l), len(logits_u), len(logits_g)

    # supervised: log-softmax over the real-class logits only
    p_real, lse_real = softmax_logsumexp(logits_l[:, :K])
    l_sup = float(np.mean(lse_real - logits_l[np.arange(nl), y]))
    g_l = np.zeros_like(logits_l)
    g_l[:, :K] = p_real
    g_l[np.arange(nl), y] -= 1.0
    g_l /= nl

    # unlabeled: -log(1 - p_fake) = lse(all) - lse(real)
    p_all_u, lse_all_u = softmax_logsumexp(logits_u)
    p_real_u, lse_real_u = softmax_logsumexp(logits_u[:, :K])
    l_unl = float(np.mean(lse_all_u - lse_real_u))
    g_u = p_all_u.copy()
    g_u[:, :K] -= p_real_u
    g_u /= nu

    # generated: -log p_fake = lse(all) - z_fake
    p_all_g, lse_all_g = softmax_logsumexp(logits_g)
    l_gen = float(np.mean(lse_all_g - logits_g[:, K]))
    g_g = p_all_g.copy()
    g_g[:, K] -= 1.0
    g_g /= ng
    return DiscLoss(l_sup, l_unl, l_gen, (g_l, g_u, g_g))


@dataclass
class LossResult:
    loss: float
    grads: dict[str, np.ndarray]
    parts: dict[str, float] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def discriminator_loss(disc: Network, x_l, y, x_u, x_g, n_classes: int = 6,
                       mode: str = "train", rng: tuple | None = None) -> LossResult:
    """Loss and parameter gradients for one discriminator minibatch.

    The three batches go through one forward pass (the discriminator has no
    batch-coupled layers, so concatenation does not change per-row outputs).
    """
    x_l, x_u, x_g = (np.asarray(a, dtype=disc.dtype) for a in (x_l, x_u, x_g))
    nl, nu = len(x_l), len(x_u)
    trace = forward(disc, np.concatenate([x_l, x_u, x_g]), mode, rng)
    z = trace.output.astype(np.float64)
    terms = k_plus_one_terms(z[:nl], y, z[nl:nl + nu], z[nl + nu:], n_classes)
    g = np.concatenate(terms.logit_grads)
    grads = backward(disc, trace, g, input_grad=False).params
    pred = np.argmax(z[:nl, :n_classes], axis=1)
    parts = {"supervised": terms.supervised, "unlabeled": terms.unlabeled,
             "generated": terms.generated, "unsupervised": terms.unsupervised}
    return LossResult(terms.total, grads, parts,
                      {"train_acc": float(np.mean(pred == np.asarray(y)))})


def feature_matching_from_features(f_u, f_g) -> tuple[float, np.ndarray]:
    """Squared distance of batch-mean features, and its gradient w.r.t. ``f_g`` rows."""
    f_u = np.asarray(f_u, dtype=np.float64)
    f_g = np.asarray(f_g, dtype=np.float64)
    gap = f_u.mean(axis=0) - f_g.mean(axis=0)
    grad = np.broadcast_to(-2.0 * gap / len(f_g), f_g.shape).copy()
    return float(gap @ gap), grad


def generator_loss_feature_matching(gen: Network, disc: Network, x_u, z, mode: str = "train",
                                    rng: tuple | None = None,
                                    gen_trace=None) -> LossResult:
    """Feature-matching loss; gradients flow through the frozen discriminator into the generator.

    ``gen_trace`` reuses an existing generator forward pass on ``z``.
    """
    x_u = np.asarray(x_u, dtype=disc.dtype)
    z = np.asarray(z, dtype=gen.dtype)
    if len(x_u) != len(z):
        raise ValueError(f"batch size mismatch: {len(x_u)} unlabeled vs {len(z)} noise vectors")
    tap = feature_tap(disc)
    key_u = None if rng is None else (*rng, "u")
    key_g = None if rng is None else (*rng, "g")
    gtrace = gen_trace if gen_trace is not None else forward(gen, z, mode, None if rng is None else (*rng, "G"))
    f_u = forward(disc, x_u, mode, key_u, upto=tap).output
    dtrace = forward(disc, gtrace.output, mode, key_g, upto=tap)
    loss, g_f = feature_matching_from_features(f_u, dtrace.output)
    g_x = backward(disc, dtrace, g_f, param_grads=False).inputs
    grads = backward(gen, gtrace, g_x).params
    return LossResult(loss, grads, {"feature_matching": loss})


# -- model bundle -------------------------------------------------------------------------------


@dataclass
class ModelBundle:
    generator: Network
    discriminator: Network
    config: TrainConfig
    adam_g: AdamState
    adam_d: AdamState
    class_names: tuple[str, ...] = MATERIALS
    feature_header: dict = field(default_factory=dict)
    std_mean: np.ndarray | None = None
    std_std: np.ndarray | None = None

    @property
    def feature_dim(self) -> int:
        return self.discriminator.in_dim

    def save(self, path) -> None:
        tensors = {}
        for prefix, net in (("gen", self.generator), ("disc", self.discriminator)):
            for k, v in {**net.params(), **net.buffers()}.items():
                tensors[f"{prefix}/{k}"] = v
        for prefix, st in (("adam_g", self.adam_g), ("adam_d", self.adam_d)):
            for k in st.m:
                tensors[f"{prefix}/m/{k}"] = st.m[k]
                tensors[f"{prefix}/v/{k}"] = st.v[k]
        if self.std_mean is not None:
            tensors["standardizer/mean"] = self.std_mean
            tensors["standardizer/std"] = self.std_std
        header = {
            "format": BUNDLE_FORMAT,
            "architecture": {"generator": self.generator.architecture(),
                             "discriminator": self.discriminator.architecture()},
            "optimizer": {"adam_g": self.adam_g.hyper(), "adam_d": self.adam_d.hyper()},
            "train_config": self.config.to_dict(),
            "class_names": list(self.class_names),
            "feature": self.feature_header,
        }
        save_checkpoint(path, tensors, header)

    @classmethod
    def load(cls, path) -> "ModelBundle":
        tensors, header = load_checkpoint(path)
        if header.get("format") != BUNDLE_FORMAT:
            raise ValueError(f"{path}: not a model bundle")
        cfg = TrainConfig.from_dict(header["train_config"])
        nets = {}
        for prefix, key in (("gen", "generator"), ("disc", "discriminator")):
            net = Network.from_architecture(header["architecture"][key], cfg.dtype)
            for name, v in tensors.items():
                if name.startswith(prefix + "/"):
                    net.set_tensor(name[len(prefix) + 1:], v)
            nets[prefix] = net
        adams = {}
        for prefix in ("adam_g", "adam_d"):
            st = AdamState(**header["optimizer"][prefix])
            for name, v in tensors.items():
                for part in ("m", "v"):
                    head = f"{prefix}/{part}/"
                    if name.startswith(head):
                        getattr(st, part)[name[len(head):]] = v.astype(cfg.dtype)
            adams[prefix] = st
        return cls(nets["gen"], nets["disc"], cfg, adams["adam_g"], adams["adam_d"],
                   tuple(header["class_names"]), header.get("feature", {}),
                   tensors.get("standardizer/mean"), tensors.get("standardizer/std"))


def feature_hash(feature_config: dict) -> str:
    blob = json.dumps(feature_config, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


# -- training -----------------------------------------------------------------------------------


def init_bundle(feature_dim: int, cfg: TrainConfig) -> ModelBundle:
    gen = build_generator(feature_dim, cfg, keyed_rng(cfg.seed, "init", "generator"))
    disc = build_discriminator(feature_dim, cfg, keyed_rng(cfg.seed, "init", "discriminator"))

    def adam():
        return AdamState(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)

    return ModelBundle(gen, disc, cfg, adam(), adam())


def _draw(rng: np.random.Generator, n_pool: int, m: int) -> np.ndarray:
    return rng.choice(n_pool, size=m, replace=n_pool < m)


def train(x_labeled, y_labeled, x_unlabeled, cfg: TrainConfig,
          bundle: ModelBundle | None = None, callback=None) -> tuple[ModelBundle, list[dict]]:
    """Alternating minibatch training: one discriminator step then one generator step.

    With an empty unlabeled pool the labeled inputs stand in as unlabeled data.
    Returns the trained bundle and one metrics dict per epoch.
    """
    x_l = np.asarray(x_labeled, dtype=cfg.dtype)
    y_l = np.asarray(y_labeled, dtype=np.int64)
    x_u = np.asarray(x_unlabeled, dtype=cfg.dtype).reshape(-1, x_l.shape[1])
    if x_l.ndim != 2 or len(x_l) != len(y_l):
        raise ValueError("labeled features must be (n, d) with one label per row")
    counts = np.bincount(y_l, minlength=cfg.n_classes)
    if len(counts) > cfg.n_classes:
        raise ValueError(f"labels must lie in [0, {cfg.n_classes})")
    if np.any(counts == 0):
        empty = [MATERIALS[i] if cfg.n_classes == len(MATERIALS) else i
                 for i in np.flatnonzero(counts == 0)]
        raise ValueError(f"no labeled examples for classes {empty}")
    if len(x_u) == 0:
        x_u = x_l
    if bundle is None:
        bundle = init_bundle(x_l.shape[1], cfg)
    elif bundle.feature_dim != x_l.shape[1]:
        raise ValueError(f"feature dim {x_l.shape[1]} != model input dim {bundle.feature_dim}")
    gen, disc = bundle.generator, bundle.discriminator
    m = cfg.batch_size
    steps = math.ceil(max(len(x_l), len(x_u)) / m)
    history = []
    step = 0
    for epoch in range(cfg.epochs):
        acc = {"supervised": 0.0, "unsupervised": 0.0, "feature_matching": 0.0, "train_acc": 0.0}
        for _ in range(steps):
            rng = keyed_rng(cfg.seed, "batch", step)
            il = _draw(rng, len(x_l), m)
            iu = _draw(rng, len(x_u), m)
            z = rng.standard_normal((m, cfg.noise_dim)).astype(cfg.dtype)
            gtrace = forward(gen, z, "train", (cfg.seed, "gen", step))
            x_g = gtrace.output
            d = discriminator_loss(disc, x_l[il], y_l[il], x_u[iu], x_g, cfg.n_classes,
                                   "train", (cfg.seed, "disc", step))
            network_step(disc, d.grads, bundle.adam_d)
            g = generator_loss_feature_matching(gen, disc, x_u[iu], z, "train",
                                                (cfg.seed, "fm", step), gen_trace=gtrace)
            network_step(gen, g.grads, bundle.adam_g)
            acc["supervised"] += d.parts["supervised"]
            acc["unsupervised"] += d.parts["unsupervised"]
            acc["feature_matching"] += g.loss
            acc["train_acc"] += d.extra["train_acc"]
            step += 1
        row = {"epoch": epoch + 1, **{k: v / steps for k, v in acc.items()}}
        history.append(row)
        if callback is not None:
            callback(row)
    return bundle, history


def class_probabilities(logits, n_classes: int = 6) -> np.ndarray:
    """p(y = j | x, y <= K): softmax over the first K logits."""
    probs, _ = softmax_logsumexp(np.asarray(logits, dtype=np.float64)[:, :n_classes])
    return probs


def predict(bundle: ModelBundle, features) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(features)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != bundle.feature_dim:
        raise ValueError(f"feature dim {x.shape[1]} != model input dim {bundle.feature_dim}")
    logits = forward(bundle.discriminator, x, "infer").output
    probs = class_probabilities(logits, bundle.config.n_classes)
    return np.argmax(probs, axis=1), probs


def sample_generator(bundle: ModelBundle, n: int, seed: int) -> np.ndarray:
    if n == 0:
        return np.zeros((0, bundle.feature_dim), dtype=bundle.generator.dtype)
    z = keyed_rng(seed, "sample").standard_normal((n, bundle.config.noise_dim))
    return forward(bundle.generator, z, "infer").output
