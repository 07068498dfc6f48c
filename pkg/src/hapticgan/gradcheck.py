"""Finite-difference verification of every analytic gradient, in double precision.

Each check builds a small float64 problem, computes the analytic gradient and
compares it to central differences with a norm-wise relative error
``|a - n| / max(|a| + |n|, tiny)``. ``fault`` names a component whose analytic
gradient is deliberately scaled, to prove the checker can fail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hapticgan.nn import (
    BatchNorm,
    Dense,
    GaussianNoise,
    Network,
    ReLU,
    Softplus,
    backward,
    forward,
    softmax_logsumexp,
)
from hapticgan.seeding import keyed_rng
from hapticgan.ssgan import (
    TrainConfig,
    build_discriminator,
    build_generator,
    discriminator_loss,
    generator_loss_feature_matching,
)

TOLERANCE = 1e-4
STEP = 1e-5
FAULT_SCALE = 1.01


@dataclass
class CheckResult:
    component: str
    max_rel_error: float
    n_tensors: int

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error < TOLERANCE)


def rel_error(analytic, numeric) -> float:
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    denom = max(np.linalg.norm(a) + np.linalg.norm(n), 1e-30)
    return float(np.linalg.norm(a - n) / denom)


def numeric_grad(f, x: np.ndarray, h: float = STEP) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. ``x``, perturbed in place."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return g


def _projected_loss(net: Network, x: np.ndarray, w: np.ndarray, key):
    """Scalar sum(w * net(x)); its output gradient is simply ``w``."""
    def loss():
        return float(np.sum(w * forward(net, x, "train", key).output))
    return loss


def _check_network(name: str, net: Network, x: np.ndarray, seed: int, fault: str | None,
                   key=None) -> CheckResult:
    trace = forward(net, x, "train", key)
    w = keyed_rng(seed, name, "proj").standard_normal(trace.output.shape)
    grads = backward(net, trace, w)
    scale = FAULT_SCALE if fault == name else 1.0
    f = _projected_loss(net, x, w, key)
    errs = [rel_error(scale * grads.inputs, numeric_grad(f, x))]
    params = net.params()
    for pname, p in params.items():
        errs.append(rel_error(scale * grads.params[pname], numeric_grad(f, p)))
    return CheckResult(name, max(errs), 1 + len(params))


def _inputs(seed: int, name: str, shape, shift: float = 0.0) -> np.ndarray:
    x = keyed_rng(seed, name, "x").standard_normal(shape) + shift
    # keep ReLU inputs away from the kink so differences stay on one side
    return np.where(np.abs(x) < 0.05, 0.05 + np.abs(x), x)


def check_dense(seed: int, fault=None) -> CheckResult:
    net = Network([Dense(5, 4, keyed_rng(seed, "dense"))])
    net.set_tensor("0.b", keyed_rng(seed, "dense", "b").standard_normal(4))
    return _check_network("dense", net, _inputs(seed, "dense", (4, 5)), seed, fault)


def check_relu(seed: int, fault=None) -> CheckResult:
    return _check_network("relu", Network([ReLU()]), _inputs(seed, "relu", (4, 6)), seed, fault)


def check_softplus(seed: int, fault=None) -> CheckResult:
    return _check_network("softplus", Network([Softplus()]), _inputs(seed, "softplus", (4, 6)),
                          seed, fault)


def check_batchnorm(seed: int, fault=None) -> CheckResult:
    bn = BatchNorm(5)
    rng = keyed_rng(seed, "batchnorm", "affine")
    net = Network([bn])
    net.set_tensor("0.gamma", rng.uniform(0.5, 1.5, 5))
    net.set_tensor("0.beta", rng.standard_normal(5))
    x = _inputs(seed, "batchnorm", (6, 5)) * 2.0 + 1.0
    return _check_network("batchnorm", net, x, seed, fault)


def check_gaussian_noise(seed: int, fault=None) -> CheckResult:
    # the draw is keyed, so repeated forwards add the same noise
    net = Network([GaussianNoise(0.5)])
    return _check_network("gaussian_noise", net, _inputs(seed, "noise", (4, 6)), seed, fault,
                          key=(seed, "noise-layer"))


def check_composite(seed: int, fault=None) -> CheckResult:
    rng = keyed_rng(seed, "composite")
    net = Network([Dense(6, 8, rng), Softplus(), BatchNorm(8), Dense(8, 7, rng), ReLU(),
                   GaussianNoise(0.3), Dense(7, 3, rng)])
    return _check_network("composite", net, _inputs(seed, "composite", (5, 6)), seed, fault,
                          key=(seed, "composite-noise"))


def check_softmax_logsumexp(seed: int, fault=None) -> CheckResult:
    z = keyed_rng(seed, "lse").standard_normal((4, 7)) * 3.0
    w = keyed_rng(seed, "lse", "w").standard_normal(4)
    probs, _ = softmax_logsumexp(z)
    analytic = probs * w[:, None]
    if fault == "softmax_logsumexp":
        analytic = analytic * FAULT_SCALE
    num = numeric_grad(lambda: float(w @ softmax_logsumexp(z)[1]), z)
    return CheckResult("softmax_logsumexp", rel_error(analytic, num), 1)


def _small_config(seed: int) -> TrainConfig:
    return TrainConfig(seed=seed, gen_hidden=(6, 5), disc_hidden=(7, 6, 6, 5, 5),
                       noise_dim=4, dtype="float64", batch_size=4)


def check_discriminator_loss(seed: int, fault=None) -> CheckResult:
    """Both terms of the K+1 loss, including the supervised term's real-class renormalisation."""
    cfg = _small_config(seed)
    d_in = 5
    disc = build_discriminator(d_in, cfg, keyed_rng(seed, "k1_loss", "init"))
    rng = keyed_rng(seed, "k1_loss", "data")
    x_l, x_u, x_g = (rng.standard_normal((4, d_in)) for _ in range(3))
    y = rng.integers(0, cfg.n_classes, 4)
    key = (seed, "k1_loss-noise")
    res = discriminator_loss(disc, x_l, y, x_u, x_g, cfg.n_classes, "train", key)

    def loss():
        return discriminator_loss(disc, x_l, y, x_u, x_g, cfg.n_classes, "train", key).loss

    scale = FAULT_SCALE if fault == "discriminator_loss" else 1.0
    errs = [rel_error(scale * res.grads[n], numeric_grad(loss, p))
            for n, p in disc.params().items()]
    return CheckResult("discriminator_loss", max(errs), len(errs))


def check_feature_matching(seed: int, fault=None) -> CheckResult:
    """Generator gradients through a frozen discriminator (its parameters must not move)."""
    cfg = _small_config(seed)
    d_in = 5
    gen = build_generator(d_in, cfg, keyed_rng(seed, "fm", "gen"))
    disc = build_discriminator(d_in, cfg, keyed_rng(seed, "fm", "disc"))
    rng = keyed_rng(seed, "fm", "data")
    x_u = rng.standard_normal((4, d_in))
    z = rng.standard_normal((4, cfg.noise_dim))
    key = (seed, "fm-noise")
    before = {n: p.copy() for n, p in disc.params().items()}
    res = generator_loss_feature_matching(gen, disc, x_u, z, "train", key)

    def loss():
        return generator_loss_feature_matching(gen, disc, x_u, z, "train", key).loss

    scale = FAULT_SCALE if fault == "feature_matching" else 1.0
    errs = [rel_error(scale * res.grads[n], numeric_grad(loss, p))
            for n, p in gen.params().items()]
    frozen = all(np.array_equal(before[n], p) for n, p in disc.params().items())
    return CheckResult("feature_matching", max(errs) if frozen else float("inf"), len(errs))


def check_cross_entropy(seed: int, fault=None) -> CheckResult:
    from hapticgan.baselines.mlp import cross_entropy

    z = keyed_rng(seed, "ce").standard_normal((5, 6))
    y = keyed_rng(seed, "ce", "y").integers(0, 6, 5)
    _, g = cross_entropy(z, y)
    if fault == "cross_entropy":
        g = g * FAULT_SCALE
    return CheckResult("cross_entropy", rel_error(g, numeric_grad(lambda: cross_entropy(z, y)[0], z)), 1)


CHECKS = {
    "dense": check_dense,
    "relu": check_relu,
    "softplus": check_softplus,
    "batchnorm": check_batchnorm,
    "gaussian_noise": check_gaussian_noise,
    "composite": check_composite,
    "softmax_logsumexp": check_softmax_logsumexp,
    "discriminator_loss": check_discriminator_loss,
    "feature_matching": check_feature_matching,
    "cross_entropy": check_cross_entropy,
}


def run_gradcheck(seed: int = 0, fault: str | None = None) -> list[CheckResult]:
    if fault is not None and fault not in CHECKS:
        raise ValueError(f"unknown component {fault!r}; choose from {sorted(CHECKS)}")
    return [check(seed, fault) for check in CHECKS.values()]


def format_report(results: list[CheckResult]) -> str:
    width = max(len(r.component) for r in results)
    lines = [f"{r.component:<{width}}  max_rel_error={r.max_rel_error:.3e}  "
             f"{'PASS' if r.passed else 'FAIL'}" for r in results]
    ok = all(r.passed for r in results)
    lines.append(f"{sum(r.passed for r in results)}/{len(results)} components passed"
                 f" (tolerance {TOLERANCE:g})" + ("" if ok else "; gradient check FAILED"))
    return "\n".join(lines)
