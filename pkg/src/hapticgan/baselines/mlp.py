"""Supervised baseline: the discriminator topology with K outputs and cross-entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hapticgan.nn import AdamState, Network, backward, forward, network_step, softmax_logsumexp
from hapticgan.seeding import keyed_rng
from hapticgan.ssgan import TrainConfig, build_discriminator


@dataclass
class MlpModel:
    net: Network
    config: TrainConfig
    adam: AdamState

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        logits = forward(self.net, np.atleast_2d(X), "infer").output
        probs, _ = softmax_logsumexp(logits.astype(np.float64))
        return np.argmax(probs, axis=1), probs


def cross_entropy(logits, y) -> tuple[float, np.ndarray]:
    z = np.asarray(logits, dtype=np.float64)
    p, lse = softmax_logsumexp(z)
    n = len(y)
    loss = float(np.mean(lse - z[np.arange(n), y]))
    g = p.copy()
    g[np.arange(n), y] -= 1.0
    return loss, g / n


def supervised_mlp_train(X, y, cfg: TrainConfig, callback=None) -> tuple[MlpModel, list[dict]]:
    """Labeled data only; same epochs, batch size and Adam settings as the GAN."""
    X = np.asarray(X, dtype=cfg.dtype)
    y = np.asarray(y, dtype=np.int64)
    counts = np.bincount(y, minlength=cfg.n_classes)
    if len(counts) > cfg.n_classes or np.any(counts == 0):
        raise ValueError(f"every one of the {cfg.n_classes} classes needs a labeled example")
    net = build_discriminator(X.shape[1], cfg, keyed_rng(cfg.seed, "init", "mlp"),
                              n_out=cfg.n_classes)
    adam = AdamState(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    m = cfg.batch_size
    steps = math.ceil(len(X) / m)
    history, step = [], 0
    for epoch in range(cfg.epochs):
        tot_loss = tot_acc = 0.0
        for _ in range(steps):
            rng = keyed_rng(cfg.seed, "mlp-batch", step)
            idx = rng.choice(len(X), size=m, replace=len(X) < m)
            trace = forward(net, X[idx], "train", (cfg.seed, "mlp", step))
            loss, g = cross_entropy(trace.output, y[idx])
            grads = backward(net, trace, g, input_grad=False).params
            network_step(net, grads, adam)
            tot_loss += loss
            tot_acc += float(np.mean(np.argmax(trace.output, axis=1) == y[idx]))
            step += 1
        row = {"epoch": epoch + 1, "loss": tot_loss / steps, "train_acc": tot_acc / steps}
        history.append(row)
        if callback is not None:
            callback(row)
    return MlpModel(net, cfg, adam), history
