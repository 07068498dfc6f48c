"""Minimal reverse-mode neural-network core (dense, activations, batch norm, noise, Adam)."""

from hapticgan.nn.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from hapticgan.nn.layers import BatchNorm, Dense, GaussianNoise, ReLU, Softplus, glorot_init
from hapticgan.nn.network import (
    Gradients,
    Network,
    StaleTraceError,
    Trace,
    backward,
    forward,
    log_softmax,
    softmax_logsumexp,
)
from hapticgan.nn.optim import AdamState, adam_step, network_step

__all__ = [
    "AdamState", "BatchNorm", "CheckpointError", "Dense", "GaussianNoise", "Gradients",
    "Network", "ReLU", "Softplus", "StaleTraceError", "Trace", "adam_step", "backward",
    "forward", "glorot_init", "load_checkpoint", "log_softmax", "network_step",
    "save_checkpoint", "softmax_logsumexp",
]
