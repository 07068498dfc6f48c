"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import numpy as np


def fd_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f() w.r.t. array x (perturbed in place)."""
    out = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        up = f()
        x[idx] = old - h
        down = f()
        x[idx] = old
        out[idx] = (up - down) / (2 * h)
    return out


def rel_err(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-300))


def naive_power_spectrogram(signal, n_fft: int, hop: int) -> np.ndarray:
    """|DFT|^2 of centered, reflect-padded, periodic-Hann frames via an explicit O(N^2) sum."""
    x = np.asarray(signal, dtype=np.float64)
    pad = n_fft // 2
    padded = np.concatenate([x[1:pad + 1][::-1], x, x[-pad - 1:-1][::-1]])
    n = np.arange(n_fft)
    window = 0.5 - 0.5 * np.cos(2 * np.pi * n / n_fft)
    k = np.arange(n_fft // 2 + 1)
    angle = 2 * np.pi * np.outer(k, n) / n_fft
    cos_m, sin_m = np.cos(angle), np.sin(angle)
    n_frames = 1 + len(x) // hop
    out = np.empty((len(k), n_frames))
    for t in range(n_frames):
        frame = padded[t * hop:t * hop + n_fft] * window
        re = cos_m @ frame
        im = -(sin_m @ frame)
        out[:, t] = re * re + im * im
    return out


def qp_dual_oracle(K: np.ndarray, y: np.ndarray, C: float, iters: int = 4000) -> tuple[np.ndarray, float]:
    """Maximize sum(a) - a'Qa/2 on {0 <= a <= C, a.y = 0} by projected gradient ascent.

    The projection onto the box-and-hyperplane set is found by bisection on the
    hyperplane multiplier.
    """
    Q = (y[:, None] * y[None, :]) * K
    step = 1.0 / np.linalg.eigvalsh(Q).max()

    def project(a):
        lo, hi = -C - np.abs(a).max() - 1.0, C + np.abs(a).max() + 1.0
        for _ in range(100):
            lam = 0.5 * (lo + hi)
            if np.clip(a - lam * y, 0, C) @ y > 0:
                lo = lam
            else:
                hi = lam
        return np.clip(a - 0.5 * (lo + hi) * y, 0, C)

    a = np.zeros(len(y))
    for _ in range(iters):
        a = project(a + step * (1.0 - Q @ a))
    return a, float(a.sum() - 0.5 * a @ Q @ a)
