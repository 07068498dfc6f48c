"""RBF-kernel SVM trained with Platt's SMO, combined one-vs-one for multiclass.

Decision function: ``f(x) = sum_i alpha_i y_i k(x_i, x) + b``.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from hapticgan.seeding import keyed_rng


def rbf_kernel(a, b, gamma: float) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.exp(-gamma * (d @ d)))


def rbf_matrix(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def default_gamma(X) -> float:
    """1 / (n_features * Var(X)), the usual 'scale' heuristic."""
    X = np.asarray(X, dtype=np.float64)
    var = X.var()
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray        # alpha_i * y_i of the support vectors
    b: float
    gamma: float
    C: float
    pair: tuple = (1, -1)
    alpha: np.ndarray | None = None   # full alpha vector from training (diagnostics)
    converged: bool = True

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if len(self.dual_coef) == 0:
            return np.full(len(X), self.b)
        return rbf_matrix(X, self.support_vectors, self.gamma) @ self.dual_coef + self.b

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision(X) >= 0, 1, -1)


def dual_objective(alpha, y, K) -> float:
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


class _Smo:
    def __init__(self, K, y, C, tol, seed):
        self.K, self.y, self.C, self.tol = K, y.astype(np.float64), float(C), float(tol)
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.E = -self.y.copy()          # f(x) = 0 initially
        self.rng = keyed_rng(seed, "smo")
        self.eps = 1e-12

    def take_step(self, i1, i2) -> bool:
        if i1 == i2:
            return False
        K, y, C = self.K, self.y, self.C
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = y[i1], y[i2]
        E1, E2 = self.E[i1], self.E[i2]
        s = y1 * y2
        if y1 != y2:
            L, H = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            L, H = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        if H - L < self.eps:
            return False
        k11, k12, k22 = K[i1, i1], K[i1, i2], K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > self.eps:
            a2n = min(H, max(L, a2 + y2 * (E1 - E2) / eta))
        else:
            # objective is linear along the constraint line: compare the end points
            f1 = y1 * (E1 - self.b) - a1 * k11 - s * a2 * k12
            f2 = y2 * (E2 - self.b) - s * a1 * k12 - a2 * k22
            L1, H1 = a1 + s * (a2 - L), a1 + s * (a2 - H)
            Lobj = L1 * f1 + L * f2 + 0.5 * L1 * L1 * k11 + 0.5 * L * L * k22 + s * L * L1 * k12
            Hobj = H1 * f1 + H * f2 + 0.5 * H1 * H1 * k11 + 0.5 * H * H * k22 + s * H * H1 * k12
            if Lobj < Hobj - self.eps:
                a2n = L
            elif Lobj > Hobj + self.eps:
                a2n = H
            else:
                a2n = a2
        if abs(a2n - a2) < self.eps * (a2n + a2 + self.eps):
            return False
        a1n = a1 + s * (a2 - a2n)
        # snap to the box to keep bound checks exact
        a1n = min(C, max(0.0, a1n))
        if a1n < self.eps * C:
            a1n = 0.0
        elif a1n > C * (1 - self.eps):
            a1n = C
        if a2n < self.eps * C:
            a2n = 0.0
        elif a2n > C * (1 - self.eps):
            a2n = C
        d1, d2 = y1 * (a1n - a1), y2 * (a2n - a2)
        b1 = self.b - E1 - d1 * k11 - d2 * k12
        b2 = self.b - E2 - d1 * k12 - d2 * k22
        if 0.0 < a1n < C:
            bn = b1
        elif 0.0 < a2n < C:
            bn = b2
        else:
            bn = 0.5 * (b1 + b2)
        self.E += d1 * K[:, i1] + d2 * K[:, i2] + (bn - self.b)
        self.alpha[i1], self.alpha[i2] = a1n, a2n
        self.b = bn
        return True

    def examine(self, i2) -> bool:
        y2, a2, E2 = self.y[i2], self.alpha[i2], self.E[i2]
        r2 = E2 * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return False
        nonbound = np.flatnonzero((self.alpha > 0) & (self.alpha < self.C))
        if len(nonbound) > 1:
            i1 = int(nonbound[np.argmax(np.abs(self.E[nonbound] - E2))])
            if self.take_step(i1, i2):
                return True
        if len(nonbound):
            for i1 in np.roll(nonbound, -int(self.rng.integers(len(nonbound)))):
                if self.take_step(int(i1), i2):
                    return True
        for i1 in np.roll(np.arange(self.n), -int(self.rng.integers(self.n))):
            if self.take_step(int(i1), i2):
                return True
        return False

    def run(self, max_passes: int, max_iter: int) -> bool:
        examine_all, passes, iters = True, 0, 0
        while True:
            changed = 0
            if examine_all:
                passes += 1
                idx = range(self.n)
            else:
                idx = np.flatnonzero((self.alpha > 0) & (self.alpha < self.C))
            for i in idx:
                changed += self.examine(int(i))
            iters += 1
            if examine_all and changed == 0:
                return True
            if examine_all:
                examine_all = False
            elif changed == 0:
                examine_all = True
            if passes >= max_passes and examine_all or iters >= max_iter:
                return False


def svm_train_smo(X, y, C: float = 1.0, gamma: float | None = None, tol: float = 1e-3,
                  max_passes: int = 10, seed: int = 0, kernel_matrix=None) -> SvmModel:
    """Binary SVM, labels in {-1, +1}.

    ``max_passes`` caps the number of full sweeps over the training set;
    hitting the cap leaves ``converged=False`` and emits a warning.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if set(np.unique(y)) - {-1, 1}:
        raise ValueError("labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise ValueError("SVM training needs both classes present")
    if C <= 0:
        raise ValueError("C must be > 0")
    gamma = default_gamma(X) if gamma is None else float(gamma)
    K = rbf_matrix(X, X, gamma) if kernel_matrix is None else kernel_matrix
    smo = _Smo(K, y, C, tol, seed)
    converged = smo.run(max_passes, max_iter=100 * max(max_passes, 1) * max(len(y), 10))
    if not converged:
        warnings.warn(f"SMO stopped after {max_passes} full passes before meeting tol={tol}",
                      RuntimeWarning, stacklevel=2)
    sv = smo.alpha > 0
    return SvmModel(X[sv], (smo.alpha * smo.y)[sv], smo.b, gamma, float(C),
                    alpha=smo.alpha.copy(), converged=converged)


def kkt_violation(model: SvmModel, X, y) -> float:
    """Largest KKT violation of a trained model on its training set."""
    y = np.asarray(y, dtype=np.float64)
    m = y * model.decision(X)
    a, C = model.alpha, model.C
    v = np.zeros_like(m)
    lo = a <= 0
    hi = a >= C
    mid = ~lo & ~hi
    v[lo] = np.maximum(0.0, 1.0 - m[lo])
    v[hi] = np.maximum(0.0, m[hi] - 1.0)
    v[mid] = np.abs(m[mid] - 1.0)
    return float(v.max()) if len(v) else 0.0


@dataclass
class OvoEnsemble:
    classes: list
    models: dict          # (i, j) class-index pair -> SvmModel, +1 means classes[i]
    gamma: float
    C: float

    def decisions(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        k = len(self.classes)
        votes = np.zeros((len(X), k))
        margins = np.zeros((len(X), k))
        for (i, j), model in self.models.items():
            d = model.decision(X)
            votes[:, i] += d > 0
            votes[:, j] += d < 0
            margins[:, i] += d
            margins[:, j] -= d
        return votes, margins


def ovo_train(X, y, C: float = 1.0, gamma: float | None = None, tol: float = 1e-3,
              max_passes: int = 10, seed: int = 0, n_classes: int | None = None) -> OvoEnsemble:
    """One machine per class pair. With ``n_classes`` the labels must cover 0..n_classes-1."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes = sorted(np.unique(y).tolist())
    if n_classes is not None:
        missing = sorted(set(range(n_classes)) - set(classes))
        if missing:
            raise ValueError(f"no training examples for classes {missing}")
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    gamma = default_gamma(X) if gamma is None else float(gamma)
    models = {}
    for i, j in combinations(range(len(classes)), 2):
        sel = (y == classes[i]) | (y == classes[j])
        yy = np.where(y[sel] == classes[i], 1, -1)
        models[(i, j)] = svm_train_smo(X[sel], yy, C, gamma, tol, max_passes, seed)
        models[(i, j)].pair = (classes[i], classes[j])
    return OvoEnsemble(classes, models, gamma, float(C))


def ovo_predict(ensemble: OvoEnsemble, X) -> np.ndarray:
    """Majority vote; ties by summed margins, then lowest class index."""
    votes, margins = ensemble.decisions(X)
    out = []
    for v, m in zip(votes, margins):
        cand = np.flatnonzero(v == v.max())
        best = cand[np.flatnonzero(m[cand] == m[cand].max())[0]]
        out.append(ensemble.classes[int(best)])
    return np.asarray(out)


SVM_MAGIC = b"HGANSVM1"


def save_ovo(path, ens: OvoEnsemble) -> None:
    """JSON header (length-prefixed) followed by binary32 LE support-vector blocks."""
    entries, blocks, offset = [], [], 0
    for (i, j), m in ens.models.items():
        sv = np.ascontiguousarray(m.support_vectors, dtype="<f4")
        entries.append({"pair": [i, j], "n_sv": int(sv.shape[0]),
                        "dim": int(sv.shape[1]) if sv.ndim == 2 else 0,
                        "dual_coef": m.dual_coef.tolist(), "b": m.b, "offset": offset})
        blocks.append(sv.tobytes())
        offset += sv.nbytes
    header = json.dumps({"classes": list(ens.classes), "gamma": ens.gamma, "C": ens.C,
                         "models": entries}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(SVM_MAGIC + struct.pack("<Q", len(header)) + header)
        for blk in blocks:
            fh.write(blk)


def load_ovo(path) -> OvoEnsemble:
    raw = Path(path).read_bytes()
    if raw[:8] != SVM_MAGIC:
        raise ValueError(f"{path}: not an SVM model file")
    (hlen,) = struct.unpack_from("<Q", raw, 8)
    header = json.loads(raw[16:16 + hlen])
    base = 16 + hlen
    models = {}
    for e in header["models"]:
        n, d = e["n_sv"], e["dim"]
        sv = np.frombuffer(raw[base + e["offset"]: base + e["offset"] + 4 * n * d], dtype="<f4")
        models[tuple(e["pair"])] = SvmModel(sv.reshape(n, d).astype(np.float64),
                                            np.asarray(e["dual_coef"]), e["b"],
                                            header["gamma"], header["C"])
    return OvoEnsemble(header["classes"], models, header["gamma"], header["C"])
