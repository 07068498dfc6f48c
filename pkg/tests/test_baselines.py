import math

import numpy as np
import pytest

from hapticgan.baselines import (
    MlpModel,
    default_gamma,
    dual_objective,
    kkt_violation,
    load_ovo,
    ovo_predict,
    ovo_train,
    rbf_kernel,
    rbf_matrix,
    save_ovo,
    supervised_mlp_train,
    svm_train_smo,
)
from hapticgan.baselines.mlp import cross_entropy
from hapticgan.baselines.svm import OvoEnsemble, SvmModel
from hapticgan.ssgan import TrainConfig

from oracles import fd_grad, qp_dual_oracle, rel_err


def test_rbf_examples():
    a = np.array([1.0, 2.0, 3.0])
    assert rbf_kernel(a, a, 0.7) == 1.0
    assert rbf_kernel(a, -a, 0.0) == 1.0
    assert abs(rbf_kernel([0, 0], [1, 0], 1.0) - math.exp(-1)) < 1e-15
    with pytest.raises(ValueError):
        rbf_kernel([0, 0], [0, 0, 0], 1.0)


def test_kernel_matrix_is_symmetric_psd():
    X = np.random.default_rng(0).standard_normal((15, 4))
    K = rbf_matrix(X, X, 0.3)
    assert np.allclose(K, K.T)
    np.linalg.cholesky(K + 1e-10 * np.eye(15))
    assert abs(K[2, 5] - rbf_kernel(X[2], X[5], 0.3)) < 1e-12


def test_default_gamma():
    X = np.random.default_rng(1).standard_normal((30, 5)) * 2
    assert default_gamma(X) == pytest.approx(1 / (5 * X.var()))
    assert default_gamma(np.ones((3, 2))) == 1.0


def test_separable_toy_fits_training_set():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [3.0, 0.0], [3.0, 1.0]])
    y = np.array([-1, -1, 1, 1])
    m = svm_train_smo(X, y, C=10.0, gamma=0.5)
    assert np.array_equal(m.predict(X), y)
    assert kkt_violation(m, X, y) <= 1e-3


@pytest.mark.parametrize("seed", [10, 11])
def test_smo_against_qp_oracle(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((20, 2))
    y = np.where(rng.random(20) < 0.5, 1, -1)
    y[:2] = [1, -1]
    m = svm_train_smo(X, y, C=2.0, gamma=1.0)
    K = rbf_matrix(X, X, 1.0)
    _, ref = qp_dual_oracle(K, y.astype(float), 2.0)
    assert abs(dual_objective(m.alpha, y, K) - ref) < 1e-4
    assert abs(m.alpha @ y) < 1e-8
    assert np.all(m.alpha >= 0) and np.all(m.alpha <= 2.0)


def test_conflicting_duplicates_hit_the_box():
    X = np.array([[1.0, 1.0], [1.0, 1.0]])
    y = np.array([1, -1])
    m = svm_train_smo(X, y, C=0.1, gamma=1.0)
    assert np.allclose(m.alpha, [0.1, 0.1])


def test_single_class_rejected():
    with pytest.raises(ValueError):
        svm_train_smo(np.zeros((3, 2)), [1, 1, 1])
    with pytest.raises(ValueError):
        svm_train_smo(np.zeros((2, 2)), [0, 1])
    with pytest.raises(ValueError):
        ovo_train(np.zeros((3, 2)), [0, 0, 0])
    with pytest.raises(ValueError, match="classes \\[2\\]"):
        ovo_train(np.eye(4), [0, 0, 1, 1], n_classes=3)


def _blobs(k=3, n=10, seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((k, 3)) * 4
    y = np.repeat(np.arange(k), n)
    return centers[y] + 0.5 * rng.standard_normal((len(y), 3)), y


def test_ovo_two_classes_reduces_to_sign():
    X, y = _blobs(k=2)
    ens = ovo_train(X, y)
    assert len(ens.models) == 1
    d = ens.models[(0, 1)].decision(X)
    assert np.array_equal(ovo_predict(ens, X), np.where(d > 0, 0, 1))


def test_ovo_six_classes_has_fifteen_models():
    X, y = _blobs(k=6, n=5)
    ens = ovo_train(X, y)
    assert len(ens.models) == 15
    assert np.mean(ovo_predict(ens, X) == y) == 1.0


def test_zero_margins_give_class_zero():
    zero = SvmModel(np.zeros((0, 2)), np.zeros(0), 0.0, 1.0, 1.0)
    ens = OvoEnsemble(list(range(6)), {(i, j): zero for i in range(6) for j in range(i + 1, 6)},
                      1.0, 1.0)
    assert ovo_predict(ens, np.zeros((3, 2))).tolist() == [0, 0, 0]


def test_margin_tie_break():
    # three-way vote tie resolved by the summed margins
    def const(b):
        return SvmModel(np.zeros((0, 1)), np.zeros(0), b, 1.0, 1.0)
    ens = OvoEnsemble([0, 1, 2], {(0, 1): const(1.0), (1, 2): const(1.0), (0, 2): const(-2.0)},
                      1.0, 1.0)
    # votes: 0 beats 1, 1 beats 2, 2 beats 0; margins: 0 -> -1, 1 -> 0, 2 -> 1
    assert ovo_predict(ens, np.zeros((1, 1))).tolist() == [2]


def test_ovo_relabeling_invariance():
    X, y = _blobs(k=4, n=8, seed=3)
    perm = np.array([2, 0, 3, 1])
    a = ovo_predict(ovo_train(X, y, gamma=0.2), X)
    b = ovo_predict(ovo_train(X, perm[y], gamma=0.2), X)
    assert np.array_equal(perm[a], b)


def test_ovo_save_load(tmp_path):
    X, y = _blobs(k=3)
    ens = ovo_train(X, y)
    save_ovo(tmp_path / "svm.bin", ens)
    back = load_ovo(tmp_path / "svm.bin")
    assert back.classes == ens.classes and len(back.models) == 3
    assert np.array_equal(ovo_predict(back, X), ovo_predict(ens, X))
    (tmp_path / "bad").write_bytes(b"x" * 20)
    with pytest.raises(ValueError):
        load_ovo(tmp_path / "bad")


def test_cross_entropy_gradient():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((4, 6))
    y = np.array([0, 3, 5, 3])
    loss, g = cross_entropy(z, y)
    assert rel_err(g, fd_grad(lambda: cross_entropy(z, y)[0], z)) < 1e-6
    assert abs(cross_entropy(np.zeros((2, 6)), [1, 2])[0] - math.log(6)) < 1e-12


def _mlp_cfg(**kw):
    return TrainConfig(**{**dict(gen_hidden=(4, 4), disc_hidden=(16, 16, 16, 16, 16),
                                 batch_size=10, epochs=60, dtype="float64"), **kw})


def test_mlp_learns_and_is_deterministic():
    X, y = _blobs(k=6, n=8, seed=4)
    a, ha = supervised_mlp_train(X, y, _mlp_cfg(seed=2))
    b, hb = supervised_mlp_train(X, y, _mlp_cfg(seed=2))
    assert isinstance(a, MlpModel) and ha == hb
    pa, pb = a.net.params(), b.net.params()
    assert all(np.array_equal(pa[k], pb[k]) for k in pa)
    cls, probs = a.predict(X)
    assert np.mean(cls == y) >= 0.95
    assert a.net.out_dim == 6 and np.allclose(probs.sum(1), 1)


def test_mlp_empty_class():
    X, y = _blobs(k=6, n=3)
    with pytest.raises(ValueError):
        supervised_mlp_train(X[y != 4], y[y != 4], _mlp_cfg())
