from hapticgan.baselines.mlp import MlpModel, supervised_mlp_train
from hapticgan.baselines.svm import (
    OvoEnsemble,
    SvmModel,
    default_gamma,
    dual_objective,
    kkt_violation,
    load_ovo,
    ovo_predict,
    ovo_train,
    rbf_kernel,
    rbf_matrix,
    save_ovo,
    svm_train_smo,
)

__all__ = [
    "MlpModel", "OvoEnsemble", "SvmModel", "default_gamma", "dual_objective", "kkt_violation",
    "load_ovo", "ovo_predict", "ovo_train", "rbf_kernel", "rbf_matrix", "save_ovo",
    "supervised_mlp_train", "svm_train_smo",
]
