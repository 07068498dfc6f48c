"""Study drivers. Every (cell, fold) pair is an independent job.

Folds and labeled subsets depend only on the master seed, so different models
run under one seed see identical partitions. Each job's training seed is
derived from (master seed, cell, fold), which makes results independent of
how the worker pool schedules jobs.
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from hapticgan.baselines import ovo_predict, ovo_train, supervised_mlp_train
from hapticgan.data import (
    MATERIALS,
    DatasetManifest,
    SplitPlan,
    leave_one_object_out,
    load_store,
    stratified_kfold,
    subset_labeled_count,
    subset_labeled_fraction,
    unlabeled_subset,
)
from hapticgan.experiments.report import Cell, EvaluationReport, compute_metrics
from hapticgan.experiments.spec import ExperimentSpec, SpecError, ft_window, mic_window
from hapticgan.features import FeatureConfig, featurize_many, standardizer_fit
from hapticgan.seeding import mix64
from hapticgan.ssgan import predict, train

log = logging.getLogger(__name__)

HEAVY_OBJECT_LIMIT = 12


class HeavyStudyError(SpecError):
    """The requested study is hours-scale and was not explicitly allowed."""


class FeatureCache:
    """Featurizes the store once per FeatureConfig; safe to share between workers."""

    def __init__(self, manifest: DatasetManifest):
        self.manifest = manifest
        self.index = {r.interaction_id: k for k, r in enumerate(manifest.records)}
        self.labels = np.array([MATERIALS.index(r.material) for r in manifest.records])
        self._lock = threading.Lock()
        self._cache: dict[FeatureConfig, tuple[np.ndarray, dict[str, float]]] = {}

    def get(self, config: FeatureConfig) -> tuple[np.ndarray, dict[str, float]]:
        with self._lock:
            if config not in self._cache:
                X, vecs = featurize_many(self.manifest.records, config)
                cov = {m: min(v.coverage[m] for v in vecs) for m in config.modalities}
                self._cache[config] = (X, cov)
            return self._cache[config]

    def rows(self, ids) -> np.ndarray:
        return np.array([self.index[i] for i in ids], dtype=np.int64)


@dataclass
class CellPlan:
    modalities: tuple[str, ...]
    column: str
    setting: dict
    feature: FeatureConfig
    split: SplitPlan
    unlabeled: list[list[str]]     # per fold: unlabeled training ids handed to the model


def _job_seed(seed: int, cell: CellPlan, fold_name: str) -> int:
    return mix64(seed, "job", "+".join(cell.modalities), cell.column, fold_name) >> 1


def _fit_predict(spec: ExperimentSpec, X_l, y_l, X_u, X_t, seed: int) -> np.ndarray:
    if spec.model == "gan":
        bundle, _ = train(X_l, y_l, X_u, replace(spec.train, seed=seed))
        return predict(bundle, X_t)[0]
    if spec.model == "mlp":
        model, _ = supervised_mlp_train(X_l, y_l, replace(spec.train, seed=seed))
        return model.predict(X_t)[0]
    s = spec.svm
    ens = ovo_train(X_l, y_l, s.C, s.gamma, s.tol, s.max_passes, seed,
                    n_classes=spec.train.n_classes)
    return ovo_predict(ens, X_t)


def _run_job(spec: ExperimentSpec, cache: FeatureCache, cell: CellPlan, fold: int):
    start = time.perf_counter()
    X, _ = cache.get(cell.feature)
    y = cache.labels
    train_ids, test_ids = cell.split.folds[fold]
    lab = cache.rows(cell.split.labeled_ids_per_fold[fold])
    unl = cache.rows(cell.unlabeled[fold])
    test = cache.rows(test_ids)
    # standardize with statistics of exactly the training inputs the model sees
    fit_rows = np.concatenate([lab, unl]) if spec.model == "gan" else lab
    std = standardizer_fit(X[fit_rows])
    seed = _job_seed(spec.seed, cell, cell.split.fold_names[fold])
    pred = _fit_predict(spec, std.apply(X[lab]), y[lab], std.apply(X[unl]), std.apply(X[test]),
                        seed)
    metrics = compute_metrics(pred, y[test], spec.train.n_classes)
    log.info("%s %s %s: %.3f", "+".join(cell.modalities), cell.column,
             cell.split.fold_names[fold], metrics.accuracy)
    return metrics, time.perf_counter() - start


def _execute(spec: ExperimentSpec, cache: FeatureCache, plans: list[CellPlan]) -> EvaluationReport:
    start = time.perf_counter()
    jobs = [(c, f) for c in range(len(plans)) for f in range(len(plans[c].split.folds))]
    # featurize up front so workers never race on the cache
    for p in plans:
        cache.get(p.feature)
    if spec.threads == 1:
        results = [_run_job(spec, cache, plans[c], f) for c, f in jobs]
    else:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            futures = [pool.submit(_run_job, spec, cache, plans[c], f) for c, f in jobs]
            results = [fut.result() for fut in futures]
    by_cell: dict[int, list] = {}
    for (c, _), res in zip(jobs, results):
        by_cell.setdefault(c, []).append(res)
    cells = []
    for c, plan in enumerate(plans):
        res = by_cell[c]
        accs = [m.accuracy for m, _ in res]
        confs = [m.confusion for m, _ in res]
        _, coverage = cache.get(plan.feature)
        flags = [f"{m} window padded (min coverage {v:.3f})"
                 for m, v in coverage.items() if v < 1.0]
        cells.append(Cell(
            modalities=list(plan.modalities), column=plan.column, setting=plan.setting,
            fold_names=list(plan.split.fold_names), fold_accuracies=accs,
            fold_confusions=[cf.tolist() for cf in confs],
            mean_accuracy=float(np.mean(accs)), confusion=np.sum(confs, axis=0).tolist(),
            min_coverage=coverage, flags=flags, wall_clock_s=float(sum(t for _, t in res)),
        ))
    return EvaluationReport(spec.study, spec.model, spec.to_dict(), cells,
                            elapsed_s=time.perf_counter() - start)


def _manifest(spec: ExperimentSpec, manifest: DatasetManifest | None) -> DatasetManifest:
    if manifest is not None:
        return manifest
    if spec.store is None:
        raise SpecError("no store given")
    return load_store(spec.store)


def _feature(spec: ExperimentSpec, modalities, **windows) -> FeatureConfig:
    return replace(spec.feature, modalities=tuple(modalities), **windows)


def _pct(f: float) -> str:
    return f"{f:g}%"


def _windows(cfg: FeatureConfig) -> dict:
    out = {}
    if {"force", "temperature"} & set(cfg.modalities):
        out["ft_window_s"] = list(cfg.ft_window_s)
    if "mic" in cfg.modalities:
        out["mic_window_s"] = list(cfg.mic_window_s)
    return out


def _fraction_plans(spec: ExperimentSpec, base: SplitPlan, semi: bool) -> list[CellPlan]:
    plans = []
    for mods in spec.modality_sets:
        feat = _feature(spec, mods)
        for frac in spec.label_fractions():
            split = subset_labeled_fraction(base, frac / 100.0, spec.seed)
            unl = [split.unlabeled_ids(f) if semi else [] for f in range(len(split.folds))]
            plans.append(CellPlan(mods, _pct(frac), {"label_fraction_pct": frac,
                                                     "windows": _windows(feat)},
                                  feat, split, unl))
    return plans


def run_semisup_grid(spec: ExperimentSpec, manifest: DatasetManifest | None = None) -> EvaluationReport:
    """Stratified k-fold; labeled subset per fraction, the rest of the fold as unlabeled data."""
    if spec.study != "semisup_grid":
        spec = spec.with_(study="semisup_grid")
    man = _manifest(spec, manifest)
    plans = _fraction_plans(spec, stratified_kfold(man, spec.folds, spec.seed), semi=True)
    return _execute(spec, FeatureCache(man), plans)


def run_supervised_grid(spec: ExperimentSpec, manifest: DatasetManifest | None = None) -> EvaluationReport:
    """Same folds and labeled subsets as the semi-supervised grid; unlabeled data discarded."""
    if spec.study != "supervised_grid":
        spec = spec.with_(study="supervised_grid")
    man = _manifest(spec, manifest)
    plans = _fraction_plans(spec, stratified_kfold(man, spec.folds, spec.seed), semi=False)
    return _execute(spec, FeatureCache(man), plans)


def run_loo(spec: ExperimentSpec, manifest: DatasetManifest | None = None) -> EvaluationReport:
    """One fold per held-out object; cell accuracy is the unweighted mean over objects."""
    if spec.study != "loo":
        spec = spec.with_(study="loo")
    man = _manifest(spec, manifest)
    n_obj = len(man.objects)
    if n_obj > HEAVY_OBJECT_LIMIT and not spec.heavy:
        raise HeavyStudyError(
            f"leave-one-object-out on {n_obj} objects trains {n_obj} models per cell; "
            f"pass --heavy to run it (limit without it: {HEAVY_OBJECT_LIMIT} objects)")
    plans = _fraction_plans(spec, leave_one_object_out(man), semi=spec.model == "gan")
    return _execute(spec, FeatureCache(man), plans)


def run_duration_sweep(spec: ExperimentSpec, manifest: DatasetManifest | None = None) -> EvaluationReport:
    """All training data labeled; windows shortened to each duration."""
    if spec.study != "duration_sweep":
        spec = spec.with_(study="duration_sweep")
    man = _manifest(spec, manifest)
    base = stratified_kfold(man, spec.folds, spec.seed)
    plans = []
    for mods in spec.modality_sets:
        for d in spec.durations_for(mods):
            feat = _feature(spec, mods, ft_window_s=ft_window(d), mic_window_s=mic_window(d))
            plans.append(CellPlan(mods, f"{d:g}s", {"duration_s": d, "windows": _windows(feat)},
                                  feat, base, [[] for _ in base.folds]))
    return _execute(spec, FeatureCache(man), plans)


def run_unlabeled_scaling(spec: ExperimentSpec, manifest: DatasetManifest | None = None) -> EvaluationReport:
    """Fixed labeled count per class; nested unlabeled subsets of the stated sizes."""
    if spec.study != "unlabeled_scaling":
        spec = spec.with_(study="unlabeled_scaling")
    man = _manifest(spec, manifest)
    split = subset_labeled_count(stratified_kfold(man, spec.folds, spec.seed),
                                 spec.labeled_per_class, spec.seed)
    plans = []
    for mods in spec.modality_sets:
        feat = _feature(spec, mods)
        for n in spec.unlabeled_counts:
            unl = [unlabeled_subset(split, f, n, spec.seed) for f in range(len(split.folds))]
            plans.append(CellPlan(mods, str(n), {"labeled_per_class": spec.labeled_per_class,
                                                 "unlabeled_per_class": n,
                                                 "windows": _windows(feat)},
                                  feat, split, unl))
    return _execute(spec, FeatureCache(man), plans)


RUNNERS = {
    "semisup_grid": run_semisup_grid,
    "supervised_grid": run_supervised_grid,
    "loo": run_loo,
    "duration_sweep": run_duration_sweep,
    "unlabeled_scaling": run_unlabeled_scaling,
}


def run_experiment(spec: ExperimentSpec, manifest: DatasetManifest | None = None) -> EvaluationReport:
    return RUNNERS[spec.study](spec, manifest)
