from hapticgan.experiments.report import (
    Cell,
    EvaluationReport,
    Metrics,
    accuracy_from_confusion,
    compute_metrics,
    strip_timing,
)
from hapticgan.experiments.runner import (
    HEAVY_OBJECT_LIMIT,
    FeatureCache,
    HeavyStudyError,
    run_duration_sweep,
    run_experiment,
    run_loo,
    run_semisup_grid,
    run_supervised_grid,
    run_unlabeled_scaling,
)
from hapticgan.experiments.spec import (
    DEFAULT_FRACTIONS,
    DEFAULT_UNLABELED,
    FT_DURATIONS,
    MIC_DURATIONS,
    STUDIES,
    STUDY_MODELS,
    ExperimentSpec,
    SpecError,
    SvmConfig,
    ft_window,
    mic_window,
    parse_modalities,
)

__all__ = [
    "DEFAULT_FRACTIONS", "DEFAULT_UNLABELED", "FT_DURATIONS", "HEAVY_OBJECT_LIMIT", "MIC_DURATIONS",
    "STUDIES", "STUDY_MODELS", "Cell", "EvaluationReport", "ExperimentSpec", "FeatureCache",
    "HeavyStudyError", "Metrics", "SpecError", "SvmConfig", "accuracy_from_confusion",
    "compute_metrics", "ft_window", "mic_window", "parse_modalities", "run_duration_sweep",
    "run_experiment", "run_loo", "run_semisup_grid", "run_supervised_grid",
    "run_unlabeled_scaling", "strip_timing",
]
