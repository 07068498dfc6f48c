"""Experiment specifications: which study, which cells, which model."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from hapticgan.features import MODALITIES, FeatureConfig
from hapticgan.ssgan import TrainConfig

STUDIES = ("semisup_grid", "supervised_grid", "loo", "duration_sweep", "unlabeled_scaling")
MODELS = ("gan", "mlp", "svm")
STUDY_MODELS = {
    "semisup_grid": ("gan",),
    "supervised_grid": ("mlp", "svm"),
    "loo": ("gan", "mlp", "svm"),
    "duration_sweep": ("gan",),
    "unlabeled_scaling": ("gan",),
}

DEFAULT_FRACTIONS = (1.0, 2.0, 4.0, 8.0, 16.0, 50.0, 100.0)
DEFAULT_LOO_FRACTIONS = (1.0, 4.0, 16.0, 50.0, 100.0)
FT_DURATIONS = (4.0, 3.0, 2.0, 1.0, 0.5, 0.2, 0.1)
MIC_DURATIONS = (1.0, 0.7, 0.5, 0.3, 0.2, 0.1, 0.05)
DEFAULT_UNLABELED = (0, 40, 80, 160, 320, 640, 960)
FT_PRE_CONTACT_S = 0.1


class SpecError(ValueError):
    """An experiment specification that cannot be run as stated."""


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    gamma: float | None = None
    tol: float = 1e-3
    max_passes: int = 10


def ft_window(duration_s: float) -> tuple[float, float]:
    return (-FT_PRE_CONTACT_S, float(duration_s))


def mic_window(duration_s: float) -> tuple[float, float]:
    """A mic window of total length ``duration_s``, up to 0.1 s of it before contact.

    0.2 s gives the default (-0.1, 0.1); shorter windows split evenly around contact.
    """
    pre = min(FT_PRE_CONTACT_S, duration_s / 2)
    return (-pre, float(duration_s) - pre)


def parse_modalities(text: str) -> tuple[str, ...]:
    mods = tuple(m.strip() for m in text.split(",") if m.strip())
    unknown = [m for m in mods if m not in MODALITIES]
    if unknown or not mods:
        raise SpecError(f"modalities must be drawn from {MODALITIES}, got {text!r}")
    return tuple(m for m in MODALITIES if m in mods)


@dataclass
class ExperimentSpec:
    study: str = "semisup_grid"
    model: str = "gan"
    store: str | None = None
    modality_sets: list[tuple[str, ...]] = field(default_factory=lambda: [("force", "temperature")])
    fractions: tuple[float, ...] | None = None       # percent of training data labeled
    durations: tuple[float, ...] | None = None       # seconds after contact
    unlabeled_counts: tuple[int, ...] = DEFAULT_UNLABELED
    labeled_per_class: int = 40
    feature: FeatureConfig = field(default_factory=FeatureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    folds: int = 6
    seed: int = 0
    threads: int = 1
    heavy: bool = False

    def __post_init__(self):
        if self.study not in STUDIES:
            raise SpecError(f"unknown study {self.study!r}; choose from {STUDIES}")
        if self.model not in MODELS:
            raise SpecError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.model not in STUDY_MODELS[self.study]:
            raise SpecError(f"study {self.study!r} runs models {STUDY_MODELS[self.study]}, "
                            f"not {self.model!r}")
        self.modality_sets = [tuple(m for m in MODALITIES if m in s) for s in self.modality_sets]
        if not self.modality_sets or any(not s for s in self.modality_sets):
            raise SpecError("every modality set needs at least one modality")
        if self.fractions is not None:
            self.fractions = tuple(float(f) for f in self.fractions)
            if any(not 0 < f <= 100 for f in self.fractions):
                raise SpecError("label fractions must lie in (0, 100]")
        if self.durations is not None:
            self.durations = tuple(float(d) for d in self.durations)
            if any(d <= 0 for d in self.durations):
                raise SpecError("durations must be > 0")
        self.unlabeled_counts = tuple(int(c) for c in self.unlabeled_counts)
        if any(c < 0 for c in self.unlabeled_counts):
            raise SpecError("unlabeled counts must be >= 0")
        if self.labeled_per_class < 1:
            raise SpecError("labeled_per_class must be >= 1")
        if self.folds < 2:
            raise SpecError("folds must be >= 2")
        if self.threads < 1:
            raise SpecError("threads must be >= 1")

    def label_fractions(self) -> tuple[float, ...]:
        if self.fractions is not None:
            return self.fractions
        return DEFAULT_LOO_FRACTIONS if self.study == "loo" else DEFAULT_FRACTIONS

    def durations_for(self, modalities: tuple[str, ...]) -> tuple[float, ...]:
        if self.durations is not None:
            return self.durations
        return MIC_DURATIONS if modalities == ("mic",) else FT_DURATIONS

    def to_dict(self) -> dict:
        return {
            "study": self.study, "model": self.model, "store": self.store,
            "modality_sets": [list(s) for s in self.modality_sets],
            "fractions": None if self.fractions is None else list(self.fractions),
            "durations": None if self.durations is None else list(self.durations),
            "unlabeled_counts": list(self.unlabeled_counts),
            "labeled_per_class": self.labeled_per_class,
            "feature": self.feature.to_dict(), "train": self.train.to_dict(),
            "svm": dict(vars(self.svm)), "folds": self.folds, "seed": self.seed,
            "threads": self.threads, "heavy": self.heavy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        if "modality_sets" in d:
            d["modality_sets"] = [tuple(s) for s in d["modality_sets"]]
        if "feature" in d and isinstance(d["feature"], dict):
            d["feature"] = FeatureConfig.from_dict(d["feature"])
        if "train" in d and isinstance(d["train"], dict):
            d["train"] = TrainConfig.from_dict(d["train"])
        if "svm" in d and isinstance(d["svm"], dict):
            d["svm"] = SvmConfig(**d["svm"])
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def with_(self, **changes) -> "ExperimentSpec":
        return replace(self, **changes)
