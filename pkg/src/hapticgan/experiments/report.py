"""Evaluation reports: metrics, JSON round-trip, CSV export, text tables."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hapticgan import __version__
from hapticgan.data.records import MATERIALS

TIMING_FIELDS = frozenset({"wall_clock_s", "elapsed_s"})
REPORT_FORMAT = "hapticgan-report/1"

MODALITY_NAMES = {"force": "Force", "temperature": "Temperature", "mic": "Contact mic"}


@dataclass
class Metrics:
    accuracy: float
    confusion: np.ndarray   # confusion[true][pred]


def compute_metrics(predictions, truths, n_classes: int = len(MATERIALS)) -> Metrics:
    p = np.asarray(predictions, dtype=np.int64)
    t = np.asarray(truths, dtype=np.int64)
    if p.shape != t.shape:
        raise ValueError(f"{len(p)} predictions for {len(t)} truths")
    if p.size == 0:
        raise ValueError("metrics need at least one prediction")
    if p.min() < 0 or t.min() < 0 or p.max() >= n_classes or t.max() >= n_classes:
        raise ValueError(f"class indices must lie in [0, {n_classes})")
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (t, p), 1)
    return Metrics(float(np.trace(conf) / conf.sum()), conf)


def accuracy_from_confusion(conf) -> float:
    c = np.asarray(conf)
    return float(np.trace(c) / c.sum())


@dataclass
class Cell:
    modalities: list[str]
    column: str                    # table column label, e.g. "4%", "0.5s", "960"
    setting: dict
    fold_names: list[str]
    fold_accuracies: list[float]
    fold_confusions: list[list[list[int]]]
    mean_accuracy: float
    confusion: list[list[int]]
    min_coverage: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    wall_clock_s: float = 0.0

    @property
    def row_label(self) -> str:
        return ", ".join(MODALITY_NAMES[m] for m in self.modalities)


@dataclass
class EvaluationReport:
    study: str
    model: str
    spec: dict
    cells: list[Cell]
    version: str = __version__
    format: str = REPORT_FORMAT
    elapsed_s: float = 0.0

    def cell(self, modalities, column: str) -> Cell:
        mods = list(modalities)
        for c in self.cells:
            if c.modalities == mods and c.column == column:
                return c
        raise KeyError(f"no cell {mods} / {column}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        d = dict(d)
        d["cells"] = [Cell(**c) for c in d["cells"]]
        return cls(**d)

    @classmethod
    def load(cls, path) -> "EvaluationReport":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_csv(self) -> str:
        """One row per cell per fold."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["study", "model", "modalities", "column", "fold", "fold_name", "accuracy",
                    "n_test"])
        for c in self.cells:
            for k, (name, acc) in enumerate(zip(c.fold_names, c.fold_accuracies)):
                n = int(np.sum(c.fold_confusions[k]))
                w.writerow([self.study, self.model, "+".join(c.modalities), c.column, k, name,
                            repr(acc), n])
        return buf.getvalue()

    def render_table(self) -> str:
        """Rows = modality sets, columns = the swept setting; accuracies in percent."""
        rows, cols = [], []
        for c in self.cells:
            if c.row_label not in rows:
                rows.append(c.row_label)
            if c.column not in cols:
                cols.append(c.column)
        grid = {(c.row_label, c.column): c for c in self.cells}
        head = {"semisup_grid": "Percentage of training data labeled",
                "supervised_grid": "Percentage of dataset used for training",
                "loo": "Leave-one-object-out, percentage of training data labeled",
                "duration_sweep": "Length of interaction in seconds",
                "unlabeled_scaling": "Number of unlabeled training samples per class"}[self.study]
        w0 = max(len("Modalities"), *(len(r) for r in rows))
        wc = max(6, *(len(c) for c in cols))
        lines = [f"{self.study} / {self.model}: {head}",
                 "Modalities".ljust(w0) + "".join(f"  {c:>{wc}}" for c in cols)]
        lines.append("-" * len(lines[-1]))
        for r in rows:
            cells = []
            for col in cols:
                c = grid.get((r, col))
                cells.append(f"  {'' if c is None else f'{100 * c.mean_accuracy:.1f}':>{wc}}")
            lines.append(r.ljust(w0) + "".join(cells))
        flagged = [c for c in self.cells if c.flags]
        for c in flagged:
            lines.append(f"note: {c.row_label} / {c.column}: {'; '.join(c.flags)}")
        return "\n".join(lines)


def strip_timing(obj):
    """Drop wall-clock fields so reports can be compared for bit-identity."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_FIELDS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj
