"""Cross-validation split plans and nested labeled subsets."""

from __future__ import annotations

from dataclasses import dataclass, field

from hapticgan.data.records import MATERIALS, DatasetManifest
from hapticgan.seeding import keyed_rng


class SplitError(ValueError):
    pass


@dataclass
class SplitPlan:
    folds: list[tuple[list[str], list[str]]]
    labels: dict[str, str]
    seed: int
    labeled_ids_per_fold: list[list[str]] = field(default_factory=list)
    fold_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.labeled_ids_per_fold:
            self.labeled_ids_per_fold = [list(train) for train, _ in self.folds]
        if not self.fold_names:
            self.fold_names = [f"fold{i}" for i in range(len(self.folds))]

    def unlabeled_ids(self, fold: int) -> list[str]:
        labeled = set(self.labeled_ids_per_fold[fold])
        return [i for i in self.folds[fold][0] if i not in labeled]


def _by_class(ids, labels) -> dict[str, list[str]]:
    out = {m: [] for m in MATERIALS}
    for i in sorted(ids):
        out[labels[i]].append(i)
    return out


def stratified_kfold(manifest: DatasetManifest, k: int = 6, seed: int = 0) -> SplitPlan:
    """Per class: seeded shuffle, then deal into k folds.

    Each class's remainder goes to the next folds in a cursor shared across
    classes (starting at fold 0), so fold sizes also stay within one of each other.
    """
    labels = manifest.labels()
    groups = {m: ids for m, ids in _by_class(labels, labels).items() if ids}
    if k < 2:
        raise SplitError("k must be >= 2")
    if k > len(labels):
        raise SplitError(f"k={k} exceeds the number of records {len(labels)}")
    tests: list[list[str]] = [[] for _ in range(k)]
    cursor = 0
    for m, ids in groups.items():
        perm = keyed_rng(seed, "kfold", m).permutation(len(ids))
        base, extra = divmod(len(ids), k)
        bonus = {(cursor + j) % k for j in range(extra)}
        cursor = (cursor + extra) % k
        pos = 0
        for f in range(k):
            size = base + (1 if f in bonus else 0)
            tests[f].extend(ids[j] for j in perm[pos:pos + size])
            pos += size
    all_ids = sorted(labels)
    folds = []
    for test in tests:
        tset = set(test)
        folds.append(([i for i in all_ids if i not in tset], sorted(test)))
    return SplitPlan(folds, labels, seed)


def leave_one_object_out(manifest: DatasetManifest) -> SplitPlan:
    labels = manifest.labels()
    owner = {r.interaction_id: r.object_id for r in manifest.records}
    objects = sorted(set(owner.values()))
    if len(objects) < 2:
        raise SplitError("leave-one-object-out needs at least 2 objects")
    all_ids = sorted(labels)
    folds = []
    for obj in objects:
        test = [i for i in all_ids if owner[i] == obj]
        folds.append(([i for i in all_ids if owner[i] != obj], test))
    return SplitPlan(folds, labels, 0, fold_names=list(objects))


def class_order(split: SplitPlan, fold: int, material: str, seed: int) -> list[str]:
    """Seeded permutation of one class's training ids; labeled subsets are its prefixes."""
    train = split.folds[fold][0]
    ids = sorted(i for i in train if split.labels[i] == material)
    perm = keyed_rng(seed, "labeled", split.fold_names[fold], material).permutation(len(ids))
    return [ids[j] for j in perm]


def _round_half_up(x: float) -> int:
    return int(x + 0.5 + 1e-9)


def subset_labeled_fraction(split: SplitPlan, fraction: float, seed: int = 0) -> SplitPlan:
    """Keep ``round(fraction * n_class_train)`` labeled ids per class per fold."""
    if not 0.0 < fraction <= 1.0:
        raise SplitError("fraction must lie in (0, 1]")
    labeled = []
    for f in range(len(split.folds)):
        chosen = []
        for m in MATERIALS:
            order = class_order(split, f, m, seed)
            if not order:
                continue
            n = _round_half_up(fraction * len(order))
            if n < 1:
                raise SplitError(
                    f"fraction {fraction} leaves no labeled {m} example in {split.fold_names[f]} "
                    f"({len(order)} training examples)")
            chosen.extend(order[:n])
        labeled.append(sorted(chosen))
    return SplitPlan(split.folds, split.labels, split.seed, labeled, split.fold_names)


def subset_labeled_count(split: SplitPlan, per_class: int, seed: int = 0) -> SplitPlan:
    """Fixed number of labeled ids per class per fold (prefix of the same permutation)."""
    labeled = []
    for f in range(len(split.folds)):
        chosen = []
        for m in MATERIALS:
            order = class_order(split, f, m, seed)
            if not order:
                continue
            if per_class > len(order):
                raise SplitError(f"{per_class} labeled {m} examples requested, "
                                 f"{len(order)} available in {split.fold_names[f]}")
            chosen.extend(order[:per_class])
        labeled.append(sorted(chosen))
    return SplitPlan(split.folds, split.labels, split.seed, labeled, split.fold_names)


def unlabeled_subset(split: SplitPlan, fold: int, per_class: int | None, seed: int = 0) -> list[str]:
    """First ``per_class`` non-labeled training ids of each class (nested across counts).

    ``None`` takes every unlabeled id.
    """
    labeled = set(split.labeled_ids_per_fold[fold])
    chosen = []
    for m in MATERIALS:
        pool = [i for i in class_order(split, fold, m, seed) if i not in labeled]
        if per_class is None:
            chosen.extend(pool)
            continue
        if per_class > len(pool):
            raise SplitError(f"{per_class} unlabeled {m} examples requested, "
                             f"{len(pool)} available in {split.fold_names[fold]}")
        chosen.extend(pool[:per_class])
    return sorted(chosen)
