"""In-memory dataset types: sensor streams, interaction records and manifests."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

MATERIALS = ("metal", "plastic", "wood", "glass", "ceramic", "fabric")
MOTIONS = ("horizontal", "vertical")
STREAMS = ("force", "temperature", "mic")
N_CLASSES = len(MATERIALS)

# window every stream should cover, relative to contact
COVERAGE_WINDOW_S = (-0.1, 4.0)

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.\-]*$")


class ValidationError(ValueError):
    """A record or manifest violates a dataset invariant."""


def check_id(value: str, what: str) -> str:
    if not isinstance(value, str) or not _ID_RE.match(value):
        raise ValidationError(f"invalid {what} {value!r}: use letters, digits, '_', '.', '-'")
    return value


@dataclass(eq=False)
class SensorStream:
    """Uniformly sampled multichannel signal.

    ``samples`` has shape (n_samples, channels) and dtype float32; sample ``k``
    was taken ``t0_offset_s + k / rate_hz`` seconds after the contact instant.
    """

    samples: np.ndarray
    rate_hz: float
    t0_offset_s: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float32)
        if arr.ndim == 1:
            arr = arr[:, None]
        self.samples = arr
        self.rate_hz = float(self.rate_hz)
        self.t0_offset_s = float(self.t0_offset_s)

    @property
    def channels(self) -> int:
        return self.samples.shape[1]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.rate_hz

    @property
    def t_end_s(self) -> float:
        """Relative time just past the last sample."""
        return self.t0_offset_s + self.duration_s

    def validate(self, name: str = "stream") -> None:
        if self.samples.ndim != 2 or self.channels < 1:
            raise ValidationError(f"{name}: samples must be (n, channels) with channels >= 1")
        if not (self.rate_hz > 0 and np.isfinite(self.rate_hz)):
            raise ValidationError(f"{name}: rate_hz must be a positive finite number")
        if not np.isfinite(self.t0_offset_s):
            raise ValidationError(f"{name}: t0_offset_s must be finite")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError(f"{name}: non-finite sample values")

    def covers(self, window=COVERAGE_WINDOW_S) -> bool:
        tol = 0.5 / self.rate_hz
        return self.t0_offset_s <= window[0] + tol and self.t_end_s >= window[1] - tol

    def __eq__(self, other):
        if not isinstance(other, SensorStream):
            return NotImplemented
        return (self.rate_hz == other.rate_hz and self.t0_offset_s == other.t0_offset_s
                and self.samples.shape == other.samples.shape
                and np.array_equal(self.samples.view(np.uint32), other.samples.view(np.uint32)))


@dataclass(eq=False)
class InteractionRecord:
    interaction_id: str
    object_id: str
    material: str
    motion: str
    velocity_cm_s: float
    force: SensorStream
    temperature: SensorStream
    mic: SensorStream
    contact_time_s: float
    truncated: tuple[str, ...] = ()

    def stream(self, name: str) -> SensorStream:
        if name not in STREAMS:
            raise KeyError(name)
        return getattr(self, name)

    @property
    def label(self) -> int:
        return MATERIALS.index(self.material)

    def coverage_flags(self) -> tuple[str, ...]:
        return tuple(s for s in STREAMS if not self.stream(s).covers())

    def validate(self) -> None:
        rid = self.interaction_id
        try:
            check_id(rid, "interaction_id")
            check_id(self.object_id, "object_id")
            if self.material not in MATERIALS:
                raise ValidationError(f"unknown material {self.material!r}")
            if self.motion not in MOTIONS:
                raise ValidationError(f"unknown motion {self.motion!r}")
            if not np.isfinite(self.velocity_cm_s):
                raise ValidationError("velocity_cm_s must be finite")
            if not np.isfinite(self.contact_time_s):
                raise ValidationError("contact_time_s must be finite")
            for name in STREAMS:
                self.stream(name).validate(name)
            if self.force.channels != 2:
                raise ValidationError("force stream must have 2 channels")
            if self.temperature.channels != 1 or self.mic.channels != 1:
                raise ValidationError("temperature and mic streams must have 1 channel")
            missing = set(self.coverage_flags()) - set(self.truncated)
            if missing:
                raise ValidationError(
                    f"streams {sorted(missing)} do not cover {COVERAGE_WINDOW_S} s and are not "
                    "flagged truncated")
        except ValidationError as exc:
            raise ValidationError(f"record {rid!r}: {exc}") from None

    def __eq__(self, other):
        if not isinstance(other, InteractionRecord):
            return NotImplemented
        scalar = ("interaction_id", "object_id", "material", "motion", "velocity_cm_s",
                  "contact_time_s", "truncated")
        return (all(getattr(self, k) == getattr(other, k) for k in scalar)
                and all(self.stream(s) == other.stream(s) for s in STREAMS))


SCHEMA_VERSION = 1


@dataclass(eq=False)
class DatasetManifest:
    records: list[InteractionRecord] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION
    # ids dropped during import (no contact detected); not persisted
    excluded: list[str] = field(default_factory=list)

    @property
    def objects(self) -> dict[str, str]:
        return {r.object_id: r.material for r in sorted(self.records, key=lambda r: r.object_id)}

    def object_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.records:
            counts[r.object_id] = counts.get(r.object_id, 0) + 1
        return dict(sorted(counts.items()))

    def class_counts(self) -> dict[str, int]:
        return {m: sum(r.material == m for r in self.records) for m in MATERIALS}

    def by_id(self) -> dict[str, InteractionRecord]:
        return {r.interaction_id: r for r in self.records}

    def labels(self) -> dict[str, str]:
        return {r.interaction_id: r.material for r in self.records}

    def validate(self) -> None:
        seen: set[str] = set()
        owner: dict[str, str] = {}
        for r in self.records:
            r.validate()
            if r.interaction_id in seen:
                raise ValidationError(f"duplicate interaction_id {r.interaction_id!r}")
            seen.add(r.interaction_id)
            prev = owner.setdefault(r.object_id, r.material)
            if prev != r.material:
                raise ValidationError(
                    f"object {r.object_id!r} maps to both {prev!r} and {r.material!r}")

    def __eq__(self, other):
        if not isinstance(other, DatasetManifest):
            return NotImplemented
        return (self.schema_version == other.schema_version
                and len(self.records) == len(other.records)
                and all(a == b for a, b in zip(self.records, other.records)))
