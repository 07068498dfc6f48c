"""Adapter from an arbitrary raw directory tree to canonical records.

The raw layout is described by an import mapping (JSON), e.g.::

    {
      "layout": "{material}/{object_id}/{trial}",
      "id_template": "{object_id}-{trial}",
      "streams": {
        "force":       {"file": "force.csv", "columns": [1, 2], "rate_hz": 25},
        "temperature": {"file": "temperature.csv", "columns": [1], "rate_hz": 100},
        "mic":         {"file": "mic.npy", "rate_hz": 35000}
      },
      "csv": {"delimiter": ",", "skip_rows": 1},
      "metadata": {"file": "info.json",
                   "keys": {"motion": "motion", "velocity_cm_s": "velocity"}},
      "defaults": {"motion": "horizontal", "velocity_cm_s": 7.5},
      "contact": {"force_threshold_n": 1.0, "temperature_delta_c": 1.0}
    }

``layout`` is matched against each directory's path relative to the source
root. Per stream: ``columns`` (default all), ``scale``/``offset`` (unit
conversion, ``value * scale + offset``) and ``start_s`` (recording time of
sample 0). When no contact time is supplied through metadata the contact is
detected from the force and temperature traces.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hapticgan.data.records import (
    MATERIALS,
    DatasetManifest,
    InteractionRecord,
    SensorStream,
)

FORCE_THRESHOLD_N = 1.0
TEMPERATURE_DELTA_C = 1.0


class ImportConfigError(ValueError):
    """The import mapping is missing a key or holds an invalid value."""

    def __init__(self, key: str, message: str = "missing required key"):
        super().__init__(f"import mapping: {message}: {key!r}")
        self.key = key


class RawImportError(IOError):
    pass


@dataclass
class StreamSpec:
    file: str
    rate_hz: float
    columns: list[int] | None = None
    scale: float = 1.0
    offset: float = 0.0
    start_s: float = 0.0


@dataclass
class ImportConfig:
    layout: str
    streams: dict[str, StreamSpec]
    id_template: str = "{object_id}-{interaction_id}"
    delimiter: str | None = ","
    skip_rows: int = 0
    metadata_file: str | None = None
    metadata_keys: dict[str, str] = field(default_factory=dict)
    defaults: dict = field(default_factory=dict)
    force_threshold_n: float = FORCE_THRESHOLD_N
    temperature_delta_c: float = TEMPERATURE_DELTA_C
    temperature_set_point_c: float | None = None
    material_aliases: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "ImportConfig":
        def need(obj, key, where=""):
            if key not in obj:
                raise ImportConfigError(where + key)
            return obj[key]

        streams = {}
        raw_streams = need(d, "streams")
        for name in ("force", "temperature", "mic"):
            s = need(raw_streams, name, "streams.")
            streams[name] = StreamSpec(
                file=need(s, "file", f"streams.{name}."),
                rate_hz=float(need(s, "rate_hz", f"streams.{name}.")),
                columns=s.get("columns"), scale=float(s.get("scale", 1.0)),
                offset=float(s.get("offset", 0.0)), start_s=float(s.get("start_s", 0.0)))
            if streams[name].rate_hz <= 0:
                raise ImportConfigError(f"streams.{name}.rate_hz", "rate must be positive")
        layout = need(d, "layout")
        fields = set(re.findall(r"{(\w+)}", layout))
        if "object_id" not in fields:
            raise ImportConfigError("layout.{object_id}", "layout must contain")
        csv = d.get("csv", {})
        meta = d.get("metadata", {})
        contact = d.get("contact", {})
        return cls(
            layout=layout, streams=streams,
            id_template=d.get("id_template", "{object_id}-{interaction_id}"),
            delimiter=csv.get("delimiter", ","), skip_rows=int(csv.get("skip_rows", 0)),
            metadata_file=meta.get("file"), metadata_keys=dict(meta.get("keys", {})),
            defaults=dict(d.get("defaults", {})),
            force_threshold_n=float(contact.get("force_threshold_n", FORCE_THRESHOLD_N)),
            temperature_delta_c=float(contact.get("temperature_delta_c", TEMPERATURE_DELTA_C)),
            temperature_set_point_c=contact.get("temperature_set_point_c"),
            material_aliases=dict(d.get("material_aliases", {})),
        )

    @classmethod
    def from_file(cls, path) -> "ImportConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def first_crossing(values, predicate) -> int | None:
    hits = np.flatnonzero(predicate(np.asarray(values)))
    return int(hits[0]) if len(hits) else None


def detect_contact(force: SensorStream, temperature: SensorStream,
                   force_threshold_n: float = FORCE_THRESHOLD_N,
                   temperature_delta_c: float = TEMPERATURE_DELTA_C,
                   set_point_c: float | None = None,
                   force_start_s: float = 0.0, temperature_start_s: float = 0.0) -> float | None:
    """Earliest time at which any force channel exceeds the threshold or the
    temperature departs from its set point (default: first reading) by more
    than ``temperature_delta_c``. ``None`` when neither happens."""
    times = []
    kf = first_crossing(force.samples, lambda v: np.any(v > force_threshold_n, axis=1))
    if kf is not None:
        times.append(force_start_s + kf / force.rate_hz)
    temp = temperature.samples[:, 0]
    if len(temp):
        ref = temp[0] if set_point_c is None else set_point_c
        kt = first_crossing(temp, lambda v: np.abs(v - ref) > temperature_delta_c)
        if kt is not None:
            times.append(temperature_start_s + kt / temperature.rate_hz)
    return min(times) if times else None


def _layout_regex(layout: str) -> re.Pattern:
    parts = re.split(r"({\w+})", layout.strip("/"))
    rx = "".join(f"(?P<{p[1:-1]}>[^/]+)" if p.startswith("{") else re.escape(p) for p in parts)
    return re.compile(f"^{rx}$")


def _read_array(path: Path, cfg: ImportConfig) -> np.ndarray:
    if not path.exists():
        raise RawImportError(f"unmapped or missing stream file {path}")
    if path.suffix == ".npy":
        arr = np.load(path)
    else:
        arr = np.loadtxt(path, delimiter=cfg.delimiter, skiprows=cfg.skip_rows, ndmin=2)
    arr = np.asarray(arr, dtype=np.float64)
    return arr[:, None] if arr.ndim == 1 else arr


def _material(name: str, cfg: ImportConfig) -> str:
    m = cfg.material_aliases.get(name, name).lower()
    if m not in MATERIALS:
        raise RawImportError(f"unknown material {name!r}; add it to material_aliases")
    return m


def import_raw(src, mapping: ImportConfig | dict) -> DatasetManifest:
    """Build canonical records from ``src``. Records without a detectable contact
    are excluded (listed in ``manifest.excluded``) with a warning."""
    cfg = mapping if isinstance(mapping, ImportConfig) else ImportConfig.from_dict(mapping)
    root = Path(src)
    rx = _layout_regex(cfg.layout)
    depth = cfg.layout.strip("/").count("/") + 1
    candidates = sorted(p for p in root.glob("/".join(["*"] * depth)) if p.is_dir())
    matched = [(p, rx.match(p.relative_to(root).as_posix())) for p in candidates]
    matched = [(p, m.groupdict()) for p, m in matched if m]
    if not matched:
        raise RawImportError(f"no directories under {root} match layout {cfg.layout!r}")
    records, excluded = [], []
    for path, fields in matched:
        meta = dict(cfg.defaults)
        meta.update(fields)
        if cfg.metadata_file:
            mf = path / cfg.metadata_file
            if mf.exists():
                raw = json.loads(mf.read_text())
                for ours, theirs in cfg.metadata_keys.items():
                    if theirs in raw:
                        meta[ours] = raw[theirs]
        fields.setdefault("interaction_id", path.name)
        try:
            rid = cfg.id_template.format(**{**fields, **{k: v for k, v in meta.items()
                                                          if isinstance(v, str)}})
        except KeyError as exc:
            raise ImportConfigError(f"id_template.{exc.args[0]}", "template field not in layout")
        for key in ("material", "motion", "velocity_cm_s"):
            if key not in meta:
                raise ImportConfigError(f"defaults.{key}", f"no value for {key} in layout, "
                                        "metadata or")
        arrays = {}
        for name, spec in cfg.streams.items():
            arr = _read_array(path / spec.file, cfg)
            if spec.columns is not None:
                arr = arr[:, spec.columns]
            arrays[name] = arr * spec.scale + spec.offset
        force = SensorStream(arrays["force"], cfg.streams["force"].rate_hz)
        temp = SensorStream(arrays["temperature"], cfg.streams["temperature"].rate_hz)
        contact = meta.get("contact_time_s")
        if contact is None:
            contact = detect_contact(force, temp, cfg.force_threshold_n, cfg.temperature_delta_c,
                                     cfg.temperature_set_point_c,
                                     cfg.streams["force"].start_s,
                                     cfg.streams["temperature"].start_s)
        if contact is None:
            warnings.warn(f"{rid}: no contact detected; record excluded", stacklevel=2)
            excluded.append(rid)
            continue
        contact = float(contact)
        streams = {
            name: SensorStream(arrays[name], spec.rate_hz, spec.start_s - contact)
            for name, spec in cfg.streams.items()
        }
        rec = InteractionRecord(
            interaction_id=rid, object_id=str(meta["object_id"]),
            material=_material(str(meta["material"]), cfg), motion=str(meta["motion"]),
            velocity_cm_s=float(meta["velocity_cm_s"]), contact_time_s=contact, **streams)
        rec.truncated = rec.coverage_flags()
        records.append(rec)
    manifest = DatasetManifest(records, excluded=excluded)
    manifest.validate()
    return manifest
