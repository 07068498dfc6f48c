"""Canonical on-disk store.

Layout::

    <root>/manifest.json                 schema_version, record ids, objects, per-object counts
    <root>/<interaction_id>/meta.json    ids, material, motion, velocity, contact time, streams
    <root>/<interaction_id>/force.f32    little-endian binary32, interleaved by channel
    <root>/<interaction_id>/temperature.f32
    <root>/<interaction_id>/mic.f32

``meta.json`` keys: ``interaction_id``, ``object_id``, ``material``, ``motion``,
``velocity_cm_s``, ``contact_time_s``, ``truncated`` (list of stream names) and
``streams`` mapping each stream name to ``file``, ``rate_hz``, ``channels``,
``t0_offset_s`` and ``n_samples`` (frames, i.e. values / channels).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from hapticgan.data.records import (
    SCHEMA_VERSION,
    STREAMS,
    DatasetManifest,
    InteractionRecord,
    SensorStream,
    ValidationError,
)

MANIFEST_FILE = "manifest.json"
META_FILE = "meta.json"
STORE_FORMAT = "hapticgan-store"


class StoreError(IOError):
    """Missing, corrupt or incompatible store contents."""


class SchemaError(StoreError):
    pass


class CorruptStreamError(StoreError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def record_meta(rec: InteractionRecord) -> dict:
    return {
        "interaction_id": rec.interaction_id,
        "object_id": rec.object_id,
        "material": rec.material,
        "motion": rec.motion,
        "velocity_cm_s": rec.velocity_cm_s,
        "contact_time_s": rec.contact_time_s,
        "truncated": list(rec.truncated),
        "streams": {
            name: {
                "file": f"{name}.f32",
                "rate_hz": rec.stream(name).rate_hz,
                "channels": rec.stream(name).channels,
                "t0_offset_s": rec.stream(name).t0_offset_s,
                "n_samples": rec.stream(name).n_samples,
            }
            for name in STREAMS
        },
    }


def save_record(rec: InteractionRecord, root: Path) -> None:
    d = root / rec.interaction_id
    d.mkdir(parents=True, exist_ok=True)
    for name in STREAMS:
        data = np.ascontiguousarray(rec.stream(name).samples, dtype="<f4")
        (d / f"{name}.f32").write_bytes(data.tobytes())
    (d / META_FILE).write_text(_dump(record_meta(rec)))


def save_store(manifest: DatasetManifest, path) -> None:
    """Validate and write ``manifest`` under directory ``path``."""
    manifest.validate()
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for rec in manifest.records:
        save_record(rec, root)
    index = {
        "format": STORE_FORMAT,
        "schema_version": manifest.schema_version,
        "records": [r.interaction_id for r in manifest.records],
        "objects": manifest.objects,
        "object_counts": manifest.object_counts(),
    }
    (root / MANIFEST_FILE).write_text(_dump(index))


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise StoreError(f"missing file {path}") from None
    except json.JSONDecodeError as exc:
        raise StoreError(f"{path}: invalid JSON ({exc})") from None


def load_record(root: Path, interaction_id: str) -> InteractionRecord:
    d = root / interaction_id
    meta = _read_json(d / META_FILE)
    try:
        streams = {}
        for name in STREAMS:
            sm = meta["streams"][name]
            f = d / sm["file"]
            if not f.exists():
                raise StoreError(f"missing stream file {f}")
            raw = f.read_bytes()
            expected = 4 * int(sm["n_samples"]) * int(sm["channels"])
            if len(raw) != expected:
                raise CorruptStreamError(
                    f"{f}: {len(raw)} bytes on disk, expected {expected} "
                    f"({sm['n_samples']} samples x {sm['channels']} channels)")
            arr = np.frombuffer(raw, dtype="<f4").astype(np.float32)
            streams[name] = SensorStream(arr.reshape(-1, int(sm["channels"])), sm["rate_hz"],
                                         sm["t0_offset_s"])
        rec = InteractionRecord(
            interaction_id=meta["interaction_id"], object_id=meta["object_id"],
            material=meta["material"], motion=meta["motion"],
            velocity_cm_s=float(meta["velocity_cm_s"]), contact_time_s=float(meta["contact_time_s"]),
            truncated=tuple(meta.get("truncated", ())), **streams)
    except KeyError as exc:
        raise StoreError(f"{d / META_FILE}: missing key {exc}") from None
    if rec.interaction_id != interaction_id:
        raise StoreError(f"{d}: meta.json names {rec.interaction_id!r}")
    return rec


def read_index(path) -> dict:
    root = Path(path)
    index = _read_json(root / MANIFEST_FILE)
    version = index.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{root}: unsupported schema_version {version!r} "
                          f"(this build reads {SCHEMA_VERSION})")
    return index


def load_store(path, ids=None) -> DatasetManifest:
    """Load and re-validate a store; ``ids`` restricts loading to a subset."""
    root = Path(path)
    index = read_index(root)
    wanted = index["records"] if ids is None else [i for i in index["records"] if i in set(ids)]
    records = [load_record(root, rid) for rid in wanted]
    manifest = DatasetManifest(records, index["schema_version"])
    try:
        manifest.validate()
    except ValidationError as exc:
        raise StoreError(f"{root}: {exc}") from None
    if ids is None:
        if manifest.object_counts() != index.get("object_counts", manifest.object_counts()):
            raise StoreError(f"{root}: per-object counts disagree with manifest.json")
    return manifest
