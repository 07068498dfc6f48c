"""Parametric synthetic haptic interactions with known class structure.

Signal models, with t measured from contact (all signals flat before it):

* temperature: 55 C set point, then ``55 - drop * (1 - exp(-t / tau))``
* force (2 channels): ``peak * v / 7.5 * (1 - exp(-stiffness * t))`` split by an
  object-specific balance ``b`` as ``2b`` / ``2(1 - b)``
* mic: burst ``amplitude * v / 7.5 * exp(-damping * t) * sin(2 pi f t)``

Material parameters are drawn once per object (multiplicative jitter of
+-``object_jitter``) and again per interaction around the object's values
(+-``interaction_jitter``). Record ``i`` uses the generator keyed by
``mix64(seed, "record", i)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from hapticgan.data.records import MATERIALS, DatasetManifest, InteractionRecord, SensorStream
from hapticgan.data.store import save_store
from hapticgan.seeding import keyed_rng, mix64

SET_POINT_C = 55.0
FORCE_RATE_HZ = 25.0
TEMPERATURE_RATE_HZ = 100.0
MIC_RATE_HZ = 35000.0
REFERENCE_VELOCITY = 7.5


@dataclass(frozen=True)
class MaterialParams:
    temp_drop_c: float
    temp_decay_tau_s: float
    force_peak_n: float
    force_stiffness: float
    mic_amplitude: float
    mic_resonance_hz: float
    mic_damping: float

    def scaled(self, factors: np.ndarray) -> "MaterialParams":
        vals = [getattr(self, f.name) * k for f, k in zip(fields(self), factors)]
        return MaterialParams(*vals)


# metal: fastest, deepest temperature drop and the loudest burst; fabric: the opposite
DEFAULT_MATERIALS = {
    "metal":   MaterialParams(12.0, 0.6, 6.0, 25.0, 1.00, 4200.0, 35.0),
    "plastic": MaterialParams(5.0, 1.6, 4.5, 10.0, 0.30, 2400.0, 70.0),
    "wood":    MaterialParams(4.0, 2.2, 5.0, 14.0, 0.45, 1400.0, 90.0),
    "glass":   MaterialParams(8.5, 1.0, 6.5, 20.0, 0.70, 6000.0, 45.0),
    "ceramic": MaterialParams(7.0, 1.3, 6.0, 17.0, 0.60, 5000.0, 55.0),
    "fabric":  MaterialParams(2.0, 3.0, 2.5, 3.0, 0.03, 300.0, 160.0),
}


@dataclass(frozen=True)
class SynthParams:
    materials: dict = field(default_factory=lambda: dict(DEFAULT_MATERIALS))
    force_noise_std: float = 0.05
    temperature_noise_std: float = 0.03
    mic_noise_std: float = 0.01
    object_jitter: float = 0.05
    interaction_jitter: float = 0.05
    force_balance_range: tuple[float, float] = (0.4, 0.6)
    velocity_range_cm_s: tuple[float, float] = (5.0, 10.0)
    contact_range_s: tuple[float, float] = (0.5, 1.5)
    tail_s: float = 4.5
    mic_span_s: tuple[float, float] = (-0.3, 1.2)

    def __post_init__(self):
        missing = set(MATERIALS) - set(self.materials)
        if missing:
            raise ValueError(f"synth params missing materials {sorted(missing)}")
        for name, mp in self.materials.items():
            for f in fields(mp):
                v = getattr(mp, f.name)
                ok = v >= 0 if f.name == "temp_drop_c" else v > 0
                if not ok:
                    raise ValueError(f"{name}.{f.name} out of range: {v}")
        for name in ("force_noise_std", "temperature_noise_std", "mic_noise_std"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("object_jitter", "interaction_jitter"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        for name in ("force_balance_range", "velocity_range_cm_s", "contact_range_s",
                     "mic_span_s"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"{name}: max < min")
        if self.tail_s < 4.0:
            raise ValueError("tail_s must cover the 4 s post-contact window")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["materials"] = {k: asdict(v) for k, v in self.materials.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthParams":
        d = dict(d)
        if "materials" in d:
            mats = dict(DEFAULT_MATERIALS)
            for k, v in d["materials"].items():
                base = asdict(mats.get(k, DEFAULT_MATERIALS["metal"]))
                base.update(v)
                mats[k] = MaterialParams(**base)
            d["materials"] = mats
        for k in ("force_balance_range", "velocity_range_cm_s", "contact_range_s", "mic_span_s"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "SynthParams":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def quiet(self) -> "SynthParams":
        """Zero noise, zero jitter and fixed velocity / contact time / force balance."""
        return replace(self, force_noise_std=0.0, temperature_noise_std=0.0, mic_noise_std=0.0,
                       object_jitter=0.0, interaction_jitter=0.0,
                       force_balance_range=(0.5, 0.5), velocity_range_cm_s=(7.5, 7.5),
                       contact_range_s=(1.0, 1.0))


@dataclass(frozen=True)
class ObjectDraw:
    params: MaterialParams
    force_balance: float


def _jitter(rng: np.random.Generator, j: float) -> np.ndarray:
    return rng.uniform(1.0 - j, 1.0 + j, size=len(fields(MaterialParams)))


def draw_object(material: str, params: SynthParams, rng: np.random.Generator) -> ObjectDraw:
    base = params.materials[material]
    mp = base.scaled(_jitter(rng, params.object_jitter))
    return ObjectDraw(mp, float(rng.uniform(*params.force_balance_range)))


def temperature_curve(mp: MaterialParams, t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    drop = mp.temp_drop_c * (1.0 - np.exp(-np.maximum(t, 0.0) / mp.temp_decay_tau_s))
    return SET_POINT_C - np.where(t >= 0, drop, 0.0)


def generate_interaction(material: str, params: SynthParams | None = None, seed: int = 0,
                         obj: ObjectDraw | None = None, object_id: str | None = None,
                         interaction_id: str | None = None) -> InteractionRecord:
    if material not in MATERIALS:
        raise ValueError(f"unknown material {material!r}")
    params = params or SynthParams()
    rng = keyed_rng(seed, "interaction")
    if obj is None:
        obj = draw_object(material, params, keyed_rng(seed, "object"))
    mp = obj.params.scaled(_jitter(rng, params.interaction_jitter))
    velocity = float(rng.uniform(*params.velocity_range_cm_s))
    contact = float(rng.uniform(*params.contact_range_s))
    motion = "horizontal" if rng.random() < 0.5 else "vertical"
    vscale = velocity / REFERENCE_VELOCITY
    total = contact + params.tail_s

    n_f = int(round(total * FORCE_RATE_HZ))
    t_f = np.arange(n_f) / FORCE_RATE_HZ - contact
    f = np.where(t_f >= 0, mp.force_peak_n * vscale * (1.0 - np.exp(-mp.force_stiffness
                                                                     * np.maximum(t_f, 0))), 0.0)
    force = np.stack([2 * obj.force_balance * f, 2 * (1 - obj.force_balance) * f], axis=1)
    force += params.force_noise_std * rng.standard_normal(force.shape)

    n_t = int(round(total * TEMPERATURE_RATE_HZ))
    t_t = np.arange(n_t) / TEMPERATURE_RATE_HZ - contact
    temp = temperature_curve(mp, t_t) + params.temperature_noise_std * rng.standard_normal(n_t)

    m0, m1 = params.mic_span_s
    n_m = int(round((m1 - m0) * MIC_RATE_HZ))
    t_m = m0 + np.arange(n_m) / MIC_RATE_HZ
    tm = np.maximum(t_m, 0.0)
    burst = (mp.mic_amplitude * vscale * np.exp(-mp.mic_damping * tm)
             * np.sin(2 * np.pi * mp.mic_resonance_hz * tm))
    mic = np.where(t_m >= 0, burst, 0.0) + params.mic_noise_std * rng.standard_normal(n_m)

    object_id = object_id or f"{material}00"
    rec = InteractionRecord(
        interaction_id=interaction_id or f"{object_id}-000",
        object_id=object_id, material=material, motion=motion, velocity_cm_s=velocity,
        force=SensorStream(force, FORCE_RATE_HZ, -contact),
        temperature=SensorStream(temp, TEMPERATURE_RATE_HZ, -contact),
        mic=SensorStream(mic, MIC_RATE_HZ, m0),
        contact_time_s=contact,
    )
    rec.truncated = rec.coverage_flags()
    return rec


def generate_records(n_objects_per_material: int, n_interactions_per_object: int,
                     params: SynthParams | None = None, seed: int = 0):
    """Yield records material-major, object-major; record i is keyed by (seed, i)."""
    if n_objects_per_material < 1 or n_interactions_per_object < 1:
        raise ValueError("object and interaction counts must be >= 1")
    params = params or SynthParams()
    index = 0
    for material in MATERIALS:
        for j in range(n_objects_per_material):
            object_id = f"{material}{j:02d}"
            obj = draw_object(material, params, keyed_rng(seed, "object", object_id))
            for i in range(n_interactions_per_object):
                yield generate_interaction(material, params, seed=_record_seed(seed, index),
                                           obj=obj, object_id=object_id,
                                           interaction_id=f"{object_id}-{i:03d}")
                index += 1


def _record_seed(seed: int, index: int) -> int:
    return mix64(seed, "record", index)


def generate_store(n_objects_per_material: int, n_interactions_per_object: int,
                   params: SynthParams | None = None, seed: int = 0,
                   out_path=None) -> DatasetManifest:
    manifest = DatasetManifest(list(generate_records(n_objects_per_material,
                                                     n_interactions_per_object, params, seed)))
    if out_path is not None:
        save_store(manifest, out_path)
    return manifest
