"""Builds small raw recording trees for import tests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAPPING = {
    "layout": "{material}/{object_id}/{trial}",
    "id_template": "{object_id}-{trial}",
    "streams": {
        "force": {"file": "force.csv", "columns": [1, 2], "rate_hz": 25},
        "temperature": {"file": "temperature.csv", "columns": [1], "rate_hz": 100},
        "mic": {"file": "mic.npy", "rate_hz": 1000},
    },
    "csv": {"delimiter": ",", "skip_rows": 1},
    "metadata": {"file": "info.json", "keys": {"motion": "motion", "velocity_cm_s": "speed"}},
    "defaults": {"motion": "horizontal", "velocity_cm_s": 7.5},
}


def write_trial(root: Path, material: str, obj: str, trial: str, *, force_cross: int | None = 37,
                temp_jump: int | None = None, seconds: float = 6.0, info: dict | None = None):
    d = root / material / obj / trial
    d.mkdir(parents=True)
    nf = int(seconds * 25)
    force = np.zeros((nf, 2))
    if force_cross is not None:
        force[force_cross:, 1] = 2.0
    t = np.arange(nf) / 25
    np.savetxt(d / "force.csv", np.column_stack([t, force]), delimiter=",",
               header="t,fx,fz", comments="")
    nt = int(seconds * 100)
    temp = np.full(nt, 30.0)
    if temp_jump is not None:
        temp[temp_jump:] = 31.5
    np.savetxt(d / "temperature.csv", np.column_stack([np.arange(nt) / 100, temp]),
               delimiter=",", header="t,c", comments="")
    np.save(d / "mic.npy", np.sin(np.arange(int(seconds * 1000)) * 0.3))
    if info is not None:
        (d / "info.json").write_text(json.dumps(info))
    return d


def build_tree(root: Path) -> Path:
    """Two materials, one object each, two trials per object, one quiet trial."""
    write_trial(root, "metal", "m1", "t0", force_cross=37, info={"motion": "vertical", "speed": 6})
    write_trial(root, "metal", "m1", "t1", force_cross=50)
    write_trial(root, "wood", "w1", "t0", force_cross=None, temp_jump=90)
    write_trial(root, "wood", "w1", "t1", force_cross=60)
    write_trial(root, "wood", "w1", "t2", force_cross=None)
    return root
