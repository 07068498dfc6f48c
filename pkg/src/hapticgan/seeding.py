"""Deterministic seed derivation.

Every random stream in the package is keyed by a master seed plus a path of
labels (record index, fold, layer id, step ...). The key is hashed to a
64-bit integer with BLAKE2b (8-byte digest over the ``:``-joined decimal /
string parts), so results never depend on scheduling order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def mix64(*parts: int | str) -> int:
    """Hash an arbitrary key path to an unsigned 64-bit integer."""
    text = ":".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def keyed_rng(*parts: int | str) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``mix64(*parts)``."""
    return np.random.Generator(np.random.Philox(key=mix64(*parts)))
