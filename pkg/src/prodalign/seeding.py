"""Deterministic seed derivation.

Every randomized operation draws from a Generator seeded by
(root seed, operation name), so a single root seed reproduces the whole
pipeline. Derivation goes through sha256 rather than hash() so results do
not depend on PYTHONHASHSEED.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root_seed: int, name: str) -> int:
    """Stable 64-bit seed for the operation `name` under `root_seed`."""
    digest = hashlib.sha256(f"{root_seed}/{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(root_seed: int, name: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(root_seed, name)))


def stable_fraction(key: str) -> float:
    """Map a string key to a reproducible value in [0, 1), for hash splits."""
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") / 2.0**64
