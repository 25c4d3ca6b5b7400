"""Deterministic sub-stream seed derivation.

All randomness in the package flows from one root seed.  Independent
consumers (code sampling, channel noise, measurement outcomes, worker
shards) derive their own seeds by hashing the root together with a label,
so adding a consumer never perturbs the streams of existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "rng_for"]


def derive_seed(root: int, label: str) -> int:
    """Derive a 64-bit child seed from ``root`` and a textual ``label``."""
    digest = hashlib.sha256(f"{root}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(root: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, label))
