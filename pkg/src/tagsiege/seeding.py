"""Deterministic RNG fan-out from a single run seed.

Every random choice in the package draws from a named substream so that
modules cannot collide on seed state and runs replay bit-identically.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream_seed(seed: int, label: str) -> int:
    """64-bit seed derived from the run seed and a substream label."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, label: str) -> np.random.Generator:
    """Generator for the named substream of the run seed."""
    return np.random.default_rng(substream_seed(seed, label))
