"""Deterministic random-stream derivation.

Every experiment hangs off a single 64-bit root seed.  Sub-streams (per
trial, per round, per device, per module) are derived by hashing the root
seed together with a tuple of string/int labels, so adding more trials or
reordering work never perturbs the draws of existing streams.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root_seed: int, *labels) -> int:
    """Stable 128-bit child seed from a root seed and a label path."""
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:16], "big")


def derived_rng(root_seed: int, *labels) -> np.random.Generator:
    """Generator seeded from ``derive_seed(root_seed, *labels)``."""
    return np.random.default_rng(derive_seed(root_seed, *labels))


def as_rng(seed_or_rng) -> np.random.Generator:
    """Accept either an integer seed or an existing Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
