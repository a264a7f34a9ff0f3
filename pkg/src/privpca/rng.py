"""Project-wide random streams.

Every stream is a Philox (counter-based) generator keyed by a master seed
plus a tuple of integer or string labels, so independent streams can be
derived for (trial, step, purpose) without any shared state.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_to_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(seed: int, *labels) -> int:
    """Deterministically mix ``seed`` with ``labels`` into a 64-bit seed."""
    h = hashlib.sha256()
    h.update(int(seed & _MASK64).to_bytes(8, "little"))
    for label in labels:
        h.update(_label_to_int(label).to_bytes(8, "little"))
    return int.from_bytes(h.digest()[:8], "little")


def make_rng(seed: int, *labels) -> np.random.Generator:
    entropy = [int(seed) & _MASK64] + [_label_to_int(x) for x in labels]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def uniform_sphere(rng: np.random.Generator, d: int) -> np.ndarray:
    """Uniform draw from the unit sphere in R^d (normalized Gaussian)."""
    while True:
        w = rng.standard_normal(d)
        norm = np.linalg.norm(w)
        if norm > 0:
            return w / norm
