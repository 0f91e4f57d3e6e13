"""Seed derivation: all randomness flows from one root seed through named
streams, so every pipeline stage is independently reproducible."""

import hashlib

import numpy as np


def derived_rng(seed: int, tag: str) -> np.random.Generator:
    h = int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")
    return np.random.default_rng(np.random.SeedSequence(entropy=[seed, h]))
