"""Seeding helpers.

All randomness flows through the counter-based Philox generator so that a
given seed reproduces bit-identical results regardless of call interleaving
or thread count. Seeds may be plain integers, lists of integers (stream
labels), or prepared SeedSequence objects; derived streams are obtained with
SeedSequence spawning.
"""

import numpy as np

__all__ = ["RNG_ID", "seed_seq", "make_rng"]

RNG_ID = "philox4x64-10/numpy-seedseq"


def seed_seq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_seq(seed)))
