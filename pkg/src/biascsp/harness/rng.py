"""Seed-splittable random number generation.

Every sampled object in the library draws from a generator derived from a
(master seed, path label) pair, so that any run is reproducible from its
master seed alone.  Labels are free-form strings/ints; the derivation hashes
them into the key of a counter-based Philox generator.

Splitting rule: a run over N samples is partitioned into fixed-size chunks,
and chunk ``c`` of estimator ``tag`` uses ``rng_for(seed, tag, c)``.  Workers
may process chunks in any order; combining per-chunk results by chunk index
reproduces the single-threaded output bit for bit.
"""
from __future__ import annotations

import hashlib

import numpy as np


def child_seed(master_seed: int, *path) -> np.random.SeedSequence:
    """Derive a SeedSequence from a master seed and a path of labels."""
    label = "/".join(str(p) for p in path)
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=16).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, *words])


def rng_for(master_seed: int, *path) -> np.random.Generator:
    """Counter-based generator for (master seed, path label)."""
    return np.random.Generator(np.random.Philox(child_seed(master_seed, *path)))
