"""Deterministic RNG derivation.

Every stochastic routine takes an explicit seed or Generator. Substreams are
derived from a master seed through SeedSequence spawn keys, so independent
pieces of work (per slot, per stage, per draw batch) never share or race on
a stream, and rerunning with the same master seed reproduces everything.
"""

from __future__ import annotations

import numpy as np

__all__ = ["derive_rng", "derive_seed_seq", "derive_int_seed", "as_rng"]


def derive_seed_seq(master_seed: int, *key: int) -> np.random.SeedSequence:
    """SeedSequence for substream `key` of `master_seed`."""
    return np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent Generator for substream `key` of `master_seed`."""
    return np.random.Generator(np.random.PCG64(derive_seed_seq(master_seed, *key)))


def derive_int_seed(master_seed: int, *key: int) -> int:
    """Well-mixed integer seed for substream `key`, for APIs that take ints."""
    return int(derive_seed_seq(master_seed, *key).generate_state(1, np.uint32)[0])


def as_rng(seed_or_rng) -> np.random.Generator:
    """Accept either an integer seed or an existing Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
