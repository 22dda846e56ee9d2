"""Seeded random sources.

Every mechanism takes a :class:`numpy.random.Generator`. ``random_source``
builds one from a 64-bit seed and a stream id so that independent cells of
an experiment get independent, reproducible streams.
"""

from __future__ import annotations

import os

import numpy as np

SEED_ENV_VAR = "DPWB_SEED"


def random_source(seed: int, *stream: int) -> np.random.Generator:
    """Return a generator for ``(seed, stream...)``.

    The same seed and stream ids always give the same output sequence;
    different stream ids give statistically independent sequences.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if any(s < 0 for s in stream):
        raise ValueError(f"stream ids must be non-negative, got {stream}")
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed: int, *stream: int) -> int:
    """A child 64-bit seed, stable for a given ``(seed, stream...)``."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def default_seed(fallback: int = 0) -> int:
    value = os.environ.get(SEED_ENV_VAR)
    if value is None or value.strip() == "":
        return fallback
    return int(value)
