"""Sub-seed derivation.

Every random stream in a run comes from ``numpy.random.SeedSequence`` with the
master seed as entropy and a spawn key of ``(crc32(purpose), *ints)``. The
mapping is stable across platforms and Python versions, so any
reimplementation using the same SeedSequence algorithm reproduces the streams.
"""

from __future__ import annotations

import zlib

import numpy as np


def purpose_tag(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def seed_sequence(master: int, purpose: str, *keys: int) -> np.random.SeedSequence:
    spawn_key = (purpose_tag(purpose),) + tuple(int(k) for k in keys)
    return np.random.SeedSequence(entropy=int(master), spawn_key=spawn_key)


def rng(master: int, purpose: str, *keys: int) -> np.random.Generator:
    """Independent generator for ``purpose`` (e.g. "train") at ``keys`` (e.g. round, client)."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master, purpose, *keys)))


def sub_seed(master: int, purpose: str, *keys: int) -> int:
    return int(seed_sequence(master, purpose, *keys).generate_state(1, np.uint64)[0] >> np.uint64(1))
