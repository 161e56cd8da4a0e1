from __future__ import annotations

import zlib
from typing import Union

import numpy as np

KeyPart = Union[int, str]


def _key_int(part: KeyPart) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError(f"Stream key parts must be non-negative, got {part}")
    return int(part)


def derive_generator(seed: int, *key: KeyPart) -> np.random.Generator:
    """
    Counter-based generator for one (seed, key...) stream.

    Philox keyed by a SeedSequence spawn key: a stream depends only on its
    key, never on how many other streams were drawn before it, so chunks can
    be evaluated in any order and on any worker.
    """
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_int(p) for p in key))
    return np.random.Generator(np.random.Philox(sequence))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed from an existing generator."""
    return int(rng.integers(0, 2**63 - 1, dtype=np.int64))


def resolve_seed(rng: np.random.Generator | int) -> int:
    """Integer seeds pass through; a Generator contributes one fresh child seed."""
    if isinstance(rng, (int, np.integer)) and not isinstance(rng, bool):
        if rng < 0:
            raise ValueError(f"Seed must be non-negative, got {rng}")
        return int(rng)
    if isinstance(rng, np.random.Generator):
        return child_seed(rng)
    raise TypeError(f"Expected a numpy Generator or an integer seed, got {type(rng).__name__}")
