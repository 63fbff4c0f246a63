"""Keyed random streams.

Every random choice in the package is drawn from a stream identified by
``(seed, *key)``.  Two call sites with different keys never share state, so
the order in which clusters are materialized cannot change any outcome.
"""

from __future__ import annotations

import hashlib
import random

import numpy as np


def _key_words(key) -> list[int]:
    words = []
    for part in key:
        if isinstance(part, (int, np.integer)) and part >= 0:
            words.append(int(part) & 0xFFFFFFFF)
            words.append(int(part) >> 32 & 0xFFFFFFFF)
        else:
            digest = hashlib.blake2b(repr(part).encode(), digest_size=8).digest()
            words.extend((int.from_bytes(digest[:4], "little"),
                          int.from_bytes(digest[4:], "little")))
    return words


def key_int(seed: int, *key) -> int:
    """A 64-bit integer determined by ``(seed, *key)``."""
    h = hashlib.blake2b(digest_size=8)
    h.update(repr((int(seed),) + tuple(key)).encode())
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, *key) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=_key_words(key))
    return np.random.default_rng(ss)


def pystream(seed: int, *key) -> random.Random:
    """Stdlib generator for tight scalar loops (faster than numpy per call)."""
    return random.Random(key_int(seed, "py", *key))


def coin(seed: int, *key) -> bool:
    """A fair bit keyed by ``(seed, *key)``."""
    return key_int(seed, "coin", *key) & 1 == 1
