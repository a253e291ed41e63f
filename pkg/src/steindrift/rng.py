"""Counter-based random streams.

A Philox4x64 generator is keyed by ``(base_seed, stream)``; replicate ``r``
starts at counter ``(0, 0, r, 0)``, leaving ``2**128`` blocks per replicate,
and the j-th normal of a replicate is the j-th draw from that position.
Results therefore do not depend on how replicates are split across blocks
or workers, and a draw of length ``n`` is a prefix of any longer draw.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

NOISE = 0
PRIOR = 1
LIMIT = 2
CONSTANT = 3


@lru_cache(maxsize=64)
def _key(seed: int, stream: int) -> tuple[int, int]:
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    k = np.random.SeedSequence(int(seed), spawn_key=(int(stream),)).generate_state(2, np.uint64)
    return int(k[0]), int(k[1])


def _counter(replicate: int) -> np.ndarray:
    if replicate < 0:
        raise ValueError("replicate index must be non-negative")
    return np.array([0, 0, replicate, 0], dtype=np.uint64)


def replicate_rng(seed: int, replicate: int, stream: int = NOISE) -> np.random.Generator:
    key = np.array(_key(seed, stream), dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=_counter(replicate)))


def normal_rows(seed: int, start: int, stop: int, dim: int, stream: int = NOISE) -> np.ndarray:
    """Standard normals of shape ``(stop - start, dim)``, row ``i`` from replicate ``start + i``."""
    bg = replicate_rng(seed, start, stream).bit_generator
    gen = np.random.Generator(bg)
    fresh = bg.state
    out = np.empty((stop - start, dim))
    for i, r in enumerate(range(start, stop)):
        fresh["state"]["counter"] = _counter(r)
        bg.state = fresh
        out[i] = gen.standard_normal(dim)
    return out
