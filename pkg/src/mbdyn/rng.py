"""Reproducible random streams keyed by (master seed, stream index...)."""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

SeedLike = Union[int, Sequence[int], np.random.Generator, None]


def make_rng(seed: SeedLike, *stream: int) -> np.random.Generator:
    """Return an independent PCG64 generator for ``seed`` and ``stream``.

    ``make_rng(s, r, 1)`` and ``make_rng((s, r), 1)`` give the same stream.
    Passing a ``Generator`` returns it unchanged (``stream`` must be empty).
    """
    if isinstance(seed, np.random.Generator):
        if stream:
            raise ValueError("cannot attach a stream index to an existing Generator")
        return seed
    if seed is None:
        seed = 0
    if isinstance(seed, (int, np.integer)):
        key: tuple[int, ...] = ()
        entropy = int(seed)
    else:
        seed = tuple(int(s) for s in seed)
        entropy, key = seed[0], seed[1:]
    if entropy < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(entropy, spawn_key=tuple(key) + tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))
