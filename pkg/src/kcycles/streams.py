"""Seeded, splittable random streams (one independent stream per replica)."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np


def spawn(seed: int | np.random.SeedSequence, count: int) -> list[np.random.Generator]:
    """``count`` independent PCG64 generators derived from a 64-bit seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(count)]


def replica_stream(seed: int, index: int) -> np.random.Generator:
    """The ``index``-th stream of ``spawn(seed, ...)`` without building the others."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def map_replicas(fn: Callable, args: Sequence, threads: int = 1) -> list:
    """Map ``fn`` over replica arguments; results come back in replica order."""
    if threads <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, args))
