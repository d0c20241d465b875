"""Continuous-time random walk on S_n driven by uniform k-cycles.

A k-cycle is sampled as an ordered tuple (x_1, ..., x_k) of distinct points;
each cycle has exactly k tuple representatives, so the induced law on
k-cycles is uniform.  It acts as the product of transpositions
(x_1 x_2), (x_2 x_3), ..., (x_{k-1} x_k), applied in that order, which left
multiplies the current permutation by the cycle (x_k ... x_1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit

from .cycle_core import CycleTypeVector, Event, Permutation, transpose_arrays
from .streams import as_generator

Observer = Callable[[float, list, Optional[CycleTypeVector]], None]


@njit(cache=True)
def draw_tuple(rng, n, k, out):
    """Uniform ordered k-tuple of distinct points of 1..n, by rejection."""
    for j in range(k):
        while True:
            x = rng.integers(1, n + 1)
            ok = True
            for m in range(j):
                if out[m] == x:
                    ok = False
                    break
            if ok:
                break
        out[j] = x


def sample_k_cycle(n: int, k: int, rng) -> tuple:
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError("k cannot exceed n")
    out = np.empty(k, dtype=np.int64)
    draw_tuple(as_generator(rng), n, k, out)
    return tuple(int(x) for x in out)


def apply_k_cycle(perm: Permutation, c: Sequence[int]) -> list[Event]:
    if len(set(c)) != len(c) or len(c) < 2:
        raise ValueError("k-cycle tuple needs at least two distinct elements")
    return [perm.apply_transposition(c[j], c[j + 1]) for j in range(len(c) - 1)]


def t_mix(n: int, k: int) -> float:
    """Cutoff location n log(n) / k (natural log)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return n * math.log(n) / k


@dataclass
class Trajectory:
    n: int
    k: int
    t_end: float
    event_times: list = field(default_factory=list)
    final: Optional[Permutation] = None

    @property
    def num_events(self) -> int:
        return len(self.event_times)


def run_walk(n: int, k: int, t_end: float, rng, observer: Optional[Observer] = None,
             snapshot_every: int = 1, start: Optional[Permutation] = None) -> Trajectory:
    """Run the walk to ``t_end`` with rate-1 exponential gaps.

    The observer receives ``(time, events, cycle_type)`` after every k-cycle;
    the cycle type is a snapshot every ``snapshot_every`` events and None
    otherwise.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    rng = as_generator(rng)
    perm = start.copy() if start is not None else Permutation.identity(n)
    traj = Trajectory(n, k, t_end)
    buf = np.empty(k, dtype=np.int64)
    t = 0.0
    while True:
        t += rng.standard_exponential()
        if t > t_end:
            break
        draw_tuple(rng, n, k, buf)
        events = apply_k_cycle(perm, buf.tolist())
        traj.event_times.append(t)
        if observer is not None:
            snap = perm.cycle_type() if len(traj.event_times) % snapshot_every == 0 else None
            observer(t, events, snap)
    traj.final = perm
    return traj


@njit(cache=True)
def walk_snapshot_kernel(succ, pred, cid, csize, counts, free, nfree,
                         k, times, rng, max_size, out):
    """Advance the walk through sorted ``times``; store N_0..N_max_size at each.

    Returns the number of k-cycles applied.
    """
    n = len(succ) - 1
    buf = np.empty(k, dtype=np.int64)
    t = rng.standard_exponential()
    events = 0
    for r in range(len(times)):
        while t <= times[r]:
            draw_tuple(rng, n, k, buf)
            for j in range(k - 1):
                transpose_arrays(succ, pred, cid, csize, counts, free, nfree,
                                 buf[j], buf[j + 1])
            events += 1
            t += rng.standard_exponential()
        for i in range(max_size + 1):
            out[r, i] = counts[i]
    return events


def cycle_counts_at(n: int, k: int, times: Sequence[float], rng, max_size: Optional[int] = None,
                    start: Optional[Permutation] = None) -> np.ndarray:
    """Cycle counts N_0..N_max_size of one walk observed at sorted ``times``."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (len(times) and times[0] < 0):
        raise ValueError("times must be sorted and nonnegative")
    max_size = n if max_size is None else min(max_size, n)
    perm = start.copy() if start is not None else Permutation.identity(n)
    out = np.zeros((len(times), max_size + 1), dtype=np.int64)
    walk_snapshot_kernel(*perm.arrays, k, times, as_generator(rng), max_size, out)
    return out


def walk_to(n: int, k: int, t: float, rng, start: Optional[Permutation] = None) -> Permutation:
    """The walk's permutation at time t (fast path, no observer)."""
    perm = start.copy() if start is not None else Permutation.identity(n)
    out = np.zeros((1, 1), dtype=np.int64)
    walk_snapshot_kernel(*perm.arrays, k, np.array([float(t)]), as_generator(rng), 0, out)
    return perm
