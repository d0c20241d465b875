"""Permutations with a live cycle registry.

A permutation of {1..n} is stored as successor/predecessor arrays plus a
registry mapping every element to a cycle id and every id to a size.  One
transposition step maps sigma to tau_ab o sigma; the registry and the cycle
type counts are patched in time proportional to the smaller piece touched.

The array-level kernels (``transpose_arrays`` and friends) are jitted and are
shared by every simulation loop in the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from numba import njit

MERGE = 0
SPLIT = 1


@njit(cache=True)
def transpose_arrays(succ, pred, cid, csize, counts, free, nfree, a, b):
    """Apply tau_ab o sigma in place.

    Returns ``(kind, x, y)``.  For a merge, x and y are the sizes of the
    cycles of a and b before the step.  For a split, x is the size of the
    piece containing a and y the size of the piece containing b.
    """
    ca = cid[a]
    cb = cid[b]
    pa = pred[a]
    pb = pred[b]
    succ[pa] = b
    succ[pb] = a
    pred[b] = pa
    pred[a] = pb
    if ca != cb:
        sa = csize[ca]
        sb = csize[cb]
        # relabel the smaller cycle into the larger one
        if sa < sb:
            keep, drop, start = cb, ca, a
        else:
            keep, drop, start = ca, cb, b
        x = start
        while True:
            cid[x] = keep
            x = succ[x]
            if cid[x] == keep:
                break
        csize[keep] = sa + sb
        free[nfree[0]] = drop
        nfree[0] += 1
        counts[sa] -= 1
        counts[sb] -= 1
        counts[sa + sb] += 1
        return MERGE, sa, sb
    s = csize[ca]
    # bidirectional walk: stop as soon as either piece closes
    x = succ[a]
    y = succ[b]
    la = 1
    lb = 1
    while x != a and y != b:
        x = succ[x]
        y = succ[y]
        la += 1
        lb += 1
    nfree[0] -= 1
    new = free[nfree[0]]
    if x == a:
        small, start = la, a
        ia, ib = la, s - la
    else:
        small, start = lb, b
        ia, ib = s - lb, lb
    x = start
    for _ in range(small):
        cid[x] = new
        x = succ[x]
    csize[new] = small
    csize[ca] = s - small
    counts[s] -= 1
    counts[ia] += 1
    counts[ib] += 1
    return SPLIT, ia, ib


@njit(cache=True)
def build_arrays(succ_in, n):
    """Registry arrays for a successor array (1-based, index 0 unused)."""
    succ = succ_in.copy()
    pred = np.zeros(n + 1, dtype=np.int64)
    cid = -np.ones(n + 1, dtype=np.int64)
    csize = np.zeros(n + 1, dtype=np.int64)
    counts = np.zeros(n + 1, dtype=np.int64)
    free = np.zeros(n + 1, dtype=np.int64)
    for x in range(1, n + 1):
        pred[succ[x]] = x
    nid = 0
    for x in range(1, n + 1):
        if cid[x] >= 0:
            continue
        y = x
        m = 0
        while cid[y] < 0:
            cid[y] = nid
            y = succ[y]
            m += 1
        csize[nid] = m
        counts[m] += 1
        nid += 1
    nf = 0
    for i in range(n, nid - 1, -1):
        free[nf] = i
        nf += 1
    nfree = np.array([nf], dtype=np.int64)
    return succ, pred, cid, csize, counts, free, nfree


class Event(NamedTuple):
    kind: str
    before: tuple
    after: tuple


@dataclass(frozen=True)
class CycleTypeVector:
    """Counts N_i of cycles of each size i (fixed points included)."""

    n: int
    counts: Mapping[int, int]

    def __post_init__(self):
        clean = {int(i): int(c) for i, c in self.counts.items() if c}
        if any(i < 1 or i > self.n for i in clean) or any(c < 0 for c in clean.values()):
            raise ValueError("cycle sizes must lie in 1..n with nonnegative counts")
        if sum(i * c for i, c in clean.items()) != self.n:
            raise ValueError("sum of i*N_i must equal n")
        object.__setattr__(self, "counts", dict(sorted(clean.items())))

    @classmethod
    def from_parts(cls, n: int, parts: Iterable[int]) -> "CycleTypeVector":
        c: dict[int, int] = {}
        for p in parts:
            c[p] = c.get(p, 0) + 1
        return cls(n, c)

    @classmethod
    def from_array(cls, counts: np.ndarray) -> "CycleTypeVector":
        n = len(counts) - 1
        return cls(n, {i: int(counts[i]) for i in range(1, n + 1) if counts[i]})

    def __getitem__(self, i: int) -> int:
        return self.counts.get(i, 0)

    def parts(self) -> tuple:
        out = []
        for i in sorted(self.counts, reverse=True):
            out.extend([i] * self.counts[i])
        return tuple(out)

    @property
    def num_cycles(self) -> int:
        return sum(self.counts.values())

    @property
    def sign(self) -> int:
        return -1 if (self.n - self.num_cycles) % 2 else 1

    def as_array(self) -> np.ndarray:
        a = np.zeros(self.n + 1, dtype=np.int64)
        for i, c in self.counts.items():
            a[i] = c
        return a


def strip_counts(v: CycleTypeVector | np.ndarray, j_max: int) -> np.ndarray:
    """M_j = sum of N_i over the dyadic strip [2^j, 2^(j+1)), for j = 0..j_max."""
    counts = v.as_array() if isinstance(v, CycleTypeVector) else np.asarray(v)
    n = len(counts) - 1
    if j_max > np.log2(max(n, 1)) + 1:
        raise ValueError("j_max exceeds log2(n) + 1")
    out = np.zeros(j_max + 1, dtype=np.int64)
    for j in range(j_max + 1):
        lo, hi = 2**j, min(2 ** (j + 1), n + 1)
        if lo <= n:
            out[j] = counts[lo:hi].sum()
    return out


class Permutation:
    """A permutation of {1..n} supporting O(min piece) transpositions."""

    def __init__(self, succ: Sequence[int]):
        succ = np.asarray(succ, dtype=np.int64)
        n = len(succ)
        full = np.zeros(n + 1, dtype=np.int64)
        full[1:] = succ
        if sorted(succ.tolist()) != list(range(1, n + 1)):
            raise ValueError("successor map is not a bijection of 1..n")
        self.n = n
        (self.succ, self.pred, self.cid, self.csize,
         self.counts, self.free, self.nfree) = build_arrays(full, n)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(1, n + 1))

    @classmethod
    def from_cycles(cls, n: int, cycles: Iterable[Sequence[int]]) -> "Permutation":
        succ = np.arange(1, n + 1)
        for cyc in cycles:
            for x, y in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                succ[x - 1] = y
        return cls(succ)

    @classmethod
    def from_parts(cls, parts: Sequence[int]) -> "Permutation":
        """Canonical representative: cycles filled left to right, largest first."""
        n = sum(parts)
        cycles, start = [], 1
        for p in sorted(parts, reverse=True):
            cycles.append(list(range(start, start + p)))
            start += p
        return cls.from_cycles(n, cycles)

    def copy(self) -> "Permutation":
        new = object.__new__(Permutation)
        new.n = self.n
        for name in ("succ", "pred", "cid", "csize", "counts", "free", "nfree"):
            setattr(new, name, getattr(self, name).copy())
        return new

    @property
    def arrays(self) -> tuple:
        return (self.succ, self.pred, self.cid, self.csize,
                self.counts, self.free, self.nfree)

    def apply_transposition(self, a: int, b: int) -> Event:
        if a == b:
            raise ValueError("transposition needs two distinct elements")
        if not (1 <= a <= self.n and 1 <= b <= self.n):
            raise ValueError("elements must lie in 1..n")
        kind, x, y = transpose_arrays(*self.arrays, a, b)
        if kind == MERGE:
            return Event("merge", (x, y), (x + y,))
        return Event("split", (x + y,), (x, y))

    def __call__(self, x: int) -> int:
        return int(self.succ[x])

    def cycle_size(self, x: int) -> int:
        return int(self.csize[self.cid[x]])

    def cycle_type(self) -> CycleTypeVector:
        return CycleTypeVector.from_array(self.counts)

    def sign(self) -> int:
        c = int(self.counts.sum())
        return -1 if (self.n - c) % 2 else 1

    def cycles(self) -> list:
        seen = np.zeros(self.n + 1, dtype=bool)
        out = []
        for x in range(1, self.n + 1):
            if seen[x]:
                continue
            cyc = []
            y = x
            while not seen[y]:
                seen[y] = True
                cyc.append(y)
                y = int(self.succ[y])
            out.append(cyc)
        return out

    def check(self) -> None:
        """Recount every orbit from scratch and compare with the registry."""
        if sorted(self.succ[1:].tolist()) != list(range(1, self.n + 1)):
            raise AssertionError("succ is not a bijection")
        for x in range(1, self.n + 1):
            if self.pred[self.succ[x]] != x:
                raise AssertionError("pred out of sync")
        counts = np.zeros(self.n + 1, dtype=np.int64)
        for cyc in self.cycles():
            ids = {int(self.cid[x]) for x in cyc}
            if len(ids) != 1 or self.csize[ids.pop()] != len(cyc):
                raise AssertionError("registry disagrees with orbit")
            counts[len(cyc)] += 1
        if not np.array_equal(counts, self.counts):
            raise AssertionError("cycle counts out of sync")


def cycle_type(perm: Permutation) -> CycleTypeVector:
    return perm.cycle_type()


def apply_transposition(perm: Permutation, a: int, b: int) -> Event:
    return perm.apply_transposition(a, b)


def cycle_size(perm: Permutation, x: int) -> int:
    return perm.cycle_size(x)


def parity_of_parts(n: int, num_parts: int) -> int:
    """Sign of a permutation of n points with the given number of cycles."""
    return -1 if (n - num_parts) % 2 else 1
