"""Invariant law of the walk and the independent-Poisson small-cycle law.

The invariant measure mu is uniform on S_n when k is even and uniform on the
alternating group A_n when k is odd.  Cycle types of uniform permutations are
drawn with the Feller construction: the cycle through the smallest remaining
point has a length uniform on the number of points left.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from numba import njit

from .cycle_core import CycleTypeVector
from .streams import as_generator


@njit(cache=True)
def feller_parts(rng, n, parts):
    """Write the cycle lengths of a uniform permutation into ``parts``; return count."""
    m = n
    c = 0
    while m > 0:
        s = rng.integers(1, m + 1)
        parts[c] = s
        c += 1
        m -= s
    return c


@njit(cache=True)
def transpose_parts(rng, parts, c, n):
    """Compose a type with a transposition of two uniform distinct points.

    ``parts[:c]`` is modified in place; returns the new number of parts.
    """
    u = rng.integers(0, n)
    v = rng.integers(0, n - 1)
    if v >= u:
        v += 1
    iu = -1
    iv = -1
    su = 0
    sv = 0
    start = 0
    for i in range(c):
        if iu < 0 and u < start + parts[i]:
            iu = i
            su = start
        if iv < 0 and v < start + parts[i]:
            iv = i
            sv = start
        start += parts[i]
    if iu == iv:
        s = parts[iu]
        d = ((v - sv) - (u - su)) % s
        parts[iu] = d
        parts[c] = s - d
        return c + 1
    parts[iu] += parts[iv]
    parts[iv] = parts[c - 1]
    return c - 1


@njit(cache=True)
def mu_counts_kernel(rng, n, k, reps, out):
    """Fill ``out[r, i]`` with N_i (i <= out.shape[1]-1) for reps draws from mu."""
    parts = np.empty(n + 1, dtype=np.int64)
    width = out.shape[1]
    for r in range(reps):
        c = feller_parts(rng, n, parts)
        if k % 2 == 1 and n >= 2 and (n - c) % 2 == 1:
            c = transpose_parts(rng, parts, c, n)
        for i in range(c):
            if parts[i] < width:
                out[r, parts[i]] += 1


def sample_uniform_cycle_type(n: int, rng) -> CycleTypeVector:
    if n < 1:
        raise ValueError("n must be positive")
    parts = np.empty(n + 1, dtype=np.int64)
    c = feller_parts(as_generator(rng), n, parts)
    return CycleTypeVector.from_parts(n, parts[:c].tolist())


def sample_mu_cycle_type(n: int, k: int, rng) -> CycleTypeVector:
    """Cycle type under mu; odd draws are fixed by a transposition when k is odd."""
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = as_generator(rng)
    parts = np.empty(n + 1, dtype=np.int64)
    c = feller_parts(rng, n, parts)
    if k % 2 == 1 and (n - c) % 2 == 1:
        c = transpose_parts(rng, parts, c, n)
    return CycleTypeVector.from_parts(n, parts[:c].tolist())


def sample_mu_counts(n: int, k: int, reps: int, rng, max_size: int | None = None) -> np.ndarray:
    """``reps`` draws from mu as a (reps, max_size+1) array of N_i; column 0 unused."""
    max_size = n if max_size is None else min(max_size, n)
    out = np.zeros((reps, max_size + 1), dtype=np.int64)
    mu_counts_kernel(as_generator(rng), n, k, reps, out)
    return out


@dataclass(frozen=True)
class PoissonSmallCycleLaw:
    K: int

    @property
    def rates(self) -> np.ndarray:
        return 1.0 / np.arange(1, self.K + 1)

    def sample(self, rng, size: int | None = None) -> np.ndarray:
        shape = (self.K,) if size is None else (size, self.K)
        return as_generator(rng).poisson(np.broadcast_to(self.rates, shape))


def sample_poisson_small(K: int, rng, size: int | None = None) -> np.ndarray:
    """Independent Z_i ~ Poisson(1/i) for i = 1..K (row per sample if ``size``)."""
    if K < 1:
        raise ValueError("K must be positive")
    return PoissonSmallCycleLaw(K).sample(rng, size)


def z_lambda(parts: Sequence[int]) -> int:
    """Centralizer order prod_j j^{m_j} m_j!."""
    out = 1
    mult: dict[int, int] = {}
    for p in parts:
        mult[p] = mult.get(p, 0) + 1
    for j, m in mult.items():
        out *= j**m * math.factorial(m)
    return out


def is_even_type(parts: Sequence[int]) -> bool:
    return (sum(parts) - len(parts)) % 2 == 0


def class_weight(parts: Sequence[int], n: int, k: int) -> Fraction:
    """Exact mu-mass of the conjugacy class with cycle lengths ``parts``."""
    parts = [int(p) for p in parts]
    if any(p < 1 for p in parts) or sum(parts) != n:
        raise ValueError(f"{parts} is not a partition of {n}")
    w = Fraction(1, z_lambda(parts))
    if k % 2 == 1 and n >= 2:
        return 2 * w if is_even_type(parts) else Fraction(0)
    return w


# exact law of the small-cycle vector ---------------------------------------

def _exp_series(signs: np.ndarray, top: int) -> np.ndarray:
    """Coefficients c_0..c_top of exp(sum_i signs[i-1] x^i / i)."""
    K = len(signs)
    c = np.zeros(top + 1)
    c[0] = 1.0
    for m in range(1, top + 1):
        lo = max(0, m - K)
        # sum_{i=1}^{min(m,K)} signs[i-1] c[m-i]
        c[m] = np.dot(signs[: m - lo][::-1], c[lo:m]) / m
    return c


def _no_small_cycles(n: int, K: int) -> tuple[np.ndarray, np.ndarray]:
    """P(a uniform permutation of m points has no cycle <= K and is even / odd)."""
    E = np.zeros(n + 1)
    O = np.zeros(n + 1)
    E[0] = 1.0
    for m in range(K + 1, n + 1):
        j = np.arange(K + 1, m + 1)
        odd_len = j % 2 == 1
        rest = m - j
        E[m] = (E[rest[odd_len]].sum() + O[rest[~odd_len]].sum()) / m
        O[m] = (O[rest[odd_len]].sum() + E[rest[~odd_len]].sum()) / m
    return E, O


def small_cycle_tv_exact(n: int, K: int, k: int) -> float:
    """Exact TV between (N_i)_{i<=K} under mu and independent Poisson(1/i).

    The likelihood ratio depends only on m = sum i N_i (and on the parity of
    the small part when k is odd), so the sum collapses to one dimension.
    """
    H = float(np.sum(1.0 / np.arange(1, K + 1)))
    eH = math.exp(-H)
    A = _exp_series(np.ones(K), n)
    E, O = _no_small_cycles(n, K)
    rev_E = E[::-1]
    rev_O = O[::-1]
    if k % 2 == 0 or n < 2:
        tv = 0.5 * np.sum(A * np.abs(rev_E + rev_O - eH))
    else:
        B = _exp_series(np.array([(-1.0) ** (i - 1) for i in range(1, K + 1)]), n)
        even_w = (A + B) / 2
        odd_w = (A - B) / 2
        tv = 0.5 * np.sum(even_w * np.abs(2 * rev_E - eH) + odd_w * np.abs(2 * rev_O - eH))
    tail = 1.0 - eH * A.sum()
    return float(tv + 0.5 * max(tail, 0.0))


def small_cycle_statistic(counts: np.ndarray, K: int) -> np.ndarray:
    """Sufficient statistic for mu vs Poisson on (N_1..N_K): 2*mass + parity."""
    counts = np.atleast_2d(counts)
    i = np.arange(1, K + 1)
    mass = counts[:, 1 : K + 1] @ i
    parity = (counts[:, 1 : K + 1] @ (i - 1)) % 2
    return 2 * mass + parity
