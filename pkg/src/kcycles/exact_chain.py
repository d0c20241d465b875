"""Exact chain on cycle types and a brute-force oracle on the whole group.

Because the step law is constant on a conjugacy class, the cycle type of the
walk is itself a Markov chain on integer partitions of n.  Its kernel is
tallied by applying every k-cycle to one representative permutation of each
partition, so entries are exact integer counts over a common denominator.
Continuous-time laws use uniformization: p_t = sum_m Pois(t)(m) p_0 P^m.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy import sparse
from scipy.stats import poisson

from .equilibrium import class_weight

TAIL_MASS = 1e-12
MAX_N = 14
MAX_K = 5


@dataclass
class PartitionTable:
    n: int
    partitions: list
    index: dict

    def __len__(self) -> int:
        return len(self.partitions)


def _partitions(n: int, largest: int):
    if n == 0:
        yield ()
        return
    for p in range(min(n, largest), 0, -1):
        for rest in _partitions(n - p, p):
            yield (p,) + rest


def enumerate_partitions(n: int) -> PartitionTable:
    """All partitions of n, each sorted decreasing, in reverse lexicographic order."""
    if not 1 <= n <= 40:
        raise ValueError("n must lie in 1..40")
    parts = list(_partitions(n, n))
    return PartitionTable(n, parts, {p: i for i, p in enumerate(parts)})


def _type_key(parts: Sequence[int], n: int) -> int:
    key = 0
    for p in parts:
        key += (n + 1) ** (p - 1)
    return key


@njit(cache=True)
def _tally_kcycles(succ, n, k, out_keys):
    """Apply every k-cycle (smallest point listed first) to succ; record type keys.

    ``succ`` is 0-based.  Returns the number of k-cycles written.
    """
    tup = np.empty(k, dtype=np.int64)
    new = np.empty(n, dtype=np.int64)
    seen = np.zeros(n, dtype=np.bool_)
    idx = np.zeros(k - 1, dtype=np.int64)
    w = 0
    for x1 in range(n):
        rest = n - x1 - 1
        if rest < k - 1:
            break
        total = rest ** (k - 1)
        for code in range(total):
            c = code
            ok = True
            for j in range(k - 1):
                idx[j] = x1 + 1 + c % rest
                c //= rest
                for m in range(j):
                    if idx[m] == idx[j]:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            tup[0] = x1
            for j in range(k - 1):
                tup[j + 1] = idx[j]
            # new = c o sigma with c: tup[0] -> tup[1] -> ... -> tup[k-1] -> tup[0]
            for x in range(n):
                new[x] = succ[x]
            for x in range(n):
                y = succ[x]
                for j in range(k):
                    if tup[j] == y:
                        new[x] = tup[(j + 1) % k]
                        break
            for x in range(n):
                seen[x] = False
            key = 0
            for x in range(n):
                if seen[x]:
                    continue
                y = x
                m = 0
                while not seen[y]:
                    seen[y] = True
                    y = new[y]
                    m += 1
                key += (n + 1) ** (m - 1)
            out_keys[w] = key
            w += 1
    return w


def num_k_cycles(n: int, k: int) -> int:
    return math.factorial(n) // (k * math.factorial(n - k))


def canonical_succ(parts: Sequence[int]) -> np.ndarray:
    """0-based successor array: cycles filled left to right in the given order."""
    n = sum(parts)
    succ = np.arange(n, dtype=np.int64)
    start = 0
    for p in parts:
        for j in range(p):
            succ[start + j] = start + (j + 1) % p
        start += p
    return succ


@dataclass
class TransitionMatrix:
    """Kernel P[i, j] = counts[i, j] / denominator, exactly."""

    table: PartitionTable
    k: int
    counts: np.ndarray
    denominator: int

    def entry(self, i: int, j: int) -> Fraction:
        return Fraction(int(self.counts[i, j]), self.denominator)

    def row(self, i: int) -> list:
        return [self.entry(i, j) for j in range(len(self.table))]

    def to_float(self) -> np.ndarray:
        return self.counts / self.denominator

    def row_sums_exact(self) -> bool:
        return bool(np.all(self.counts.sum(axis=1) == self.denominator))


def build_transition(n: int, k: int, table: PartitionTable | None = None) -> TransitionMatrix:
    if n > MAX_N or k > MAX_K:
        raise ValueError(f"brute-force kernel limited to n <= {MAX_N}, k <= {MAX_K}")
    if k < 2 or k > n:
        raise ValueError("need 2 <= k <= n")
    table = table or enumerate_partitions(n)
    key_to_row = {_type_key(p, n): i for i, p in enumerate(table.partitions)}
    total = num_k_cycles(n, k)
    counts = np.zeros((len(table), len(table)), dtype=np.int64)
    buf = np.empty(total, dtype=np.int64)
    for i, p in enumerate(table.partitions):
        w = _tally_kcycles(canonical_succ(p), n, k, buf)
        if w != total:
            raise AssertionError("k-cycle enumeration incomplete")
        keys, mult = np.unique(buf[:w], return_counts=True)
        for key, m in zip(keys.tolist(), mult.tolist()):
            counts[i, key_to_row[key]] += m
    return TransitionMatrix(table, k, counts, total)


def mu_vector(table: PartitionTable, k: int, exact: bool = False):
    w = [class_weight(p, table.n, k) for p in table.partitions]
    return w if exact else np.array([float(x) for x in w])


def poisson_weights(times: Sequence[float], tail: float = TAIL_MASS):
    """Poisson(t) pmf for m = 0..M with M the first index whose tail is below ``tail``."""
    times = np.asarray(times, dtype=float)
    tmax = float(times.max()) if times.size else 0.0
    M = int(poisson.isf(tail, tmax)) + 1 if tmax > 0 else 0
    while tmax > 0 and poisson.sf(M, tmax) >= tail:
        M += 1
    m = np.arange(M + 1)
    return m, np.array([poisson.pmf(m, t) if t > 0 else (m == 0).astype(float) for t in times])


def uniformized_laws(P: np.ndarray | sparse.spmatrix, p0: np.ndarray, times: Sequence[float]) -> np.ndarray:
    """Rows p_t for each t, with P acting on row vectors."""
    m, W = poisson_weights(times)
    PT = P.T
    v = p0.astype(float).copy()
    out = np.zeros((len(W), len(p0)))
    for j in range(len(m)):
        out += np.outer(W[:, j], v)
        v = PT @ v
    return out


def tv_curve_exact(n: int, k: int, times: Iterable[float], kernel: TransitionMatrix | None = None) -> list:
    """[(t, d(t))] for the walk started at the identity."""
    times = [float(t) for t in times]
    if any(t < 0 for t in times):
        raise ValueError("times must be nonnegative")
    kernel = kernel or build_transition(n, k)
    table = kernel.table
    mu = mu_vector(table, k)
    p0 = np.zeros(len(table))
    ident = table.index[(1,) * n]
    p0[ident] = 1.0
    laws = uniformized_laws(kernel.to_float(), p0, times)
    d0 = float(1 - class_weight((1,) * n, n, k))
    out = []
    for t, p in zip(times, laws):
        d = d0 if t == 0 else 0.5 * float(np.abs(p - mu).sum())
        out.append((t, d))
    return out


def tv_at_zero_exact(n: int, k: int) -> Fraction:
    return 1 - class_weight((1,) * n, n, k)


def write_tv_csv(path, rows: Sequence[tuple], header_comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["t", "d_exact"])
        for t, d in rows:
            w.writerow([f"{t:.12g}", f"{d:.12g}"])


# whole-group oracle ---------------------------------------------------------

@dataclass
class GroupLaw:
    n: int
    k: int
    t: float
    perms: np.ndarray        # (n!, n) 0-based images
    probs: np.ndarray
    class_of: np.ndarray     # partition row of each permutation
    table: PartitionTable

    @property
    def max_class_spread(self) -> float:
        spread = 0.0
        for c in np.unique(self.class_of):
            p = self.probs[self.class_of == c]
            spread = max(spread, float(p.max() - p.min()))
        return spread

    def tv_to_mu(self) -> float:
        mu = np.array([float(class_weight(self.table.partitions[c], self.n, self.k))
                       for c in range(len(self.table))])
        sizes = np.bincount(self.class_of, minlength=len(self.table))
        per_perm = mu[self.class_of] / sizes[self.class_of]
        return 0.5 * float(np.abs(self.probs - per_perm).sum())

    def class_law(self) -> np.ndarray:
        return np.bincount(self.class_of, weights=self.probs, minlength=len(self.table))


def _perm_codes(perms: np.ndarray, n: int) -> np.ndarray:
    return perms @ (n ** np.arange(n, dtype=np.int64))


def group_kernel(n: int, k: int):
    """Sparse kernel on S_n (rows: from, cols: to), permutations, class rows."""
    if n > 7:
        raise ValueError("whole-group oracle limited to n <= 7")
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    codes = _perm_codes(perms, n)
    order = np.argsort(codes)
    sorted_codes = codes[order]
    table = enumerate_partitions(n)
    class_of = np.empty(len(perms), dtype=np.int64)
    for r, p in enumerate(perms):
        seen = [False] * n
        parts = []
        for x in range(n):
            if seen[x]:
                continue
            y, m = x, 0
            while not seen[y]:
                seen[y] = True
                y = p[y]
                m += 1
            parts.append(m)
        class_of[r] = table.index[tuple(sorted(parts, reverse=True))]
    cycles = []
    for tup in itertools.permutations(range(n), k):
        if tup[0] == min(tup):
            c = np.arange(n)
            for j in range(k):
                c[tup[j]] = tup[(j + 1) % k]
            cycles.append(c)
    rows, cols = [], []
    src = np.arange(len(perms))
    for c in cycles:
        dest = c[perms]  # c o sigma
        cols.append(order[np.searchsorted(sorted_codes, _perm_codes(dest, n))])
        rows.append(src)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.full(len(rows), 1.0 / len(cycles))
    P = sparse.csr_matrix((vals, (rows, cols)), shape=(len(perms), len(perms)))
    return P, perms, class_of, table


def full_group_oracle(n: int, k: int, t: float, _cache: dict = {}) -> GroupLaw:
    key = (n, k)
    if key not in _cache:
        _cache[key] = group_kernel(n, k)
    P, perms, class_of, table = _cache[key]
    p0 = np.zeros(len(perms))
    p0[0] = 1.0  # itertools puts the identity first
    probs = uniformized_laws(P, p0, [t])[0]
    return GroupLaw(n, k, float(t), perms, probs, class_of, table)
