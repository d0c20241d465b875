"""Random k-uniform hypergraphs built from the walk, and their component census.

Every applied k-cycle opens the hyperedge formed by its k points.  Since
k-cycles arrive at rate 1 and each k-set is hit with equal probability, the
set of open hyperedges at time t is a G_k(n, p_t) hypergraph with
p_t = 1 - exp(-t / C(n, k)).  Cycles of the walk's permutation always lie
inside a single component of this hypergraph.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from numba import njit

from .cycle_core import Permutation
from .kcycle_walk import apply_k_cycle, draw_tuple
from .streams import as_generator

MAX_EDGE_INDEX = 2**62


@dataclass
class Hypergraph:
    """Vertices 1..n; edges are sorted k-tuples, stored once each."""

    n: int
    k: int
    edges: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        clean = []
        for e in self.edges:
            e = tuple(sorted(int(x) for x in e))
            if len(e) != self.k or len(set(e)) != self.k:
                raise ValueError(f"edge {e} does not have {self.k} distinct vertices")
            if e[0] < 1 or e[-1] > self.n:
                raise ValueError(f"edge {e} has a vertex outside 1..{self.n}")
            if e not in seen:
                seen.add(e)
                clean.append(e)
        self.edges = clean

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_array(self) -> np.ndarray:
        if not self.edges:
            return np.zeros((0, self.k), dtype=np.int64)
        return np.array(self.edges, dtype=np.int64)


def build_from_walk(n: int, k: int, tuples: Iterable[Sequence[int]]) -> Hypergraph:
    """One hyperedge per applied k-cycle (its vertex set); repeats collapse."""
    return Hypergraph(n, k, [tuple(t) for t in tuples])


def walk_with_hypergraph(n: int, k: int, t: float, rng,
                         start: Optional[Permutation] = None) -> tuple:
    """Run the walk to time t and return (permutation, hypergraph of applied k-cycles)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    rng = as_generator(rng)
    perm = start.copy() if start is not None else Permutation.identity(n)
    buf = np.empty(k, dtype=np.int64)
    tuples = []
    clock = rng.standard_exponential()
    while clock <= t:
        draw_tuple(rng, n, k, buf)
        c = buf.tolist()
        apply_k_cycle(perm, c)
        tuples.append(c)
        clock += rng.standard_exponential()
    return perm, build_from_walk(n, k, tuples)


def _distinct_ksets(n: int, k: int, m: int, rng) -> set:
    """m distinct uniform k-subsets of 1..n, by rejection (needs m <= C(n,k) / 2)."""
    out: set = set()
    while len(out) < m:
        need = m - len(out)
        batch = rng.integers(1, n + 1, size=(2 * need + 8, k))
        batch.sort(axis=1)
        ok = np.all(batch[:, 1:] != batch[:, :-1], axis=1)
        for row in batch[ok]:
            out.add(tuple(int(x) for x in row))
            if len(out) == m:
                break
    return out


def sample_gknp(n: int, k: int, p: float, rng) -> Hypergraph:
    """Each k-subset of 1..n is an edge independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    total = math.comb(n, k)
    if total >= MAX_EDGE_INDEX:
        raise OverflowError("C(n, k) too large to index; build the graph from the walk instead")
    rng = as_generator(rng)
    m = int(rng.binomial(total, p))
    if 2 * m <= total:
        edges = sorted(_distinct_ksets(n, k, m, rng))
    else:
        # dense case: drop a uniform set of non-edges from the full list
        drop = _distinct_ksets(n, k, total - m, rng)
        edges = [e for e in itertools.combinations(range(1, n + 1), k) if e not in drop]
    return Hypergraph(n, k, edges)


class EdgeProbability(NamedTuple):
    exact: float
    asymptotic: float


def p_t(n: int, k: int, t: float) -> EdgeProbability:
    """P(a given k-set was hit by time t) and its large-n form k! t / n^k."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    exact = -math.expm1(-t / math.comb(n, k))
    return EdgeProbability(exact, math.factorial(k) * t / n**k)


# census ---------------------------------------------------------------------

@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return False
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return True


@njit(cache=True)
def _label_components(n, edges):
    """Component label (root, 0-based) of each vertex, and edge count per root."""
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    for r in range(edges.shape[0]):
        for j in range(1, edges.shape[1]):
            _union(parent, size, edges[r, 0] - 1, edges[r, j] - 1)
    labels = np.empty(n, dtype=np.int64)
    for x in range(n):
        labels[x] = _find(parent, x)
    ecount = np.zeros(n, dtype=np.int64)
    for r in range(edges.shape[0]):
        ecount[labels[edges[r, 0] - 1]] += 1
    return labels, ecount


def is_hypertree(i: int, h: int, k: int) -> bool:
    return i == (k - 1) * h + 1


@dataclass
class ComponentCensus:
    n: int
    k: int
    components: list   # (vertex count i, hyperedge count h)
    labels: np.ndarray  # component label of vertex x+1

    @property
    def hypertrees(self) -> dict:
        """T_h: number of components that are hypertrees with h edges."""
        out: dict = {}
        for i, h in self.components:
            if is_hypertree(i, h, self.k):
                out[h] = out.get(h, 0) + 1
        return dict(sorted(out.items()))

    def T(self, h: int) -> int:
        return self.hypertrees.get(h, 0)

    @property
    def num_isolated(self) -> int:
        return self.T(0)

    @property
    def connected(self) -> bool:
        return len(self.components) == 1

    def same_component(self, x: int, y: int) -> bool:
        return bool(self.labels[x - 1] == self.labels[y - 1])

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for i, h in self.components:
                fh.write(json.dumps({"i": i, "h": h, "is_hypertree": is_hypertree(i, h, self.k)}) + "\n")


def census(H: Hypergraph) -> ComponentCensus:
    labels, ecount = _label_components(H.n, H.edge_array())
    roots, sizes = np.unique(labels, return_counts=True)
    comps = sorted(((int(s), int(ecount[r])) for r, s in zip(roots, sizes)), reverse=True)
    return ComponentCensus(H.n, H.k, comps, labels)


def cycles_within_components(perm: Permutation, cen: ComponentCensus) -> bool:
    """True when every cycle of ``perm`` lies inside one component."""
    for cyc in perm.cycles():
        first = cen.labels[cyc[0] - 1]
        if any(cen.labels[x - 1] != first for x in cyc):
            return False
    return True


# hypertree counts -----------------------------------------------------------

def hypertree_count_formula(k: int, h: int) -> int:
    """Labelled k-hypertrees with h edges on i = (k-1)h + 1 vertices."""
    if h < 0 or k < 2:
        raise ValueError("need h >= 0 and k >= 2")
    i = (k - 1) * h + 1
    val = Fraction(math.factorial((k - 1) * h) * Fraction(i) ** (h - 1),
                   math.factorial(h) * math.factorial(k - 1) ** h)
    if val.denominator != 1:
        raise ArithmeticError("hypertree count is not an integer")
    return int(val)


def hypertree_count_bruteforce(k: int, h: int) -> int:
    """Count h-edge sets on i = (k-1)h+1 labelled vertices that form a connected hypergraph."""
    i = (k - 1) * h + 1
    if i > 9:
        raise ValueError("exhaustive count limited to i <= 9")
    if h == 0:
        return 1
    all_edges = list(itertools.combinations(range(1, i + 1), k))
    count = 0
    for chosen in itertools.combinations(all_edges, h):
        labels, _ = _label_components(i, np.array(chosen, dtype=np.int64))
        if np.all(labels == labels[0]):
            count += 1
    return count


class HypertreeExpectation(NamedTuple):
    exact: float
    bound: float


def _log_pow(p: float, e: int) -> float:
    """log(p ** e) with 0 ** 0 = 1."""
    if e == 0:
        return 0.0
    return -math.inf if p == 0.0 else e * math.log(p)


def expected_hypertrees(n: int, k: int, p: float, h: int) -> HypertreeExpectation:
    """E(T_h) in G_k(n, p) and a simpler upper bound.

    exact = C(n,i) tau_k(h) p^h (1-p)^(C(n,k) - C(n-i,k) - h), since the h
    edges must be open and every other edge meeting the i vertices closed.
    The bound uses C(n,i) <= n^i / i! and keeps only the i C(n-i,k-1) edges
    with exactly one vertex in the tree:
        n i^(h-2) / h! * (n^(k-1) p / (k-1)!)^h * (1-p)^(i C(n-i,k-1)).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    i = (k - 1) * h + 1
    if i > n:
        return HypertreeExpectation(0.0, 0.0)
    closed = math.comb(n, k) - math.comb(n - i, k) - h
    log_q = math.log1p(-p) if p < 1.0 else -math.inf
    log_closed = 0.0 if closed == 0 else closed * log_q
    log_exact = (math.log(math.comb(n, i)) + math.log(hypertree_count_formula(k, h))
                 + _log_pow(p, h) + log_closed)
    lam = n ** (k - 1) * p / math.factorial(k - 1)
    one_vertex = i * math.comb(n - i, k - 1)
    log_bound = (math.log(n) + (h - 2) * math.log(i) - math.lgamma(h + 1)
                 + _log_pow(lam, h) + (0.0 if one_vertex == 0 else one_vertex * log_q))
    return HypertreeExpectation(math.exp(log_exact), math.exp(log_bound))


def isolated_variance(n: int, k: int, p: float) -> float:
    """Exact Var(T_0): pairs of vertices share C(n-2,k-2) edges."""
    q1 = (1 - p) ** math.comb(n - 1, k - 1)
    q2 = (1 - p) ** (2 * math.comb(n - 1, k - 1) - math.comb(n - 2, k - 2))
    return n * q1 + n * (n - 1) * q2 - (n * q1) ** 2


def isolated_variance_bound(n: int, k: int, p: float) -> float:
    """E(T_0) + E(T_0)^2 ((1-p)^-C(n-2,k-2) - 1), an upper bound on Var(T_0)."""
    e = n * (1 - p) ** math.comb(n - 1, k - 1)
    return e + e * e * ((1 - p) ** (-math.comb(n - 2, k - 2)) - 1)


# connectivity along the walk ------------------------------------------------

@njit(cache=True)
def _connectivity_kernel(n, k, times, rng, connected, isolated):
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    touched = np.zeros(n, dtype=np.bool_)
    buf = np.empty(k, dtype=np.int64)
    ncomp = n
    niso = n
    t = rng.standard_exponential()
    for r in range(len(times)):
        while t <= times[r]:
            draw_tuple(rng, n, k, buf)
            for j in range(k):
                x = buf[j] - 1
                if not touched[x]:
                    touched[x] = True
                    niso -= 1
                if j > 0 and _union(parent, size, buf[0] - 1, x):
                    ncomp -= 1
            t += rng.standard_exponential()
        connected[r] = ncomp == 1
        isolated[r] = niso


@dataclass
class ConnectivityProfile:
    n: int
    k: int
    times: np.ndarray
    reps: int
    p_connected: np.ndarray
    p_no_isolated: np.ndarray
    isolated: np.ndarray   # (reps, times) counts T_0

    @property
    def mean_isolated(self) -> np.ndarray:
        return self.isolated.mean(axis=0)

    @property
    def se_isolated(self) -> np.ndarray:
        return self.isolated.std(axis=0, ddof=1) / np.sqrt(self.reps)

    @staticmethod
    def _se(p: np.ndarray, reps: int) -> np.ndarray:
        return np.sqrt(p * (1 - p) / reps)

    @property
    def se_connected(self) -> np.ndarray:
        return self._se(self.p_connected, self.reps)

    @property
    def se_no_isolated(self) -> np.ndarray:
        return self._se(self.p_no_isolated, self.reps)

    def to_csv(self, path, comment: Optional[str] = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["t", "reps", "p_connected", "p_no_isolated",
                        "stderr_connected", "stderr_no_isolated", "mean_isolated",
                        "stderr_isolated"])
            for j, t in enumerate(self.times):
                w.writerow([f"{t:.12g}", self.reps, f"{self.p_connected[j]:.12g}",
                            f"{self.p_no_isolated[j]:.12g}", f"{self.se_connected[j]:.12g}",
                            f"{self.se_no_isolated[j]:.12g}", f"{self.mean_isolated[j]:.12g}",
                            f"{self.se_isolated[j]:.12g}"])


def connectivity_profile(n: int, k: int, grid: Sequence[float], reps: int, rng) -> ConnectivityProfile:
    """Fraction of walk hypergraphs that are connected / have no isolated vertex at each time.

    Each replica is one walk observed along the sorted grid.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted and nonnegative")
    if reps < 2:
        raise ValueError("reps must be at least 2")
    conn = np.zeros((reps, len(grid)), dtype=np.bool_)
    iso = np.zeros((reps, len(grid)), dtype=np.int64)
    for r, g in enumerate(as_generator(rng).spawn(reps)):
        _connectivity_kernel(n, k, grid, g, conn[r], iso[r])
    return ConnectivityProfile(n, k, grid, reps, conn.mean(axis=0), (iso == 0).mean(axis=0), iso)
