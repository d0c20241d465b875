"""Coupling of two cycle-type chains on the 1/n grid.

Each copy is a set of tiles (one per cycle, sizes in cells).  Tiles of equal
size across the copies are paired ("matched").  A transposition picks a
marker cell u and a second cell v != u; when u and v fall in the same tile
it splits, otherwise the two tiles merge.  Cells inside a tile follow the
cycle order starting at the tile's first point, so the marginal of either
copy is exactly the random-transposition step on cycle types.

Layout for one transposition: the marker tiles sit leftmost (marker at cell
1), followed in each copy by the partner of the other copy's marker when it
is matched, then the remaining unmatched tiles; the remaining matched pairs
form a common aligned suffix.  When the two marker tiles have equal size
the same v is used in both copies; otherwise the copy with the smaller
marker tile (a cells) draws v and the other copy uses phi_map(a, b, n, v).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np

from .equilibrium import sample_mu_cycle_type
from .kcycle_walk import t_mix, walk_to
from .streams import as_generator


def grid_round(x: float, n: int) -> Fraction:
    """Smallest element of {1/n, ..., n/n} not smaller than x."""
    if not 0 < x <= 1:
        raise ValueError("x must lie in (0, 1]")
    # floats are read by their shortest repr so 0.2 means 1/5, not 0.2000...0111
    exact = Fraction(repr(float(x))) if isinstance(x, float) else Fraction(x)
    return Fraction(math.ceil(exact * n), n)


def grid_round_cells(cells: int) -> int:
    """{U/2}_n in cells for a size of U cells."""
    return (cells + 1) // 2


def phi_map(a: int, b: int, n: int, v: int) -> int:
    """Grid-exact rotation aligning the second pick across the two copies.

    With G = ceil((a-1)/2): identity on cells <= G+1 and > b, cells in
    (G+1, a] move up by b-a, cells in (a, b] move down by a-G-1.
    """
    if a >= b:
        raise ValueError("need a < b (order the sizes first)")
    if a < 1 or b > n or not 1 <= v <= n:
        raise ValueError("cells out of range")
    G = a // 2  # ceil((a - 1) / 2)
    if v <= G + 1 or v > b:
        return v
    if v <= a:
        return v + b - a
    return v - (a - G - 1)


def phi_bijection_failures(n_max: int, phi=phi_map) -> tuple:
    """Check that v -> phi(a, b, n, v) permutes 1..n and fixes the marker cell.

    Runs over every n <= n_max and 1 <= a < b <= n; returns (failures, cases).
    """
    failures = cases = 0
    for n in range(2, n_max + 1):
        full = list(range(1, n + 1))
        for b in range(2, n + 1):
            for a in range(1, b):
                cases += 1
                try:
                    img = [phi(a, b, n, v) for v in full]
                except ValueError:
                    failures += 1
                    continue
                if img[0] != 1 or sorted(img) != full:
                    failures += 1
    return failures, cases


def match_parts(y_sizes: Sequence[int], z_sizes: Sequence[int]) -> tuple:
    """Maximal size matching: (matched sizes, unmatched Y, unmatched Z)."""
    if sum(y_sizes) != sum(z_sizes):
        raise ValueError("partitions must have equal mass")
    from collections import Counter
    cy, cz = Counter(y_sizes), Counter(z_sizes)
    matched = sorted((cy & cz).elements(), reverse=True)
    return (matched, sorted((cy - cz).elements(), reverse=True),
            sorted((cz - cy).elements(), reverse=True))


class TiledPartition:
    """Tiles of one copy; ``marker`` is the tile whose cell 1 holds u."""

    def __init__(self, n: int, size: dict):
        self.n = n
        self.size = dict(size)
        self.marker: Optional[int] = None
        self.used: list = []

    def parts(self) -> list:
        return sorted(self.size.values(), reverse=True)

    def sign(self) -> int:
        return -1 if (self.n - len(self.size)) % 2 else 1


@dataclass
class TranspositionStats:
    L_before: int
    L_after: int
    U_before: int
    U_after: int
    kinds: tuple


class CoupledPair:
    def __init__(self, y_parts: Sequence[int], z_parts: Sequence[int], strict: bool = False):
        n = sum(y_parts)
        if sum(z_parts) != n:
            raise ValueError("partitions must have equal mass")
        self.n = n
        self._next = 0
        self.Y = TiledPartition(n, {self._new(): int(s) for s in y_parts})
        self.Z = TiledPartition(n, {self._new(): int(s) for s in z_parts})
        self.pairY: dict = {}
        self.pairZ: dict = {}
        self.serial: dict = {}
        self.strict = strict
        self.violations = {"L_increase": 0, "U_halving": 0, "repetition": 0, "phi": 0}
        self.transpositions = 0
        self.refresh_matching()

    def _new(self) -> int:
        self._next += 1
        return self._next

    # matching -----------------------------------------------------------
    def refresh_matching(self) -> None:
        """Keep existing pairs, then pair free tiles of equal size.

        Marker tiles are paired with each other when possible and otherwise
        paired last, so that markers stay unmatched when a choice exists.
        """
        for pair, other in ((self.pairY, self.Z.size), (self.pairZ, self.Y.size)):
            for t in [t for t, p in pair.items() if p not in other]:
                del pair[t]
        for t in [t for t in self.pairY if t not in self.Y.size]:
            del self.pairY[t]
        for t in [t for t in self.pairZ if t not in self.Z.size]:
            del self.pairZ[t]
        for t in [t for t in self.serial if t not in self.pairY]:
            del self.serial[t]
        free_y: dict = {}
        free_z: dict = {}
        for t, s in self.Y.size.items():
            if t not in self.pairY:
                free_y.setdefault(s, []).append(t)
        for t, s in self.Z.size.items():
            if t not in self.pairZ:
                free_z.setdefault(s, []).append(t)
        my, mz = self.Y.marker, self.Z.marker
        for s, ys in free_y.items():
            zs = free_z.get(s)
            if not zs:
                continue
            ys.sort(key=lambda t: (t == my, t))
            zs.sort(key=lambda t: (t == mz, t))
            if my in ys and mz in zs:
                ys.remove(my)
                zs.remove(mz)
                ys.insert(0, my)
                zs.insert(0, mz)
            for y, z in zip(ys, zs):
                self.pairY[y] = z
                self.pairZ[z] = y
                self.serial[y] = self._new()

    def unmatched(self, which: str) -> list:
        T, pair = (self.Y, self.pairY) if which == "Y" else (self.Z, self.pairZ)
        return sorted((t for t in T.size if t not in pair), key=lambda t: (-T.size[t], t))

    @property
    def L(self) -> int:
        return len(self.Y.size) - len(self.pairY) + len(self.Z.size) - len(self.pairZ)

    @property
    def U(self) -> int:
        sizes = [self.Y.size[t] for t in self.unmatched("Y")] + \
                [self.Z.size[t] for t in self.unmatched("Z")]
        return min(sizes) if sizes else 0

    @property
    def Q(self) -> int:
        return sum(self.Y.size[t] for t in self.unmatched("Y"))

    def check(self) -> None:
        if sum(self.Y.size.values()) != self.n or sum(self.Z.size.values()) != self.n:
            raise AssertionError("mass not conserved")
        for y, z in self.pairY.items():
            if self.pairZ.get(z) != y or self.Y.size[y] != self.Z.size[z]:
                raise AssertionError("pairing inconsistent")
        uy = {self.Y.size[t] for t in self.unmatched("Y")}
        uz = {self.Z.size[t] for t in self.unmatched("Z")}
        if uy & uz:
            raise AssertionError("matching not maximal")
        if self.Q != sum(self.Z.size[t] for t in self.unmatched("Z")):
            raise AssertionError("unmatched mass differs")

    def _free_markers(self) -> None:
        """Hand a marker tile's partner to an unmatched tile of the same size.

        Unless the markers are paired with each other, a matched marker tile
        facing an unmatched one can force L up; the swap leaves the matching
        maximal and only changes the layout.
        """
        ty, tz = self.Y.marker, self.Z.marker
        if self.pairY.get(ty) == tz:
            return
        for T, pair, back, t in ((self.Y, self.pairY, self.pairZ, ty),
                                 (self.Z, self.pairZ, self.pairY, tz)):
            if t not in pair:
                continue
            s = T.size[t]
            spare = [x for x in T.size if x not in pair and x != t and T.size[x] == s]
            if spare:
                partner = pair.pop(t)
                x = min(spare)
                pair[x] = partner
                back[partner] = x
                if pair is self.pairY:  # serials are keyed by the Y tile
                    self.serial[x] = self.serial.pop(t)

    # layout ---------------------------------------------------------------
    def _matched_order(self, skip_y=(), skip_z=()) -> list:
        pairs = [(y, self.pairY[y]) for y in self.pairY
                 if y not in skip_y and self.pairY[y] not in skip_z]
        return sorted(pairs, key=lambda p: (-self.Y.size[p[0]], self.serial[p[0]]))

    def common_layout(self) -> tuple:
        pairs = self._matched_order()
        return (self.unmatched("Y") + [p[0] for p in pairs],
                self.unmatched("Z") + [p[1] for p in pairs])

    def marker_layout(self) -> tuple:
        ty, tz = self.Y.marker, self.Z.marker
        pairs = self._matched_order(skip_y=(ty,), skip_z=(tz,))
        pre_y = [ty]
        pre_z = [tz]
        if tz in self.pairZ and self.pairZ[tz] != ty:
            pre_y.append(self.pairZ[tz])
        if ty in self.pairY and self.pairY[ty] != tz:
            pre_z.append(self.pairY[ty])
        pre_y += [t for t in self.unmatched("Y") if t != ty]
        pre_z += [t for t in self.unmatched("Z") if t != tz]
        return pre_y + [p[0] for p in pairs], pre_z + [p[1] for p in pairs]

    @staticmethod
    def _locate(T: TiledPartition, layout: list, pos: int) -> tuple:
        start = 0
        for t in layout:
            s = T.size[t]
            if pos <= start + s:
                return t, pos - start - 1
            start += s
        raise AssertionError("position beyond layout")

    # tile surgery -------------------------------------------------------------
    @staticmethod
    def _rotate(T: TiledPartition, t: int, d: int) -> None:
        s = T.size[t]
        T.used = [(x, (o - d) % s) if x == t else (x, o) for x, o in T.used]

    def _apply(self, T: TiledPartition, w: int, e: int) -> str:
        """v sits in tile w at offset e; split or merge with the marker tile."""
        t = T.marker
        if (w, e) in T.used:
            self.violations["repetition"] += 1
        if w == t:
            s = T.size.pop(t)
            left, right = self._new(), self._new()
            T.size[left] = e
            T.size[right] = s - e
            T.used = [((left, o) if o < e else (right, o - e)) if x == t else (x, o)
                      for x, o in T.used]
            T.marker = right
            kind = "split"
        else:
            s = T.size.pop(t)
            sw = T.size.pop(w)
            m = self._new()
            T.size[m] = s + sw
            moved = []
            for x, o in T.used:
                if x == w:
                    moved.append((m, (o - e) % sw))
                elif x == t:
                    moved.append((m, sw + o))
                else:
                    moved.append((x, o))
            T.used = moved
            T.marker = m
            kind = "merge"
        T.used.append((T.marker, 0))
        return kind

    def transposition(self, rng, first: bool = True) -> TranspositionStats:
        """One coupled transposition; ``first`` draws a fresh common marker."""
        rng = as_generator(rng)
        n = self.n
        L0, U0 = self.L, self.U
        if first or self.Y.marker is None:
            ly, lz = self.common_layout()
            u = int(rng.integers(1, n + 1))
            ty, dy = self._locate(self.Y, ly, u)
            tz, dz = self._locate(self.Z, lz, u)
            self.Y.used = [(ty, dy)]
            self.Z.used = [(tz, dz)]
            self._rotate(self.Y, ty, dy)
            self._rotate(self.Z, tz, dz)
            self.Y.marker, self.Z.marker = ty, tz
        self._free_markers()
        ty, tz = self.Y.marker, self.Z.marker
        sy, sz = self.Y.size[ty], self.Z.size[tz]
        ly, lz = self.marker_layout()
        if sy == sz:
            vy = vz = int(rng.integers(2, n + 1))
        elif sy < sz:
            vy = int(rng.integers(2, n + 1))
            vz = phi_map(sy, sz, n, vy)
        else:
            vz = int(rng.integers(2, n + 1))
            vy = phi_map(sz, sy, n, vz)
        if not (2 <= vy <= n and 2 <= vz <= n):
            self.violations["phi"] += 1
        wy, ey = self._locate(self.Y, ly, vy)
        wz, ez = self._locate(self.Z, lz, vz)
        kinds = (self._apply(self.Y, wy, ey), self._apply(self.Z, wz, ez))
        self.refresh_matching()
        self.transpositions += 1
        L1, U1 = self.L, self.U
        if L1 > L0:
            self.violations["L_increase"] += 1
        if L0 and L1 and U1 < U0 // 2:
            self.violations["U_halving"] += 1
        if self.strict and (L1 > L0 or (L0 and L1 and U1 < U0 // 2)):
            raise AssertionError(f"coupling invariant broken: L {L0}->{L1}, U {U0}->{U1}")
        return TranspositionStats(L0, L1, U0, U1, kinds)

    def k_cycle(self, k: int, rng) -> list:
        if k < 2:
            raise ValueError("k must be at least 2")
        return [self.transposition(rng, first=(j == 0)) for j in range(k - 1)]


def coupled_transposition(pair: CoupledPair, rng) -> TranspositionStats:
    return pair.transposition(rng, first=True)


def coupled_k_cycle(pair: CoupledPair, k: int, rng) -> list:
    return pair.k_cycle(k, rng)


@dataclass
class CouplingRun:
    T: float
    timeout: bool
    steps: int
    history: list = field(default_factory=list)   # (step, L, U, Q)
    violations: dict = field(default_factory=dict)
    min_unmatched: int = 0


def coupling_time(pair: CoupledPair, k: int, rng, t_cap: float, record: bool = False) -> CouplingRun:
    """First time L = 0 with k-cycles at rate 1; timeout at ``t_cap``."""
    rng = as_generator(rng)
    t = 0.0
    steps = 0
    hist = [(0, pair.L, pair.U, pair.Q)] if record else []
    min_u = pair.U if pair.L else 0
    while pair.L > 0:
        t += rng.standard_exponential()
        if t > t_cap:
            return CouplingRun(t_cap, True, steps, hist, dict(pair.violations), min_u)
        pair.k_cycle(k, rng)
        steps += 1
        if pair.L:
            min_u = min(min_u, pair.U)
        if record:
            hist.append((steps, pair.L, pair.U, pair.Q))
    return CouplingRun(t, False, steps, hist, dict(pair.violations), min_u)


def write_runs_csv(path, rows: Sequence[tuple], comment: Optional[str] = None) -> None:
    """Per-run rows (seed, T, timeout_flag, phi_violations, L_increase, U_halving, repetition)."""
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["seed", "T", "timeout", "phi_violations", "L_increase", "U_halving", "repetition"])
        w.writerows(rows)


def write_steps_csv(path, history: Sequence[tuple], comment: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["step", "L", "U", "Q"])
        w.writerows(history)


def small_cutoff(n: int, chi: float = 7 / 8) -> int:
    """Power of two closest to floor(n**chi); ties go up."""
    x = math.floor(n**chi)
    lo = 2 ** int(math.floor(math.log2(x)))
    hi = 2 * lo
    return hi if hi - x <= x - lo else lo


def warm_coupled_start(n: int, k: int, rng, c: float = 1.0, chi: float = 7 / 8,
                       force_match_small: bool = True, max_tries: int = 10000) -> CoupledPair:
    """Z from mu, Y from the walk at t_mix + c n; small parts (< K) of Y replaced by Z's.

    The mass difference is absorbed by Y's largest part, which must stay
    >= K.  Draws are repeated until this works and both copies have the
    same sign.
    """
    rng = as_generator(rng)
    K = small_cutoff(n, chi)
    y = None
    for _ in range(max_tries):
        if y is None:
            y = list(walk_to(n, k, t_mix(n, k) + c * n, rng).cycle_type().parts())
        z = list(sample_mu_cycle_type(n, k, rng).parts())
        yy = list(y)
        if force_match_small:
            big = [s for s in yy if s >= K]
            if not big:
                y = None
                continue
            small_z = [s for s in z if s < K]
            big[0] += n - sum(big) - sum(small_z)
            if big[0] < K:
                continue
            yy = big + small_z
        if (len(yy) - len(z)) % 2 == 0:
            return CoupledPair(yy, z)
    raise RuntimeError("could not build a start with equal signs")


# gambler's ruin ----------------------------------------------------------------

def ruin_probability(j0: int, j1: int, p: Mapping[int, float] | callable) -> float:
    """P^{j0}(hit j1 before returning to j0) for the chain stepping down w.p. p_m.

    The chain leaves j0 downward with probability 1.  Evaluated exactly in
    rational arithmetic from the binary values of p_m.
    """
    if j1 >= j0:
        raise ValueError("need j1 < j0")
    get = p if callable(p) else p.__getitem__
    ratios = {}
    for m in range(j1 + 1, j0):
        pm = get(m)
        if not 0 < pm < 1:
            raise ValueError(f"p_{m}={pm} must lie in (0, 1)")
        f = Fraction(pm)
        ratios[m] = (1 - f) / f
    total = Fraction(0)
    for j in range(j1 + 1, j0 + 1):
        prod = Fraction(1)
        for m in range(j, j0):
            prod *= ratios[m]
        total += prod
    return float(1 / total)


def ruin_probability_linear(j0: int, j1: int, p: Mapping[int, float] | callable) -> float:
    """Same quantity from the absorbing-chain linear system (oracle)."""
    get = p if callable(p) else p.__getitem__
    states = list(range(j1 + 1, j0))
    if not states:
        return 1.0
    idx = {m: i for i, m in enumerate(states)}
    A = np.eye(len(states))
    rhs = np.zeros(len(states))
    for m in states:
        i = idx[m]
        down, up = get(m), 1 - get(m)
        if m - 1 == j1:
            rhs[i] += down
        else:
            A[i, idx[m - 1]] -= down
        if m + 1 != j0:
            A[i, idx[m + 1]] -= up
    h = np.linalg.solve(A, rhs)
    return float(h[idx[j0 - 1]])
