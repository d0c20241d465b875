"""Blue/red/black/ghost bookkeeping for small cycles along the walk.

Cycles of size > K are blue.  Small cycles (size <= K) are red when they
were split off a blue cycle by the first small-touching transposition of a
step, and black otherwise.  A red cycle that leaves in any way other than a
lawful coagulation with a blue cycle is compensated by a ghost of the same
size; ghosts of size i die at rate i * mu_hat.  With Y_i = R_i + G_i the
identity N_i = Y_i - G_i + B_i holds for every i <= K.

Per transposition of a k-cycle (applied in order (x1 x2), (x2 x3), ...):

  split of a small cycle   pieces black; ghost if it was red, unless it was
                           created by the previous transposition of this step
  split of a blue cycle    if this is the first transposition of the step to
                           create or touch a small cycle, the smallest small
                           piece is red (fair coin on ties) and any other small
                           piece black; otherwise all small pieces black
  merge with a blue cycle  result blue; a red partner leaves lawfully when no
                           earlier transposition of the step touched a small
                           cycle, is absorbed without a ghost when created by
                           the previous transposition, and gets a ghost otherwise
  merge of two small       result black if <= K, else blue; each red input gets
                           a ghost unless it was created in this step
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from numba import njit

from .cycle_core import Permutation, transpose_arrays
from .kcycle_walk import draw_tuple
from .streams import as_generator

BLUE = 0
RED = 1
BLACK = 2

# slots of the integer scratch vector
NGHOST = 0
BLUE_MASS = 1
LAWFUL = 2
GHOSTS_MADE = 3
BLACKS_MADE = 4
BUSY_STEPS = 5
REDS_MADE = 6
STEPS = 7
TAU_HIT = 8
N_SLOTS = 9


def dyadic_cutoff(n: int, chi: float) -> int:
    """Power of two closest to n**chi; ties go to the larger power."""
    if not 0 < chi < 1:
        raise ValueError("chi must lie in (0, 1)")
    x = n**chi
    lo = 2 ** int(math.floor(math.log2(x)))
    hi = 2 * lo
    return hi if hi - x <= x - lo else lo


@njit(cache=True)
def strip_of(s):
    j = 0
    while s >= 2:
        s >>= 1
        j += 1
    return j


@njit(cache=True)
def _add_ghost(ghosts, st, size):
    g = st[NGHOST]
    if g >= len(ghosts):
        raise RuntimeError("ghost buffer full")
    ghosts[g] = size
    st[NGHOST] = g + 1
    st[GHOSTS_MADE] += 1


@njit(cache=True)
def _remove_small(color, R, B, cyc, size):
    if color[cyc] == RED:
        R[size] -= 1
    elif color[cyc] == BLACK:
        B[size] -= 1


@njit(cache=True)
def _paint(color, R, B, cyc, size, col, K):
    if size > K:
        color[cyc] = BLUE
        return
    color[cyc] = col
    if col == RED:
        R[size] += 1
    else:
        B[size] += 1


@njit(cache=True)
def colored_transposition(succ, pred, cid, csize, counts, free, nfree,
                          color, red_step, red_tr, R, B, ghosts, M, st,
                          created, lawful, K, a, b, step, j, touched, rng, out):
    """One transposition with the coloring rules.

    ``out`` accumulates (red created, uncompensated red departures,
    ghosts made, blacks made, small-cycle events) for the current step.
    Returns the updated touched-a-small-cycle flag.
    """
    ca = cid[a]
    cb = cid[b]
    if ca != cb:
        sa = csize[ca]
        sb = csize[cb]
        col_a = color[ca]
        col_b = color[cb]
        fresh_a = red_step[ca] == step
        fresh_b = red_step[cb] == step
        prev_a = fresh_a and red_tr[ca] == j - 1
        prev_b = fresh_b and red_tr[cb] == j - 1
        transpose_arrays(succ, pred, cid, csize, counts, free, nfree, a, b)
        new = cid[a]
        red_step[new] = -1
        s = sa + sb
        M[strip_of(sa)] -= 1
        M[strip_of(sb)] -= 1
        M[strip_of(s)] += 1
        small_a = sa <= K
        small_b = sb <= K
        if not small_a and not small_b:
            color[new] = BLUE
            return touched
        out[4] += 1
        if small_a and small_b:
            # both small: merge result black unless it grows past K
            _remove_small(color, R, B, ca, sa)
            _remove_small(color, R, B, cb, sb)
            if col_a == RED and not fresh_a:
                _add_ghost(ghosts, st, sa)
                out[2] += 1
            if col_b == RED and not fresh_b:
                _add_ghost(ghosts, st, sb)
                out[2] += 1
            if s <= K:
                out[3] += 1
                st[BLACKS_MADE] += 1
            else:
                st[BLUE_MASS] += s
            _paint(color, R, B, new, s, BLACK, K)
            return True
        # one small partner meets a blue cycle
        if small_a:
            sm, col, fresh, prev = sa, col_a, fresh_a, prev_a
            _remove_small(color, R, B, ca, sa)
        else:
            sm, col, fresh, prev = sb, col_b, fresh_b, prev_b
            _remove_small(color, R, B, cb, sb)
        st[BLUE_MASS] += sm
        if col == RED:
            if prev:
                pass
            elif touched:
                _add_ghost(ghosts, st, sm)
                out[2] += 1
            else:
                st[LAWFUL] += 1
                lawful[sm] += 1
                out[1] += 1
        color[new] = BLUE
        return True

    s = csize[ca]
    col = color[ca]
    fresh = red_step[ca] == step
    prev = fresh and red_tr[ca] == j - 1
    kind, ia, ib = transpose_arrays(succ, pred, cid, csize, counts, free, nfree, a, b)
    ida = cid[a]
    idb = cid[b]
    red_step[ida] = -1
    red_step[idb] = -1
    M[strip_of(s)] -= 1
    M[strip_of(ia)] += 1
    M[strip_of(ib)] += 1
    if s <= K:
        out[4] += 1
        _remove_small(color, R, B, ca, s)
        if col == RED and not prev:
            _add_ghost(ghosts, st, s)
            out[2] += 1
        _paint(color, R, B, ida, ia, BLACK, K)
        _paint(color, R, B, idb, ib, BLACK, K)
        out[3] += 2
        st[BLACKS_MADE] += 2
        return True
    small_a = ia <= K
    small_b = ib <= K
    if not small_a and not small_b:
        color[ida] = BLUE
        color[idb] = BLUE
        return touched
    out[4] += 1
    st[BLUE_MASS] -= (ia if small_a else 0) + (ib if small_b else 0)
    if touched:
        _paint(color, R, B, ida, ia, BLACK, K)
        _paint(color, R, B, idb, ib, BLACK, K)
        nb = int(small_a) + int(small_b)
        out[3] += nb
        st[BLACKS_MADE] += nb
        return True
    # first small-touching transposition of the step: smallest small piece is red
    if small_a and small_b:
        if ia < ib:
            red_a = True
        elif ib < ia:
            red_a = False
        else:
            red_a = rng.random() < 0.5
    else:
        red_a = small_a
    if red_a:
        rid, rs, oid, os = ida, ia, idb, ib
    else:
        rid, rs, oid, os = idb, ib, ida, ia
    _paint(color, R, B, rid, rs, RED, K)
    red_step[rid] = step
    red_tr[rid] = j
    created[rs] += 1
    st[REDS_MADE] += 1
    out[0] += 1
    _paint(color, R, B, oid, os, BLACK, K)
    if os <= K:
        out[3] += 1
        st[BLACKS_MADE] += 1
    return True


@njit(cache=True)
def colored_kcycle(succ, pred, cid, csize, counts, free, nfree,
                   color, red_step, red_tr, R, B, ghosts, M, st,
                   created, lawful, K, tup, rng, out):
    """Apply the k-cycle given by ``tup`` transposition by transposition."""
    for q in range(5):
        out[q] = 0
    step = st[STEPS]
    touched = False
    for j in range(len(tup) - 1):
        touched = colored_transposition(succ, pred, cid, csize, counts, free, nfree,
                                        color, red_step, red_tr, R, B, ghosts, M, st,
                                        created, lawful, K, tup[j], tup[j + 1], step, j,
                                        touched, rng, out)
    st[STEPS] = step + 1
    if out[4] > 2 * len(tup):
        st[BUSY_STEPS] += 1
    if out[0] > 1 or out[1] > 1 or (out[0] > 0 and out[1] > 0):
        raise RuntimeError("more than one red created or departed in a step")


@njit(cache=True)
def decay_ghosts(ghosts, st, mu_hat, dt, rng):
    g = st[NGHOST]
    w = 0
    for r in range(g):
        if rng.random() < math.exp(-ghosts[r] * mu_hat * dt):
            ghosts[w] = ghosts[r]
            w += 1
    st[NGHOST] = w


@njit(cache=True)
def _record(r, counts, R, B, ghosts, st, M, K, n, outN, outR, outB, outG, outM, outTheta):
    for i in range(K + 1):
        outN[r, i] = counts[i]
        outR[r, i] = R[i]
        outB[r, i] = B[i]
        outG[r, i] = 0
    for q in range(st[NGHOST]):
        outG[r, ghosts[q]] += 1
    for q in range(len(M)):
        outM[r, q] = M[q]
    outTheta[r] = st[BLUE_MASS] / n


@njit(cache=True)
def _tau_check(M, j_tau, thr):
    for q in range(min(j_tau + 1, len(M))):
        if M[q] > thr:
            return True
    return False


@njit(cache=True)
def run_colored_kernel(succ, pred, cid, csize, counts, free, nfree,
                       color, red_step, red_tr, R, B, ghosts, M, st,
                       created, lawful, K, k, mu_hat, times, j_tau, tau_thr, rng,
                       outN, outR, outB, outG, outM, outTheta, red_exposure):
    """Walk with coloring; snapshots at sorted ``times``.  Returns tau (or -1)."""
    n = len(succ) - 1
    tup = np.empty(k, dtype=np.int64)
    out = np.zeros(5, dtype=np.int64)
    t = 0.0
    tau = -1.0
    if _tau_check(M, j_tau, tau_thr):
        tau = 0.0
    nxt = rng.standard_exponential()
    for r in range(len(times)):
        while nxt <= times[r]:
            dt = nxt - t
            decay_ghosts(ghosts, st, mu_hat, dt, rng)
            for i in range(1, K + 1):
                red_exposure[i] += R[i] * dt
            t = nxt
            draw_tuple(rng, n, k, tup)
            colored_kcycle(succ, pred, cid, csize, counts, free, nfree,
                           color, red_step, red_tr, R, B, ghosts, M, st,
                           created, lawful, K, tup, rng, out)
            if tau < 0 and _tau_check(M, j_tau, tau_thr):
                tau = t
            nxt = t + rng.standard_exponential()
        dt = times[r] - t
        decay_ghosts(ghosts, st, mu_hat, dt, rng)
        for i in range(1, K + 1):
            red_exposure[i] += R[i] * dt
        t = times[r]
        _record(r, counts, R, B, ghosts, st, M, K, n, outN, outR, outB, outG, outM, outTheta)
    if tau >= 0:
        st[TAU_HIT] = 1
    return tau


class StepReport(NamedTuple):
    red_created: int
    red_departed_uncompensated: int
    ghosts_created: int
    blacks_created: int
    small_events: int


def rate_bounds(n: int, k: int, chi: float, K: Optional[int] = None) -> dict:
    """(lambda-, lambda+, mu-, mu+) and whether the lower bounds are positive."""
    K = dyadic_cutoff(n, chi) if K is None else K
    lam_plus = k / (n - k + 1)
    mu_plus = k / (n - k)
    lower = (k / n) * (1 - 8 * k * K * math.log(n) ** 6 / n)
    return {"lambda_minus": lower, "lambda_plus": lam_plus,
            "mu_minus": lower, "mu_plus": mu_plus, "in_regime": lower > 0}


def check_mu_hat(n: int, k: int, chi: float, mu_hat: float, K: Optional[int] = None) -> None:
    b = rate_bounds(n, k, chi, K)
    lo = max(b["mu_minus"], 0.0)
    if not lo <= mu_hat <= b["mu_plus"] * (1 + 1e-12):
        raise ValueError(f"mu_hat={mu_hat} outside [{lo}, {b['mu_plus']}]")


class ColoredState:
    """Permutation plus colors, ghosts and running tallies."""

    def __init__(self, perm: Permutation, k: int, chi: float = 7 / 8, K: Optional[int] = None,
                 ghost_capacity: Optional[int] = None):
        self.perm = perm
        self.n = perm.n
        self.k = k
        self.chi = chi
        self.K = dyadic_cutoff(self.n, chi) if K is None else int(K)
        n, K = self.n, self.K
        self.color = np.zeros(n + 1, dtype=np.int64)
        self.red_step = -np.ones(n + 1, dtype=np.int64)
        self.red_tr = -np.ones(n + 1, dtype=np.int64)
        self.R = np.zeros(K + 1, dtype=np.int64)
        self.B = np.zeros(K + 1, dtype=np.int64)
        self.ghosts = np.zeros(ghost_capacity or 4 * n + 16, dtype=np.int64)
        self.M = np.zeros(strip_of(n) + 1, dtype=np.int64)
        self.st = np.zeros(N_SLOTS, dtype=np.int64)
        self.created = np.zeros(K + 1, dtype=np.int64)
        self.lawful = np.zeros(K + 1, dtype=np.int64)
        seen = set()
        for x in range(1, n + 1):
            c = int(perm.cid[x])
            if c in seen:
                continue
            seen.add(c)
            s = int(perm.csize[c])
            self.M[strip_of(s)] += 1
            if s <= K:
                self.color[c] = RED
                self.R[s] += 1
            else:
                self.color[c] = BLUE
                self.st[BLUE_MASS] += s

    @classmethod
    def start(cls, n: int, k: int, chi: float = 7 / 8, how: str = "ncycle", rng=None,
              K: Optional[int] = None) -> "ColoredState":
        """Start from one n-cycle (all blue), the identity, or a draw from mu.

        Small cycles present at time 0 are colored red.
        """
        if how == "ncycle":
            perm = Permutation(np.roll(np.arange(1, n + 1), -1))
        elif how == "identity":
            perm = Permutation.identity(n)
        elif how == "mu":
            rng = as_generator(rng)
            succ = rng.permutation(n) + 1
            perm = Permutation(succ)
            if k % 2 == 1 and perm.sign() < 0:
                perm.apply_transposition(1, 2)
        else:
            raise ValueError(f"unknown start {how!r}")
        return cls(perm, k, chi, K)

    @property
    def kernel_args(self) -> tuple:
        return (*self.perm.arrays, self.color, self.red_step, self.red_tr, self.R, self.B,
                self.ghosts, self.M, self.st, self.created, self.lawful, self.K)

    @property
    def G(self) -> np.ndarray:
        return np.bincount(self.ghosts[: self.st[NGHOST]], minlength=self.K + 1)[: self.K + 1]

    @property
    def Y(self) -> np.ndarray:
        return self.R + self.G

    @property
    def theta(self) -> float:
        return self.st[BLUE_MASS] / self.n

    def check(self) -> None:
        """Recount colors, blue mass and strips from scratch."""
        self.perm.check()
        R = np.zeros_like(self.R)
        B = np.zeros_like(self.B)
        M = np.zeros_like(self.M)
        mass = 0
        for cyc in self.perm.cycles():
            c = int(self.perm.cid[cyc[0]])
            s = len(cyc)
            M[strip_of(s)] += 1
            col = self.color[c]
            if s > self.K:
                mass += s
                if col != BLUE:
                    raise AssertionError("large cycle not blue")
            elif col == RED:
                R[s] += 1
            elif col == BLACK:
                B[s] += 1
            else:
                raise AssertionError("small cycle colored blue")
        if not (np.array_equal(R, self.R) and np.array_equal(B, self.B)):
            raise AssertionError("red/black tallies out of sync")
        if mass != self.st[BLUE_MASS] or not np.array_equal(M, self.M):
            raise AssertionError("blue mass or strips out of sync")
        N = self.perm.counts[: self.K + 1]
        if not np.array_equal(N[1:], (self.Y - self.G + self.B)[1:]):
            raise AssertionError("N_i != Y_i - G_i + B_i")
        if np.any(self.ghosts[: self.st[NGHOST]] > self.K):
            raise AssertionError("ghost larger than K")


def colored_step(state: ColoredState, c: Sequence[int], rng) -> StepReport:
    out = np.zeros(5, dtype=np.int64)
    tup = np.asarray(c, dtype=np.int64)
    if len(set(tup.tolist())) != len(tup) or len(tup) < 2:
        raise ValueError("k-cycle tuple needs at least two distinct elements")
    colored_kcycle(*state.kernel_args, tup, as_generator(rng), out)
    return StepReport(*(int(x) for x in out))


def ghost_decay(state: ColoredState, dt: float, rng, mu_hat: Optional[float] = None) -> None:
    mu_hat = state.k / state.n if mu_hat is None else mu_hat
    check_mu_hat(state.n, state.k, state.chi, mu_hat, state.K)
    decay_ghosts(state.ghosts, state.st, float(mu_hat), float(dt), as_generator(rng))


@dataclass
class QueueObservables:
    n: int
    k: int
    K: int
    times: np.ndarray
    N: np.ndarray       # (snapshots, K+1)
    R: np.ndarray
    B: np.ndarray
    G: np.ndarray
    M: np.ndarray       # (snapshots, strips)
    theta: np.ndarray
    tau: float          # -1 when never hit
    created: np.ndarray
    lawful: np.ndarray
    red_exposure: np.ndarray
    totals: dict

    @property
    def Y(self) -> np.ndarray:
        return self.R + self.G

    def identity_holds(self) -> bool:
        return bool(np.array_equal(self.N[:, 1:], (self.Y - self.G + self.B)[:, 1:]))

    def to_csv(self, path, comment: Optional[str] = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["kind", "t", "index", "a", "b", "c", "d"])
            for r, t in enumerate(self.times):
                for i in range(1, self.K + 1):
                    if self.R[r, i] or self.B[r, i] or self.G[r, i]:
                        w.writerow(["size", t, i, self.R[r, i], self.B[r, i], self.G[r, i], self.Y[r, i]])
                for j, m in enumerate(self.M[r]):
                    w.writerow(["strip", t, j, m, "", "", ""])
                w.writerow(["scalar", t, "", f"{self.theta[r]:.12g}", int(0 <= self.tau <= t), "", ""])


def run_colored(n: int, k: int, chi: float, t_end: float | Sequence[float], rng,
                start: str = "ncycle", mu_hat: Optional[float] = None,
                tau_threshold: Optional[float] = None, K: Optional[int] = None) -> QueueObservables:
    """Run the colored walk; snapshots at ``t_end`` (a time or a sorted grid).

    tau is the first time some strip M_j, j <= log2 K + 1, exceeds
    ``tau_threshold`` (default (log n)^6 / 2).
    """
    rng = as_generator(rng)
    state = ColoredState.start(n, k, chi, start, rng, K)
    K = state.K
    mu_hat = k / n if mu_hat is None else mu_hat
    check_mu_hat(n, k, chi, mu_hat, K)
    times = np.atleast_1d(np.asarray(t_end, dtype=float))
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("snapshot times must be sorted and nonnegative")
    thr = math.log(n) ** 6 / 2 if tau_threshold is None else tau_threshold
    j_tau = int(round(math.log2(K))) + 1
    S = len(times)
    outN = np.zeros((S, K + 1), dtype=np.int64)
    outR = np.zeros_like(outN)
    outB = np.zeros_like(outN)
    outG = np.zeros_like(outN)
    outM = np.zeros((S, len(state.M)), dtype=np.int64)
    theta = np.zeros(S)
    expo = np.zeros(K + 1)
    tau = run_colored_kernel(*state.kernel_args, k, float(mu_hat), times, j_tau, float(thr), rng,
                             outN, outR, outB, outG, outM, theta, expo)
    totals = {name: int(state.st[slot]) for name, slot in
              (("lawful", LAWFUL), ("ghosts_made", GHOSTS_MADE), ("blacks_made", BLACKS_MADE),
               ("busy_steps", BUSY_STEPS), ("reds_made", REDS_MADE), ("steps", STEPS))}
    return QueueObservables(n, k, K, times, outN, outR, outB, outG, outM, theta, float(tau),
                            state.created.copy(), state.lawful.copy(), expo, totals)
