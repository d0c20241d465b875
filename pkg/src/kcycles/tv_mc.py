"""Monte Carlo lower bounds on the distance to equilibrium.

Any function of the state gives a lower bound on the total variation
distance, so the estimators here compare histograms of a small projection of
the cycle counts.  Samples are arrays of cycle counts, one row per replica,
with column i holding N_i (column 0 unused).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import isotonic_regression

from .cycle_core import CycleTypeVector
from .equilibrium import sample_mu_counts
from .kcycle_walk import cycle_counts_at, t_mix
from .streams import as_generator

Projection = Callable[[np.ndarray], np.ndarray]


@dataclass
class Estimate:
    estimate: float
    stderr: float
    raw: float = float("nan")
    extra: dict = field(default_factory=dict)


def capped_small_counts(counts: np.ndarray, cap: int = 4, sizes: Sequence[int] = (1, 2, 3)) -> np.ndarray:
    """Default projection (min(N_1,4), min(N_2,4), min(N_3,4))."""
    counts = np.atleast_2d(counts)
    cols = [np.minimum(counts[:, s], cap) if s < counts.shape[1] else np.zeros(len(counts), int)
            for s in sizes]
    return np.stack(cols, axis=1)


def fixed_points(counts: np.ndarray) -> np.ndarray:
    return np.atleast_2d(counts)[:, 1]


def as_count_array(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return np.atleast_2d(samples)
    samples = list(samples)
    if not samples:
        return np.zeros((0, 1), dtype=np.int64)
    if isinstance(samples[0], CycleTypeVector):
        return np.array([s.as_array() for s in samples])
    return np.atleast_2d(np.asarray(samples))


def _codes(proj_a: np.ndarray, proj_b: np.ndarray):
    both = np.concatenate([proj_a, proj_b])
    if both.ndim == 1:
        both = both[:, None]
    _, inv = np.unique(both, axis=0, return_inverse=True)
    inv = inv.ravel()
    return inv[: len(proj_a)], inv[len(proj_a):], int(inv.max()) + 1


def _tv_hist(ca: np.ndarray, cb: np.ndarray, na: int, nb: int) -> float:
    return 0.5 * float(np.abs(ca / na - cb / nb).sum())


def _jackknife(ca: np.ndarray, cb: np.ndarray) -> float:
    """Jackknife stderr of the plug-in TV, grouping identical leave-one-outs by cell."""
    na, nb = int(ca.sum()), int(cb.sum())
    pa, pb = ca / na, cb / nb
    vals, weights = [], []
    for counts, is_a in ((ca, True), (cb, False)):
        cells = np.nonzero(counts)[0]
        m = (na if is_a else nb) - 1
        if m == 0:
            continue
        for c in cells:
            if is_a:
                new_a = ca.copy()
                new_a[c] -= 1
                diff = np.abs(new_a / m - pb)
            else:
                new_b = cb.copy()
                new_b[c] -= 1
                diff = np.abs(pa - new_b / m)
            vals.append(0.5 * diff.sum())
            weights.append(counts[c])
    if not vals:
        return 0.0
    vals = np.array(vals)
    weights = np.array(weights, dtype=float)
    N = weights.sum()
    mean = np.dot(weights, vals) / N
    return float(np.sqrt((N - 1) / N * np.dot(weights, (vals - mean) ** 2)))


def empirical_tv_projection(samples_a, samples_b, projection: Optional[Projection] = None,
                            debias: bool = False, n_perm: int = 50, rng=None) -> Estimate:
    """Plug-in TV between projected histograms, with jackknife stderr.

    With ``debias`` the mean plug-in TV over ``n_perm`` random relabellings
    of the pooled samples (its value when both sets share one law) is
    subtracted; the result is clipped at 0.
    """
    a = as_count_array(samples_a)
    b = as_count_array(samples_b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both sample sets must be nonempty")
    projection = projection or capped_small_counts
    ia, ib, m = _codes(projection(a), projection(b))
    ca = np.bincount(ia, minlength=m)
    cb = np.bincount(ib, minlength=m)
    raw = _tv_hist(ca, cb, len(ia), len(ib))
    se = _jackknife(ca, cb)
    if not debias:
        return Estimate(raw, se, raw)
    rng = as_generator(rng)
    pooled = np.concatenate([ia, ib])
    null = np.empty(n_perm)
    for r in range(n_perm):
        rng.shuffle(pooled)
        null[r] = _tv_hist(np.bincount(pooled[: len(ia)], minlength=m),
                           np.bincount(pooled[len(ia):], minlength=m), len(ia), len(ib))
    bias = float(null.mean())
    se = float(np.hypot(se, null.std(ddof=1) / np.sqrt(n_perm)))
    return Estimate(max(raw - bias, 0.0), se, raw, {"bias": bias})


def threshold_tv(x: np.ndarray, y: np.ndarray) -> Estimate:
    """max_m |P(x >= m) - P(y >= m)| with the binomial stderr at the maximizer."""
    x = np.asarray(x)
    y = np.asarray(y)
    top = int(max(x.max(), y.max())) + 1
    fx = np.bincount(x, minlength=top + 1)[::-1].cumsum()[::-1] / len(x)
    fy = np.bincount(y, minlength=top + 1)[::-1].cumsum()[::-1] / len(y)
    diff = np.abs(fx - fy)
    m = int(np.argmax(diff))
    se = float(np.sqrt(fx[m] * (1 - fx[m]) / len(x) + fy[m] * (1 - fy[m]) / len(y)))
    return Estimate(float(diff[m]), se, float(diff[m]), {"threshold": m})


def _lower(e: Estimate) -> Estimate:
    return Estimate(float(np.clip(e.raw - 2 * e.stderr, 0.0, 1.0)), e.stderr, e.raw, e.extra)


def walk_samples(n: int, k: int, times: Sequence[float], reps: int, rng,
                 max_size: int = 3) -> np.ndarray:
    """(reps, len(times), max_size+1) cycle counts, one walk per replica seen at every time."""
    streams = as_generator(rng).spawn(reps)
    order = np.argsort(times)
    out = np.empty((reps, len(times), max_size + 1), dtype=np.int64)
    for r, g in enumerate(streams):
        out[r, order] = cycle_counts_at(n, k, np.asarray(times, float)[order], g, max_size)
    return out


def fixed_point_statistic(n: int, k: int, t: float, reps: int, rng,
                          reference: Optional[np.ndarray] = None) -> Estimate:
    """Conservative lower bound on d(t) from the fixed-point count: estimate - 2 stderr."""
    if reps < 100:
        raise ValueError("reps must be at least 100")
    rng = as_generator(rng)
    walk = walk_samples(n, k, [t], reps, rng, 1)[:, 0]
    ref = reference if reference is not None else sample_mu_counts(n, k, reps, rng, 1)
    return _lower(threshold_tv(walk[:, 1], np.atleast_2d(ref)[:, 1]))


@dataclass
class Profile:
    """Per-time TV estimates from the fixed-point threshold test and the capped projection.

    ``raw`` arrays hold plug-in estimates; ``estimate`` and ``proj_estimate``
    are the conservative lower bounds raw - 2 stderr clipped to [0, 1].
    """

    n: int
    k: int
    times: np.ndarray
    reps: int
    raw: np.ndarray
    stderr: np.ndarray
    proj_raw: np.ndarray
    proj_stderr: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        for arr in (self.raw, self.proj_raw):
            if np.any((arr < 0) | (arr > 1)):
                raise ValueError("estimates must lie in [0, 1]")
        if np.any(self.stderr < 0) or np.any(self.proj_stderr < 0):
            raise ValueError("stderr must be nonnegative")

    @property
    def estimate(self) -> np.ndarray:
        return np.clip(self.raw - 2 * self.stderr, 0.0, 1.0)

    @property
    def proj_estimate(self) -> np.ndarray:
        return np.clip(self.proj_raw - 2 * self.proj_stderr, 0.0, 1.0)

    def lower(self) -> np.ndarray:
        """Pointwise larger of the two conservative lower bounds."""
        return np.maximum(self.estimate, self.proj_estimate)

    def best(self) -> tuple:
        """Pointwise larger of the two estimates (each targets a lower bound on d) and its stderr."""
        use_fp = self.raw >= self.proj_raw
        return (np.where(use_fp, self.raw, self.proj_raw),
                np.where(use_fp, self.stderr, self.proj_stderr))

    def rows(self) -> list:
        out = []
        for j, t in enumerate(self.times):
            out.append((self.n, self.k, float(t), "fixed_points", float(self.estimate[j]),
                        float(self.stderr[j]), self.reps, self.seed))
            out.append((self.n, self.k, float(t), "projection", float(self.proj_estimate[j]),
                        float(self.proj_stderr[j]), self.reps, self.seed))
        return out

    def to_csv(self, path, comment: Optional[str] = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["n", "k", "t", "estimator", "estimate", "stderr", "reps", "seed"])
            w.writerows(self.rows())


def mixing_profile(n: int, k: int, grid: Sequence[float], reps: int, rng,
                   ref_reps: Optional[int] = None, seed: Optional[int] = None) -> Profile:
    """Walk replicas observed along ``grid`` against fresh draws from mu.

    Each replica is one trajectory observed at every grid time, so estimates
    at different times are correlated but each uses ``reps`` i.i.d. samples.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < 0) or np.any(grid > 2 * t_mix(n, k) + 1e-9):
        raise ValueError("grid must lie within [0, 2 t_mix]")
    rng = as_generator(rng)
    walk = walk_samples(n, k, grid, reps, rng, 3)
    ref = sample_mu_counts(n, k, ref_reps or reps, rng, 3)
    fp = [threshold_tv(walk[:, j, 1], ref[:, 1]) for j in range(len(grid))]
    pr = [empirical_tv_projection(walk[:, j], ref) for j in range(len(grid))]
    return Profile(n, k, grid, reps,
                   np.array([e.raw for e in fp]), np.array([e.stderr for e in fp]),
                   np.array([e.raw for e in pr]), np.array([e.stderr for e in pr]), seed)


@dataclass
class Crossing:
    t_hat: float
    lo: float
    hi: float
    in_range: bool


def _first_crossing(times: np.ndarray, values: np.ndarray, level: float) -> float:
    below = np.nonzero(values <= level)[0]
    if len(below) == 0 or values[0] <= level:
        return float("nan")
    j = below[0]
    t0, t1, v0, v1 = times[j - 1], times[j], values[j - 1], values[j]
    if v0 == v1:
        return float(t1)
    return float(t0 + (v0 - level) * (t1 - t0) / (v0 - v1))


def isotonic_decreasing(values: np.ndarray) -> np.ndarray:
    return isotonic_regression(values, increasing=False).x


def crossing_time(profile: Profile, level: float = 0.5, smooth: bool = True,
                  which: str = "best") -> Crossing:
    """Downward crossing of ``level`` by the point estimates, linearly interpolated.

    The interval comes from the crossings of the raw -+ 2 stderr bands.  With
    ``smooth`` each curve is first replaced by its decreasing isotonic fit.
    """
    if which == "fixed_points":
        vals, se = profile.raw, profile.stderr
    elif which == "projection":
        vals, se = profile.proj_raw, profile.proj_stderr
    else:
        vals, se = profile.best()
    times = np.asarray(profile.times, float)
    fit = isotonic_decreasing if smooth else np.asarray
    t_hat = _first_crossing(times, fit(vals), level)
    if np.isnan(t_hat):
        return Crossing(t_hat, float("nan"), float("nan"), False)
    lo = _first_crossing(times, fit(np.clip(vals - 2 * se, 0, 1)), level)
    hi = _first_crossing(times, fit(np.clip(vals + 2 * se, 0, 1)), level)
    return Crossing(t_hat, times[0] if np.isnan(lo) else lo, times[-1] if np.isnan(hi) else hi, True)
