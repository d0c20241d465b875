"""Command-line experiment runner.

    kcycles --experiment exact-tv --n 5 --k 2 --t-grid 0:10:11 --seed 1 --out tv.csv

Settings may also come from a key=value file (``--config``); flags given on
the command line override it.  Every CSV starts with one comment line that
records the configuration and package version, then a header row.

Exit codes: 0 ok, 1 invalid configuration, 2 self-test failure, 3 size too
large for an exact computation.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .coloring import run_colored
from .coupling import (coupling_time, phi_bijection_failures, phi_map, small_cutoff,
                       warm_coupled_start, write_runs_csv)
from .equilibrium import class_weight
from .exact_chain import MAX_K, MAX_N, full_group_oracle, tv_curve_exact, write_tv_csv
from .hypergraph import connectivity_profile, hypertree_count_bruteforce, hypertree_count_formula
from .kcycle_walk import t_mix
from .streams import map_replicas, replica_stream
from .tv_mc import crossing_time, mixing_profile

EXPERIMENTS = ("mix-profile", "exact-tv", "coloring", "coupling", "hypergraph", "selftest")
EXIT_OK, EXIT_CONFIG, EXIT_SUITE, EXIT_SIZE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class SizeError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    n: int = 0
    k: int = 2
    chi: float = 7 / 8
    t_grid: str = ""
    reps: int = 200
    seed: Optional[int] = None
    out: Optional[str] = None
    threads: int = 1
    ref_reps: int = 0
    start: str = "ncycle"
    mu_hat: Optional[float] = None
    force_match_small: bool = True
    t_cap: float = 0.0
    c: float = 1.0

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.experiment == "selftest":
            return
        if self.seed is None:
            raise ConfigError("a seed is required")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if not 2 <= self.k <= self.n:
            raise ConfigError("need 2 <= k <= n")
        if not 0 < self.chi < 1:
            raise ConfigError("chi must lie in (0, 1)")
        if self.reps < 1:
            raise ConfigError("reps must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.start not in ("ncycle", "identity", "mu"):
            raise ConfigError("start must be ncycle, identity or mu")
        if self.t_cap < 0:
            raise ConfigError("t_cap must be nonnegative")
        if self.t_grid:
            parse_grid(self.t_grid, self.n, self.k)

    def comment(self) -> str:
        fields = " ".join(f"{k}={v}" for k, v in asdict(self).items() if k != "out")
        return f"kcycles {__version__} {fields}"


def parse_grid(spec: str, n: int, k: int) -> np.ndarray:
    """``a:b:m`` for m evenly spaced points, or a comma list.

    A value may end in ``tmix`` to mean a multiple of n log n / k.
    """
    def value(tok: str) -> float:
        tok = tok.strip()
        if tok.endswith("tmix"):
            head = tok[:-4].rstrip("*") or "1"
            return float(head) * t_mix(n, k)
        return float(tok)

    try:
        if ":" in spec:
            a, b, m = spec.split(":")
            grid = np.linspace(value(a), value(b), int(m))
        else:
            grid = np.array([value(t) for t in spec.split(",") if t.strip()])
    except ValueError as exc:
        raise ConfigError(f"bad time grid {spec!r}: {exc}") from None
    if grid.size == 0 or np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise ConfigError("time grid must be nonempty, sorted and nonnegative")
    return grid


def read_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    if str(s).lower() in ("1", "true", "yes", "on"):
        return True
    if str(s).lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


_TYPES = {"n": int, "k": int, "chi": float, "reps": int, "seed": int, "threads": int,
          "ref_reps": int, "mu_hat": float, "force_match_small": _bool, "t_cap": float,
          "c": float, "t_grid": str, "out": str, "start": str, "experiment": str}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kcycles", description="Random k-cycle walk experiments.")
    p.add_argument("--config", help="key=value settings file")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--chi", type=float)
    p.add_argument("--t-grid", dest="t_grid", help="a:b:m or comma list; values may use 'tmix'")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (CSV)")
    p.add_argument("--threads", type=int)
    p.add_argument("--ref-reps", dest="ref_reps", type=int, help="mix-profile: reference draws")
    p.add_argument("--start", help="coloring: ncycle, identity or mu")
    p.add_argument("--mu-hat", dest="mu_hat", type=float, help="coloring: ghost decay rate")
    p.add_argument("--force-match-small", dest="force_match_small", help="coupling: true/false")
    p.add_argument("--t-cap", dest="t_cap", type=float, help="coupling: time cap")
    p.add_argument("--c", type=float, help="coupling: start at t_mix + c n")
    return p


def config_from_args(argv: Optional[Sequence[str]] = None) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    raw = read_config_file(args.config) if args.config else {}
    for key, val in vars(args).items():
        if key != "config" and val is not None:
            raw[key] = val
    unknown = set(raw) - set(_TYPES)
    if unknown:
        raise ConfigError(f"unknown settings: {sorted(unknown)}")
    if "experiment" not in raw:
        raise ConfigError("--experiment is required")
    try:
        cfg = ExperimentConfig(**{k: _TYPES[k](v) for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


# experiments ---------------------------------------------------------------

def _out(cfg: ExperimentConfig, default: str) -> str:
    return cfg.out or default


def run_mix_profile(cfg: ExperimentConfig) -> int:
    grid = parse_grid(cfg.t_grid or "0:2tmix:41", cfg.n, cfg.k)
    if grid[-1] > 2 * t_mix(cfg.n, cfg.k) + 1e-9:
        raise ConfigError("mix-profile grid must stay within 2 t_mix")
    rng = np.random.default_rng(cfg.seed)
    prof = mixing_profile(cfg.n, cfg.k, grid, cfg.reps, rng, cfg.ref_reps or None, cfg.seed)
    prof.to_csv(_out(cfg, "mix_profile.csv"), cfg.comment())
    cr = crossing_time(prof)
    print(f"t_1/2 / t_mix = {cr.t_hat / t_mix(cfg.n, cfg.k):.4f} "
          f"[{cr.lo / t_mix(cfg.n, cfg.k):.4f}, {cr.hi / t_mix(cfg.n, cfg.k):.4f}]")
    return EXIT_OK


def run_exact_tv(cfg: ExperimentConfig) -> int:
    if cfg.n > MAX_N or cfg.k > MAX_K:
        raise SizeError(f"exact chain limited to n <= {MAX_N}, k <= {MAX_K}")
    grid = parse_grid(cfg.t_grid or "0:2tmix:41", cfg.n, cfg.k)
    rows = tv_curve_exact(cfg.n, cfg.k, grid)
    write_tv_csv(_out(cfg, "exact_tv.csv"), rows, cfg.comment())
    return EXIT_OK


def run_coloring(cfg: ExperimentConfig) -> int:
    grid = parse_grid(cfg.t_grid or "0:1tmix:11", cfg.n, cfg.k)
    obs = run_colored(cfg.n, cfg.k, cfg.chi, grid, np.random.default_rng(cfg.seed),
                      start=cfg.start, mu_hat=cfg.mu_hat)
    obs.to_csv(_out(cfg, "coloring.csv"), cfg.comment())
    return EXIT_OK


def _coupling_replica(args) -> tuple:
    idx, seed, n, k, c, chi, force, t_cap = args
    rng = replica_stream(seed, idx)
    pair = warm_coupled_start(n, k, rng, c=c, chi=chi, force_match_small=force)
    run = coupling_time(pair, k, rng, t_cap)
    v = run.violations
    return (idx, f"{run.T:.12g}", int(run.timeout), v["phi"], v["L_increase"], v["U_halving"],
            v["repetition"])


def run_coupling(cfg: ExperimentConfig) -> int:
    t_cap = cfg.t_cap or 10 * cfg.n
    jobs = [(r, cfg.seed, cfg.n, cfg.k, cfg.c, cfg.chi, cfg.force_match_small, t_cap)
            for r in range(cfg.reps)]
    rows = map_replicas(_coupling_replica, jobs, cfg.threads)
    write_runs_csv(_out(cfg, "coupling.csv"), rows, cfg.comment())
    print(f"small cutoff K = {small_cutoff(cfg.n, cfg.chi)}; "
          f"timeouts {sum(r[2] for r in rows)}/{len(rows)}")
    return EXIT_OK


def run_hypergraph(cfg: ExperimentConfig) -> int:
    grid = parse_grid(cfg.t_grid or "0:2tmix:41", cfg.n, cfg.k)
    prof = connectivity_profile(cfg.n, cfg.k, grid, cfg.reps, np.random.default_rng(cfg.seed))
    prof.to_csv(_out(cfg, "hypergraph.csv"), cfg.comment())
    return EXIT_OK


# self-test -----------------------------------------------------------------

def _suite_phi() -> tuple:
    failures, cases = phi_bijection_failures(32, phi_map)
    return failures == 0, f"{cases - failures}/{cases} (a, b, n) cases bijective"


def _suite_hypertrees() -> tuple:
    checked = bad = 0
    for k in range(2, 8):
        h = 0
        while (k - 1) * h + 1 <= 7:
            checked += 1
            bad += hypertree_count_formula(k, h) != hypertree_count_bruteforce(k, h)
            h += 1
    return bad == 0, f"{checked - bad}/{checked} (k, h) counts match enumeration"


def _suite_group_oracle() -> tuple:
    worst = 0.0
    for k in (2, 3):
        t = 0.7 * t_mix(6, k)
        chain = tv_curve_exact(6, k, [t])[0][1]
        worst = max(worst, abs(chain - full_group_oracle(6, k, t).tv_to_mu()))
    return worst <= 1e-10, f"n=6 chain vs whole group: max error {worst:.2e}"


def _suite_exact_zero() -> tuple:
    d = tv_curve_exact(5, 2, [0.0])[0][1]
    want = float(1 - class_weight((1,) * 5, 5, 2))
    return math.isclose(d, want, rel_tol=0, abs_tol=1e-15), f"d(0) at n=5 = {d:.12f}"


SUITES = {"phi_bijection": _suite_phi, "hypertree_formula": _suite_hypertrees,
          "group_oracle": _suite_group_oracle, "exact_tv_zero": _suite_exact_zero}


def selftest(out=None) -> bool:
    out = out or sys.stdout
    ok = True
    for name, suite in SUITES.items():
        passed, msg = suite()
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {msg}", file=out)
    return ok


RUNNERS = {"mix-profile": run_mix_profile, "exact-tv": run_exact_tv, "coloring": run_coloring,
           "coupling": run_coupling, "hypergraph": run_hypergraph}


def run(cfg: ExperimentConfig) -> int:
    try:
        cfg.validate()
        if cfg.experiment == "selftest":
            return EXIT_OK if selftest() else EXIT_SUITE
        return RUNNERS[cfg.experiment](cfg)
    except SizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
