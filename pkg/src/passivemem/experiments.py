"""Monte Carlo harness for the ring, row-loop and compass failure statistics.

Trials are split into fixed-size blocks.  Each trial draws from its own
counter-based stream, and blocks reduce to integer counts, so results do
not depend on the number of workers or on completion order.
"""

from __future__ import annotations

import functools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from . import analytics
from .decoders import decode_l1, decode_linf, verdict
from .ring import PathEnsemble, RingSample, boundaries, build_sample, enumerate_distribution, uniform_ensemble
from .rng import uniform_block

BLOCK_TRIALS = 2048
THREADS_ENV = "PASSIVEMEM_THREADS"
CSV_HEADER = "experiment,N,p,D,S,trials,failures,rate,wilson_lo,wilson_hi,seed"
KINDS = ("fig3", "linf", "rowloop", "compass")
DECODERS = {"l1": decode_l1, "linf": decode_linf}


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    samples: int = 10_000
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment {self.kind!r}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class TrialStatistics:
    experiment: str
    trials: int
    failures: int
    N: int | None = None
    p: float | None = None
    D: int | None = None
    S: int | None = None
    seed: int = 0
    wilson_lo: float = field(init=False)
    wilson_hi: float = field(init=False)

    def __post_init__(self):
        if not 0 <= self.failures <= self.trials or self.trials < 1:
            raise ValueError("need 0 <= failures <= trials and trials >= 1")
        lo, hi = proportion_confint(self.failures, self.trials, alpha=0.05, method="wilson")
        # clamp round-off so lo <= rate <= hi holds exactly
        object.__setattr__(self, "wilson_lo", float(min(lo, self.rate)))
        object.__setattr__(self, "wilson_hi", float(max(hi, self.rate)))

    @property
    def rate(self) -> float:
        return self.failures / self.trials

    def sigma(self, expected: float | None = None) -> float:
        """Binomial standard error at ``expected`` (default: the observed rate)."""
        q = self.rate if expected is None else expected
        return math.sqrt(max(q * (1 - q), 0.0) / self.trials)

    def within(self, expected: float, k: float = 3.0) -> bool:
        return abs(self.rate - expected) <= k * self.sigma(expected) + 1e-15

    def csv_row(self) -> str:
        cells = [self.experiment, self.N, self.p, self.D, self.S, self.trials, self.failures,
                 self.rate, self.wilson_lo, self.wilson_hi, self.seed]
        return ",".join(_cell(c) for c in cells)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rate"] = self.rate
        return out


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def to_csv(stats: Sequence[TrialStatistics]) -> str:
    return "\n".join([CSV_HEADER] + [s.csv_row() for s in stats]) + "\n"


# -- block harness -------------------------------------------------------

def run_blocks(kernel: Callable[[int, int, range], np.ndarray], seed: int, point: int, trials: int,
               threads: int = 1, block: int = BLOCK_TRIALS) -> np.ndarray:
    """Sum ``kernel(seed, point, trial_range)`` count vectors over all blocks."""
    ranges = [range(a, min(a + block, trials)) for a in range(0, trials, block)]
    if threads <= 1 or len(ranges) == 1:
        parts = [kernel(seed, point, r) for r in ranges]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(kernel, [seed] * len(ranges), [point] * len(ranges), ranges))
    return np.sum(np.stack(parts), axis=0, dtype=np.int64)


def batch_coverage(N: int, starts: np.ndarray, lengths: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Coverage parity for a batch of activation rows, shape ``(trials, N)``."""
    rows, idx = np.nonzero(active)
    s = starts[idx]
    e = s + lengths[idx]
    toggles = np.zeros((active.shape[0], N + 1), dtype=np.uint8)
    np.add.at(toggles, (rows, s), 1)
    np.add.at(toggles, (rows, np.where(e > N, e - N, e)), 1)
    # wrapped arcs also cover site 0 onwards
    wraps = np.bincount(rows[e > N], minlength=active.shape[0]).astype(np.uint8)
    return (np.cumsum(toggles[:, :N], axis=1, dtype=np.uint8) + wraps[:, None]) & 1


def _row_sample(parity: np.ndarray) -> RingSample:
    empty = np.zeros(0, dtype=np.uint8)
    return RingSample(empty, empty, parity, boundaries(parity))


def decode_fails(parity: np.ndarray, decoder: str) -> bool:
    s = _row_sample(parity)
    return not verdict(s, DECODERS[decoder](s.anyons, parity.shape[0]))


@functools.lru_cache(maxsize=1 << 16)
def _cached_fails(key: bytes, decoder: str) -> bool:
    # the verdict depends only on the coverage pattern, so it is shared across ensembles
    return decode_fails(np.frombuffer(key, dtype=np.uint8), decoder)


def _ensemble_kernel(ens: PathEnsemble, decoder: str, shortcut: bool, seed: int, point: int,
                     trials: range) -> np.ndarray:
    starts, lengths, probs = ens.arcs()
    N = ens.ring_length
    active = uniform_block(seed, point, trials, probs.size) < probs
    parity = batch_coverage(N, starts, lengths, active)
    fails = 0
    if shortcut:
        odd = parity.sum(axis=1, dtype=np.int64)
        fails += int(np.count_nonzero(2 * odd > N))
        rows = parity[2 * odd == N]
    else:
        rows = parity
    for row in rows:
        fails += _cached_fails(row.tobytes(), decoder)
    return np.array([fails], dtype=np.int64)


def simulate_ensemble(ens: PathEnsemble, decoder: str, trials: int, seed: int, point: int = 0,
                      threads: int = 1) -> int:
    """Number of decoder failures in ``trials`` independent realizations.

    The L1 decoder uses the odd-coverage count directly (fails iff more
    than half the ring is covered an odd number of times) and only decodes
    the exact-half ties.
    """
    if decoder not in DECODERS:
        raise ValueError(f"unknown decoder {decoder!r}")
    kernel = partial(_ensemble_kernel, ens, decoder, decoder == "l1")
    return int(run_blocks(kernel, seed, point, trials, threads)[0])


def exact_failure_probability(ens: PathEnsemble, decoder: str) -> float:
    """Failure probability summed over every activation pattern."""
    dec = DECODERS[decoder]
    total = 0.0
    for s, prob in enumerate_distribution(ens):
        if not verdict(s, dec(s.anyons, ens.ring_length)):
            total += prob
    return total


# -- ring experiments ----------------------------------------------------

def fig3_length(N: int) -> int:
    return math.ceil(20 * math.log(N))


def fig3_ensemble(N: int, p: float, D: int | None = None, include_singletons: bool = False) -> PathEnsemble:
    D = fig3_length(N) if D is None else D
    if D >= N:
        raise ValueError(f"arc length D={D} must be below N={N}")
    return uniform_ensemble(N, D, p, singleton_prob=p if include_singletons else None)


def fig3_run(cfg: ExperimentConfig) -> list[TrialStatistics]:
    prm = cfg.params
    p = float(prm.get("p", 0.1))
    decoder = prm.get("decoder", "l1")
    out = []
    for point, N in enumerate(prm.get("N", [128, 256, 512, 1024])):
        D = fig3_length(N) if prm.get("D") is None else int(prm["D"])
        ens = fig3_ensemble(N, p, D, bool(prm.get("include_singletons", False)))
        fails = simulate_ensemble(ens, decoder, cfg.samples, cfg.seed, point, cfg.threads)
        out.append(TrialStatistics("fig3", cfg.samples, fails, N, p, D, None, cfg.seed))
    return out


def linf_ensemble(N: int, p: float, S: int) -> PathEnsemble:
    """Pairs created every 4 sites; the right anyon travels ``4S+2``; a second round may toggle the start."""
    length = 4 * S + 2
    if length >= N:
        raise ValueError(f"trajectory 4S+2={length} must be below N={N}")
    starts = range(0, N - N % 4, 4)
    return uniform_ensemble(N, length, p, starts=starts, singleton_prob=p)


def linf_run(cfg: ExperimentConfig, check: bool = True) -> list[TrialStatistics]:
    prm = cfg.params
    p = float(prm.get("p", 0.1))
    out = []
    for point, N in enumerate(prm.get("N", [1000, 10000])):
        if p == 0:
            S, D, lower = 0, 0, 0.0
            ens = PathEnsemble(N, [], 0.0)
        else:
            par = analytics.linf_construction_params(p, N)
            S, D, lower = par.S, par.D, par.p_logic_lower
            ens = linf_ensemble(N, p, S)
        fails = simulate_ensemble(ens, prm.get("decoder", "linf"), cfg.samples, cfg.seed, point, cfg.threads)
        st = TrialStatistics("linf", cfg.samples, fails, N, p, D, S, cfg.seed)
        if check and p > 0 and st.rate < lower - 3 * st.sigma(lower):
            raise AssertionError(f"N={N}: rate {st.rate:.4f} below bound {lower:.4f} - 3 sigma")
        out.append(st)
    return out


# -- row loop ------------------------------------------------------------

def row_ensemble(N: int, p: float, s: int) -> PathEnsemble:
    """Path around the ring from ``s`` to its antipode, plus a possible extra error at ``s``."""
    a = (s + N // 2) % N
    return PathEnsemble(N, [((a + 1) % N, N - 1)], p, [s], p)


def row_table(N: int, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Per ``(outcome, s)``: whether the syndrome is ambiguous, and failure for each coin value.

    ``outcome = 2 * path_active + singleton_active``.  Corrections are the
    L1 matching, optionally followed by a full loop; the decoder keeps the
    more likely of the two logical classes given all ``(outcome, s)``
    explanations of the syndrome, and tosses a coin when they tie.
    """
    if N < 4 or N % 2:
        raise ValueError("row loop needs an even ring length >= 4")
    weight = {0: (1 - p) ** 2, 1: p * (1 - p), 2: p * (1 - p), 3: p * p}
    events = {}
    for s in range(N):
        ens = row_ensemble(N, p, s)
        for outcome in range(4):
            smp = build_sample(ens, np.array([outcome >> 1, outcome & 1], dtype=bool))
            ok = verdict(smp, decode_l1(smp.anyons, N))
            events[(outcome, s)] = (smp.anyons, ok)
    # posterior weight of "the L1 correction is right" per syndrome
    mass: dict[tuple, np.ndarray] = {}
    for (outcome, s), (anyons, ok) in events.items():
        mass.setdefault(anyons, np.zeros(2))[int(ok)] += weight[outcome] / N
    ambiguous = np.zeros((4, N), dtype=bool)
    fail = np.zeros((4, N, 2), dtype=bool)
    for (outcome, s), (anyons, ok) in events.items():
        m = mass[anyons]
        tie = math.isclose(m[0], m[1], rel_tol=1e-12) and m[0] > 0
        ambiguous[outcome, s] = tie
        if tie:
            # coin 0 keeps the L1 correction, coin 1 adds the loop
            fail[outcome, s] = [not ok, ok]
        else:
            keep = m[1] > m[0]
            fail[outcome, s] = not ok if keep else ok
    return ambiguous, fail


def _row_kernel(N: int, p: float, rows: int, ambiguous, fail, seed: int, point: int,
                trials: range) -> np.ndarray:
    u = uniform_block(seed, point, trials, 4 * rows).reshape(len(trials), rows, 4)
    s = np.minimum((u[..., 0] * N).astype(np.int64), N - 1)
    outcome = 2 * (u[..., 1] < p) + (u[..., 2] < p)
    coin = (u[..., 3] < 0.5).astype(np.int64)
    amb = ambiguous[outcome, s]
    flips = fail[outcome, s, coin]
    dephased = np.any(amb, axis=1)
    logical = np.bitwise_xor.reduce(flips, axis=1)
    return np.array([np.count_nonzero(dephased), np.count_nonzero(logical)], dtype=np.int64)


@dataclass(frozen=True)
class RowLoopResult:
    dephasing: TrialStatistics
    logical: TrialStatistics

    @property
    def no_dephasing(self) -> float:
        return 1.0 - self.dephasing.rate

    def expected(self) -> tuple[float, float]:
        """``(1 - 2p + 2p^2)^i`` and ``(1 - (1 - 2q)^i) / 2`` with ``q = p(1-p)``."""
        p, i = self.dephasing.p, self.dephasing.D
        q = p * (1 - p)
        return (1 - 2 * p + 2 * p * p) ** i, 0.5 * (1 - (1 - 2 * q) ** i)


def row_loop_run(p: float, rows: int, samples: int, seed: int, N: int = 16, threads: int = 1,
                 point: int = 0) -> RowLoopResult:
    """Independent row-loop perturbations on ``rows`` rows of an ``N``-site ring.

    ``dephasing`` counts trials where at least one row produced an ambiguous
    syndrome; ``logical`` counts trials with an odd number of completed loops.
    The row count is reported in the ``D`` column.
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if rows < 1:
        raise ValueError("rows must be >= 1")
    ambiguous, fail = row_table(N, p)
    kernel = partial(_row_kernel, N, p, rows, ambiguous, fail)
    dep, logic = run_blocks(kernel, seed, point, samples, threads)
    return RowLoopResult(
        TrialStatistics("rowloop_dephase", samples, int(dep), N, p, rows, None, seed),
        TrialStatistics("rowloop_logical", samples, int(logic), N, p, rows, None, seed),
    )


# -- compass model -------------------------------------------------------

def _compass_kernel(n: int, q: float, seed: int, point: int, trials: range) -> np.ndarray:
    sites = n * n
    flips = uniform_block(seed, point, trials, 2 * n * sites).reshape(len(trials), 2, n, sites) < q
    odd = np.count_nonzero(flips, axis=3) & 1
    plane = odd[:, 0] ^ odd[:, 1]
    fails = np.count_nonzero(2 * plane.sum(axis=1) > n)
    return np.array([fails], dtype=np.int64)


def compass_run(n: int, eps: float, samples: int, seed: int, point: int = 0, threads: int = 1) -> TrialStatistics:
    """Majority vote over ``n`` planes after two rounds of per-site flips with probability ``sin^2 eps``.

    ``N`` holds the plane count and ``p`` the per-site flip probability.
    """
    if n < 1 or n % 2 == 0:
        raise ValueError("majority vote needs an odd number of planes")
    q = math.sin(eps) ** 2
    fails = run_blocks(partial(_compass_kernel, n, q), seed, point, samples, threads)[0]
    return TrialStatistics("compass", samples, int(fails), n, q, None, None, seed)


def run(cfg: ExperimentConfig) -> list[TrialStatistics]:
    """Dispatch a config to its experiment and flatten the results."""
    prm = cfg.params
    if cfg.kind == "fig3":
        return fig3_run(cfg)
    if cfg.kind == "linf":
        return linf_run(cfg)
    if cfg.kind == "rowloop":
        out = []
        for point, i in enumerate(prm.get("rows", [1, 10, 50])):
            r = row_loop_run(float(prm.get("p", 0.1)), int(i), cfg.samples, cfg.seed,
                             int(prm.get("ring", 16)), cfg.threads, point)
            out += [r.dephasing, r.logical]
        return out
    out = []
    point = 0
    for n in prm.get("n", [5]):
        for eps in prm.get("eps", [0.1]):
            out.append(compass_run(int(n), float(eps), cfg.samples, cfg.seed, point, cfg.threads))
            point += 1
    return out
