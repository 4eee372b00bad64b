"""Post-syndrome error model on a ring of ``N`` sites.

Each potential error is a half-open arc ``[start, start + length)`` (mod N)
switched on independently.  Propagated anyon paths and singleton errors
differ only in their length (singletons are arcs of length 1) and in their
activation probability.  Anyons live on the boundaries between sites:
boundary ``b`` separates site ``b - 1`` from site ``b``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .rng import trial_generator

MAX_ENUMERATION_CHOICES = 20


@dataclass(frozen=True)
class PathEnsemble:
    ring_length: int
    paths: tuple  # of (start, length)
    path_prob: float
    singleton_sites: tuple = ()
    singleton_prob: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple((int(s), int(d)) for s, d in self.paths))
        object.__setattr__(self, "singleton_sites", tuple(int(s) for s in self.singleton_sites))
        N = self.ring_length
        if N < 2:
            raise ValueError("ring needs at least 2 sites")
        for prob in (self.path_prob, self.singleton_prob):
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"probability {prob} outside [0, 1]")
        for s, d in self.paths:
            if not 0 <= s < N:
                raise ValueError(f"path start {s} outside ring")
            if not 1 <= d < N:
                raise ValueError(f"arc length {d} must lie in [1, N)")
        for s in self.singleton_sites:
            if not 0 <= s < N:
                raise ValueError(f"singleton site {s} outside ring")

    @property
    def num_choices(self) -> int:
        return len(self.paths) + len(self.singleton_sites)

    def arcs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Starts, lengths and activation probabilities, paths first."""
        starts = np.array([s for s, _ in self.paths] + list(self.singleton_sites), dtype=np.int64)
        lengths = np.array([d for _, d in self.paths] + [1] * len(self.singleton_sites), dtype=np.int64)
        probs = np.array([self.path_prob] * len(self.paths)
                         + [self.singleton_prob] * len(self.singleton_sites))
        return starts, lengths, probs

    def to_json(self) -> str:
        return json.dumps({
            "ring_length": self.ring_length,
            "paths": [{"start": s, "len": d} for s, d in self.paths],
            "p_path": self.path_prob,
            "singletons": list(self.singleton_sites),
            "p_single": self.singleton_prob,
        })

    @classmethod
    def from_json(cls, text: str) -> "PathEnsemble":
        data = json.loads(text)
        return cls(
            ring_length=data["ring_length"],
            paths=[(p["start"], p["len"]) for p in data["paths"]],
            path_prob=data["p_path"],
            singleton_sites=data.get("singletons", []),
            singleton_prob=data.get("p_single", 0.0),
        )


@dataclass(frozen=True, eq=False)
class RingSample:
    activated_paths: np.ndarray
    activated_singletons: np.ndarray
    coverage_parity: np.ndarray
    anyons: tuple

    @property
    def ring_length(self) -> int:
        return self.coverage_parity.shape[0]

    @property
    def odd_sites(self) -> int:
        return int(np.count_nonzero(self.coverage_parity))


def arc_indicator(N: int, start: int, length: int) -> np.ndarray:
    out = np.zeros(N, dtype=np.uint8)
    out[(start + np.arange(length)) % N] = 1
    return out


def coverage_from_arcs(N: int, starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Per-site parity of the number of arcs covering each site."""
    toggles = np.zeros(N + 1, dtype=np.int64)
    starts = np.asarray(starts, dtype=np.int64)
    ends = starts + np.asarray(lengths, dtype=np.int64)
    wraps = ends > N
    np.add.at(toggles, starts, 1)
    np.add.at(toggles, np.minimum(ends, N), -1)
    # wrapped arcs re-enter at site 0
    np.add.at(toggles, np.zeros(int(wraps.sum()), dtype=np.int64), 1)
    np.add.at(toggles, ends[wraps] - N, -1)
    return (np.cumsum(toggles[:N]) % 2).astype(np.uint8)


def boundaries(parity: np.ndarray) -> tuple:
    """Boundary indices ``b`` where site ``b-1`` and site ``b`` differ."""
    return tuple(int(b) for b in np.nonzero(parity != np.roll(parity, 1))[0])


def build_sample(ens: PathEnsemble, activation: np.ndarray) -> RingSample:
    starts, lengths, _ = ens.arcs()
    activation = np.asarray(activation, dtype=bool)
    parity = coverage_from_arcs(ens.ring_length, starts[activation], lengths[activation])
    k = len(ens.paths)
    act = activation.astype(np.uint8)
    for arr in (act, parity):
        arr.setflags(write=False)
    return RingSample(act[:k], act[k:], parity, boundaries(parity))


def sample(ens: PathEnsemble, master_seed: int, trial_index: int, point_index: int = 0) -> RingSample:
    """One realization, fully determined by ``(master_seed, point_index, trial_index)``."""
    _, _, probs = ens.arcs()
    u = trial_generator(master_seed, trial_index, point_index).random(probs.shape[0])
    return build_sample(ens, u < probs)


def winding_parity(s: RingSample, cut: int = 0) -> int:
    """Parity of the activated arcs running through site ``cut``."""
    return int(s.coverage_parity[cut % s.ring_length])


def iter_distribution(ens: PathEnsemble) -> Iterator[tuple[RingSample, float]]:
    m = ens.num_choices
    if m > MAX_ENUMERATION_CHOICES:
        raise ValueError(f"{m} binary choices exceeds enumeration cap {MAX_ENUMERATION_CHOICES}")
    _, _, probs = ens.arcs()
    for bits in itertools.product((0, 1), repeat=m):
        act = np.array(bits, dtype=bool)
        prob = float(np.prod(np.where(act, probs, 1.0 - probs)))
        yield build_sample(ens, act), prob


def enumerate_distribution(ens: PathEnsemble) -> list[tuple[RingSample, float]]:
    """Every activation pattern with its product-of-Bernoulli probability."""
    return list(iter_distribution(ens))


def uniform_ensemble(N: int, length: int, p: float, starts: Sequence[int] | None = None,
                     singleton_prob: float | None = None) -> PathEnsemble:
    """Arcs of a common length at ``starts`` (default every site), optional singletons there too."""
    starts = list(range(N)) if starts is None else list(starts)
    singles = starts if singleton_prob is not None else []
    return PathEnsemble(N, [(s, length) for s in starts], p, singles, singleton_prob or 0.0)
