"""Anyon pairing on a ring: minimum total distance (L1) and minimum furthest distance (L-inf).

For sorted anyons ``a_0 < ... < a_{k-1}`` the gaps ``g_i = a_{i+1} - a_i``
(with ``g_{k-1}`` wrapping round) split into two classes.  Class A pairs
``(a_0, a_1), (a_2, a_3), ...`` and uses the even gaps; class B pairs
``(a_1, a_2), ..., (a_{k-1}, a_0)`` and uses the odd gaps.  Every perfect
matching is homologous to one of the two, so both decoders only compare
these classes.  Ties go to class A.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ring import RingSample, coverage_from_arcs


@dataclass(frozen=True, eq=False)
class Matching:
    pairs: np.ndarray  # shape (k/2, 2): (anyon_a, anyon_b)
    correction_arcs: np.ndarray  # shape (k/2, 2): (start, length), increasing direction
    total_distance: int
    max_distance: int

    def to_json(self) -> str:
        return json.dumps({
            "pairs": self.pairs.tolist(),
            "correction_arcs": [{"start": int(s), "len": int(d)} for s, d in self.correction_arcs],
            "total_distance": self.total_distance,
            "max_distance": self.max_distance,
        })


_EMPTY = Matching(np.zeros((0, 2), np.int64), np.zeros((0, 2), np.int64), 0, 0)


def ring_distance(a: int, b: int, N: int) -> int:
    d = (b - a) % N
    return min(d, N - d)


def _validate(anyons: Sequence[int], N: int) -> np.ndarray:
    a = np.sort(np.asarray(anyons, dtype=np.int64))
    if a.size % 2:
        raise ValueError(f"odd number of anyons ({a.size})")
    if a.size and (a[0] < 0 or a[-1] >= N):
        raise ValueError("anyon outside ring")
    if np.any(np.diff(a) == 0):
        raise ValueError("duplicate anyon")
    return a


class _Classes:
    """Pair distances of both alternating classes, materialised on demand."""

    def __init__(self, anyons, N):
        a = _validate(anyons, N)
        self.a, self.N = a, N
        gaps = (np.roll(a, -1) - a) % N
        self.gaps = gaps
        self.dist = np.minimum(gaps, N - gaps)

    def cost(self, offset):
        d = self.dist[offset::2]
        return int(d.sum()), int(d.max(initial=0))

    def matching(self, offset) -> Matching:
        a, N = self.a, self.N
        if a.size == 0:
            return _EMPTY
        i = np.arange(offset, a.size, 2)
        j = (i + 1) % a.size
        g = self.gaps[i]
        forward = g <= N - g
        starts = np.where(forward, a[i], a[j])
        lengths = np.where(forward, g, N - g)
        d = self.dist[i]
        return Matching(np.stack([a[i], a[j]], axis=1), np.stack([starts, lengths], axis=1),
                        int(d.sum()), int(d.max(initial=0)))


def decode_l1(anyons: Sequence[int], N: int) -> Matching:
    """Minimum total-distance perfect matching of anyons on a ring of length ``N``."""
    c = _Classes(anyons, N)
    return c.matching(0 if c.cost(0)[0] <= c.cost(1)[0] else 1)


def decode_linf(anyons: Sequence[int], N: int) -> Matching:
    """Perfect matching minimising the largest pair distance."""
    c = _Classes(anyons, N)
    return c.matching(0 if c.cost(0)[1] <= c.cost(1)[1] else 1)


def correction_coverage(m: Matching, N: int) -> np.ndarray:
    return coverage_from_arcs(N, m.correction_arcs[:, 0], m.correction_arcs[:, 1])


def verdict(s: RingSample, m: Matching, cut: int = 0) -> bool:
    """True when error plus correction winds an even number of times round the ring."""
    N = s.ring_length
    if not np.array_equal(np.sort(m.pairs, axis=None), np.asarray(s.anyons, dtype=np.int64)):
        raise ValueError("matching does not pair the sample's anyons")
    combined = s.coverage_parity ^ correction_coverage(m, N)
    if np.any(combined != combined[0]):
        raise ValueError("correction arcs do not close the error chain")
    return int(combined[cut % N]) == 0


def l1_success_shortcut(s: RingSample) -> bool:
    """L1 succeeds iff at most half the ring is covered an odd number of times."""
    N = s.ring_length
    odd = s.odd_sites
    if 2 * odd == N:
        return verdict(s, decode_l1(s.anyons, N))
    return 2 * odd < N


def perfect_matchings(items: Sequence[int]):
    """All perfect matchings of an even-sized list (brute-force oracle)."""
    items = list(items)
    if not items:
        yield []
        return
    first = items[0]
    for idx in range(1, len(items)):
        rest = items[1:idx] + items[idx + 1:]
        for tail in perfect_matchings(rest):
            yield [(first, items[idx])] + tail


def brute_force_costs(anyons: Sequence[int], N: int) -> tuple[int, int]:
    """(min total distance, min max distance) over all perfect matchings."""
    best_sum = best_max = None
    for m in perfect_matchings(list(anyons)):
        d = [ring_distance(a, b, N) for a, b in m]
        tot, mx = sum(d), max(d, default=0)
        best_sum = tot if best_sum is None else min(best_sum, tot)
        best_max = mx if best_max is None else min(best_max, mx)
    return best_sum or 0, best_max or 0


__all__ = [
    "Matching", "ring_distance", "decode_l1", "decode_linf", "verdict",
    "l1_success_shortcut", "correction_coverage", "perfect_matchings", "brute_force_costs",
]
