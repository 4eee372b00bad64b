"""Binary symplectic Pauli algebra and the periodic toric code.

A :class:`PauliString` on ``n`` qubits is stored as two bit vectors and a
phase exponent, representing ``i**phase * sigma(x_0, z_0) ⊗ ... ⊗
sigma(x_{n-1}, z_{n-1})`` with ``sigma(1, 1) = Y``.  Hermitian strings
therefore carry ``phase ∈ {0, 2}``.

Toric lattice indexing (side ``n``, periodic):

* vertex ``(r, c)`` -> ``r * n + c``; face ``(r, c)`` has corner ``(r, c)``
  at its top-left and shares the same index.
* horizontal edge ``(r, c)`` joins vertex ``(r, c)`` to ``(r, c + 1)`` and
  has index ``r * n + c``.
* vertical edge ``(r, c)`` joins vertex ``(r, c)`` to ``(r + 1, c)`` and
  has index ``n * n + r * n + c``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

_LABEL_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}


def _bits(values, n=None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.uint8) & 1
    if arr.ndim != 1:
        raise ValueError("bit vectors must be one-dimensional")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"expected {n} bits, got {arr.shape[0]}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PauliString:
    x: np.ndarray
    z: np.ndarray
    phase: int = 0

    def __post_init__(self):
        x = _bits(self.x)
        z = _bits(self.z)
        if x.shape != z.shape:
            raise ValueError("x and z parts must have equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "phase", int(self.phase) % 4)

    # construction -----------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(np.zeros(n, np.uint8), np.zeros(n, np.uint8))

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse labels such as ``"XIZY"`` or ``"-iXZ"`` (qubit 0 first)."""
        phase = 0
        body = label
        for prefix, ph in (("-i", 3), ("+i", 1), ("i", 1), ("-", 2), ("+", 0)):
            if body.startswith(prefix):
                phase, body = ph, body[len(prefix):]
                break
        try:
            pairs = [_LABEL_BITS[ch] for ch in body]
        except KeyError as exc:
            raise ValueError(f"bad Pauli label {label!r}") from exc
        x = [a for a, _ in pairs]
        z = [b for _, b in pairs]
        return cls(x, z, phase)

    @classmethod
    def single(cls, n: int, kind: str, qubits: Iterable[int]) -> "PauliString":
        """``kind`` ("X", "Y" or "Z") on every listed qubit, identity elsewhere."""
        bx, bz = _LABEL_BITS[kind]
        x = np.zeros(n, np.uint8)
        z = np.zeros(n, np.uint8)
        idx = np.fromiter(qubits, dtype=np.int64)
        x[idx] ^= bx
        z[idx] ^= bz
        return cls(x, z)

    # algebra ----------------------------------------------------------
    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.x | self.z))

    @property
    def is_hermitian(self) -> bool:
        return self.phase in (0, 2)

    def _check(self, other: "PauliString"):
        if self.n != other.n:
            raise ValueError(f"length mismatch: {self.n} vs {other.n}")

    def __mul__(self, other: "PauliString") -> "PauliString":
        self._check(other)
        x3 = self.x ^ other.x
        z3 = self.z ^ other.z
        # i^{xz} X^x Z^z form; reordering Z1 X2 contributes (-1)^{z1.x2}
        ph = (
            self.phase + other.phase
            + int(np.sum(self.x & self.z)) + int(np.sum(other.x & other.z))
            - int(np.sum(x3 & z3))
            + 2 * int(np.sum(self.z & other.x))
        )
        return PauliString(x3, z3, ph)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliString):
            return NotImplemented
        return (self.phase == other.phase and np.array_equal(self.x, other.x)
                and np.array_equal(self.z, other.z))

    def __hash__(self):
        return hash((self.x.tobytes(), self.z.tobytes(), self.phase))

    def equal_up_to_phase(self, other: "PauliString") -> bool:
        return np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)

    def commutes(self, other: "PauliString") -> bool:
        return commutes(self, other)

    def label(self) -> str:
        chars = "IXZY"
        body = "".join(chars[int(a) + 2 * int(b)] for a, b in zip(self.x, self.z))
        return ("", "i", "-", "-i")[self.phase] + body

    def __repr__(self):
        return f"PauliString({self.label()!r})"

    def symplectic(self) -> np.ndarray:
        """Row ``[x | z]`` of length ``2n``."""
        return np.concatenate([self.x, self.z])

    def to_sparse(self) -> sp.csr_matrix:
        """Sparse ``2^n x 2^n`` matrix; qubit 0 is the most significant bit."""
        n = self.n
        dim = 1 << n
        weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
        xmask = int(np.dot(self.x.astype(np.int64), weights))
        zmask = int(np.dot(self.z.astype(np.int64), weights))
        basis = np.arange(dim, dtype=np.int64)
        # X^x Z^z |b> = (-1)^{z.b} |b ^ x>
        sign = 1 - 2 * (_popcount(basis & zmask) & 1)
        coeff = (1j) ** ((self.phase + int(np.sum(self.x & self.z))) % 4)
        data = coeff * sign.astype(complex)
        return sp.csr_matrix((data, (basis ^ xmask, basis)), shape=(dim, dim))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    count = np.zeros_like(a)
    while np.any(a):
        count += a & 1
        a >>= 1
    return count


def commutes(a: PauliString, b: PauliString) -> bool:
    """True iff the symplectic inner product of ``a`` and ``b`` is even."""
    a._check(b)
    return (int(np.sum(a.x & b.z)) + int(np.sum(a.z & b.x))) % 2 == 0


def gf2_rank(rows) -> int:
    """Rank over GF(2) of a 0/1 matrix, by Gaussian elimination."""
    m = np.array(rows, dtype=np.uint8) & 1
    if m.size == 0:
        return 0
    rank = 0
    n_rows, n_cols = m.shape
    for col in range(n_cols):
        pivots = np.nonzero(m[rank:, col])[0]
        if pivots.size == 0:
            continue
        pivot = rank + pivots[0]
        if pivot != rank:
            m[[rank, pivot]] = m[[pivot, rank]]
        others = np.nonzero(m[:, col])[0]
        others = others[others != rank]
        m[others] ^= m[rank]
        rank += 1
        if rank == n_rows:
            break
    return rank


@dataclass(frozen=True)
class SyndromeSet:
    vertex_anyons: frozenset
    plaquette_anyons: frozenset

    def __post_init__(self):
        object.__setattr__(self, "vertex_anyons", frozenset(self.vertex_anyons))
        object.__setattr__(self, "plaquette_anyons", frozenset(self.plaquette_anyons))

    @property
    def is_empty(self) -> bool:
        return not self.vertex_anyons and not self.plaquette_anyons

    def __xor__(self, other: "SyndromeSet") -> "SyndromeSet":
        return SyndromeSet(self.vertex_anyons ^ other.vertex_anyons,
                           self.plaquette_anyons ^ other.plaquette_anyons)


@dataclass(frozen=True, eq=False)
class ToricLattice:
    n: int
    vertex_stabilizers: tuple
    plaquette_stabilizers: tuple
    logical_ops: dict = field(repr=False)

    @property
    def num_qubits(self) -> int:
        return 2 * self.n * self.n

    # index helpers ----------------------------------------------------
    def vertex(self, r: int, c: int) -> int:
        n = self.n
        return (r % n) * n + (c % n)

    def h_edge(self, r: int, c: int) -> int:
        n = self.n
        return (r % n) * n + (c % n)

    def v_edge(self, r: int, c: int) -> int:
        n = self.n
        return n * n + (r % n) * n + (c % n)

    def edge_endpoints(self, e: int) -> tuple[int, int]:
        n = self.n
        if not 0 <= e < self.num_qubits:
            raise ValueError(f"edge {e} out of range")
        if e < n * n:
            r, c = divmod(e, n)
            return self.vertex(r, c), self.vertex(r, c + 1)
        r, c = divmod(e - n * n, n)
        return self.vertex(r, c), self.vertex(r + 1, c)

    def star_edges(self, v: int) -> list[int]:
        r, c = divmod(v, self.n)
        return [self.h_edge(r, c), self.h_edge(r, c - 1), self.v_edge(r, c), self.v_edge(r - 1, c)]

    def face_edges(self, f: int) -> list[int]:
        r, c = divmod(f, self.n)
        return [self.h_edge(r, c), self.h_edge(r + 1, c), self.v_edge(r, c), self.v_edge(r, c + 1)]

    def stabilizers(self) -> list[PauliString]:
        return list(self.vertex_stabilizers) + list(self.plaquette_stabilizers)

    def hamiltonian(self) -> sp.csr_matrix:
        """Sparse ``-sum A_s - sum B_p``."""
        h = None
        for s in self.stabilizers():
            h = -s.to_sparse() if h is None else h - s.to_sparse()
        return h.tocsr()

    def to_json(self) -> str:
        def rows(ops):
            return [{"x": "".join(map(str, p.x)), "z": "".join(map(str, p.z)), "phase": p.phase}
                    for p in ops]
        return json.dumps({
            "n": self.n,
            "vertex_stabilizers": rows(self.vertex_stabilizers),
            "plaquette_stabilizers": rows(self.plaquette_stabilizers),
            "logical_ops": {k: rows([v])[0] for k, v in self.logical_ops.items()},
        }, indent=1)


def build_toric(n: int) -> ToricLattice:
    if n < 2:
        raise ValueError("toric lattice needs side length n >= 2")
    nq = 2 * n * n
    # build a skeleton for the index helpers, then the operators
    skel = ToricLattice(n, (), (), {})
    stars = tuple(PauliString.single(nq, "X", skel.star_edges(v)) for v in range(n * n))
    plaqs = tuple(PauliString.single(nq, "Z", skel.face_edges(f)) for f in range(n * n))
    logicals = {
        # Z loops on the lattice, X loops on the dual lattice
        "Z1": PauliString.single(nq, "Z", [skel.h_edge(0, c) for c in range(n)]),
        "Z2": PauliString.single(nq, "Z", [skel.v_edge(r, 0) for r in range(n)]),
        "X1": PauliString.single(nq, "X", [skel.h_edge(r, 0) for r in range(n)]),
        "X2": PauliString.single(nq, "X", [skel.v_edge(0, c) for c in range(n)]),
    }
    return ToricLattice(n, stars, plaqs, logicals)


def _check_matrix(ops: Sequence[PauliString]) -> np.ndarray:
    return np.array([p.symplectic() for p in ops], dtype=np.uint8)


def syndrome(lat: ToricLattice, err: PauliString) -> SyndromeSet:
    """Stars and plaquettes anticommuting with ``err``."""
    if err.n != lat.num_qubits:
        raise ValueError(f"error acts on {err.n} qubits, lattice has {lat.num_qubits}")
    # stars are X-type: detect the Z part; plaquettes detect the X part
    star_hits = _check_matrix(lat.vertex_stabilizers)[:, : err.n] @ err.z.astype(np.int64) % 2
    plaq_hits = _check_matrix(lat.plaquette_stabilizers)[:, err.n:] @ err.x.astype(np.int64) % 2
    return SyndromeSet(np.nonzero(star_hits)[0].tolist(), np.nonzero(plaq_hits)[0].tolist())


@dataclass(frozen=True)
class PropagationOperator:
    """``pauli * (1 - A_p A_q) / 2``: swaps a vertex anyon between ``p`` and ``q``."""

    pauli: PauliString
    p: int
    q: int

    def to_sparse(self, lat: ToricLattice) -> sp.csr_matrix:
        ap = lat.vertex_stabilizers[self.p].to_sparse()
        aq = lat.vertex_stabilizers[self.q].to_sparse()
        eye = sp.identity(ap.shape[0], dtype=complex, format="csr")
        return (self.pauli.to_sparse() @ ((eye - ap @ aq) * 0.5)).tocsr()


def propagation_operator(lat: ToricLattice, p: int, q: int, path: Sequence[int]) -> PropagationOperator:
    """Anyon hopping term along an edge path from vertex ``p`` to vertex ``q``."""
    if p == q:
        raise ValueError("p and q must differ")
    if not path:
        raise ValueError("empty path")
    if len(set(path)) != len(path):
        raise ValueError("path repeats an edge")
    degree: dict[int, int] = {}
    for e in path:
        for v in lat.edge_endpoints(e):
            degree[v] = degree.get(v, 0) + 1
    odd = {v for v, d in degree.items() if d % 2}
    if odd != {p, q}:
        raise ValueError(f"path does not connect {p} and {q}")
    pauli = PauliString.single(lat.num_qubits, "Z", path)
    return PropagationOperator(pauli, p, q)
