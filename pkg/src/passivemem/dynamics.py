"""Exact small-system Schrödinger evolution.

Time-independent problems are diagonalized densely (sparse Krylov action
above 2**10 dimensions); time-dependent drives are integrated with an
8th-order Dormand-Prince stepper at tight tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from .analytics import depolarizing_channel_apply, gapped_survival_bound, sphere_average_lambda
from .pauli import PauliString

MAX_QUBITS = 12
DENSE_LIMIT = 1 << 10
NORM_TOL = 1e-8


def _as_dense(h):
    return h.toarray() if sp.issparse(h) else np.asarray(h)


def evolve(h, psi: np.ndarray, t: float, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """``exp(-i h t) psi`` for Hermitian ``h`` (dense or sparse)."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape[0] <= dense_limit:
        w, v = np.linalg.eigh(_as_dense(h))
        return v @ (np.exp(-1j * w * t) * (v.conj().T @ psi))
    return scipy.sparse.linalg.expm_multiply(-1j * t * sp.csr_matrix(h), psi)


def _check_norm(psi: np.ndarray, tol: float = NORM_TOL):
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > tol:
        raise AssertionError(f"norm drift {drift:.3e} exceeds {tol:.0e}")


# -- hopping chains ------------------------------------------------------

@dataclass(frozen=True)
class TridiagonalChain:
    couplings: np.ndarray
    onsite: np.ndarray | None = None

    def __post_init__(self):
        j = np.asarray(self.couplings, dtype=float)
        if j.ndim != 1 or j.size < 1 or np.any(j <= 0):
            raise ValueError("couplings must be a non-empty positive sequence")
        object.__setattr__(self, "couplings", j)
        if self.onsite is not None:
            d = np.asarray(self.onsite, dtype=float)
            if d.shape != (j.size + 1,):
                raise ValueError("onsite needs one entry per site")
            object.__setattr__(self, "onsite", d)

    @property
    def sites(self) -> int:
        return self.couplings.size + 1

    @classmethod
    def pst(cls, D: int, scale: float = 1.0) -> "TridiagonalChain":
        """``J_j = scale * sqrt(j (D + 1 - j))``; transfers 0 -> D at ``t = pi / (2 scale)``."""
        j = np.arange(1, D + 1)
        return cls(scale * np.sqrt(j * (D + 1 - j)))

    def hamiltonian(self) -> np.ndarray:
        diag = np.zeros(self.sites) if self.onsite is None else self.onsite
        return np.diag(diag) + np.diag(self.couplings, 1) + np.diag(self.couplings, -1)

    def eig(self):
        diag = np.zeros(self.sites) if self.onsite is None else self.onsite
        return scipy.linalg.eigh_tridiagonal(diag, self.couplings)


def evolve_chain(chain: TridiagonalChain, start: int, t: float | np.ndarray) -> np.ndarray:
    """Amplitudes after time ``t`` starting from site ``start``; rows follow ``t`` if it is an array."""
    if not 0 <= start < chain.sites:
        raise ValueError("start outside chain")
    w, v = chain.eig()
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = (v * v[start]) @ np.exp(-1j * np.outer(w, ts))
    out = out.T
    for row in out:
        _check_norm(row, 1e-10)
    return out[0] if np.ndim(t) == 0 else out


def dicke_ladder_transfer(N: int, eps: float, t: float | None = None) -> np.ndarray:
    """Symmetric-excitation ladder ``|0̄> .. |N̄>`` evolved from ``|0̄>``; default time ``pi / (2 eps)``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if t is None:
        t = math.pi / (2 * eps)
    return evolve_chain(TridiagonalChain.pst(N, eps), 0, t)


def mirror_ladder_hamiltonian(h_sys: np.ndarray, eps: float) -> sp.csr_matrix:
    """``H_S ⊗ 1 - 1 ⊗ H_S^* + eps sum_i X_i ⊗ X_i`` for a system of ``n`` qubits."""
    n = h_sys.shape[0].bit_length() - 1
    eye = sp.identity(1 << n, format="csr")
    h = sp.kron(sp.csr_matrix(h_sys), eye) - sp.kron(eye, sp.csr_matrix(np.conj(h_sys)))
    for i in range(n):
        xi = PauliString.single(n, "X", [i]).to_sparse()
        h = h + eps * sp.kron(xi, xi)
    return h.tocsr()


def dicke_state(n: int, m: int) -> np.ndarray:
    """``|m̄>``: uniform superposition of ``|i>|i>`` over weight-``m`` strings ``i``."""
    dim = 1 << n
    basis = np.arange(dim)
    weights = np.array([bin(b).count("1") for b in basis])
    sel = basis[weights == m]
    out = np.zeros(dim * dim, dtype=complex)
    out[sel * dim + sel] = 1.0
    return out / np.linalg.norm(out)


# -- stabilizer Hamiltonians and drives ----------------------------------

def stabilizer_hamiltonian(stabilizers: Sequence[PauliString], weights=None) -> sp.csr_matrix:
    """``-sum_k w_k S_k``."""
    if not stabilizers:
        raise ValueError("need at least one stabilizer")
    weights = np.ones(len(stabilizers)) if weights is None else np.asarray(weights, dtype=float)
    h = None
    for w, s in zip(weights, stabilizers):
        term = -w * s.to_sparse()
        h = term if h is None else h + term
    return h.tocsr()


def pauli_sum(paulis: Sequence[PauliString]) -> sp.csr_matrix:
    q = None
    for p in paulis:
        q = p.to_sparse() if q is None else q + p.to_sparse()
    return q.tocsr()


def product(paulis: Sequence[PauliString]) -> PauliString:
    out = PauliString.identity(paulis[0].n)
    for p in reversed(paulis):
        out = p * out
    return out


@dataclass(frozen=True)
class Envelope:
    """Drive amplitude ``eps(t)`` on ``[0, t_f]``.

    ``kind="sin2"`` ramps as ``amplitude * sin^2(pi t / t_f)`` so that
    ``eps(0) = 0``; ``kind="constant"`` holds ``amplitude``.
    """

    kind: str
    amplitude: float
    t_f: float

    def __call__(self, t: float) -> float:
        if self.kind == "sin2":
            return self.amplitude * math.sin(math.pi * t / self.t_f) ** 2
        if self.kind == "constant":
            return self.amplitude
        raise ValueError(f"unknown envelope kind {self.kind!r}")

    def area(self, t: float | None = None) -> float:
        t = self.t_f if t is None else t
        if self.kind == "sin2":
            w = math.pi / self.t_f
            return self.amplitude * (t / 2 - math.sin(2 * w * t) / (4 * w))
        return self.amplitude * t

    @classmethod
    def with_area(cls, kind: str, t_f: float, area: float = math.pi / 2) -> "Envelope":
        unit = cls(kind, 1.0, t_f).area()
        return cls(kind, area / unit, t_f)


def _check_qubits(n: int):
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit limit")


@dataclass(frozen=True)
class DriveResult:
    state: np.ndarray
    target: np.ndarray
    fidelity: float
    norm_drift: float


def interaction_drive(h0, targets: Sequence[PauliString], envelope: Envelope, psi0: np.ndarray,
                      t: float | None = None, rtol: float = 1e-10, atol: float = 1e-12,
                      check_area: bool = True) -> DriveResult:
    """Integrate ``H0 + eps(t) sum_i exp(-i H0 t) P_i exp(i H0 t)`` from ``psi0``.

    ``target`` is ``L psi0`` with ``L`` the ordered product of ``targets``;
    ``fidelity`` is ``|<L psi0 | psi(t)>|^2``.
    """
    n = targets[0].n
    _check_qubits(n)
    if check_area and abs(envelope.area() - math.pi / 2) > 1e-9:
        raise ValueError(f"envelope area {envelope.area():.12g} differs from pi/2")
    t = envelope.t_f if t is None else t
    h0 = _as_dense(h0).astype(complex)
    w, v = np.linalg.eigh(h0)
    q_eig = v.conj().T @ _as_dense(pauli_sum(targets)) @ v
    psi0 = np.asarray(psi0, dtype=complex)

    # work in the H0 eigenbasis, where exp(-i H0 t) is diagonal
    def rhs(time, y):
        ph = np.exp(-1j * w * time)
        drive = ph * (q_eig @ (np.conj(ph) * y))
        return -1j * (w * y + envelope(time) * drive)

    y0 = v.conj().T @ psi0
    sol = scipy.integrate.solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    psi = v @ sol.y[:, -1]
    drift = abs(np.linalg.norm(psi) - 1.0)
    _check_norm(psi)
    target = product(targets).to_sparse() @ psi0
    return DriveResult(psi, target, float(abs(np.vdot(target, psi)) ** 2), drift)


def single_pauli_drive_closed_form(h0, p: PauliString, envelope: Envelope, psi0, t: float) -> np.ndarray:
    """``exp(-i H0 t) (cos th - i sin th P) psi0`` with ``th`` the envelope area up to ``t``."""
    th = envelope.area(t)
    phi = math.cos(th) * psi0 - 1j * math.sin(th) * (p.to_sparse() @ psi0)
    return evolve(h0, phi, t)


# -- mirror environment --------------------------------------------------

@dataclass(frozen=True)
class MirrorResult:
    state: np.ndarray
    system_fidelity: float
    reduced_system: np.ndarray


def mirror_environment_evolution(stabilizers: Sequence[PauliString], targets: Sequence[PauliString],
                                 eps: float, t: float | None, psi0: np.ndarray) -> MirrorResult:
    """System coupled to a mirrored environment ``H_E = -H_S^*`` through ``eps sum P_i ⊗ P_i^*``."""
    n = stabilizers[0].n
    _check_qubits(2 * n)
    if t is None:
        t = math.pi / (2 * eps)
    hs = stabilizer_hamiltonian(stabilizers)
    eye = sp.identity(1 << n, format="csr", dtype=complex)
    h = sp.kron(hs, eye) - sp.kron(eye, hs.conj())
    for p in targets:
        ps = p.to_sparse()
        h = h + eps * sp.kron(ps, ps.conj())
    psi0 = np.asarray(psi0, dtype=complex)
    start = np.kron(psi0, psi0.conj())
    psi = evolve(h.tocsr(), start, t)
    _check_norm(psi)
    m = psi.reshape(1 << n, 1 << n)
    rho_s = m @ m.conj().T
    target = product(targets).to_sparse() @ psi0
    fid = float(np.real(np.vdot(target, rho_s @ target)))
    return MirrorResult(psi, fid, rho_s)


# -- depolarizing average ------------------------------------------------

def random_axes(rng: np.random.Generator, size) -> np.ndarray:
    """Unit vectors uniform on the sphere, shape ``size + (3,)``."""
    v = rng.normal(size=tuple(np.atleast_1d(size)) + (3,))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


_SIGMA = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


def local_rotations(eps: float, axes: np.ndarray) -> np.ndarray:
    """``exp(i eps n.sigma)`` for each axis; output shape ``axes.shape[:-1] + (2, 2)``."""
    ns = np.einsum("...k,kab->...ab", axes, _SIGMA)
    return math.cos(eps) * np.eye(2) + 1j * math.sin(eps) * ns


def apply_local(us: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Apply per-sample single-qubit unitaries ``us[s, q]`` to a batch of states ``psi[s]``."""
    samples, n = us.shape[:2]
    t = psi.reshape((samples,) + (2,) * n)
    for q in range(n):
        t = np.moveaxis(np.einsum("sab,s...b->s...a", us[:, q], np.moveaxis(t, q + 1, -1)), -1, q + 1)
    return t.reshape(samples, -1)


def axis_averaged_state(psi: np.ndarray, eps: float, samples: int, rng: np.random.Generator,
                        batch: int = 20000) -> np.ndarray:
    """Monte Carlo average of ``U^dag |psi><psi| U`` over ``U = ⊗ exp(i eps n_l.sigma)``."""
    psi = np.asarray(psi, dtype=complex)
    n = psi.shape[0].bit_length() - 1
    acc = np.zeros((psi.shape[0],) * 2, dtype=complex)
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        us = local_rotations(eps, random_axes(rng, (b, n)))
        us_dag = np.conj(np.swapaxes(us, -1, -2))
        phi = apply_local(us_dag, np.broadcast_to(psi, (b, psi.shape[0])))
        acc += phi.T @ phi.conj()
        done += b
    return acc / samples


_OCTAHEDRON = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)


def design_axis_average(psi: np.ndarray, eps: float) -> np.ndarray:
    """Exact sphere average of ``U^dag |psi><psi| U``.

    The rotated state is quadratic in each axis, so averaging every site over
    the six octahedral directions reproduces the uniform-sphere average.
    """
    psi = np.asarray(psi, dtype=complex)
    n = psi.shape[0].bit_length() - 1
    if n > 4:
        raise ValueError("exact axis average limited to 4 qubits")
    u = local_rotations(eps, _OCTAHEDRON)
    rho = np.outer(psi, psi.conj()).reshape((2,) * (2 * n))
    for q in range(n):
        # average the site-q conjugation over the six directions
        out = np.zeros_like(rho)
        for uk in u:
            ud = uk.conj().T
            t = np.moveaxis(np.tensordot(ud, rho, axes=([1], [q])), 0, q)
            t = np.moveaxis(np.tensordot(t, uk, axes=([n + q], [0])), -1, n + q)
            out += t
        rho = out / len(u)
    return rho.reshape(1 << n, 1 << n)


def mean_overlap(psi: np.ndarray, eps: float) -> float:
    """Rotation-averaged overlap ``<psi| avg(U^dag |psi><psi| U) |psi>``."""
    psi = np.asarray(psi, dtype=complex)
    return float(np.real(psi.conj() @ design_axis_average(psi, eps) @ psi))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def depolarizing_average_check(psi: np.ndarray, eps: float, samples: int, rng: np.random.Generator,
                               lam: float | None = None) -> float:
    """Trace distance between the axis average and ``Delta_lam^{⊗N}``; ``lam`` defaults to the sphere value."""
    psi = np.asarray(psi, dtype=complex)
    n = psi.shape[0].bit_length() - 1
    if n > 4:
        raise ValueError("depolarizing check limited to 4 qubits")
    lam = sphere_average_lambda(eps) if lam is None else lam
    rho = np.outer(psi, psi.conj())
    if eps == 0:
        return trace_distance(rho, depolarizing_channel_apply(rho, lam))
    avg = axis_averaged_state(psi, eps, samples, rng)
    return trace_distance(avg, depolarizing_channel_apply(rho, lam))


# -- gapped time-averaged survival ---------------------------------------

@dataclass(frozen=True)
class SurvivalResult:
    avg_S: float
    avg_S_exact: float
    R: float
    gamma: float
    bound: float


def product_rotation(eps: float, axes: np.ndarray) -> np.ndarray:
    """Dense ``⊗_l exp(i eps n_l.sigma)``."""
    out = np.array([[1.0 + 0j]])
    for u in local_rotations(eps, axes):
        out = np.kron(out, u)
    return out


def time_avg_survival(h: np.ndarray, flagged: int, U: np.ndarray, psi0: np.ndarray, T: float,
                      samples_in_time: int = 4001, gamma: float | None = None) -> SurvivalResult:
    """Average of ``|<psi0| U exp(-i t H) U^dag |psi0>|^2`` over ``[0, T]``.

    ``flagged`` counts the lowest eigenstates of ``h`` forming the protected
    subspace; the gap above it is read off the spectrum.
    """
    h = _as_dense(h)
    _check_qubits(h.shape[0].bit_length() - 1)
    w, v = np.linalg.eigh(h)
    if not 0 < flagged < w.size:
        raise ValueError("flagged subspace must be a proper, non-empty subspace")
    gap = float(w[flagged] - w[flagged - 1])
    if gap <= 1e-12 or (gamma is not None and gap < gamma - 1e-12):
        raise ValueError(f"spectral gap {gap:.3e} violates the gap assumption")
    gamma = gap if gamma is None else gamma
    psi0 = np.asarray(psi0, dtype=complex)
    if np.linalg.norm(v[:, :flagged].conj().T @ psi0) ** 2 < 1 - 1e-10:
        raise ValueError("psi0 does not lie in the flagged subspace")
    alpha2 = np.abs(v.conj().T @ (U.conj().T @ psi0)) ** 2
    R = float(alpha2[:flagged].sum())
    ts = np.linspace(0.0, T, samples_in_time)
    amp = np.exp(-1j * np.outer(ts, w)) @ alpha2
    S = np.abs(amp) ** 2
    avg = float(scipy.integrate.simpson(S, x=ts) / T)
    # closed-form average of sum_ij a_i a_j cos((E_i - E_j) t)
    de = w[:, None] - w[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        kernel = np.where(np.abs(de) < 1e-14, 1.0, np.sin(de * T) / (de * T))
    exact = float(alpha2 @ kernel @ alpha2)
    return SurvivalResult(avg, exact, R, gamma, gapped_survival_bound(min(max(R, 0.0), 1.0), gamma, T))


def random_gapped_hamiltonian(n: int, flagged: int, gamma: float, rng: np.random.Generator,
                              spread: float = 1.0):
    """Haar-random eigenbasis; ``flagged`` levels in ``[0, spread/4]``, the rest ``>= gap`` above."""
    dim = 1 << n
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    low = np.sort(rng.uniform(0.0, spread / 4, flagged))
    high = np.sort(low[-1] + gamma + rng.uniform(0.0, spread, dim - flagged))
    high[0] = low[-1] + gamma
    energies = np.concatenate([low, high])
    return (q * energies) @ q.conj().T, q, energies

