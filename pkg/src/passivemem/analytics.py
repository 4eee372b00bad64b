"""Closed-form bounds and probabilities for adversarial passive-memory noise.

Quantities that are products of many near-unity factors are evaluated in
the log domain; binomial masses and tails come from scipy's binomial
distribution rather than explicit factorials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.stats


@dataclass(frozen=True)
class BoundReport:
    name: str
    inputs: dict
    value: float
    reference: str = ""
    probability: bool = field(default=False, repr=False)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"{self.name}: non-finite value {self.value}")
        if self.probability and not -1e-12 <= self.value <= 1 + 1e-12:
            raise ValueError(f"{self.name}: probability {self.value} outside [0, 1]")

    def csv_row(self) -> str:
        params = ";".join(f"{k}={_fmt(v)}" for k, v in self.inputs.items())
        return f"{self.name},{params},{_fmt(self.value)},{self.reference}"


CSV_HEADER = "name,params,value,ref"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def pow_near_one(base: float, n: float) -> float:
    """``base**n`` via ``exp(n * log(base))``, keeping the sign for integer ``n``."""
    if base == 0.0:
        return 0.0 if n > 0 else 1.0
    val = math.exp(n * math.log(abs(base)))
    if base < 0 and int(n) % 2:
        val = -val
    return val


# -- depolarization and overlaps ----------------------------------------

def depolarizing_lambda(eps: float) -> float:
    """Depolarizing parameter quoted for the axis-averaged rotation of strength ``eps``."""
    return 1.0 - 1.5 * math.sin(eps) ** 2


def sphere_average_lambda(eps: float) -> float:
    """Depolarizing parameter produced exactly by averaging ``exp(i eps n.sigma)`` over the sphere."""
    return 1.0 - 4.0 / 3.0 * math.sin(eps) ** 2


def overlap_bound(eps: float, N: int) -> float:
    """``(1 - 3/4 sin^2 eps)^N`` = ``((1 + lambda)/2)^N``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return math.exp(N * math.log1p(-0.75 * math.sin(eps) ** 2))


def king_bound(lam: float, N: int) -> float:
    """Max overlap of ``Delta_lam^{⊗N}(|phi><phi|)`` with any pure state."""
    return ((1.0 + lam) / 2.0) ** N


def survival_bound(eps: float, N: int) -> float:
    """Cold-environment survival bound ``[1 - sin^2(2 eps)/3]^N``."""
    return math.exp(N * math.log1p(-math.sin(2 * eps) ** 2 / 3.0))


def survival_bound_from_p(p: float, N: int) -> float:
    """Same bound written through ``p = sin^2 eps``: ``[1 - 4/3 p (1-p)]^N``."""
    return math.exp(N * math.log1p(-4.0 / 3.0 * p * (1 - p)))


def depolarizing_channel_apply(rho: np.ndarray, lam: float) -> np.ndarray:
    """Apply ``lam * rho + (1 - lam) * Tr_j(rho) ⊗ I/2`` on every qubit ``j``."""
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    if rho.shape != (dim, dim) or 1 << n != dim:
        raise ValueError("density operator must be square with power-of-two dimension")
    if n > 10:
        raise ValueError(f"{n} qubits exceeds the 10-qubit limit")
    t = rho.reshape((2,) * (2 * n))
    for j in range(n):
        reduced = np.trace(t, axis1=j, axis2=n + j)
        mixed = np.multiply.outer(reduced, np.eye(2) / 2.0)
        # outer() appends the (row_j, col_j) pair last; move them back into place
        mixed = np.moveaxis(mixed, [2 * n - 2, 2 * n - 1], [j, n + j])
        t = lam * t + (1.0 - lam) * mixed
    return t.reshape(dim, dim)


# -- compass model ------------------------------------------------------

def binomial_pmf(n: int, q: float) -> np.ndarray:
    """Binomial(n, q) masses for k = 0..n."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return scipy.stats.binom.pmf(np.arange(n + 1), n, min(max(q, 0.0), 1.0))


def binomial_cdf(k: int, n: int, q: float) -> float:
    """``P(Bin(n, q) <= k)``."""
    return float(scipy.stats.binom.cdf(k, n, min(max(q, 0.0), 1.0)))


@dataclass(frozen=True)
class CompassStats:
    p_plane_star: float
    p_plane: float
    p_logic: float
    p_logic_lower: float
    p_logic_upper: float


def compass_stats(eps: float, n: int) -> CompassStats:
    """Plane-flip and majority-vote failure probabilities for an odd side ``n``."""
    if n < 1 or n % 2 == 0:
        raise ValueError("majority vote needs an odd number of planes")
    c = math.cos(2 * eps)
    sites = n * n
    p_star = (1.0 - pow_near_one(c, sites)) / 2.0
    p_plane = 2.0 * p_star * (1.0 - p_star)
    p_logic = float(binomial_pmf(n, p_plane)[(n + 1) // 2:].sum())
    lower = 0.5 * (1.0 - n * pow_near_one(c, 2 * sites))
    upper = 0.5
    if not lower - 1e-12 <= p_logic <= upper + 1e-12:
        raise AssertionError(f"p_logic={p_logic} outside [{lower}, {upper}]")
    return CompassStats(p_star, p_plane, p_logic, lower, upper)


# -- O(log N) toric construction ---------------------------------------

@dataclass(frozen=True)
class LinfParams:
    S: int
    D: int
    p_logic_lower: float

    @property
    def trajectory_length(self) -> int:
        """Covered arc of one propagated anyon, ``4S + 2``."""
        return 4 * self.S + 2


def _ceil(x: float) -> int:
    # absorb round-off such as ln(exp(2p)) / (2p) = 1 + 1e-16
    return math.ceil(x - 1e-9)


def linf_construction_params(p: float, N: int) -> LinfParams:
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if N < 2:
        raise ValueError("N must be >= 2")
    ln = math.log(N)
    S = _ceil(ln / (2 * p))
    D = _ceil(8 * ln / (5 * p))
    return LinfParams(S, D, 0.5 * (1.0 - N ** -0.2))


def odd_coverage_probability(p: float, k: int) -> float:
    """Probability that an odd number of ``k`` independent arcs (each w.p. ``p``) are active."""
    return 0.5 * (1.0 - (1.0 - 2.0 * p) ** k)


# -- perfect state transfer ---------------------------------------------

def pst_site_distribution(D: int, t: float) -> np.ndarray:
    """Occupation of sites 0..D along a PST chain at normalized time ``t``."""
    if D < 1:
        raise ValueError("D must be >= 1")
    return binomial_pmf(D, math.sin(t) ** 2)


@dataclass(frozen=True)
class CrossingBound:
    exact_tail_product: float
    hoeffding_product: float
    hoeffding_bound: float
    lower_factor: float
    upper_factor: float

    @property
    def valid(self) -> bool:
        tol = 1e-12
        return (self.exact_tail_product <= self.hoeffding_product + tol
                and self.hoeffding_product <= self.hoeffding_bound + tol)


def crossing_bound(D: int, s_a: int, s_b: int, t: float) -> CrossingBound:
    """Cumulative-binomial product for two crossing transfers and its Hoeffding envelope."""
    if not 0 <= s_b < s_a <= D:
        raise ValueError("need 0 <= s_b < s_a <= D")
    q = math.sin(t) ** 2
    if not s_b / D - 1e-12 <= q <= s_a / D + 1e-12:
        raise ValueError("Hoeffding branch needs s_b/D <= sin^2 t <= s_a/D")
    # F(D - s_a; D, cos^2 t) = P(Bin(D, sin^2 t) >= s_a)
    upper_tail = float(scipy.stats.binom.sf(s_a - 1, D, q))
    exact = binomial_cdf(s_b, D, q) * upper_tail
    lo = math.exp(-2.0 * (D * q - s_b) ** 2 / D)
    hi = math.exp(-2.0 * (D * q - s_a) ** 2 / D)
    bound = math.exp(-((s_a - s_b) ** 2) / D)
    return CrossingBound(exact, lo * hi, bound, lo, hi)


# -- Ising checkerboard --------------------------------------------------

@dataclass(frozen=True)
class IsingParams:
    M_min: int
    gap: float
    log10_alpha: float
    log10_t_flip: float
    degeneracy_lower: int | None = None
    degeneracy_upper: int | None = None

    @property
    def alpha(self) -> float:
        return 10.0 ** self.log10_alpha

    @property
    def t_flip(self) -> float:
        return 10.0 ** self.log10_t_flip


def ising_degeneracy_bounds(n: int) -> tuple[int, int]:
    """Ground-space degeneracy range ``(2^{2n^2+1} - 1, 2^{4n^2})`` for a ``2n x 2n`` board of squares."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2 ** (2 * n * n + 1) - 1, 2 ** (4 * n * n)


def ising_parameters(J: float, eps: float, n: int | None = None) -> IsingParams:
    """Square size, gap and many-body flip rate for the checkerboard field construction."""
    if J <= 0 or eps <= 0:
        raise ValueError("J and eps must be positive")
    if eps >= 4 * J:
        raise ValueError("construction needs eps < 4J")
    M_min = math.floor(4 * J / eps) + 1
    exponent = 32 * J * J / (eps * eps) + 2
    log10_alpha = math.log10(eps) + exponent * math.log10(eps / (4 * J))
    deg = ising_degeneracy_bounds(n) if n is not None else (None, None)
    return IsingParams(M_min, 2 * eps, log10_alpha, math.log10(math.pi) - log10_alpha, *deg)


def matched_field(J: float, M: int) -> float:
    """Field strength for which a square's field energy ``2 eps M^2`` equals its border cost ``8 M J``."""
    return 4.0 * J / M


# -- gapped Hamiltonians -------------------------------------------------

def gapped_survival_bound(R: float, gamma: float, t: float) -> float:
    """Time-averaged survival bound ``R^2 + (1-R)^2 + 2R(1-R)/(gamma t)``."""
    if not 0.0 <= R <= 1.0:
        raise ValueError("R must lie in [0, 1]")
    if gamma <= 0 or t <= 0:
        raise ValueError("gamma and t must be positive")
    return R * R + (1 - R) ** 2 + 2.0 * R * (1 - R) / (gamma * t)


# -- registry for the CLI ------------------------------------------------

def report(name: str, **kw) -> list[BoundReport]:
    """Evaluate a named formula and wrap every scalar output as a BoundReport."""
    if name not in FORMULAS:
        raise KeyError(f"unknown formula {name!r}; choose from {sorted(FORMULAS)}")
    fn, ref, is_prob = FORMULAS[name]
    out = fn(**kw)
    if isinstance(out, (float, int)):
        return [BoundReport(name, kw, float(out), ref, is_prob)]
    rows = []
    for key, val in vars(out).items() if hasattr(out, "__dict__") else out._asdict().items():
        if val is None or isinstance(val, bool):
            continue
        rows.append(BoundReport(f"{name}.{key}", kw, float(val), ref,
                                is_prob and key.startswith("p_") and not key.endswith("_lower")))
    return rows


FORMULAS = {
    "overlap_bound": (overlap_bound, "(1-3/4 sin^2 eps)^N", True),
    "survival_bound": (survival_bound, "[1-sin^2(2 eps)/3]^N", True),
    "compass_stats": (compass_stats, "majority vote over planes", True),
    "linf_construction_params": (linf_construction_params, "S=ceil(lnN/2p) D=ceil(8lnN/5p)", True),
    "odd_coverage_probability": (odd_coverage_probability, "(1-(1-2p)^k)/2", True),
    "ising_parameters": (ising_parameters, "eps (eps/4J)^(32J^2/eps^2+2)", False),
    "gapped_survival_bound": (gapped_survival_bound, "R^2+(1-R)^2+2R(1-R)/(gamma t)", False),
    "crossing_bound": (crossing_bound, "exp(-(s_a-s_b)^2/D)", True),
}
