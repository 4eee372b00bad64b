import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from passivemem import analytics as an


def test_overlap_bound_examples():
    assert an.overlap_bound(0.0, 37) == 1.0
    assert an.overlap_bound(math.pi / 2, 1) == pytest.approx(0.25)
    ref = math.exp(100 * math.log(1 - 0.75 * math.sin(0.2) ** 2))
    assert an.overlap_bound(0.2, 100) == pytest.approx(ref, rel=1e-14)
    assert an.overlap_bound(0.2, 100) == pytest.approx((1 - 0.75 * math.sin(0.2) ** 2) ** 100, rel=1e-12)
    with pytest.raises(ValueError):
        an.overlap_bound(0.1, 0)


def test_overlap_is_king_bound_of_quoted_lambda():
    for eps in (0.1, 0.5, 1.2):
        assert an.overlap_bound(eps, 7) == pytest.approx(an.king_bound(an.depolarizing_lambda(eps), 7))


def test_survival_bound_examples():
    assert an.survival_bound(0.0, 10) == 1.0
    assert an.survival_bound(math.pi / 4, 2) == pytest.approx(4 / 9)
    for eps in (0.05, 0.3, 0.7):
        assert an.survival_bound(eps, 13) == pytest.approx(an.survival_bound_from_p(math.sin(eps) ** 2, 13))


def test_compass_examples():
    for eps in (0.03, 0.2):
        assert an.compass_stats(eps, 1).p_plane_star == pytest.approx(math.sin(eps) ** 2)
    z = an.compass_stats(0.0, 5)
    assert z.p_plane == 0 and z.p_logic == 0
    with pytest.raises(ValueError):
        an.compass_stats(0.1, 4)


def test_compass_logic_is_binomial_tail():
    st = an.compass_stats(0.1, 5)
    q = st.p_plane
    ref = sum(math.comb(5, k) * q ** k * (1 - q) ** (5 - k) for k in range(3, 6))
    assert st.p_logic == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("n", range(1, 22, 2))
def test_compass_sandwich(n):
    for eps in np.linspace(0.01, 0.29, 15):
        s = an.compass_stats(eps, n)
        assert s.p_logic_lower - 1e-12 <= s.p_logic <= s.p_logic_upper + 1e-12


def test_linf_params():
    par = an.linf_construction_params(0.1, 1e5)
    assert par.p_logic_lower == pytest.approx(0.45)
    assert par.S == math.ceil(math.log(1e5) / 0.2) and par.D == math.ceil(8 * math.log(1e5) / 0.5)
    assert par.trajectory_length == 4 * par.S + 2
    p = 0.4
    assert an.linf_construction_params(p, math.exp(2 * p)).S == 1
    with pytest.raises(ValueError):
        an.linf_construction_params(0.0, 100)


def test_odd_coverage_by_enumeration():
    p, k = 0.1, 3
    exact = sum(p ** sum(b) * (1 - p) ** (k - sum(b))
                for b in np.ndindex(*(2,) * k) if sum(b) % 2)
    assert an.odd_coverage_probability(p, k) == pytest.approx(exact)
    assert an.odd_coverage_probability(0.1, 3) == pytest.approx(0.244)


def test_pst_distribution_examples():
    d = an.pst_site_distribution(7, 0.0)
    assert d[0] == 1 and d[1:].sum() == 0
    d = an.pst_site_distribution(7, math.pi / 2)
    assert d[-1] == pytest.approx(1.0) and d[:-1].sum() < 1e-12
    assert np.allclose(an.pst_site_distribution(4, math.pi / 4), np.array([1, 4, 6, 4, 1]) / 16)


@given(st.integers(1, 1000), st.floats(0.0, math.pi / 2))
def test_pst_normalized(D, t):
    d = an.pst_site_distribution(D, t)
    assert np.all(d >= 0)
    assert abs(d.sum() - 1) < 1e-12


def test_binomial_pmf_matches_comb():
    n, q = 30, 0.37
    ref = [math.comb(n, k) * q ** k * (1 - q) ** (n - k) for k in range(n + 1)]
    assert np.allclose(an.binomial_pmf(n, q), ref, rtol=1e-11, atol=0)


def test_crossing_examples():
    t = math.asin(math.sqrt(0.5))
    cb = an.crossing_bound(100, 60, 40, t)
    assert cb.hoeffding_bound == pytest.approx(math.exp(-4))
    assert cb.lower_factor == pytest.approx(cb.upper_factor, rel=1e-9)
    assert cb.hoeffding_product == pytest.approx(cb.hoeffding_bound, rel=1e-9)
    with pytest.raises(ValueError):
        an.crossing_bound(100, 40, 60, t)


@st.composite
def crossing_args(draw):
    D = draw(st.integers(2, 400))
    s_b = draw(st.integers(0, D - 1))
    s_a = draw(st.integers(s_b + 1, D))
    q = draw(st.floats(s_b / D, s_a / D))
    return D, s_a, s_b, math.asin(math.sqrt(q))


@given(crossing_args())
def test_crossing_valid(args):
    cb = an.crossing_bound(*args)
    assert cb.valid


def test_ising_examples():
    p = an.ising_parameters(1.0, 0.5)
    assert p.M_min == 9 and p.gap == 1.0
    assert p.log10_alpha == pytest.approx(math.log10(0.5) + 130 * math.log10(0.125))
    assert p.log10_t_flip == pytest.approx(math.log10(math.pi) - p.log10_alpha)
    for J, eps in ((1.0, 0.1), (2.0, 0.7)):
        assert an.ising_parameters(J, eps).gap == pytest.approx(2 * eps)
        M = 4 * J / eps
        assert 2 * eps * M * M == pytest.approx(8 * M * J)
        assert an.matched_field(J, M) == pytest.approx(eps)
    with pytest.raises(ValueError):
        an.ising_parameters(1.0, 4.0)
    assert an.ising_degeneracy_bounds(1) == (7, 16)


def test_gapped_bound_examples():
    assert an.gapped_survival_bound(1.0, 1.0, 3.0) == 1.0
    assert an.gapped_survival_bound(0.0, 1.0, 3.0) == 1.0
    assert an.gapped_survival_bound(0.5, 1.0, 1.0) == pytest.approx(1.0)
    assert an.gapped_survival_bound(0.5, 2.0, 5.0) == pytest.approx(0.55)
    with pytest.raises(ValueError):
        an.gapped_survival_bound(1.5, 1.0, 1.0)


def random_state(rng, n):
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return v / np.linalg.norm(v)


def test_depolarizing_channel_examples(rng):
    psi = random_state(rng, 3)
    rho = np.outer(psi, psi.conj())
    assert np.allclose(an.depolarizing_channel_apply(rho, 1.0), rho)
    assert np.allclose(an.depolarizing_channel_apply(rho, 0.0), np.eye(8) / 8)
    one = np.outer(random_state(rng, 1), random_state(rng, 1).conj())
    one = (one + one.conj().T) / 2
    assert np.allclose(an.depolarizing_channel_apply(np.array([[0.7, 0.2j], [-0.2j, 0.3]]), 0.0), np.eye(2) / 2)
    for lam in (0.3, -0.2):
        out = an.depolarizing_channel_apply(rho, lam)
        assert abs(np.trace(out) - 1) < 1e-12
    with pytest.raises(ValueError):
        an.depolarizing_channel_apply(np.eye(2 ** 11), 0.5)


def test_depolarizing_channel_single_site_formula(rng):
    # acting on qubit j alone: lam rho + (1 - lam) Tr_j(rho) ⊗ I/2
    psi = random_state(rng, 2)
    rho = np.outer(psi, psi.conj())
    lam = 0.4
    t = rho.reshape(2, 2, 2, 2)
    r1 = np.einsum("ajbj->ab", t)
    r0 = np.einsum("jajb->ab", t)
    step0 = lam * rho + (1 - lam) * np.kron(np.eye(2) / 2, r0)
    t = step0.reshape(2, 2, 2, 2)
    step1 = lam * step0 + (1 - lam) * np.kron(np.einsum("ajbj->ab", t), np.eye(2) / 2)
    assert np.allclose(an.depolarizing_channel_apply(rho, lam), step1)
    del r1


@pytest.mark.parametrize("N", range(1, 7))
def test_king_overlap_bound(N, rng):
    lam = an.depolarizing_lambda(0.4)
    states = [random_state(rng, N) for _ in range(50)]
    ghz = np.zeros(2 ** N, complex)
    ghz[0] = ghz[-1] = 2 ** -0.5
    for psi in states + [ghz]:
        rho = np.outer(psi, psi.conj())
        val = np.real(psi.conj() @ an.depolarizing_channel_apply(rho, lam) @ psi)
        assert val <= an.king_bound(lam, N) + 1e-12


def test_report_rows():
    rows = an.report("overlap_bound", eps=0.0, N=100)
    assert rows[0].value == 1.0
    assert rows[0].csv_row() == "overlap_bound,eps=0;N=100,1,(1-3/4 sin^2 eps)^N"
    names = [r.name for r in an.report("compass_stats", eps=0.1, n=5)]
    assert "compass_stats.p_logic" in names
    with pytest.raises(KeyError):
        an.report("nope")
    with pytest.raises(ValueError):
        an.BoundReport("x", {}, float("nan"))
    with pytest.raises(ValueError):
        an.BoundReport("x", {}, 1.5, probability=True)
