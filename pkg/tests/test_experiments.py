import math

import numpy as np
import pytest

from passivemem import analytics as an
from passivemem import experiments as ex
from passivemem.decoders import decode_linf, verdict
from passivemem.ring import PathEnsemble, build_sample, coverage_from_arcs


def wilson_by_hand(k, n, z=1.959963984540054):
    ph = k / n
    den = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return centre - half, centre + half


@pytest.mark.parametrize("k,n", [(0, 10), (3, 10), (500, 1000), (1000, 1000), (7, 100000)])
def test_wilson_interval(k, n):
    s = ex.TrialStatistics("x", n, k)
    lo, hi = wilson_by_hand(k, n)
    assert s.wilson_lo == pytest.approx(max(lo, 0), abs=1e-12)
    assert s.wilson_hi == pytest.approx(min(hi, 1), abs=1e-12)
    assert s.wilson_lo <= s.rate <= s.wilson_hi


def test_statistics_validation():
    with pytest.raises(ValueError):
        ex.TrialStatistics("x", 10, 11)
    with pytest.raises(ValueError):
        ex.ExperimentConfig("fig3", samples=0)
    with pytest.raises(ValueError):
        ex.ExperimentConfig("nope")


def test_config_json_round_trip():
    cfg = ex.ExperimentConfig("fig3", {"N": [128], "p": 0.1}, 100, 3, 2)
    assert ex.ExperimentConfig.from_json(cfg.to_json()) == cfg


def test_csv_format():
    s = ex.TrialStatistics("fig3", 3, 1, 128, 0.1, 98, None, 7)
    text = ex.to_csv([s])
    assert text.splitlines()[0] == ex.CSV_HEADER
    assert text.splitlines()[1].startswith("fig3,128,0.1,98,,3,1,0.333333333333,")
    assert text.endswith("\n") and "\r" not in text


def test_batch_coverage_matches_scalar(rng):
    for _ in range(50):
        N = int(rng.integers(2, 40))
        m = int(rng.integers(1, 10))
        st, ln = rng.integers(0, N, m), rng.integers(1, N, m)
        act = rng.random((7, m)) < 0.5
        got = ex.batch_coverage(N, st, ln, act)
        for r in range(7):
            assert np.array_equal(got[r], coverage_from_arcs(N, st[act[r]], ln[act[r]]))


def test_fig3_p0_zero():
    cfg = ex.ExperimentConfig("fig3", {"N": [128, 256], "p": 0.0}, 500, 1)
    assert all(s.failures == 0 for s in ex.fig3_run(cfg))


def test_fig3_rejects_long_arcs():
    with pytest.raises(ValueError):
        ex.fig3_run(ex.ExperimentConfig("fig3", {"N": [50]}, 10))


def test_fig3_tiny_matches_enumeration():
    ens = PathEnsemble(16, [(0, 6), (4, 6), (8, 6), (12, 6)], 0.3)
    exact = ex.exact_failure_probability(ens, "l1")
    trials = 40_000
    fails = ex.simulate_ensemble(ens, "l1", trials, 11)
    s = ex.TrialStatistics("tiny", trials, fails)
    assert s.within(exact, 3)


def test_fig3_n128_near_half():
    # each site is covered by ~98 independent arcs, so odd coverage is ~1/2 per site
    s = ex.fig3_run(ex.ExperimentConfig("fig3", {"N": [128]}, 20_000, 5))[0]
    assert an.odd_coverage_probability(0.1, 98) == pytest.approx(0.5, abs=1e-9)
    assert 0.47 < s.rate < 0.53


def test_fig3_singletons_flag():
    ens = ex.fig3_ensemble(64, 0.1, 10, include_singletons=True)
    assert len(ens.singleton_sites) == 64 and ens.singleton_prob == 0.1


def test_shortcut_kernel_equals_full_decode():
    ens = ex.fig3_ensemble(40, 0.2, 9)
    a = ex.simulate_ensemble(ens, "l1", 3000, 4)
    full = ex._ensemble_kernel(ens, "l1", False, 4, 0, range(3000))[0]
    assert a == full


def test_linf_examples():
    cfg = ex.ExperimentConfig("linf", {"N": [1000], "p": 0.0}, 200, 1)
    assert ex.linf_run(cfg)[0].failures == 0
    N = 40
    ens = PathEnsemble(N, [(5, 12)], 1.0)
    s = build_sample(ens, [1])
    assert verdict(s, decode_linf(s.anyons, N))


def test_linf_ensemble_geometry():
    par = an.linf_construction_params(0.1, 1000)
    ens = ex.linf_ensemble(1000, 0.1, par.S)
    assert len(ens.paths) == 250 and ens.paths[1] == (4, 4 * par.S + 2)
    assert ens.singleton_sites[:3] == (0, 4, 8)


def test_linf_bound_n1e4():
    st = ex.linf_run(ex.ExperimentConfig("linf", {"N": [10_000], "p": 0.1}, 2000, 8))[0]
    lower = 0.5 * (1 - 10 ** -0.8)
    assert st.rate >= lower - 3 * st.sigma(lower)


def test_row_table_structure():
    p = 0.1
    amb, fail = ex.row_table(16, p)
    # only the single-arc outcomes are ambiguous
    assert not amb[0].any() and amb[1].all() and amb[2].all() and not amb[3].any()
    assert not fail[0].any() and not fail[3].any()
    # a coin decides each ambiguous row, failing on exactly one side
    assert np.all(fail[1, :, 0] != fail[1, :, 1])
    with pytest.raises(ValueError):
        ex.row_table(15, p)


def test_row_loop_examples():
    r = ex.row_loop_run(0.1, 1, 50_000, 3)
    p = 0.1
    assert r.expected()[0] == pytest.approx(1 - (2 * p - 2 * p * p))
    assert r.dephasing.within(2 * p - 2 * p * p, 3)
    assert ex.row_loop_run(0.0, 5, 1000, 3).no_dephasing == 1.0
    r = ex.row_loop_run(0.1, 50, 100_000, 4)
    assert r.expected()[0] == pytest.approx(0.82 ** 50)
    assert r.dephasing.within(1 - 0.82 ** 50, 3)
    assert r.logical.within(r.expected()[1], 3)


def test_compass_examples():
    assert ex.compass_run(5, 0.0, 500, 1).failures == 0
    s = ex.compass_run(5, 0.1, 100_000, 2)
    assert s.within(an.compass_stats(0.1, 5).p_logic, 3)
    s = ex.compass_run(9, 0.3, 20_000, 3)
    lo = 0.5 * (1 - 9 * math.cos(0.6) ** 162)
    assert lo - 3 * s.sigma(lo) <= s.rate <= 0.5 + 3 * s.sigma(0.5)
    with pytest.raises(ValueError):
        ex.compass_run(4, 0.1, 10, 1)


def test_thread_count_does_not_change_counts():
    ens = ex.fig3_ensemble(128, 0.1)
    one = ex.simulate_ensemble(ens, "l1", 5000, 9, threads=1)
    two = ex.simulate_ensemble(ens, "l1", 5000, 9, threads=2)
    assert one == two
    r1 = ex.row_loop_run(0.1, 10, 5000, 2, threads=1)
    r2 = ex.row_loop_run(0.1, 10, 5000, 2, threads=3)
    assert (r1.dephasing.failures, r1.logical.failures) == (r2.dephasing.failures, r2.logical.failures)


def test_block_size_does_not_change_counts():
    kernel = lambda seed, point, r: ex._compass_kernel(5, 0.05, seed, point, r)
    a = ex.run_blocks(kernel, 1, 0, 3000, block=100)
    b = ex.run_blocks(kernel, 1, 0, 3000, block=1024)
    assert np.array_equal(a, b)


def test_default_threads(monkeypatch):
    monkeypatch.setenv(ex.THREADS_ENV, "3")
    assert ex.default_threads() == 3
    monkeypatch.setenv(ex.THREADS_ENV, "junk")
    assert ex.default_threads() == 1


def test_run_dispatch():
    out = ex.run(ex.ExperimentConfig("compass", {"n": [3, 5], "eps": [0.1]}, 200, 1))
    assert [s.N for s in out] == [3, 5]
    out = ex.run(ex.ExperimentConfig("rowloop", {"rows": [1, 2]}, 200, 1))
    assert [s.experiment for s in out] == ["rowloop_dephase", "rowloop_logical"] * 2
