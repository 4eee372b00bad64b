import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from passivemem.ring import (MAX_ENUMERATION_CHOICES, PathEnsemble, arc_indicator, boundaries, build_sample,
                             coverage_from_arcs, enumerate_distribution, sample, uniform_ensemble,
                             winding_parity)


@st.composite
def ensembles(draw, max_choices=8):
    N = draw(st.integers(4, 40))
    k = draw(st.integers(0, max_choices))
    paths = [(draw(st.integers(0, N - 1)), draw(st.integers(1, N - 1))) for _ in range(k)]
    singles = draw(st.lists(st.integers(0, N - 1), max_size=max_choices - k))
    return PathEnsemble(N, paths, draw(st.floats(0, 1)), singles, draw(st.floats(0, 1)))


def test_validation():
    with pytest.raises(ValueError):
        PathEnsemble(10, [(0, 10)], 0.1)
    with pytest.raises(ValueError):
        PathEnsemble(10, [(10, 2)], 0.1)
    with pytest.raises(ValueError):
        PathEnsemble(10, [(0, 2)], 1.5)
    with pytest.raises(ValueError):
        PathEnsemble(10, [], 0.1, [11], 0.1)


def test_json_round_trip():
    ens = PathEnsemble(12, [(3, 5), (11, 4)], 0.2, [0, 7], 0.05)
    data = json.loads(ens.to_json())
    assert data == {"ring_length": 12, "paths": [{"start": 3, "len": 5}, {"start": 11, "len": 4}],
                    "p_path": 0.2, "singletons": [0, 7], "p_single": 0.05}
    assert PathEnsemble.from_json(ens.to_json()) == ens


def test_sample_p0_and_p1():
    ens = PathEnsemble(20, [(5, 7)], 0.0)
    s = sample(ens, 1, 0)
    assert s.anyons == () and s.odd_sites == 0
    s = sample(PathEnsemble(20, [(5, 7)], 1.0), 1, 0)
    assert s.anyons == (5, 12) and s.odd_sites == 7


def test_sample_deterministic():
    ens = uniform_ensemble(30, 6, 0.3)
    a, b = sample(ens, 9, 17, 2), sample(ens, 9, 17, 2)
    assert np.array_equal(a.coverage_parity, b.coverage_parity)
    c = sample(ens, 9, 18, 2)
    assert not np.array_equal(a.activated_paths, c.activated_paths) or True


def test_overlapping_paths_cancel():
    ens = PathEnsemble(10, [(2, 4), (2, 4)], 0.5)
    dist = enumerate_distribution(ens)
    empty = sum(p for s, p in dist if not s.anyons)
    assert empty == pytest.approx(0.5)


def test_winding_examples():
    ens = PathEnsemble(20, [(3, 4), (18, 5), (15, 10), (19, 2)], 1.0)
    assert winding_parity(build_sample(ens, [0, 0, 0, 0])) == 0
    assert winding_parity(build_sample(ens, [1, 0, 0, 0])) == 0
    assert winding_parity(build_sample(ens, [0, 1, 1, 1])) == 1


def test_enumeration_examples():
    d = enumerate_distribution(PathEnsemble(10, [(0, 3)], 0.1))
    assert sorted(p for _, p in d) == pytest.approx([0.1, 0.9])
    d = enumerate_distribution(PathEnsemble(10, [(0, 3), (4, 3)], 0.1))
    assert sorted(p for _, p in d) == pytest.approx([0.01, 0.09, 0.09, 0.81])
    # one propagated pair plus one singleton at its start site
    p = 0.3
    d = enumerate_distribution(PathEnsemble(16, [(9, 15)], p, [0], p))
    assert sorted(pr for _, pr in d) == pytest.approx(sorted([(1 - p) ** 2, p * (1 - p), (1 - p) * p, p * p]))


def test_enumeration_cap():
    ens = uniform_ensemble(MAX_ENUMERATION_CHOICES + 1, 2, 0.1)
    with pytest.raises(ValueError):
        enumerate_distribution(ens)


@given(ensembles())
def test_sample_invariants(ens):
    starts, lengths, _ = ens.arcs()
    for trial in range(3):
        s = sample(ens, 5, trial)
        act = np.concatenate([s.activated_paths, s.activated_singletons]).astype(bool)
        ref = np.zeros(ens.ring_length, dtype=np.uint8)
        for a, d in zip(starts[act], lengths[act]):
            ref ^= arc_indicator(ens.ring_length, a, d)
        assert np.array_equal(s.coverage_parity, ref)
        assert len(s.anyons) % 2 == 0
        assert list(s.anyons) == sorted(s.anyons)
        par = s.coverage_parity
        assert all(par[b] != par[b - 1] for b in s.anyons)


@given(ensembles(max_choices=10))
def test_enumeration_sums_to_one(ens):
    assert sum(p for _, p in enumerate_distribution(ens)) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(2, 50), st.data())
def test_toggle_changes_coverage_consistently(N, data):
    k = data.draw(st.integers(1, 6))
    starts = np.array([data.draw(st.integers(0, N - 1)) for _ in range(k)])
    lengths = np.array([data.draw(st.integers(1, N - 1)) for _ in range(k)])
    act = np.array([data.draw(st.booleans()) for _ in range(k)])
    j = data.draw(st.integers(0, k - 1))
    before = coverage_from_arcs(N, starts[act], lengths[act])
    act2 = act.copy()
    act2[j] = ~act2[j]
    after = coverage_from_arcs(N, starts[act2], lengths[act2])
    arc = arc_indicator(N, starts[j], lengths[j])
    overlap = int(np.count_nonzero(before & arc))
    assert after.sum() == before.sum() + lengths[j] - 2 * overlap


def test_frequency_matches_enumeration():
    ens = PathEnsemble(12, [(0, 5), (3, 5), (8, 6)], 0.3, [4], 0.2)
    exact = {s.coverage_parity.tobytes(): p for s, p in enumerate_distribution(ens)}
    trials = 20000
    counts = {}
    for t in range(trials):
        key = sample(ens, 3, t).coverage_parity.tobytes()
        counts[key] = counts.get(key, 0) + 1
    for key, p in exact.items():
        sigma = np.sqrt(p * (1 - p) / trials)
        assert abs(counts.get(key, 0) / trials - p) <= 4 * sigma + 1e-12


def test_boundaries_wrap():
    par = np.array([1, 0, 0, 1], dtype=np.uint8)
    assert boundaries(par) == (1, 3)


def test_uniform_block_matches_trial_generators():
    from passivemem.rng import trial_generator, uniform_block
    block = uniform_block(2 ** 70 + 5, 3, range(10, 20), 7)
    for row, t in zip(block, range(10, 20)):
        assert np.array_equal(row, trial_generator(2 ** 70 + 5, t, 3).random(7))
    assert not np.array_equal(block[0], uniform_block(2 ** 70 + 5, 4, range(10, 11), 7)[0])
