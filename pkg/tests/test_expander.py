from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ripkit.construct import gen_matrix
from ripkit.expander import (ExpansionBudgetError, audit_prefix_expansion, audit_weighted_mass,
                             block_decomposition, falsify_expander_heuristic, n_blocks,
                             neighborhood_size, verify_expander_exact)

from conftest import from_supports


def brute_min_ratio(A, ell):
    """Independent oracle: min |N(S)| / (d|S|) over all nonempty S with |S| <= ell."""
    sets = [set(r) for r in A.supports.tolist()]
    best = 1.0
    for s in range(1, min(ell, A.n) + 1):
        for S in combinations(range(A.n), s):
            nb = len(set().union(*(sets[j] for j in S)))
            best = min(best, nb / (A.d * s))
    return best


def unit_x(k, p, seed):
    x = np.sort(np.abs(np.random.default_rng(seed).standard_normal(k)))[::-1]
    return x / np.sum(x**p) ** (1 / p)


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_disjoint_supports_pass(ell):
    A = from_supports([[0, 1], [2, 3], [4, 5]], m=6)
    rep = verify_expander_exact(A, ell, 0.0)
    assert rep.passed and rep.worst_ratio == 1.0


def test_identical_pair_fails_with_witness():
    A = from_supports([[0, 1, 2], [0, 1, 2], [3, 4, 5]], m=6)
    rep = verify_expander_exact(A, 2, 0.4)
    assert not rep.passed
    assert rep.worst_set == (0, 1) and rep.worst_neighborhood == 3


@given(seed=st.integers(0, 10_000), n=st.integers(2, 9), ell=st.integers(1, 4),
       delta=st.sampled_from([0.0, 0.1, 0.25, 0.4]))
def test_exact_matches_brute_oracle(seed, n, ell, delta):
    A = gen_matrix(n, 12, 3, 1.5, seed)
    rep = verify_expander_exact(A, ell, delta, threads=1)
    ratio = brute_min_ratio(A, ell)
    assert rep.worst_ratio == pytest.approx(ratio)
    assert rep.passed == (ratio >= 1 - delta - 1e-12)
    assert neighborhood_size(A, rep.worst_set) == rep.worst_neighborhood


@given(seed=st.integers(0, 10_000), ell=st.integers(1, 4), delta=st.floats(0.0, 0.45))
def test_expansion_monotone(seed, ell, delta):
    A = gen_matrix(8, 15, 3, 1.5, seed)
    if verify_expander_exact(A, ell, delta).passed:
        for e2 in range(1, ell + 1):
            assert verify_expander_exact(A, e2, delta).passed
        assert verify_expander_exact(A, ell, min(delta + 0.05, 0.5)).passed


@given(seed=st.integers(0, 10_000))
def test_heuristic_never_contradicts_exact(seed):
    A = gen_matrix(10, 20, 4, 1.5, seed)
    if verify_expander_exact(A, 3, 0.2).passed:
        assert falsify_expander_heuristic(A, 3, 0.2, budget=2000, seed=seed) is None


def test_falsify_finds_planted_pair():
    A = gen_matrix(200, 5000, 20, 1.5, 3)
    sup = A.supports.copy()
    sup[137] = sup[41]
    B = from_supports(sup, m=5000, p=1.5)
    wit = falsify_expander_heuristic(B, 2, 0.1, budget=10_000, seed=0)
    assert wit is not None and set(wit) == {41, 137}
    assert neighborhood_size(B, wit) < (1 - 0.1) * B.d * len(wit)


def test_falsify_disjoint_none():
    A = from_supports([[0, 1], [2, 3], [4, 5], [6, 7]], m=8)
    assert falsify_expander_heuristic(A, 4, 0.0, budget=1000) is None


@given(seed=st.integers(0, 10_000))
def test_falsify_witness_is_violating(seed):
    A = gen_matrix(12, 10, 3, 1.5, seed)
    wit = falsify_expander_heuristic(A, 3, 0.1, budget=500, seed=seed)
    if wit is not None:
        assert 1 <= len(wit) <= 3
        assert neighborhood_size(A, wit) < (1 - 0.1) * A.d * len(wit)


def test_budget_error():
    A = gen_matrix(200, 400, 3, 1.5, 0)
    with pytest.raises(ExpansionBudgetError):
        verify_expander_exact(A, 4, 0.1, budget=1000)


def test_decomposition_single_block_disjoint():
    A = from_supports([[0, 1], [2, 3]], m=4)
    dec = block_decomposition(A, (0, 1), 2, 1)
    assert not dec.secondary and not dec.tertiary
    assert dec.primary == {(0, 0), (1, 0), (2, 1), (3, 1)}


def test_decomposition_shared_row():
    A = from_supports([[0, 1], [1, 2]], m=3)
    dec = block_decomposition(A, (0, 1), 2, 1)
    assert (1, 0) in dec.primary and (1, 1) in dec.secondary
    assert len(dec.secondary) == 1 and not dec.tertiary


def test_decomposition_tertiary_in_later_blocks():
    A = from_supports([[0, 1], [2, 3], [1, 4]], m=5)
    dec = block_decomposition(A, (0, 1, 2), 2, 1)
    assert dec.tertiary == {(1, 2)}
    dec2 = block_decomposition(A, (0, 1, 2), 2, 2)
    assert dec2.block == (2,) and not dec2.tertiary


@pytest.mark.parametrize("b", [0, 3])
def test_decomposition_bad_block(b):
    A = gen_matrix(8, 20, 3, 1.5, 0)
    with pytest.raises(ValueError):
        block_decomposition(A, tuple(range(8)), 4, b)


@given(seed=st.integers(0, 10_000))
def test_partition_identity(seed):
    A = gen_matrix(8, 30, 5, 1.5, seed)
    support = tuple(np.random.default_rng(seed).permutation(8).tolist())
    for b in range(1, n_blocks(8, 4) + 1):
        dec = block_decomposition(A, support, 4, b)
        assert not dec.primary & dec.secondary
        assert len(dec.primary) + len(dec.secondary) == A.d * len(dec.block)
        nz = {(i, j) for j in dec.block for i in A.supports[j].tolist()}
        assert dec.primary | dec.secondary == nz
        lead = {}
        for i, j in dec.primary:
            assert i not in lead
            lead[i] = j
        for i, j in dec.secondary:
            assert dec.block.index(lead[i]) < dec.block.index(j)
        later = set(support[b * 4:])
        assert all(j in later and i in lead for i, j in dec.tertiary)


def test_prefix_and_mass_on_disjoint():
    A = from_supports([[0, 1], [2, 3], [4, 5]], m=6, p=1.5)
    dec = block_decomposition(A, (0, 1, 2), 2, 1)
    pa = audit_prefix_expansion(dec, A, 0.1)
    assert pa.passed and all(c == 0 for c in pa.counts)
    wm = audit_weighted_mass(dec, A, unit_x(3, 1.5, 0), 0.1)
    assert wm.passed and wm.lhs == 0


def test_weighted_mass_one_sparse():
    A = gen_matrix(6, 8, 4, 1.5, 1)
    dec = block_decomposition(A, tuple(range(6)), 2, 1)
    x = np.zeros(6)
    x[0] = 1.0
    assert audit_weighted_mass(dec, A, x, 0.1).lhs == 0.0


def test_weighted_mass_rejects_unsorted():
    A = gen_matrix(4, 8, 2, 1.5, 1)
    dec = block_decomposition(A, (0, 1, 2, 3), 2, 1)
    with pytest.raises(ValueError):
        audit_weighted_mass(dec, A, unit_x(4, 1.5, 0)[::-1], 0.1)


def test_prefix_first_column_never_counts():
    A = from_supports([[0, 1], [0, 1]], m=2, p=1.5)
    dec = block_decomposition(A, (0, 1), 2, 1)
    pa = audit_prefix_expansion(dec, A, 0.5)
    assert pa.counts[0] == 0 and pa.counts[1] == 2


@pytest.mark.parametrize("ell", [2, 3])
def test_certified_instances_replay_audits(ell):
    # prefix and weighted-mass bounds are theorems once (2 ell)-expansion is certified
    delta, k, hits = 0.1, 8, 0
    for seed in range(100):
        A = gen_matrix(16, 1500, 24, 1.5, seed)
        if not verify_expander_exact(A, 2 * ell, delta).passed:
            continue
        hits += 1
        rng = np.random.default_rng(seed)
        for rep in range(5):
            support = tuple(rng.choice(16, k, replace=False).tolist())
            x = unit_x(k, 1.5, seed * 10 + rep)
            for b in range(1, n_blocks(k, ell) + 1):
                dec = block_decomposition(A, support, ell, b)
                assert audit_prefix_expansion(dec, A, delta).passed
                assert audit_weighted_mass(dec, A, x, delta).passed
    assert hits >= 20
