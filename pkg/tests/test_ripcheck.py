import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ripkit.construct import check_incoherence, gen_from_plan, gen_matrix, plan_params
from ripkit.matrix import ScaledMatrix
from ripkit.ripcheck import (SearchOpts, binary_certified_bounds, brute_oracle, certified_bounds,
                             certified_estimate, fold, merged_submatrix, ratios, rip_on_support,
                             rip_sampled, sign_vector_bound, submatrix)

from conftest import from_supports

ONES = np.ones((1, 2))
FAST = SearchOpts(restarts=40, iters=200)


def test_oracle_ones_row_p1():
    est = brute_oracle(ONES, (0, 1), 1.0)
    assert est.lo_max == pytest.approx(1.0) and est.hi_max == pytest.approx(1.0)
    assert est.hi_min <= est.diagnostics["band"] + 1e-12 and est.lo_min == 0.0


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 5.0])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_oracle_identity(p, k):
    est = brute_oracle(np.eye(k), tuple(range(k)), p)
    assert est.hi_min == pytest.approx(1.0, abs=1e-9) and est.lo_max == pytest.approx(1.0, abs=1e-9)
    assert est.lo_min <= 1.0 <= est.hi_max


@pytest.mark.parametrize("p", [1.0, 2.0, 4.0])
def test_oracle_single_column_generated(p):
    A = gen_matrix(5, 9, 4, p, 2)
    est = brute_oracle(A, (3,), p)
    assert est.lo_min == pytest.approx(1.0, abs=1e-12) and est.hi_max == pytest.approx(1.0, abs=1e-12)


def test_oracle_rejects():
    with pytest.raises(ValueError):
        brute_oracle(np.eye(4), (0, 1, 2, 3), 2.0)
    with pytest.raises(ValueError):
        brute_oracle(np.eye(2), (0, 1), 2.0, grid_res=32)


def test_sign_bound_examples():
    assert sign_vector_bound(np.eye(3), (0, 1, 2), 1.5) == pytest.approx(1.0)
    assert sign_vector_bound(ONES, (0, 1), 1.0) == pytest.approx(1.0)
    # identical columns at p=2: the sign vector (1, 1) attains sqrt(2)
    assert sign_vector_bound(np.ones((3, 2)) / math.sqrt(3), (0, 1), 2.0) == pytest.approx(math.sqrt(2))


def test_rip_on_support_permutation():
    M = np.eye(6)[np.random.default_rng(0).permutation(6)]
    est = rip_on_support(M, (0, 2, 5), 1.5, FAST)
    assert est.hi_min == pytest.approx(1.0, abs=1e-9) and est.lo_max == pytest.approx(1.0, abs=1e-9)


def test_rip_on_support_identical_columns():
    A = from_supports([[0, 1, 2], [0, 1, 2]], m=3, p=2.0)
    est = rip_on_support(A, (0, 1), 2.0)
    assert est.lo_max == pytest.approx(math.sqrt(2), rel=1e-9)
    assert est.hi_max == pytest.approx(math.sqrt(2), rel=1e-9)
    assert est.hi_min < 1e-4 and est.lo_min == 0.0
    assert est.method == "heuristic" and "converged" in est.diagnostics


def random_instance(rng):
    k = int(rng.integers(2, 4))
    p = float(rng.choice([1.0, 1.3, 1.5, 2.0, 2.5, 3.0, 4.0]))
    m = int(rng.integers(3, 10))
    if rng.random() < 0.5:
        A = gen_matrix(k, m, int(rng.integers(1, m + 1)), p, int(rng.integers(1 << 30)))
    else:
        A = rng.standard_normal((m, k)) * (rng.random((m, k)) < 0.6)
    return A, tuple(range(k)), p


@pytest.mark.parametrize("case", range(30))
def test_heuristic_matches_oracle(case):
    A, S, p = random_instance(np.random.default_rng(case))
    h, o = rip_on_support(A, S, p), brute_oracle(A, S, p)
    band = o.diagnostics["band"]
    assert abs(h.hi_min - o.hi_min) <= band + 1e-9
    assert abs(h.lo_max - o.lo_max) <= band + 1e-9
    # attained values always sit inside the certified brackets
    assert o.lo_min - 1e-12 <= h.hi_min and h.lo_max <= o.hi_max + 1e-12
    assert sign_vector_bound(A, S, p) <= o.hi_max + 1e-12


@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_certified_bounds_bracket_samples(seed, p):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((6, 3)) * (rng.random((6, 3)) < 0.5)
    lo, hi = certified_bounds(B, p)
    X = rng.standard_normal((500, 3))
    r = ratios(B, X, p)
    assert lo <= r.min() + 1e-12 and r.max() <= hi + 1e-12


@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.0, 1.5, 2.0, 3.0]), k=st.integers(1, 6))
def test_binary_fast_path_matches_dense(seed, p, k):
    A = gen_matrix(8, 20, 5, p, seed)
    S = tuple(range(k))
    assert binary_certified_bounds(A, S, p) == pytest.approx(certified_bounds(submatrix(A, S), p), rel=1e-12)


@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_merged_rows_preserve_ratios(seed, p):
    A = gen_matrix(4, 6, 3, p, seed)
    B, M = submatrix(A, (0, 1, 2, 3)), merged_submatrix(A, (0, 1, 2, 3), p)
    X = np.random.default_rng(seed).standard_normal((50, 4))
    assert np.allclose(ratios(B, X, p), ratios(M, X, p), rtol=1e-12)
    assert np.allclose(certified_bounds(B, p), certified_bounds(M, p), rtol=1e-12)


@pytest.mark.parametrize("c", [0.5, 3.0])
def test_scale_equivariance(c):
    A = gen_matrix(6, 10, 3, 2.0, 4)
    S = (0, 1, 2)
    base, scaled = rip_on_support(A, S, 2.0, FAST), rip_on_support(ScaledMatrix(A, c), S, 2.0, FAST)
    for f in ("lo_min", "hi_min", "lo_max", "hi_max"):
        assert getattr(scaled, f) == pytest.approx(c * getattr(base, f), rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_single_columns_are_isometric(p):
    A = gen_matrix(10, 30, 6, p, 1)
    for j in range(10):
        est = certified_estimate(A, (j,), p)
        assert abs(est.lo_min - 1) <= 1e-12 and abs(est.hi_max - 1) <= 1e-12


def test_sampled_identity():
    res = rip_sampled(np.eye(10), 3, 1.5, num_supports=10, opts=FAST)
    assert res.worst_min == pytest.approx(1.0) and res.worst_max == pytest.approx(1.0)


def test_sampled_planted_collisions():
    A = gen_matrix(20, 200, 10, 2.0, 0)
    sup = A.supports.copy()
    sup[1::2] = sup[::2]  # columns come in identical pairs
    B = from_supports(sup, m=200, p=2.0)
    assert not check_incoherence(B, 3, 0.25).passed
    res = rip_sampled(B, 3, 2.0, num_supports=100, opts=FAST)
    assert res.worst_max ** 2 > 1 + 0.25


def test_fold_is_most_extreme():
    A = gen_matrix(12, 30, 5, 1.5, 3)
    res = rip_sampled(A, 3, 1.5, num_supports=12, opts=FAST, seed=2)
    assert res.worst_min == min(e.hi_min for e in res.estimates)
    assert res.worst_max == max(e.lo_max for e in res.estimates)
    assert res.certified_min == min(e.lo_min for e in res.estimates)
    assert fold(res.estimates[:3], 3, 1.5).worst_max <= res.worst_max


def test_sampled_deterministic_and_thread_independent():
    A = gen_matrix(30, 60, 6, 3.0, 9)
    a = rip_sampled(A, 4, 3.0, num_supports=8, opts=FAST, seed=5, threads=1)
    b = rip_sampled(A, 4, 3.0, num_supports=8, opts=FAST, seed=5, threads=4)
    assert a.to_json_dict() == b.to_json_dict()


def test_sampled_certified_mode_never_optimistic():
    A = gen_matrix(30, 60, 6, 3.0, 9)
    c = rip_sampled(A, 3, 3.0, num_supports=10, seed=1, mode="certified")
    h = rip_sampled(A, 3, 3.0, num_supports=10, opts=FAST, seed=1)
    assert c.certified_min <= h.worst_min + 1e-12 and h.worst_max <= c.certified_max + 1e-12
    with pytest.raises(ValueError):
        rip_sampled(A, 3, 3.0, mode="bogus")


def test_lower_tail_on_incoherent_plan_matrix():
    plan = plan_params(128, 4, 2.0, 0.25)
    A = gen_from_plan(plan, 0)
    assert check_incoherence(A, 4, 0.25).passed
    res = rip_sampled(A, 4, 2.0, num_supports=10, opts=FAST)
    assert res.worst_min >= (1 - 0.25) ** 0.5
    assert res.certified_min >= (1 - 0.25) ** 0.5
