import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ripkit.construct import gen_from_plan, gen_matrix, plan_params
from ripkit.recover import (RecoveryProblem, SolverOpts, audit_recovery_claims, check_guarantee,
                            default_alpha, l1_minimize, pnorm, project_p_ball, rip_from_recovery,
                            tail_blocks, theorem_constants, top_k)


def instance(plan, seed, noise=0.0):
    A = gen_from_plan(plan, seed)
    rng = np.random.default_rng(seed)
    x = np.zeros(plan.n)
    x[rng.choice(plan.n, plan.k, replace=False)] = rng.standard_normal(plan.k)
    e = rng.standard_normal(A.m)
    e = e * noise / pnorm(e, plan.p) if noise else 0 * e
    return A, x, A.matvec(x) + e


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_identity_exact(p):
    res = l1_minimize(RecoveryProblem(np.eye(2), np.array([1.0, 0.0]), p, 0.0, 1))
    assert np.allclose(res.x_hat, [1.0, 0.0], atol=1e-8) and res.converged


@pytest.mark.parametrize("eps", [0.0, 0.5])
def test_zero_sketch(eps):
    A = gen_matrix(10, 20, 3, 2.0, 0)
    res = l1_minimize(RecoveryProblem(A, np.zeros(20), 2.0, eps, 2))
    assert np.all(res.x_hat == 0) and res.converged and res.objective == 0


def test_problem_validation():
    with pytest.raises(ValueError):
        RecoveryProblem(np.eye(3), np.zeros(2), 2.0, 0.0, 1)
    with pytest.raises(ValueError):
        RecoveryProblem(np.eye(3), np.zeros(3), 2.0, -1.0, 1)
    with pytest.raises(ValueError):
        RecoveryProblem(np.eye(3), np.zeros(3), 0.5, 0.0, 1)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_noiseless_recovery(p):
    plan = plan_params(64, 3, p, 0.25)
    for seed in range(3):
        A, x, y = instance(plan, seed)
        res = l1_minimize(RecoveryProblem(A, y, p, 0.0, 3))
        assert res.converged and pnorm(x - res.x_hat, p) <= 1e-3


@pytest.mark.parametrize("p", [1.5, 2.0])
def test_noisy_recovery_sandwich(p):
    plan = plan_params(64, 3, p, 0.25)
    for seed in range(3):
        A, x, y = instance(plan, seed, noise=0.1)
        res = l1_minimize(RecoveryProblem(A, y, p, 0.1, 3))
        assert res.converged and res.diagnostics["certificate"] == "kkt"
        assert res.residual_p <= 0.1 * (1 + 1e-6)
        assert res.objective <= np.abs(x).sum() + 1e-8
        assert check_guarantee(x, res.x_hat, 3, p, 0.1).passed
        claims = audit_recovery_claims(x, res.x_hat, A, y, 0.1, 3, p=p, rip="auto")
        assert all(c.passed for c in claims if c.applicable)
        assert claims[0].name == "tube" and claims[0].lhs <= 0.2 + 1e-6


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, math.inf])
def test_projection_inside_unchanged(p):
    v = np.array([0.1, -0.2, 0.05])
    assert np.array_equal(project_p_ball(v, 1.0, p), v)


def test_projection_p2_radial():
    v = np.array([3.0, 4.0])
    assert np.allclose(project_p_ball(v, 1.0, 2.0), v / 5)


def grid_projection_2d(v, r, p, n=200_001):
    t = np.linspace(0, 2 * np.pi, n)
    c, s = np.cos(t), np.sin(t)
    norm = (np.abs(c) ** p + np.abs(s) ** p) ** (1 / p)
    U = r * np.stack([c / norm, s / norm], axis=1)
    return U[np.argmin(np.sum((U - v) ** 2, axis=1))]


@pytest.mark.parametrize("p", [1.0, 1.5, 3.0])
@pytest.mark.parametrize("seed", range(4))
def test_projection_grid_oracle_2d(p, seed):
    v = np.random.default_rng(seed).standard_normal(2)
    v = v / pnorm(v, p) * 2  # start outside the ball
    r = 0.5
    u = project_p_ball(v, r, p)
    assert pnorm(u, p) == pytest.approx(r, abs=1e-9)
    assert np.linalg.norm(u - grid_projection_2d(v, r, p)) <= 1e-3
    assert np.linalg.norm(v - u) <= np.linalg.norm(v - grid_projection_2d(v, r, p)) + 1e-12


@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.2, 1.5, 2.5, 4.0]), n=st.integers(1, 30))
def test_projection_kkt(seed, p, n):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) * 5
    u = project_p_ball(v, 1.0, p)
    if pnorm(v, p) <= 1:
        return
    assert pnorm(u, p) == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.sign(u) * np.sign(v) >= 0) and np.all(np.abs(u) <= np.abs(v) + 1e-12)
    # v - u is parallel to the gradient of ||u||_p^p
    g = np.sign(u) * np.abs(u) ** (p - 1)
    mask = np.abs(u) > 1e-6
    lam = (v - u)[mask] / g[mask]
    assert np.ptp(lam) <= 1e-6 * max(1.0, np.abs(lam).max())


@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf]))
def test_projection_idempotent_nonexpansive(seed, p):
    rng = np.random.default_rng(seed)
    v, w = rng.standard_normal((2, 12)) * 3
    u = project_p_ball(v, 1.0, p)
    assert np.allclose(project_p_ball(u, 1.0, p), u, atol=1e-10)
    assert np.linalg.norm(u - project_p_ball(w, 1.0, p)) <= np.linalg.norm(v - w) + 1e-9


def test_projection_zero_radius():
    assert np.all(project_p_ball(np.ones(3), 0.0, 1.5) == 0)


def test_guarantee_examples():
    x = np.array([0.0, 2.0, 0.0, -1.0])
    assert check_guarantee(x, x, 2, 1.5, 0.0, C1=0, C2=0).passed
    e1 = np.array([1.0, 0.0])
    g = check_guarantee(e1, np.zeros(2), 1, 2.0, 0.0, C1=100.0, C2=100.0)
    assert not g.passed and g.lhs == 1.0 and g.rhs == 0.0


def test_top_k_tie_break():
    assert top_k(np.array([1.0, -3.0, 3.0, 1.0, 0.5]), 3).tolist() == [0, 1, 2]


def test_theorem_constants():
    assert theorem_constants(1.0) == pytest.approx((4.0, 6.0))
    c1, c2 = theorem_constants(3.0)
    assert c1 < 4 and c2 < 6
    with pytest.raises(ValueError):
        theorem_constants(0.5)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_default_alpha(p):
    assert default_alpha(p) == pytest.approx(2 ** (p / (p - 1)))
    assert default_alpha(p) ** (1 - 1 / p) == pytest.approx(2.0)


def test_claims_exact_recovery_zero_error():
    A = gen_matrix(20, 40, 4, 2.0, 0)
    x = np.zeros(20)
    x[[1, 5]] = [1.0, -2.0]
    y = A.matvec(x)
    claims = audit_recovery_claims(x, x, A, y, 0.0, 2, p=2.0, rip="auto")
    for c in claims:
        if c.applicable:
            assert c.passed and c.lhs == 0 and c.slack == pytest.approx(c.rhs)


def test_claims_reject_infeasible():
    A = gen_matrix(20, 40, 4, 2.0, 0)
    x = np.zeros(20)
    x[3] = 1.0
    with pytest.raises(ValueError):
        audit_recovery_claims(x, np.zeros(20), A, A.matvec(x), 0.1, 1, p=2.0)


@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.2, 1.5, 2.0, 3.0]), k=st.integers(1, 4))
def test_block_inequalities_pure_algebra(seed, p, k):
    rng = np.random.default_rng(seed)
    n = 40
    h = rng.standard_normal(n) * rng.exponential(size=n)
    S = rng.choice(n, k, replace=False)
    alpha = default_alpha(p)
    T = tail_blocks(h, S, math.ceil(alpha * k))
    rest = np.setdiff1d(np.arange(n), S)
    tails = sum(pnorm(h[t], p) for t in T[1:])
    # each later block is dominated entrywise by the mean magnitude of the previous one
    assert tails <= np.abs(h[rest]).sum() / (alpha * k) ** (1 - 1 / p) + 1e-9
    far = np.setdiff1d(rest, T[0]) if T else rest
    assert pnorm(h[far], p) <= tails + 1e-9


@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.5, 2.0, 3.0]))
def test_tail_claims_follow_cone(seed, p):
    rng = np.random.default_rng(seed)
    A = gen_matrix(30, 60, 4, p, seed)
    x = np.zeros(30)
    x[rng.choice(30, 3, replace=False)] = rng.standard_normal(3)
    x += 0.01 * rng.standard_normal(30)
    h = 0.1 * rng.standard_normal(30)
    y = A.matvec(x + h)
    eps = pnorm(A.matvec(h), p)
    claims = {c.name: c for c in audit_recovery_claims(x, x + h, A, y, eps, 3, p=p)}
    if claims["cone"].passed:
        assert claims["tail_blocks"].passed and claims["tail_mass"].passed


def test_converse_identity():
    res = rip_from_recovery(np.eye(6), None, 2, 1.5, trials=50)
    assert res.C2_estimate == pytest.approx(1.0) and res.finite


def test_converse_zero_column():
    M = np.eye(5)
    M[:, 3] = 0
    res = rip_from_recovery(M, None, 2, 2.0, trials=20)
    assert not res.finite and math.isinf(res.C2_estimate) and res.witness[0] == [3]


def test_converse_rejects_bad_decoder():
    with pytest.raises(ValueError):
        rip_from_recovery(np.eye(4), lambda A, y: np.ones(4), 1, 2.0, trials=5)


def test_converse_deterministic():
    plan = plan_params(128, 4, 2.0, 0.25)
    A = gen_from_plan(plan, 0)
    a = rip_from_recovery(A, None, 4, 2.0, trials=100, seed=1)
    b = rip_from_recovery(A, None, 4, 2.0, trials=100, seed=1)
    assert a == b and a.finite
