"""l1 minimization under a p-norm residual constraint, the recovery guarantee,
the claim-by-claim error analysis replayed on instances, and the converse
(recovery implies a lower isometry)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import config
from ._rng import stream
from .matrix import as_csc
from .ripcheck import certified_bounds, submatrix


def pnorm(v, p: float) -> float:
    v = np.abs(np.asarray(v, dtype=float))
    if v.size == 0:
        return 0.0
    if math.isinf(p):
        return float(v.max())
    vmax = float(v.max())
    if vmax == 0.0:
        return 0.0
    return vmax * float(np.sum((v / vmax) ** p)) ** (1 / p)


# -- projection ----------------------------------------------------------------------


def _project_l1(v, r):
    a = np.abs(v)
    if a.sum() <= r:
        return v.copy()
    mu = np.sort(a)[::-1]
    cs = np.cumsum(mu)
    j = np.arange(1, a.size + 1)
    rho = np.nonzero(mu * j > cs - r)[0][-1]
    theta = (cs[rho] - r) / (rho + 1)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def _shrink(a, lam, p):
    """Solve ``w + lam p w^(p-1) = a`` for ``w >= 0`` coordinatewise (``a >= 0``).

    For ``p >= 2`` the map is convex in ``w``; for ``p < 2`` it is convex in
    ``s = w^(p-1)``.  Newton started above the root then decreases monotonically.
    """
    if p >= 2:
        w = np.minimum(a, (a / (lam * p)) ** (1 / (p - 1)))
        for _ in range(100):
            f = w + lam * p * w ** (p - 1) - a
            step = f / (1 + lam * p * (p - 1) * w ** (p - 2))
            w = np.maximum(w - step, 0.0)
            if np.all(np.abs(step) <= 1e-15 * np.maximum(a, 1e-300)):
                break
        return w
    q = 1 / (p - 1)
    s = np.minimum(a ** (p - 1), a / (lam * p))
    for _ in range(100):
        g = s**q + lam * p * s - a
        step = g / (q * s ** (q - 1) + lam * p)
        s = np.maximum(s - step, 0.0)
        if np.all(np.abs(step) <= 1e-15 * np.maximum(s, 1e-300)):
            break
    return s**q


class _PBallProjector:
    """Euclidean projection onto ``{u : ||u||_p <= r}``, warm-starting the multiplier."""

    def __init__(self, p: float):
        self.p = p
        self.lam = None

    def __call__(self, v, r):
        p = self.p
        v = np.asarray(v, dtype=float)
        if r < 0:
            raise ValueError("radius must be >= 0")
        if r == 0:
            return np.zeros_like(v)
        nv = pnorm(v, p)
        if nv <= r:
            return v.copy()
        if nv <= r * (1 + 1e-12):  # on the sphere up to rounding
            return v * (r / nv)
        if p == 1:
            return _project_l1(v, r)
        if p == 2:
            return v * (r / np.linalg.norm(v))
        if math.isinf(p):
            return np.clip(v, -r, r)
        a = np.abs(v)
        scale = float(a.max())
        a = a / scale
        rr = r / scale
        target = math.log(rr) * p

        def h(ell):
            """log phi(e^ell) - target and its derivative in ell."""
            lam = math.exp(ell)
            w = _shrink(a, lam, p)
            wp1 = w ** (p - 1)
            s = float(np.sum(wp1 * w))
            if s <= 0:
                return -math.inf, 0.0, w
            if p >= 2:
                dw = -p * wp1 / (1 + lam * p * (p - 1) * w ** (p - 2))
            else:
                dw = -p * w / (w ** (2 - p) + lam * p * (p - 1))
            ds = float(np.sum(p * wp1 * dw))
            return math.log(s) - target, lam * ds / s, w

        # log phi is decreasing in log lam: bracket, then safeguarded Newton
        ell = math.log(self.lam) if self.lam else 0.0
        lo, hi = -math.inf, math.inf
        f, df, w = h(ell)
        for _ in range(300):
            if f > 0:
                lo = ell
            else:
                hi = ell
            if abs(f) <= 1e-13 or hi - lo <= 1e-15:
                break
            step = -f / df if df < 0 else math.inf
            cand = ell + step
            if not (lo < cand < hi) or not math.isfinite(cand):
                if math.isfinite(lo) and math.isfinite(hi):
                    cand = 0.5 * (lo + hi)
                else:
                    cand = ell + (2.0 if f > 0 else -2.0)
            ell = cand
            f, df, w = h(ell)
        lam = math.exp(ell)
        self.lam = lam
        u = np.sign(v) * w * scale
        n = pnorm(u, p)
        return u * (r / n) if n > r else u


def project_p_ball(v, radius: float, p: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto the ``p``-norm ball of the given radius."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return _PBallProjector(float(p))(v, float(radius))


# -- problem / solver ------------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryProblem:
    A: object
    y: np.ndarray
    p: float
    eps: float
    k: int

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        object.__setattr__(self, "y", y)
        m, n = as_csc(self.A).shape
        if y.size != m:
            raise ValueError(f"sketch has length {y.size}, matrix has {m} rows")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not 1 <= self.k <= n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}")


@dataclass(frozen=True)
class RecoveryResult:
    x_hat: np.ndarray
    residual_p: float
    objective: float
    iterations: int
    converged: bool
    claim_ledger: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"x_hat": self.x_hat.tolist(), "residual_p": self.residual_p,
                "objective": self.objective, "iterations": self.iterations,
                "converged": self.converged,
                "claim_ledger": [c.to_json_dict() for c in self.claim_ledger],
                "diagnostics": self.diagnostics}


@dataclass(frozen=True)
class SolverOpts:
    max_iter: int | None = None
    tol: float | None = None
    rho: float = 1.0
    seed: int = 0  # the solver is deterministic; kept for interface symmetry


def l1_minimize(prob: RecoveryProblem, opts: SolverOpts | None = None) -> RecoveryResult:
    """``min ||x||_1`` subject to ``||Ax - y||_p <= eps`` by ADMM.

    Splitting: ``Ax - z = y`` and ``g (x - w) = 0`` with ``z`` in the ``eps`` ball
    and ``||w||_1`` the objective; ``g`` balances the two blocks.  The ``x``
    update reuses one Cholesky factor, ``w`` is a soft threshold and ``z`` a
    ``p``-ball projection.  ``rho`` adapts by residual balancing.
    """
    opts = opts or SolverOpts()
    cfg = config.section("recover")
    max_iter = int(cfg["max_iter"] if opts.max_iter is None else opts.max_iter)
    tol = float(cfg["tol"] if opts.tol is None else opts.tol)
    A = as_csc(prob.A)
    m, n = A.shape
    y, p, eps = prob.y, prob.p, prob.eps
    feas_tol = 100 * tol * max(pnorm(y, p), 1.0)
    if pnorm(y, p) <= eps:  # x = 0 is feasible and has objective 0
        return RecoveryResult(np.zeros(n), pnorm(y, p), 0.0, 0, True,
                              diagnostics={"certificate": "zero", "feas_tol": feas_tol})
    AT = A.T.tocsr()
    G = (AT @ A).toarray()
    g2 = max(float(np.trace(G)) / n, 1e-300)
    g = math.sqrt(g2)
    chol = sla.cho_factor(G + g2 * np.eye(n))
    proj = _PBallProjector(p)
    rho = float(opts.rho) * g2  # scale rho with the operator so the default is sensible
    x = np.zeros(n)
    w = np.zeros(n)
    z = proj(-y, eps)
    u = np.zeros(m)
    v = np.zeros(n)
    ynorm = max(np.linalg.norm(y), 1e-300)
    converged = False
    polished = None
    it = 0
    for it in range(1, max_iter + 1):
        x = sla.cho_solve(chol, AT @ (z + y - u) + g * (g * w - v))
        Ax = A @ x
        z_old, w_old = z, w
        z = proj(Ax - y + u, eps)
        w = np.sign(x + v / g) * np.maximum(np.abs(x + v / g) - 1 / (rho * g2), 0.0)
        r1 = Ax - z - y
        r2 = g * (x - w)
        u += r1
        v += r2
        r_pri = math.sqrt(r1 @ r1 + r2 @ r2)
        r_dual = rho * np.linalg.norm(AT @ (z - z_old) + g2 * (w - w_old))
        scale_pri = max(ynorm, np.linalg.norm(Ax), g * np.linalg.norm(x), 1.0)
        scale_dual = max(rho * np.linalg.norm(AT @ u + g * v), 1.0)
        if r_pri <= tol * scale_pri and r_dual <= tol * scale_dual:
            converged = True
            break
        if eps > 0 and it % 10 == 0:
            polished = polish_kkt(A, y, p, eps, x, tol)
            if polished is not None:
                break
        if it % 10 == 0:
            ratio = (r_pri / scale_pri) / max(r_dual / scale_dual, 1e-300)
            if ratio > 10:
                rho *= 2
                u /= 2
                v /= 2
            elif ratio < 0.1:
                rho /= 2
                u *= 2
                v *= 2
    diag = {"rho": rho, "feas_tol": feas_tol, "admm_converged": converged}
    if polished is not None:
        x_hat, nu = polished
        diag.update(certificate="kkt", multiplier=nu)
        converged = True
    else:
        x_hat = w
        diag["certificate"] = "admm" if converged else "none"
    res = pnorm(A @ x_hat - y, p)
    feasible = res <= eps + feas_tol
    if not feasible and polished is None:  # the unthresholded iterate may be closer to the ball
        res_x = pnorm(A @ x - y, p)
        if res_x < res:
            x_hat, res, feasible = x, res_x, res_x <= eps + feas_tol
    diag["feasible"] = feasible
    return RecoveryResult(x_hat, res, float(np.abs(x_hat).sum()), it, converged and feasible,
                          diagnostics=diag)


def polish_kkt(A, y, p: float, eps: float, x0, tol: float = 1e-8, max_rounds: int | None = None):
    """Active-set Newton on the optimality system, started from the support and signs of ``x0``.

    On support ``T`` with signs ``s`` the optimum satisfies
    ``s + nu A_T^T grad||r||_p = 0`` and ``||r||_p = eps`` with ``r = A_T x_T - y``.
    Each round solves this by damped Newton, drops coordinates whose sign
    flipped and adds the worst off-support violator.  A result is returned only
    when the full conditions hold (signs kept, ``nu > 0``,
    ``|nu (A^T grad)_j| <= 1`` off ``T``), which certifies global optimality.
    Returns ``(x, nu)`` or ``None``.
    """
    if not 1 < p < math.inf or eps <= 0:
        return None
    C = as_csc(A)
    n = C.shape[1]
    x0 = np.asarray(x0, dtype=float)
    T = list(np.flatnonzero(x0))
    if not T:
        return None
    s = {int(j): float(np.sign(x0[j])) for j in T}
    vals = {int(j): float(x0[j]) for j in T}
    nu = None
    for _ in range(max_rounds or 3 * n):
        Tarr = np.array(sorted(vals), dtype=np.int64)
        sv = np.array([s[j] for j in Tarr])
        sol = _newton_kkt(C[:, Tarr], y, p, eps, sv,
                          np.array([vals[j] for j in Tarr]), nu)
        if sol is None:
            return None
        xT, nu = sol
        flipped = np.sign(xT) != sv
        if np.any(flipped):
            # drop every coordinate that crossed zero; later rounds may re-add them
            vals = {int(i): float(v) for i, v, f in zip(Tarr, xT, flipped) if not f}
            s = {j: s[j] for j in vals}
            if not vals:
                return None
            continue
        vals = {int(i): float(v) for i, v in zip(Tarr, xT)}
        r = C[:, Tarr] @ xT - y
        N = pnorm(r, p)
        phi = (np.abs(r) / N) ** (p - 1) * np.sign(r)
        full = nu * (C.T @ phi)
        full[Tarr] = 0.0
        j = int(np.argmax(np.abs(full)))
        if abs(full[j]) <= 1 + tol:
            x = np.zeros(n)
            x[Tarr] = xT
            return x, float(nu)
        s[j] = -float(np.sign(full[j]))
        vals[j] = 0.0
    return None


def _newton_kkt(AT_, y, p, eps, s, xT, nu=None, iters: int = 80):
    AT_ = sp.csc_matrix(AT_)
    def pieces(xT):
        r = AT_ @ xT - y
        N = pnorm(r, p)
        phi = (np.abs(r) / N) ** (p - 1) * np.sign(r)
        return r, N, phi

    def F(xT, nu):
        r, N, phi = pieces(xT)
        return np.concatenate([s + nu * (AT_.T @ phi), [N - eps]])

    if nu is None:
        q = AT_.T @ pieces(xT)[2]
        nu = max(-float(s @ q) / max(float(q @ q), 1e-300), 1e-12)
    Fv = F(xT, nu)
    for _ in range(iters):
        if np.max(np.abs(Fv)) <= 1e-12:
            return xT, nu
        r, N, phi = pieces(xT)
        with np.errstate(divide="ignore", over="ignore"):
            dg = (np.abs(r) / N) ** (p - 2) / N
        if not np.all(np.isfinite(dg)):
            return None
        q = AT_.T @ phi
        H = (p - 1) * ((AT_.T @ sp.diags(dg) @ AT_).toarray() - np.outer(q, q) / N)
        J = np.zeros((s.size + 1, s.size + 1))
        J[:-1, :-1] = nu * H
        J[:-1, -1] = q
        J[-1, :-1] = q
        try:
            step = np.linalg.solve(J, -Fv)
        except np.linalg.LinAlgError:
            return None
        f0 = np.linalg.norm(Fv)
        t = 1.0
        while t > 1e-10:
            xn, nun = xT + t * step[:-1], nu + t * step[-1]
            if nun > 0:
                Fn = F(xn, nun)
                if np.linalg.norm(Fn) < (1 - 1e-4 * t) * f0:
                    break
            t *= 0.5
        else:
            return None
        xT, nu, Fv = xn, nun, Fn
    return (xT, nu) if np.max(np.abs(Fv)) <= 1e-10 else None


# -- guarantee and claims ---------------------------------------------------------------


def top_k(x, k: int) -> np.ndarray:
    """Indices of the ``k`` largest ``|x_j|``: larger magnitude first, then lower index."""
    x = np.asarray(x, dtype=float)
    order = np.lexsort((np.arange(x.size), -np.abs(x)))
    return np.sort(order[:k])


@dataclass(frozen=True)
class GuaranteeCheck:
    lhs: float
    rhs: float
    passed: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def to_json_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "pass": self.passed}


def check_guarantee(x, x_hat, k: int, p: float, eps: float, C1: float | None = None,
                    C2: float | None = None) -> GuaranteeCheck:
    """``||x - x_hat||_p <= C1 k^(1/p-1) ||x_{~S}||_1 + C2 eps`` with ``S`` the top-``k`` set of ``x``."""
    cfg = config.section("recover")
    C1 = float(cfg["C1"] if C1 is None else C1)
    C2 = float(cfg["C2"] if C2 is None else C2)
    x = np.asarray(x, dtype=float)
    S = top_k(x, k)
    tail = np.abs(x).sum() - np.abs(x[S]).sum()
    lhs = pnorm(x - np.asarray(x_hat, dtype=float), p)
    rhs = C1 * max(tail, 0.0) / k ** (1 - 1 / p) + C2 * eps
    return GuaranteeCheck(lhs, rhs, lhs <= rhs)


def theorem_constants(D: float) -> tuple[float, float]:
    """``(C1, C2)`` from the error chain with ``alpha^(1-1/p) = 2D``; both decrease in ``D >= 1``."""
    if D < 1:
        raise ValueError("D must be >= 1")
    return 2 * (1 + 1 / (2 * D)) + 1 / D, 4 * (1 + 1 / (2 * D))


@dataclass(frozen=True)
class ClaimRecord:
    name: str
    lhs: float
    rhs: float
    passed: bool
    applicable: bool = True
    note: str = ""

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def to_json_dict(self) -> dict:
        return {"claim": self.name, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
                "pass": self.passed, "applicable": self.applicable, "note": self.note}


def default_alpha(p: float, D: float = 1.0) -> float:
    return (2 * D) ** (p / (p - 1))


def tail_blocks(h, S, block: int) -> list[np.ndarray]:
    """``T_0, T_1, ...``: the complement of ``S`` in decreasing ``|h|`` (ties to lower index), cut into blocks."""
    h = np.asarray(h, dtype=float)
    rest = np.setdiff1d(np.arange(h.size), S)
    rest = rest[np.lexsort((rest, -np.abs(h[rest])))]
    return [rest[i:i + block] for i in range(0, rest.size, block)]


def audit_recovery_claims(x, x_hat, A, y, eps: float, k: int, alpha: float | None = None,
                          p: float = 2.0, rip: tuple[float, float] | str | None = None,
                          tol: float = 1e-6) -> tuple[ClaimRecord, ...]:
    """Replay the error-analysis chain on one instance.

    ``h = x_hat - x``; ``S`` is the top-``k`` set of ``x`` and ``T_0, T_1, ...``
    are blocks of ``ceil(alpha k)`` coordinates of the rest in decreasing ``|h|``.
    ``rip=(lo, hi)`` supplies isometry constants for the head_error step, which
    is then checked for the rescaled matrix ``A/lo`` at ``D = hi/lo``; ``rip="auto"``
    computes certified constants on exactly the supports that step uses
    (lower on ``S u T_0``, upper on each ``T_i``).  ``tol`` is relative and
    absorbs solver inaccuracy in feasibility and optimality.
    """
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    C = as_csc(A)
    scale = max(pnorm(y, p), np.abs(x).sum(), 1.0)
    atol = tol * scale
    res_hat = pnorm(C @ x_hat - y, p)
    if res_hat > eps + atol:
        raise ValueError(f"x_hat is infeasible: residual {res_hat:.3g} > eps {eps:.3g}")
    x_feasible = pnorm(C @ x - y, p) <= eps + atol
    if alpha is None:
        alpha = default_alpha(p)
    block = math.ceil(alpha * k)
    h = x_hat - x
    S = top_k(x, k)
    mask = np.zeros(x.size, dtype=bool)
    mask[S] = True
    x_tail1 = float(np.abs(x[~mask]).sum())
    hS_p = pnorm(h[S], p)
    kk = k ** (1 - 1 / p)
    aa = alpha ** (1 - 1 / p)
    T = tail_blocks(h, S, block)
    head_rhs = (hS_p + 2 * x_tail1 / kk) / aa

    out = []
    lhs = pnorm(C @ h, p)
    out.append(ClaimRecord("tube", lhs, 2 * eps + 2 * atol, lhs <= 2 * eps + 2 * atol, x_feasible,
                           "" if x_feasible else "reference x is not feasible"))
    lhs = float(np.abs(h[~mask]).sum())
    rhs = float(np.abs(h[S]).sum()) + 2 * x_tail1
    opt_gap = max(np.abs(x_hat).sum() - np.abs(x).sum(), 0.0)
    out.append(ClaimRecord("cone", lhs, rhs, lhs <= rhs + 2 * atol, x_feasible,
                           f"objective gap {opt_gap:.3g}"))
    sum_tails = float(sum(pnorm(h[t], p) for t in T[1:]))
    out.append(ClaimRecord("tail_blocks", sum_tails, head_rhs, sum_tails <= head_rhs + 2 * atol / aa, x_feasible))
    rest = np.ones(x.size, dtype=bool)
    rest[S] = False
    if T:
        rest[T[0]] = False
    lhs = pnorm(h[rest], p)
    out.append(ClaimRecord("tail_mass", lhs, head_rhs, lhs <= head_rhs + 2 * atol / aa, x_feasible))

    if rip is not None:
        head = np.union1d(S, T[0]) if T else S
        if rip == "auto":
            lo = certified_bounds(submatrix(A, head), p)[0]
            hi = max([certified_bounds(submatrix(A, t), p)[1] for t in T[1:]] or [0.0])
            hi = max(hi, lo)
        else:
            lo, hi = map(float, rip)
        D = hi / lo if lo > 0 else math.inf
        lhs = pnorm(h[head], p)
        if lo > 0 and D < aa and x_feasible:
            e = eps / lo
            rhs = 2 * D / (aa - D) * x_tail1 / kk + 2 * aa / (aa - D) * e
            out.append(ClaimRecord("head_error", lhs, rhs, lhs <= rhs + 2 * atol / lo, True, f"D={D:.4g}"))
        else:
            out.append(ClaimRecord("head_error", lhs, math.inf, True, False,
                                   f"requires 0 < lo and D < alpha^(1-1/p)={aa:.4g}; got lo={lo:.4g}, D={D:.4g}"))
    return tuple(out)


# -- converse ---------------------------------------------------------------------------


def operator_norm_bound(A, p: float) -> float:
    """Certified ``||A||_{p->p} <= (max col abs sum)^(1/p) (max row abs sum)^(1-1/p)``."""
    C = abs(as_csc(A))
    col = float(C.sum(axis=0).max()) if C.shape[1] else 0.0
    row = float(C.sum(axis=1).max()) if C.shape[0] else 0.0
    return col ** (1 / p) * row ** (1 - 1 / p)


def sampled_operator_norm(A, p: float, samples: int = 256, seed: int = 0) -> float:
    """Lower estimate of ``||A||_{p->p}`` from basis vectors and random nonnegative vectors."""
    C = as_csc(A)
    n = C.shape[1]
    col = np.asarray(abs(C).power(p).sum(axis=0)).ravel() ** (1 / p)
    best = float(col.max()) if n else 0.0
    rng = stream(seed, 7)
    for _ in range(samples):
        xs = rng.random(n) * (rng.random(n) < rng.uniform(0.05, 1))
        nx = pnorm(xs, p)
        if nx > 0:
            best = max(best, pnorm(C @ xs, p) / nx)
    return best


@dataclass(frozen=True)
class ConverseResult:
    C2_estimate: float
    finite: bool
    witness: list  # k-sparse x attaining the estimate (support and values)
    scale: float  # A was multiplied by this before the argument
    norm_estimate: float
    trials: int

    def to_json_dict(self) -> dict:
        return {"C2_estimate": self.C2_estimate if self.finite else "inf", "finite": self.finite,
                "witness": self.witness, "scale": self.scale,
                "norm_estimate": self.norm_estimate, "trials": self.trials}


def default_recover_fn(p: float, k: int, opts: SolverOpts | None = None) -> Callable:
    def fn(A, y):
        return l1_minimize(RecoveryProblem(A, y, p, 0.0, k), opts).x_hat
    return fn


def rip_from_recovery(A, recover_fn: Callable | None, k: int, p: float, trials: int = 1000,
                      seed: int = 0, normalize: bool = True, tol: float = 1e-9) -> ConverseResult:
    """Empirical lower-isometry constant implied by a recovery procedure.

    The converse needs ``||A||_p <= 1``; with ``normalize`` the matrix is first
    divided by :func:`operator_norm_bound`, which makes that provable.  Then the
    decoder must send the zero sketch to zero, and for ``k``-sparse ``x`` the
    sketch ``y = Ax + e`` with ``e = -Ax`` is zero, so ``||x||_p <= C2 ||Ax||_p``.
    Basis vectors are probed first, so a zero column yields ``C2 = inf``.
    """
    C = as_csc(A)
    m, n = C.shape
    scale = 1.0
    if normalize:
        nb = operator_norm_bound(C, p)
        if nb > 0:
            scale = 1.0 / nb
            C = C * scale
    norm_est = sampled_operator_norm(C, p, seed=seed)
    if norm_est > 1 + 1e-9:
        raise ValueError(f"sampled ||A||_p = {norm_est:.6g} exceeds 1; the converse does not apply")
    fn = recover_fn or default_recover_fn(p, k)
    x0 = np.asarray(fn(C, np.zeros(m)), dtype=float)
    if np.max(np.abs(x0), initial=0.0) > tol:
        raise ValueError("recover_fn(0) != 0: the converse argument is inapplicable")
    best, witness = 0.0, []
    for j in range(n):
        col = C[:, [j]].toarray().ravel()
        val = pnorm(col, p)
        r = math.inf if val == 0 else 1.0 / val
        if r > best:
            best, witness = r, [[j], [1.0]]
        if math.isinf(r):
            return ConverseResult(math.inf, False, witness, scale, norm_est, j + 1)
    rng = stream(seed, 8)
    for t in range(trials):
        sup = np.sort(rng.choice(n, size=min(k, n), replace=False))
        vals = rng.standard_normal(sup.size)
        ax = pnorm(C[:, sup] @ vals, p)
        r = math.inf if ax == 0 else pnorm(vals, p) / ax
        if r > best:
            best, witness = r, [sup.tolist(), vals.tolist()]
        if math.isinf(r):
            break
    return ConverseResult(best, math.isfinite(best), witness, scale, norm_est, n + trials)
