"""Instance-level audits of necessary conditions for RIP-p and property tests of the
scalar inequalities used in the expander analysis.

A matrix with ``||x||_p <= ||Ax||_p <= D ||x||_p`` on ``k``-sparse ``x`` must have
column ``p``-th-power sums in ``[1, D^p]``, row order statistics
``b_{i,t} <= D t^(1/p-1)``, and a squared-entry sum on the correct side of
``n (k/m)^(2/p-1)``.  The audits evaluate these consequences on concrete
matrices; a violation on a matrix whose distortion was measured correctly
means a bug somewhere in the pipeline.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from . import config
from ._rng import stream
from .matrix import as_csc
from .ripcheck import certified_estimate, fold, random_support
from .parallel import pmap


@dataclass(frozen=True)
class AuditResult:
    name: str
    passed: bool
    slack: float  # min over checked inequalities of (bound - value); negative on failure
    worst: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"name": self.name, "pass": self.passed, "slack": self.slack, "worst": self.worst}


def _finite_D(D):
    if not (math.isfinite(D) and D > 0):
        raise ValueError(f"D must be positive and finite, got {D}")


def audit_column_pnorms(A, p: float, D: float) -> AuditResult:
    """Every column's ``sum_i |A_ij|^p`` lies in ``[1, D^p]``."""
    _finite_D(D)
    C = as_csc(A)
    s = np.asarray(abs(C).power(p).sum(axis=0)).ravel()
    lo_slack = s - 1.0
    hi_slack = D**p - s
    slack = np.minimum(lo_slack, hi_slack)
    j = int(np.argmin(slack))
    return AuditResult("columns", bool(slack[j] >= -1e-12), float(slack[j]),
                       {"column": j, "pth_power_sum": float(s[j]), "upper": D**p})


def row_order_stats(A, t_max: int) -> np.ndarray:
    """``b[i, t-1]``: the ``t``-th largest ``|A_ij|`` in row ``i`` for ``t <= t_max`` (0 past the row's support)."""
    R = sp.csr_matrix(as_csc(A))
    R.eliminate_zeros()
    m = R.shape[0]
    lens = np.diff(R.indptr)
    width = max(int(lens.max()) if m else 0, t_max)
    P = np.zeros((m, width))
    rows = np.repeat(np.arange(m), lens)
    pos = np.arange(R.nnz) - np.repeat(R.indptr[:-1], lens)
    P[rows, pos] = np.abs(R.data)
    if width > t_max:
        P = -np.partition(-P, t_max - 1, axis=1)[:, :t_max]
    return -np.sort(-P, axis=1)[:, :t_max]


def audit_row_order_stats(A, p: float, D: float, k: int) -> AuditResult:
    """``max_i b_{i,t} <= D t^(1/p-1)`` for ``t <= k`` and ``<= D k^(1/p-1)`` at ``t = k+1``."""
    _finite_D(D)
    b = row_order_stats(A, k + 1)
    t = np.arange(1, k + 2, dtype=float)
    bound = D * np.minimum(t, k) ** (1 / p - 1)
    top = b.max(axis=0)
    slack = bound - top
    w = int(np.argmin(slack))
    return AuditResult("rows", bool(slack[w] >= -1e-12), float(slack[w]),
                       {"t": w + 1, "row": int(np.argmax(b[:, w])), "b": float(top[w]),
                        "bound": float(bound[w]), "b_table": top.tolist()})


def audit_frobenius(A, p: float, D: float, k: int) -> AuditResult:
    """Squared-entry sum against ``n (k/m)^(2/p-1)``: lower bound for ``p <= 2``, ``D^2`` times it as upper bound for ``p >= 2``.

    At ``p = 2`` both branches are checked.
    """
    _finite_D(D)
    C = as_csc(A)
    m, n = C.shape
    s = float(C.power(2).sum())
    base = n * (k / m) ** (2 / p - 1)
    slacks = {}
    if p <= 2:
        slacks["lower"] = s - base
    if p >= 2:
        slacks["upper"] = D**2 * base - s
    key = min(slacks, key=slacks.get)
    return AuditResult("frobenius", bool(slacks[key] >= -1e-9 * max(1.0, s)), float(slacks[key]),
                       {"branch": key, "sum_sq": s, "base": base})


# -- closed-form bounds -------------------------------------------------------------


@dataclass(frozen=True)
class DimensionBound:
    n: int
    k: int
    p: float
    D: float
    branch_values: tuple[float, float]
    m_min: float

    def satisfied(self, m: int) -> tuple[bool, bool]:
        return (m >= self.branch_values[0], m >= self.branch_values[1])

    def to_json_dict(self) -> dict:
        return {**asdict(self), "branch_values": list(self.branch_values)}


P2_NOTE = "p = 2 is a singular case: this row-count bound is vacuous there, use p != 2"


def dimension_bound(n: int, k: int, p: float, D: float, constants: dict | None = None) -> DimensionBound:
    """Both branch values of the row-count lower bound; ``m`` must exceed at least one."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    if p == 2:
        raise ValueError(P2_NOTE)
    if D < 1:
        raise ValueError("D must be >= 1")
    c = config.section("audit", constants)
    c1, c2 = float(c["dimension_C1"]), float(c["dimension_C2"])
    if p < 2:
        b1 = ((2 - p) * n / (p * D**2)) ** (p / 2)
        b2 = k**p / D ** (2 * p / (2 - p))
    else:
        b1 = n / (2 * k)
        b2 = k**p / D ** (p * p / (p - 2))
    vals = (c1 * b1, c2 * b2)
    return DimensionBound(n, k, float(p), float(D), vals, min(vals))


def sparsity_bound(k: int, p: float, D: float) -> float:
    """Minimum column sparsity ``k^(p-1) / D^p`` (unless ``m > n/k``)."""
    if D <= 0:
        raise ValueError("D must be positive")
    return k ** (p - 1) / D**p


def check_sparsity(A, k: int, p: float, D: float) -> AuditResult:
    C = as_csc(A)
    m, n = C.shape
    C = C.copy()
    C.eliminate_zeros()
    d = int(np.diff(C.indptr).max()) if n else 0
    d_min = sparsity_bound(k, p, D)
    wide = m > n / k
    return AuditResult("sparsity", bool(wide or d >= d_min), float(d - d_min),
                       {"d": d, "d_min": d_min, "m_exceeds_n_over_k": bool(wide)})


# -- measured distortion and the combined report ---------------------------------------


def row_top_supports(A, k: int, limit: int = 2000) -> list[tuple[int, ...]]:
    """For the heaviest rows, the ``k`` columns with the largest ``|A_ij|`` (ties to lower index)."""
    R = sp.csr_matrix(as_csc(A))
    R.eliminate_zeros()
    n = R.shape[1]
    lens = np.diff(R.indptr)
    order = np.argsort(-lens, kind="stable")[:limit]
    out = set()
    for i in order:
        if lens[i] == 0:
            break
        cols = R.indices[R.indptr[i]:R.indptr[i + 1]]
        vals = np.abs(R.data[R.indptr[i]:R.indptr[i + 1]])
        top = cols[np.lexsort((cols, -vals))][:k]
        if top.size < k:  # pad with the smallest unused columns
            extra = np.setdiff1d(np.arange(n), top)[: k - top.size]
            top = np.concatenate([top, extra])
        out.add(tuple(sorted(int(c) for c in top)))
    return sorted(out)


def top_overlap_supports(A, k: int, pairs: int = 64) -> list[tuple[int, ...]]:
    """Supports seeded by the most overlapping column pairs, padded greedily."""
    C = as_csc(A)
    n = C.shape[1]
    if n < 2:
        return []
    G = abs(C.T @ C).tocoo()
    mask = G.row < G.col
    r, c, v = G.row[mask], G.col[mask], G.data[mask]
    if v.size == 0:
        return []
    idx = np.lexsort((c, r, -v))[:pairs]
    out = set()
    Gc = abs(C.T @ C).tocsr()
    for a, b in zip(r[idx], c[idx]):
        S = [int(a), int(b)]
        while len(S) < k:
            w = np.asarray(Gc[S].sum(axis=0)).ravel()
            w[S] = -1
            S.append(int(np.argmax(w)))
        out.add(tuple(sorted(S[:k])))
    return sorted(out)


@dataclass(frozen=True)
class MeasuredDistortion:
    lo: float  # certified lower isometry over the audited supports
    hi: float  # certified upper isometry over the audited supports
    supports_checked: int
    witnesses: dict

    @property
    def D(self) -> float:
        return self.hi / self.lo if self.lo > 0 else math.inf


def measured_distortion(A, k: int, p: float, num_supports: int = 200, seed: int = 0,
                        threads: int | None = None) -> MeasuredDistortion:
    """Certified ``[lo, hi]`` ratio bracket over random, row-top and high-overlap supports.

    The row-top supports are the ones that make row order statistics large,
    and the high-overlap supports expose near-duplicate columns.
    """
    n = as_csc(A).shape[1]
    k = min(k, n)
    sups = [random_support(n, k, seed, i) for i in range(num_supports)]
    sups += row_top_supports(A, k) + top_overlap_supports(A, k)
    sups += [(j,) for j in range(n)]  # single columns pin lo <= 1 <= hi for normalized inputs
    ests = pmap(lambda s: certified_estimate(A, s, p), sups, threads)
    agg = fold(ests, k, p)
    return MeasuredDistortion(agg.certified_min, agg.certified_max, len(sups), agg.support_witnesses)


@dataclass(frozen=True)
class LowerBoundReport:
    p: float
    k: int
    D: float
    scale: float
    lower_isometry: bool
    results: tuple[AuditResult, ...]
    b_table: tuple[float, ...]
    dimension: dict | None = None

    @property
    def passed(self) -> bool:
        return self.lower_isometry and all(r.passed for r in self.results)

    @property
    def flags(self) -> dict:
        return {"lower_isometry": self.lower_isometry, **{r.name: r.passed for r in self.results}}

    def to_json_dict(self) -> dict:
        return {"p": self.p, "k": self.k, "D": self.D if math.isfinite(self.D) else "inf",
                "scale": self.scale, "pass": self.passed, "flags": self.flags,
                "slack": {r.name: r.slack for r in self.results},
                "results": [r.to_json_dict() for r in self.results],
                "b_table": list(self.b_table), "dimension": self.dimension}


def audit_lower_bounds(A, p: float, k: int, D: float | None = None, num_supports: int = 200,
                       seed: int = 0, threads: int | None = None) -> LowerBoundReport:
    """Run every lower-bound audit at a given or measured distortion.

    With ``D=None`` the distortion is measured, ``A`` is rescaled by ``1/lo`` so
    that its lower isometry constant is 1, and the audits run at ``D = hi/lo``.
    If no positive lower isometry can be certified (a zero or duplicated
    column, say) the report fails on ``lower_isometry`` and the remaining
    audits run unscaled with ``D = hi``.
    """
    C = as_csc(A)
    m, n = C.shape
    if D is None:
        md = measured_distortion(A, k, p, num_supports, seed, threads)
        ok = md.lo > 0
        scale = 1.0 / md.lo if ok else 1.0
        D_used = md.D if ok else max(md.hi, 1.0)
    else:
        _finite_D(D)
        ok, scale, D_used = True, 1.0, float(D)
    As = C * scale
    results = (audit_column_pnorms(As, p, D_used), audit_row_order_stats(As, p, D_used, k),
               audit_frobenius(As, p, D_used, k), check_sparsity(As, k, p, D_used))
    dim = None
    if p != 2 and p > 1:
        db = dimension_bound(n, k, p, max(D_used, 1.0))
        dim = {**db.to_json_dict(), "m": m, "satisfied": list(db.satisfied(m))}
        results += (AuditResult("dimension", bool(m >= db.m_min), float(m - db.m_min),
                                {"branch_values": list(db.branch_values)}),)
    return LowerBoundReport(float(p), int(k), float(D_used), scale, ok, results,
                            tuple(results[1].worst["b_table"]), dim)


# -- scalar inequalities -------------------------------------------------------------


@dataclass(frozen=True)
class InequalityReport:
    name: str
    samples: int
    violations: int
    max_ratio: float  # largest observed lhs / rhs-scale
    worst: dict

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json_dict(self) -> dict:
        return {**asdict(self), "pass": self.passed}


def scalar_gap_ratio(a, b, p):
    """``| |a+b|^p - |a|^p - |b|^p | / (|a| |b|^(p-1))`` (0 where ``a b = 0``)."""
    a, b, p = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(p, float))
    lhs = np.abs(np.abs(a + b) ** p - np.abs(a) ** p - np.abs(b) ** p)
    rhs = np.abs(a) * np.abs(b) ** (p - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), 0.0)


def _stratified_ab(rng, n):
    """Four equal strata: generic, ``b`` near ``-a``, ``|b/a|`` log-uniform over 18 decades, near-zero ``b``."""
    q = n // 4
    sizes = [q, q, q, n - 3 * q]
    a = 10.0 ** rng.uniform(-3, 3, n) * rng.choice([-1.0, 1.0], n)
    r = np.concatenate([
        rng.uniform(-4, 4, sizes[0]),
        -1 + 10.0 ** rng.uniform(-12, 0, sizes[1]) * rng.choice([-1.0, 1.0], sizes[1]),
        10.0 ** rng.uniform(-9, 9, sizes[2]) * rng.choice([-1.0, 1.0], sizes[2]),
        10.0 ** rng.uniform(-12, -3, sizes[3]) * rng.choice([-1.0, 1.0], sizes[3]),
    ])
    return a, a * r


def scalar_inequality_test(samples: int = 10**6, seed: int = 0, C: float = 3.0,
                           nterm_samples: int | None = None) -> InequalityReport:
    """``| |a+b|^p - |a|^p - |b|^p | <= C |a| |b|^(p-1)`` for ``p in [1, 2]``, plus the telescoped n-term form."""
    rng = stream(seed, 5)
    a, b = _stratified_ab(rng, samples)
    p = rng.uniform(1, 2, samples)
    p[: samples // 20] = 1.0
    p[samples // 20: samples // 10] = 2.0
    ratio = scalar_gap_ratio(a, b, p)
    viol = int(np.sum(ratio > C))
    w = int(np.argmax(ratio))
    worst = {"a": float(a[w]), "b": float(b[w]), "p": float(p[w]), "ratio": float(ratio[w])}

    nterm = samples // 10 if nterm_samples is None else nterm_samples
    nv, nmax = _nterm_check(rng, nterm, C)
    return InequalityReport("scalar", samples + nterm, viol + nv, max(float(ratio[w]), nmax), worst)


def _nterm_check(rng, samples, C):
    """``| |sum a|^p - sum |a_i|^p | <= C sum_{i<n} |a_i| |sum_{j>i} a_j|^(p-1)``."""
    viol, worst = 0, 0.0
    for N in range(2, 17):
        s = samples // 15
        if s == 0:
            continue
        A = rng.standard_normal((s, N)) * 10.0 ** rng.uniform(-3, 3, (s, N))
        p = rng.uniform(1, 2, (s, 1))
        tails = np.cumsum(A[:, ::-1], axis=1)[:, ::-1]  # tails[:, i] = sum_{j>=i} a_j
        lhs = np.abs(np.abs(tails[:, 0:1]) ** p - np.sum(np.abs(A) ** p, axis=1, keepdims=True))[:, 0]
        rhs = np.sum(np.abs(A[:, :-1]) * np.abs(tails[:, 1:]) ** (p - 1), axis=1)
        # rounding guard scaled by the largest term
        scale = np.max(np.abs(A), axis=1) ** p[:, 0] * N * 1e-12
        viol += int(np.sum(lhs > C * rhs + scale))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(rhs > 0, lhs / rhs, 0.0)
        worst = max(worst, float(r.max()))
    return viol, worst


def holder_inequality_test(samples: int = 10**5, seed: int = 0, rtol: float = 1e-12) -> InequalityReport:
    """``sum c_i a_i^(p-1) <= ||c||_{1/(2-p)} ||a||_1^(p-1)`` and the all-ones corollary."""
    rng = stream(seed, 6)
    viol, worst_r, worst = 0, 0.0, {}
    done = 0
    for N in (1, 2, 3, 5, 8, 16, 64):
        s = samples // 7 + (1 if N == 1 else 0) * (samples % 7)
        if s == 0:
            continue
        a = rng.exponential(size=(s, N)) * 10.0 ** rng.uniform(-4, 4, (s, 1))
        c = rng.exponential(size=(s, N)) * 10.0 ** rng.uniform(-4, 4, (s, 1))
        sparse = rng.random((s, N)) < 0.2
        a[sparse] = 0.0
        p = rng.uniform(1.0 + 1e-6, 2.0 - 1e-6, (s, 1))
        lhs = np.sum(c * a ** (p - 1), axis=1)
        q = 1 / (2 - p[:, 0])
        cn = np.max(c, axis=1) * np.sum((c / np.max(c, axis=1, keepdims=True)) ** q[:, None], axis=1) ** (1 / q)
        rhs = cn * np.sum(a, axis=1) ** (p[:, 0] - 1)
        cor_l = np.sum(a ** (p - 1), axis=1)
        cor_r = N ** (2 - p[:, 0]) * np.sum(a, axis=1) ** (p[:, 0] - 1)
        bad = (lhs > rhs * (1 + rtol)) | (cor_l > cor_r * (1 + rtol))
        viol += int(bad.sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(rhs > 0, lhs / rhs, 0.0)
        i = int(np.argmax(r))
        if r[i] > worst_r:
            worst_r, worst = float(r[i]), {"N": N, "p": float(p[i, 0])}
        done += s
    return InequalityReport("holder", done, viol, worst_r, worst)


@dataclass(frozen=True)
class IntegralSum:
    k: int
    ell: int
    p: float
    lhs: float
    scale: float  # k^(1-1/p) / ell
    ratio: float
    rhs_constant: float
    passed: bool

    def to_json_dict(self) -> dict:
        return asdict(self)


def integral_sum_check(k: int, ell: int, p: float = 1.5, constant: float | None = None) -> IntegralSum:
    """``sum_{b=2}^{ceil(k/ell)} ((b-1) ell + 1)^(-1/p)`` against ``c k^(1-1/p) / ell``.

    Default ``c = p/(p-1)``: the sum is at most ``ell^(-1/p) int_0^{k/ell} x^(-1/p) dx``.
    """
    if not 1 <= ell <= k:
        raise ValueError(f"need 1 <= ell <= k, got ell={ell}, k={k}")
    if p <= 1:
        raise ValueError("p must exceed 1")
    if constant is None:
        constant = config.section("audit")["integral_ratio_bound"]
    c = p / (p - 1) if constant is None else float(constant)
    B = -(-k // ell)
    b = np.arange(2, B + 1, dtype=float)
    lhs = float(np.sum(((b - 1) * ell + 1) ** (-1 / p)))
    scale = k ** (1 - 1 / p) / ell
    ratio = lhs / scale
    return IntegralSum(k, ell, float(p), lhs, scale, ratio, c, ratio <= c)
