"""Monte-Carlo and exact checks of row-load moments, negative association,
Latała's moment bound and the upper-tail estimate for random binary matrices.

Throughout, a reference column occupies ``d`` rows; ``X_i`` counts how many of
the other ``k - 1`` columns also hit row ``i``, and the load statistic is
``sum_i ((X_i + 1)^(p-1) - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special, stats

from . import config
from ._rng import stream
from .parallel import pmap

CHUNK = 1 << 16


class HypothesisViolation(ValueError):
    """Inputs fall outside the regime where the checked bound is claimed."""


def z_value(confidence: float) -> float:
    """Two-sided normal quantile, e.g. 2.576 at 0.99."""
    return float(stats.norm.ppf(0.5 + confidence / 2))


def load_summand(X, p: float):
    return (np.asarray(X, dtype=float) + 1.0) ** (p - 1) - 1.0


def _chunks(trials: int):
    return [(c, min(CHUNK, trials - c * CHUNK)) for c in range((trials + CHUNK - 1) // CHUNK)]


def _occupancy_chunk(m, d, k, seed, tag, c, size) -> np.ndarray:
    """``(size, d)`` hit counts on the reference rows under the exact process.

    Each other column hits ``h ~ Hypergeom(m, d, d)`` of the reference rows,
    and by symmetry those ``h`` rows form a uniform ``h``-subset.
    """
    rng = stream(seed, tag, c)
    X = np.zeros((size, d), dtype=np.int64)
    for _ in range(k - 1):
        h = rng.hypergeometric(d, m - d, d, size=size)
        ranks = np.argsort(rng.random((size, d)), axis=1).argsort(axis=1)
        X += ranks < h[:, None]
    return X


def sample_occupancy(m: int, d: int, k: int, seed: int, trials: int,
                     threads: int | None = None) -> np.ndarray:
    """Per-trial hit counts ``X_i`` on the reference column's ``d`` rows."""
    _check_mdk(m, d, k)
    parts = pmap(lambda ck: _occupancy_chunk(m, d, k, seed, 0, *ck), _chunks(trials), threads)
    return np.concatenate(parts) if parts else np.zeros((0, d), dtype=np.int64)


def sample_row_loads(m: int, d: int, k: int, p: float, seed: int, trials: int,
                     threads: int | None = None) -> np.ndarray:
    """Per-trial ``sum_i ((X_i + 1)^(p-1) - 1)`` under the dependent occupancy process."""
    _check_mdk(m, d, k)

    def work(ck):
        return load_summand(_occupancy_chunk(m, d, k, seed, 0, *ck), p).sum(axis=1)

    parts = pmap(work, _chunks(trials), threads)
    return np.concatenate(parts) if parts else np.zeros(0)


def sample_iid_loads(m: int, d: int, k: int, p: float, seed: int, trials: int,
                     threads: int | None = None) -> np.ndarray:
    """Same statistic with ``X_i`` i.i.d. ``Bin(k-1, d/m)``."""
    _check_mdk(m, d, k)

    def work(ck):
        c, size = ck
        X = stream(seed, 1, c).binomial(k - 1, d / m, size=(size, d))
        return load_summand(X, p).sum(axis=1)

    parts = pmap(work, _chunks(trials), threads)
    return np.concatenate(parts) if parts else np.zeros(0)


def _check_mdk(m, d, k):
    if not 1 <= d <= m:
        raise ValueError(f"need 1 <= d <= m, got d={d}, m={m}")
    if k < 1:
        raise ValueError("k must be >= 1")


def binom_pmf(k: int, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Support and pmf of ``Bin(k-1, q)``."""
    x = np.arange(k)
    return x, stats.binom.pmf(x, k - 1, q)


def sum_moments(values, probs, d: int, t: int) -> np.ndarray:
    """Exact ``E[(Y_1 + ... + Y_d)^r]`` for ``r = 0..t`` with ``Y_i`` i.i.d. discrete."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    mu = np.array([np.sum(probs * values**r) for r in range(t + 1)])
    M = np.zeros(t + 1)
    M[0] = 1.0
    C = special.comb(np.arange(t + 1)[:, None], np.arange(t + 1)[None, :])
    for _ in range(d):
        M = np.array([np.sum(C[r, : r + 1] * M[: r + 1] * mu[r::-1]) for r in range(t + 1)])
    return M


def _mc_mean(samples) -> tuple[float, float]:
    """Mean and standard error, accumulated with compensated summation."""
    s = np.asarray(samples, dtype=float)
    n = s.size
    mean = math.fsum(s) / n
    var = math.fsum((s - mean) ** 2) / max(n - 1, 1)
    return mean, math.sqrt(var / n)


# -- single moment --------------------------------------------------------------


@dataclass(frozen=True)
class MomentRow:
    order: float
    empirical: float
    bound: float
    exact: float | None = None
    ci_halfwidth: float = 0.0
    passed: bool = True

    def to_json_dict(self) -> dict:
        return asdict(self)


def moment_bound(delta: float, p: float, ell: float, C: float) -> float:
    a = ell * (p - 1) + 1
    return C * delta * a**a


def check_single_moment_bound(k: int, delta: float, p: float, ell: float, trials: int = 100_000,
                              C: float | None = None, seed: int = 0,
                              confidence: float | None = None) -> MomentRow:
    """Compare ``E[((X+1)^(p-1) - 1)^ell]``, ``X ~ Bin(k-1, delta/k)``, with ``C delta (ell(p-1)+1)^(ell(p-1)+1)``.

    Fails only when the Monte-Carlo lower confidence limit exceeds the bound.
    The exact pmf value is reported alongside.
    """
    cfg = config.section("tails")
    C = float(cfg["moment_C"] if C is None else C)
    confidence = float(cfg["confidence"] if confidence is None else confidence)
    if k < 1:
        raise HypothesisViolation("k must be >= 1")
    if not 0 <= delta < 1 / (2 * math.e**2):
        raise HypothesisViolation(f"delta={delta} must lie in [0, 1/(2e^2))")
    if p < 2:
        raise HypothesisViolation(f"p={p} must be >= 2")
    if ell < 1:
        raise HypothesisViolation(f"moment order ell={ell} must be >= 1")
    q = delta / k
    x, pmf = binom_pmf(k, q)
    exact = float(np.sum(pmf * load_summand(x, p) ** ell))
    X = stream(seed, 4).binomial(k - 1, q, size=trials)
    emp, se = _mc_mean(load_summand(X, p) ** ell)
    hw = z_value(confidence) * se
    bound = moment_bound(delta, p, ell, C)
    return MomentRow(ell, emp, bound, exact, hw, emp - hw <= bound)


# -- negative association ---------------------------------------------------------


@dataclass(frozen=True)
class AssociationReport:
    t: int
    dependent_moment: float
    dependent_ci: float
    independent_moment: float  # exact
    independent_mc: float
    independent_ci: float
    gap: float  # dependent - independent (exact)
    passed: bool

    def to_json_dict(self) -> dict:
        return {**asdict(self), "pass": self.passed}


def check_negative_association(m: int, d: int, k: int, p: float, t: int, trials: int = 100_000,
                               seed: int = 0, confidence: float | None = None,
                               threads: int | None = None) -> AssociationReport:
    """Dependent-process ``E[S^t]`` against the i.i.d.-binomial moment.

    Passes unless the dependent estimate exceeds the exact i.i.d. moment by
    more than its confidence half-width.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    confidence = float(config.section("tails")["confidence"] if confidence is None else confidence)
    z = z_value(confidence)
    dep, se_dep = _mc_mean(sample_row_loads(m, d, k, p, seed, trials, threads) ** t)
    ind_mc, se_ind = _mc_mean(sample_iid_loads(m, d, k, p, seed, trials, threads) ** t)
    x, pmf = binom_pmf(k, d / m)
    ind = float(sum_moments(load_summand(x, p), pmf, d, t)[t])
    gap = dep - ind
    return AssociationReport(t, dep, z * se_dep, ind, ind_mc, z * se_ind, gap, gap <= z * se_dep)


# -- Latała ---------------------------------------------------------------------


class LatalaSearchError(RuntimeError):
    pass


def latala_bound(values, d: int, t: float, weights=None, bracket: tuple[float, float] | None = None,
                 rtol: float = 1e-12) -> float:
    """``e * inf{u > 0 : E[(1 + Y/u)^t] <= e^(t/d)}`` for a nonnegative discrete ``Y``.

    ``values``/``weights`` describe the law of ``Y`` (equal weights for Monte-Carlo
    samples).  ``E[(1+Y/u)^t]`` decreases in ``u``, so the infimum is found by
    bisection on ``log u``; the returned value uses the feasible end of the final
    bracket, so it never undershoots the true infimum.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty law for Y")
    if np.any(v < 0):
        raise ValueError("Y must be nonnegative")
    if t < 1 or d < 1:
        raise ValueError("need t >= 1 and d >= 1")
    w = np.full(v.size, 1.0 / v.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    keep = w > 0
    v, w = v[keep], w[keep] / w[keep].sum()
    if not np.any(v > 0):
        return 0.0
    logw = np.log(w)
    target = t / d

    def feasible(u):
        return special.logsumexp(logw + t * np.log1p(v / u)) <= target

    if bracket is None:
        hi = float(v.max()) / math.expm1(1.0 / d)  # (1 + max Y / u)^t <= e^(t/d)
        lo = hi
        while feasible(lo):
            lo /= 2
            if lo < 1e-300:
                raise LatalaSearchError("no infeasible lower end found")
    else:
        lo, hi = map(float, bracket)
        if not feasible(hi):
            raise LatalaSearchError(f"no u in [{lo}, {hi}] satisfies the moment condition")
        if feasible(lo):
            return math.e * lo
    while hi - lo > rtol * hi:
        mid = math.sqrt(lo * hi) if lo > 0 else hi / 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return math.e * hi


def latala_constant(c: float, d: int) -> float:
    """Closed form for ``Y = c`` almost surely."""
    return math.e * c / math.expm1(1.0 / d)


# -- tail -------------------------------------------------------------------------


@dataclass(frozen=True)
class TailReport:
    trials: int
    empirical_tail: float
    analytic_bound: float
    moment_table: tuple = ()
    passed: bool = True
    threshold: float = 0.0
    ci_halfwidth: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"trials": self.trials, "empirical_tail": self.empirical_tail,
                "analytic_bound": self.analytic_bound, "threshold": self.threshold,
                "ci_halfwidth": self.ci_halfwidth,
                "moment_table": [r.to_json_dict() for r in self.moment_table],
                "pass": self.passed, "diagnostics": self.diagnostics}


def tail_hypotheses(m: int, d: int, k: int, p: float, eps: float, C: float) -> dict:
    """Check ``delta <= eps / p^(Cp)``, ``d >= p^(Cp) / eps`` and ``eps d > E[S]``."""
    delta = d * k / m
    pc = p ** (C * p)
    x, pmf = binom_pmf(k, d / m)
    mean = d * float(np.sum(pmf * load_summand(x, p)))
    problems = []
    if delta > eps / pc:
        problems.append(f"delta={delta:.4g} exceeds eps/p^(Cp)={eps / pc:.4g}")
    if d < pc / eps:
        problems.append(f"d={d} below p^(Cp)/eps={pc / eps:.4g}")
    if k > 1 and eps * d <= mean:
        problems.append(f"eps*d={eps * d:.4g} does not exceed the mean load {mean:.4g}")
    return {"delta": delta, "mean_load": mean, "problems": problems}


def tail_probability_check(m: int, d: int, k: int, p: float, eps: float, trials: int | None = None,
                           seed: int = 0, constants: dict | None = None,
                           threads: int | None = None) -> TailReport:
    """Empirical ``Pr[S > eps d]`` against ``exp(-c (eps d)^(1/(p-1)) / p)``.

    Inputs outside the hypotheses raise :class:`HypothesisViolation`.  The
    moment table lists ``E[S^t]`` for ``t = 1, 2, 3`` next to the Latała bound
    for the i.i.d. comparison sum.
    """
    cfg = config.section("tails", constants)
    trials = int(cfg["trials"] if trials is None else trials)
    if p <= 1:
        raise HypothesisViolation("p must exceed 1")
    if not 0 < eps:
        raise HypothesisViolation("eps must be positive")
    _check_mdk(m, d, k)
    hyp = tail_hypotheses(m, d, k, p, eps, float(cfg["hypothesis_C"]))
    if hyp["problems"]:
        raise HypothesisViolation("; ".join(hyp["problems"]))
    S = sample_row_loads(m, d, k, p, seed, trials, threads)
    thr = eps * d
    hits = S > thr
    tail = float(hits.mean())
    hw = z_value(float(cfg["confidence"])) * math.sqrt(max(tail * (1 - tail), 0.0) / trials)
    bound = math.exp(-float(cfg["tail_c"]) * thr ** (1 / (p - 1)) / p)
    x, pmf = binom_pmf(k, d / m)
    Y = load_summand(x, p)
    rows = []
    for t in (1, 2, 3):
        emp, se = _mc_mean(S**t)
        lb = latala_bound(Y, d, t, weights=pmf) ** t
        zh = z_value(float(cfg["confidence"])) * se
        rows.append(MomentRow(t, emp, lb, None, zh, emp - zh <= lb))
    return TailReport(trials, tail, bound, tuple(rows), tail - hw <= bound, thr, hw,
                      {"delta": hyp["delta"], "mean_load": hyp["mean_load"], "tail_c": cfg["tail_c"]})
