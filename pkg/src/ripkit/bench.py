"""Phase-transition sweeps of the minimal row count m_star against k."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ._rng import stream
from .audit import top_overlap_supports
from .construct import check_incoherence, gen_matrix, plan_params
from .ripcheck import SearchOpts, rip_sampled

CSV_COLUMNS = ("n", "k", "p", "eps", "m_star", "threshold", "trials", "seed", "d")
BENCH_SEARCH = SearchOpts(restarts=32, iters=200)


@dataclass(frozen=True)
class PhasePoint:
    n: int
    k: int
    p: float
    eps: float
    m_star: int | None  # None when the bracket is exhausted
    threshold: float
    trials: int
    seed: int
    d: int
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def exhausted(self) -> bool:
        return self.m_star is None

    def to_json_dict(self) -> dict:
        out = {c: getattr(self, c) for c in CSV_COLUMNS}
        out["diagnostics"] = self.diagnostics
        return out


def resolve_d(d_rule, n: int, k: int, p: float, eps: float, power_const: float = 2.0) -> int:
    """Column sparsity for one sweep point.

    ``"plan"`` uses the planner, ``"power"`` uses ``ceil(c k^(p-1))`` and a
    callable is invoked as ``d_rule(k)``.
    """
    if callable(d_rule):
        d = int(d_rule(k))
    elif d_rule == "plan":
        d = plan_params(n, k, p, eps).d
    elif d_rule == "power":
        d = math.ceil(power_const * k ** (p - 1))
    else:
        raise ValueError(f"unknown d_rule {d_rule!r}")
    if d < 1:
        raise ValueError(f"d_rule produced d={d}")
    return d


def geometric_grid(m_lo: int, m_hi: int, ratio: float) -> np.ndarray:
    if m_lo < 1 or m_hi < m_lo or ratio <= 1:
        raise ValueError("need 1 <= m_lo <= m_hi and ratio > 1")
    steps = math.ceil(math.log(m_hi / m_lo) / math.log(ratio)) if m_hi > m_lo else 0
    grid = np.ceil(m_lo * ratio ** np.arange(steps + 1)).astype(np.int64)
    grid[-1] = max(grid[-1], m_hi)
    return np.unique(grid)


def matrix_passes(A, k: int, p: float, eps: float, num_supports: int, seed: int,
                  incoherence: bool, opts: SearchOpts = BENCH_SEARCH, threads: int | None = None) -> bool:
    """Sampled (1 +- eps) test on ``||Ax||_p^p``, optionally gated by incoherence."""
    if incoherence and k > 1 and not check_incoherence(A, k, eps).passed:
        return False
    extra = top_overlap_supports(A, k, pairs=8) if k > 1 else []
    lo, hi = (1 - eps) ** (1 / p), (1 + eps) ** (1 / p)
    cert = rip_sampled(A, k, p, num_supports, seed=seed, mode="certified", threads=threads, supports=extra)
    if cert.certified_min >= lo and cert.certified_max <= hi:
        return True
    res = rip_sampled(A, k, p, num_supports, opts=opts, seed=seed, threads=threads, supports=extra)
    return res.worst_min >= lo and res.worst_max <= hi


def _pass_rate_ok(n, m, d, k, p, eps, threshold, trials, seed, num_supports, incoherence, threads):
    need = math.ceil(threshold * trials - 1e-12)
    passed = 0
    for t in range(trials):
        mseed = int(stream(seed, 7, k, m, t).integers(1 << 62))
        A = gen_matrix(n, m, d, p, mseed)
        passed += matrix_passes(A, k, p, eps, num_supports, mseed, incoherence, threads=threads)
        if passed >= need:
            return True
        if passed + (trials - t - 1) < need:
            return False
    return passed >= need


def phase_transition(n: int, p: float, eps: float, k_list, d_rule: str | Callable = "plan",
                     threshold: float = 0.8, trials: int = 5, seed: int = 0, *,
                     num_supports: int = 32, ratio: float = 2 ** 0.25, max_factor: float = 1024.0,
                     incoherence: bool | None = None, threads: int | None = None) -> list[PhasePoint]:
    """Binary search for the smallest grid ``m`` whose pass rate reaches ``threshold``.

    The grid is geometric from ``max(d, k)`` to ``max_factor`` times that.
    Incoherence gating defaults to on for ``p >= 2``.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    if trials < 1:
        raise ValueError("trials must be positive")
    if incoherence is None:
        incoherence = p >= 2
    out = []
    for k in k_list:
        k = int(k)
        if not 1 <= k <= n:
            raise ValueError(f"k={k} outside [1, n]")
        d = resolve_d(d_rule, n, k, p, eps)
        m_lo = max(d, k)
        grid = geometric_grid(m_lo, int(math.ceil(m_lo * max_factor)), ratio)
        cache: dict[int, bool] = {}

        def ok(i):
            m = int(grid[i])
            if m not in cache:
                cache[m] = _pass_rate_ok(n, m, d, k, p, eps, threshold, trials, seed,
                                         num_supports, incoherence, threads)
            return cache[m]

        diag = {"grid_lo": int(grid[0]), "grid_hi": int(grid[-1]), "ratio": ratio}
        if not ok(len(grid) - 1):
            m_star = None
        elif ok(0):
            m_star = int(grid[0])
        else:
            a, b = 0, len(grid) - 1  # fails at a, passes at b
            while b - a > 1:
                mid = (a + b) // 2
                if ok(mid):
                    b = mid
                else:
                    a = mid
            m_star = int(grid[b])
        diag["evaluated"] = {str(m): v for m, v in sorted(cache.items())}
        out.append(PhasePoint(n, k, float(p), float(eps), m_star, float(threshold),
                              int(trials), int(seed), d, diag))
    return out


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    r2: float
    points: int

    def to_json_dict(self) -> dict:
        return asdict(self)


def fit_exponent(points) -> ExponentFit:
    """Least squares of ``log m_star`` on ``log k``.

    Accepts ``PhasePoint`` objects or ``(k, m_star)`` pairs; exhausted points
    are rejected.
    """
    ks, ms = [], []
    for pt in points:
        k, m = (pt.k, pt.m_star) if isinstance(pt, PhasePoint) else pt
        if m is None:
            raise ValueError(f"point k={k} has no m_star (bracket exhausted)")
        if k <= 0 or m <= 0:
            raise ValueError("k and m_star must be positive")
        ks.append(float(k))
        ms.append(float(m))
    if len(ks) < 3:
        raise ValueError("need at least 3 points")
    x, y = np.log(ks), np.log(ms)
    if np.ptp(x) == 0:
        raise ValueError("all points share one k")
    X = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ np.array([slope, intercept])
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / sst if sst > 0 else 1.0
    return ExponentFit(float(slope), float(intercept), r2, len(ks))


def write_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for pt in points:
            w.writerow(["" if getattr(pt, c) is None else repr(getattr(pt, c)) for c in CSV_COLUMNS])


def read_csv(path) -> list[PhasePoint]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            vals = {}
            for c in CSV_COLUMNS:
                raw = row.get(c, "")
                if raw == "":
                    vals[c] = None
                elif c in ("p", "eps", "threshold"):
                    vals[c] = float(raw)
                else:
                    vals[c] = int(raw)
            if vals["d"] is None:
                vals["d"] = 0
            out.append(PhasePoint(**vals))
    return out
