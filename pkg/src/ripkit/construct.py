"""Random sparse binary constructions and (m, d, ell, delta) planning."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import config
from ._rng import stream
from .matrix import SparseBinaryMatrix

PLAN_VERSION = 1


@dataclass(frozen=True)
class ParamPlan:
    n: int
    k: int
    p: float
    eps: float
    m: int
    d: int
    ell: int
    delta: float
    regime: str  # "p_ge_2" | "p_lt_2"
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.d <= self.m:
            raise ValueError(f"plan violates 1 <= d <= m: d={self.d}, m={self.m}")
        if self.m < self.k:
            raise ValueError(f"plan violates m >= k: m={self.m}, k={self.k}")
        if self.regime == "p_lt_2" and not (self.ell >= 1 and self.delta < 0.5):
            raise ValueError("p<2 plan needs ell >= 1 and delta < 1/2")

    def to_json_dict(self) -> dict:
        return {"version": PLAN_VERSION, **asdict(self)}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ParamPlan":
        obj = dict(obj)
        obj.pop("version", None)
        return cls(**obj)

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def plan_params_p_ge2(n: int, k: int, p: float, eps: float, constants: dict | None = None) -> ParamPlan:
    """Rows and column sparsity for the incoherence + moment construction (p >= 2).

    ``m = C_m k^p eps^-2 (ln n)^(p-1)`` and ``d = C_d k^(p-1) eps^-1 (ln n)^(p-1)``.
    When ``C_m`` is not given it is set to ``C_d * max(min_ratio, p**(hypothesis_C * p))``
    so that ``delta = dk/m <= eps / p**(hypothesis_C * p)``.
    """
    if p < 2:
        raise ValueError(f"plan_params_p_ge2 requires p >= 2, got {p}")
    _check_common(n, k, eps)
    c = config.section("plan_p_ge2", constants)
    C_d = float(c["C_d"])
    C_m = c["C_m"]
    if C_m is None:
        C_m = C_d * max(float(c["min_ratio"]), p ** (float(c["hypothesis_C"]) * p))
    C_m = float(C_m)
    L = math.log(n) ** (p - 1) if n > 1 else 1.0
    d = max(1, math.ceil(C_d * k ** (p - 1) / eps * L))
    m = max(d, k, math.ceil(C_m * k**p / eps**2 * L))
    return ParamPlan(n=n, k=k, p=float(p), eps=float(eps), m=m, d=d, ell=1,
                     delta=d * k / m, regime="p_ge_2", constants={**c, "C_m": C_m})


def plan_params_p_lt2(n: int, k: int, p: float, eps: float, tau: float = 0.05,
                      constants: dict | None = None) -> ParamPlan:
    """Expander-based plan for 1 < p < 2.

    ``ell = ceil(C_ell k^(2-p))``,
    ``delta = C_delta min(eps/k^(p-1), eps^(1/(p-1))/k^((p-1)/p))``,
    ``d = ceil(C_d ln n / delta)`` and ``m = ceil(C_m d ell / delta)``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if not (1 + tau <= p <= 2 - tau):
        raise ValueError(f"p={p} outside [1+tau, 2-tau] for tau={tau}")
    _check_common(n, k, eps)
    c = config.section("plan_p_lt2", constants)
    ell = max(1, math.ceil(c["C_ell"] * k ** (2 - p)))
    delta = c["C_delta"] * min(eps / k ** (p - 1), eps ** (1 / (p - 1)) / k ** ((p - 1) / p))
    if not 0 < delta < 0.5:
        raise ValueError(f"planned delta={delta} outside (0, 1/2); lower C_delta")
    d = max(1, math.ceil(c["C_d"] * math.log(max(n, 2)) / delta))
    m = max(d, k, math.ceil(c["C_m"] * d * ell / delta))
    return ParamPlan(n=n, k=k, p=float(p), eps=float(eps), m=m, d=d, ell=ell,
                     delta=delta, regime="p_lt_2", constants=c)


def plan_params(n: int, k: int, p: float, eps: float, tau: float = 0.05,
                constants: dict | None = None) -> ParamPlan:
    """Dispatch to the planner for the regime containing ``p``."""
    if p >= 2:
        return plan_params_p_ge2(n, k, p, eps, constants)
    return plan_params_p_lt2(n, k, p, eps, tau=min(tau, p - 1, 2 - p), constants=constants)


def _check_common(n, k, eps):
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    if not 0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")


def gen_matrix(n: int, m: int, d: int, p: float, seed: int) -> SparseBinaryMatrix:
    """Random binary matrix with ``d`` uniformly chosen rows per column.

    Column ``j`` is sampled from its own stream keyed by ``(seed, j)``, so the
    result does not depend on generation order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 1 <= d <= m:
        raise ValueError(f"need 1 <= d <= m, got d={d}, m={m}")
    supports = np.empty((n, d), dtype=np.int64)
    for j in range(n):
        rows = stream(seed, j).choice(m, size=d, replace=False, shuffle=False)
        supports[j] = np.sort(rows)
    return SparseBinaryMatrix(n=n, m=m, d=d, p=float(p), supports=supports, seed=int(seed))


def gen_from_plan(plan: ParamPlan, seed: int) -> SparseBinaryMatrix:
    return gen_matrix(plan.n, plan.m, plan.d, plan.p, seed)


@dataclass(frozen=True)
class IncoherenceReport:
    passed: bool
    threshold: float
    worst_pair: tuple[int, int] | None
    worst_overlap: int

    def to_json_dict(self) -> dict:
        return {"pass": self.passed, "threshold": self.threshold,
                "worst_pair": None if self.worst_pair is None else list(self.worst_pair),
                "worst_overlap": self.worst_overlap}


def pairwise_overlaps(A: SparseBinaryMatrix, cols=None) -> np.ndarray:
    """``O[i, j] = |S_i ∩ S_j|`` (diagonal = d) for the selected columns."""
    B = A.incidence(cols)
    return np.rint((B.T @ B).toarray()).astype(np.int64)


def check_incoherence(A: SparseBinaryMatrix, k: int, eps: float) -> IncoherenceReport:
    """Every pair of distinct columns must overlap in at most ``eps*d/k`` rows."""
    # k only sets the threshold, so k > n is allowed
    if k < 1:
        raise ValueError(f"need k >= 1, got k={k}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    thr = eps * A.d / k
    if A.n < 2:
        return IncoherenceReport(True, thr, None, 0)
    O = pairwise_overlaps(A)
    iu = np.triu_indices(A.n, 1)
    vals = O[iu]
    w = int(np.argmax(vals))
    worst = int(vals[w])
    return IncoherenceReport(worst <= thr, thr, (int(iu[0][w]), int(iu[1][w])), worst)


def private_rows(A: SparseBinaryMatrix, support) -> np.ndarray:
    """``|S'_j|``: rows of column j not shared with other columns of ``support``."""
    support = np.asarray(support)
    loads = A.row_loads(support)
    return (loads[A.supports[support]] == 1).sum(axis=1)

