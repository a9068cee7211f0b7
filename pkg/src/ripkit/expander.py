"""Bipartite expansion certificates and the primary/secondary/tertiary block split.

A matrix's column supports define a left-``d``-regular bipartite graph.  It is an
``(ell, d, delta)``-expander when every set ``S`` of at most ``ell`` columns has
``|N(S)| >= (1 - delta) d |S|``.  Everything here is phrased through the *excess*
``e(S) = d|S| - |N(S)|``, the number of collisions inside ``S``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, islice

import numpy as np

from ._rng import stream
from .construct import pairwise_overlaps
from .matrix import SparseBinaryMatrix
from .parallel import pmap

DEFAULT_BUDGET = 10**7
_CHUNK = 200_000
_CACHE_ROWS = 2_000_000


class ExpansionBudgetError(RuntimeError):
    """Raised when exhaustive certification would exceed the subset budget."""


@dataclass(frozen=True)
class ExpansionReport:
    ell: int
    delta: float
    passed: bool
    worst_set: tuple[int, ...]
    worst_neighborhood: int
    mode: str  # "exact" | "heuristic"
    worst_ratio: float = 1.0  # |N(S)| / (d|S|) for worst_set
    subsets_checked: int = 0

    def to_json_dict(self) -> dict:
        return {"ell": self.ell, "delta": self.delta, "pass": self.passed,
                "worst_set": list(self.worst_set), "worst_neighborhood": self.worst_neighborhood,
                "mode": self.mode, "worst_ratio": self.worst_ratio, "subsets_checked": self.subsets_checked}


def neighborhood_size(A: SparseBinaryMatrix, cols) -> int:
    cols = np.asarray(cols, dtype=np.int64)
    return int(np.unique(A.supports[cols].ravel()).size)


def excess(A: SparseBinaryMatrix, cols) -> int:
    return A.d * len(cols) - neighborhood_size(A, cols)


def n_subsets(n: int, ell: int) -> int:
    return sum(math.comb(n, s) for s in range(1, min(ell, n) + 1))


@lru_cache(maxsize=8)
def _cached_combos(n: int, s: int) -> np.ndarray:
    return _combos(n, s, 0, math.comb(n, s))


def _combos(n, s, start, count):
    it = islice(combinations(range(n), s), start, start + count)
    flat = np.fromiter((i for c in it for i in c), dtype=np.int16, count=count * s)
    return flat.reshape(count, s)


def _combo_chunks(n, s):
    total = math.comb(n, s)
    if total <= _CACHE_ROWS:
        C = _cached_combos(n, s)
        for lo in range(0, total, _CHUNK):
            yield C[lo:lo + _CHUNK]
        return
    it = combinations(range(n), s)
    while True:
        block = list(islice(it, _CHUNK))
        if not block:
            return
        yield np.asarray(block, dtype=np.int16)


class _ExcessOracle:
    """Vectorised ``e(S)`` for many equal-size subsets.

    ``e(S) = sum_r (c_r(S) - 1)_+`` over rows ``r``.  Summing pairwise overlaps
    counts ``C(c_r, 2)`` per row, so rows hit by three or more columns of ``S``
    need the correction ``C(c_r - 1, 2)``.  Only rows with total load >= 3 can
    contribute to that correction, which keeps it cheap for sparse graphs.
    """

    def __init__(self, A: SparseBinaryMatrix):
        self.O = pairwise_overlaps(A).astype(np.int32)
        loads = A.row_loads()
        heavy = np.flatnonzero(loads >= 3)
        self.heavy_member = None
        if heavy.size:
            lookup = -np.ones(A.m, dtype=np.int64)
            lookup[heavy] = np.arange(heavy.size)
            M = np.zeros((A.n, heavy.size), dtype=np.uint8)
            cols, pos = np.nonzero(lookup[A.supports] >= 0)
            M[cols, lookup[A.supports[cols, pos]]] = 1
            self.heavy_member = M

    def __call__(self, C: np.ndarray) -> np.ndarray:
        s = C.shape[1]
        e = np.zeros(C.shape[0], dtype=np.int64)
        for a in range(s):
            for b in range(a + 1, s):
                e += self.O[C[:, a], C[:, b]]
        if s >= 3 and self.heavy_member is not None:
            c = self.heavy_member[C[:, 0]].astype(np.int16)
            for a in range(1, s):
                c += self.heavy_member[C[:, a]]
            c = np.maximum(c - 1, 0).astype(np.int64)
            e -= (c * (c - 1) // 2).sum(axis=1)
        return e


def verify_expander_exact(A: SparseBinaryMatrix, ell: int, delta: float,
                          budget: int = DEFAULT_BUDGET, threads: int | None = None) -> ExpansionReport:
    """Certify ``(ell, d, delta)``-expansion by checking every ``S`` with ``1 <= |S| <= ell``."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    ell = min(ell, A.n)
    total = n_subsets(A.n, ell)
    if total > budget:
        raise ExpansionBudgetError(
            f"{total} subsets exceed the budget of {budget}; "
            "raise the budget or use falsify_expander_heuristic")
    oracle = _ExcessOracle(A)
    # singletons have |N| = d exactly
    best = (0.0, (0,), 0)  # (excess per column, set, excess)
    for s in range(2, ell + 1):
        def scan(C, s=s):
            e = oracle(C)
            i = int(np.argmax(e))
            return int(e[i]), tuple(int(v) for v in C[i])
        for e_max, S in pmap(scan, _combo_chunks(A.n, s), threads):
            if e_max / s > best[0]:
                best = (e_max / s, S, e_max)
    _, S, e = best
    nb = A.d * len(S) - e
    passed = e <= delta * A.d * len(S) + 1e-9
    return ExpansionReport(ell, float(delta), bool(passed), S, int(nb), "exact",
                           nb / (A.d * len(S)), total)


def falsify_expander_heuristic(A: SparseBinaryMatrix, ell: int, delta: float,
                               budget: int = 10_000, seed: int = 0) -> tuple[int, ...] | None:
    """Search for a set violating expansion; ``None`` does not certify anything.

    Greedy growth from the most-overlapping pairs and from random starts, then
    single-swap local search.  ``budget`` caps the number of candidate columns
    scored.
    """
    ell = min(ell, A.n)
    if ell < 2 or A.n < 2:
        return None
    O = pairwise_overlaps(A)
    np.fill_diagonal(O, -1)
    iu = np.triu_indices(A.n, 1)
    order = np.argsort(-O[iu], kind="stable")
    starts = [(int(iu[0][i]), int(iu[1][i])) for i in order[: max(1, min(32, order.size))]]
    rng = stream(seed, 0)
    spent = 0
    thr = delta * A.d

    def violates(S):
        return excess(A, S) > thr * len(S) + 1e-9

    while spent < budget:
        if starts:
            S = list(starts.pop(0))
        else:
            S = [int(v) for v in rng.choice(A.n, size=2, replace=False)]
        counts = np.bincount(A.supports[S].ravel(), minlength=A.m)
        if violates(S):
            return tuple(sorted(S))
        while len(S) < ell and spent < budget:
            gains = (counts[A.supports] > 0).sum(axis=1)
            gains[S] = -1
            spent += A.n
            j = int(np.argmax(gains))
            if gains[j] < 0:
                break
            S.append(j)
            counts += np.bincount(A.supports[j], minlength=A.m)
            if violates(S):
                return tuple(sorted(S))
        improved = True
        while improved and spent < budget:
            improved = False
            base = excess(A, S) / len(S)
            for pos in range(len(S)):
                rest = S[:pos] + S[pos + 1:]
                rc = np.bincount(A.supports[rest].ravel(), minlength=A.m) if rest else np.zeros(A.m, int)
                gains = (rc[A.supports] > 0).sum(axis=1)
                gains[S] = -1
                spent += A.n
                j = int(np.argmax(gains))
                if gains[j] < 0:
                    continue
                cand = rest + [j]
                if excess(A, cand) / len(cand) > base:
                    S = cand
                    improved = True
                    if violates(S):
                        return tuple(sorted(S))
                    break
    return None


@dataclass(frozen=True)
class BlockDecomposition:
    """Primary (``L_b``), secondary (``D_b``) and tertiary (``D_b'``) entries of block ``b``.

    Pairs are ``(row, column)`` with actual column indices; ``position`` maps a
    column to its 1-based rank inside ``support``, which is the ordering used
    for "smallest column index".
    """

    b: int
    ell: int
    support: tuple[int, ...]
    block: tuple[int, ...]
    primary: frozenset
    secondary: frozenset
    tertiary: frozenset

    @property
    def position(self) -> dict[int, int]:
        return {c: i + 1 for i, c in enumerate(self.support)}

    def to_json_dict(self) -> dict:
        return {"b": self.b, "ell": self.ell, "support": list(self.support), "block": list(self.block),
                "primary": sorted(map(list, self.primary)),
                "secondary": sorted(map(list, self.secondary)),
                "tertiary": sorted(map(list, self.tertiary))}


def n_blocks(k: int, ell: int) -> int:
    return -(-k // ell)


def block_decomposition(A: SparseBinaryMatrix, support, ell: int, b: int) -> BlockDecomposition:
    support = tuple(int(c) for c in support)
    k = len(support)
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if len(set(support)) != k:
        raise ValueError("support columns must be distinct")
    nb = n_blocks(k, ell)
    if not 1 <= b <= nb:
        raise ValueError(f"block index {b} outside 1..{nb}")
    block = support[(b - 1) * ell: b * ell]
    later = support[b * ell:]
    primary, secondary = set(), set()
    lead_rows: set[int] = set()
    for j in block:
        for i in A.supports[j].tolist():
            if i in lead_rows:
                secondary.add((i, j))
            else:
                lead_rows.add(i)
                primary.add((i, j))
    tertiary = {(i, j) for j in later for i in A.supports[j].tolist() if i in lead_rows}
    return BlockDecomposition(b, ell, support, block, frozenset(primary),
                              frozenset(secondary), frozenset(tertiary))


@dataclass(frozen=True)
class PrefixAudit:
    passed: bool
    worst_t: int
    worst_count: int
    secondary_count: int
    secondary_bound: float
    counts: tuple[int, ...]


def audit_prefix_expansion(dec: BlockDecomposition, A: SparseBinaryMatrix, delta: float,
                           d: int | None = None) -> PrefixAudit:
    """Prefix counts of ``D_b ∪ D_b'``: 0 at ``t = 1`` and ``<= 3 delta d t`` after.

    Also checks ``|D_b| <= delta d ell``.
    """
    d = A.d if d is None else d
    pos = dec.position
    offset = (dec.b - 1) * dec.ell
    span = len(dec.support) - offset
    hist = np.zeros(span + 1, dtype=np.int64)
    for _, j in dec.secondary | dec.tertiary:
        hist[pos[j] - offset] += 1
    counts = np.cumsum(hist)[1:]
    ok = counts[0] == 0
    worst_t, worst_ratio = 1, (math.inf if counts[0] else 0.0)
    for t in range(2, span + 1):
        bound = 3 * delta * d * t
        r = counts[t - 1] / bound if bound > 0 else (math.inf if counts[t - 1] else 0.0)
        if r > worst_ratio:
            worst_t, worst_ratio = t, r
        ok &= counts[t - 1] <= bound + 1e-9
    sec_bound = delta * d * dec.ell
    ok &= len(dec.secondary) <= sec_bound + 1e-9
    return PrefixAudit(bool(ok), worst_t, int(counts[worst_t - 1]), len(dec.secondary),
                       sec_bound, tuple(int(c) for c in counts))


@dataclass(frozen=True)
class WeightedMassAudit:
    lhs: float
    S_bound: float
    passed: bool


def audit_weighted_mass(dec: BlockDecomposition, A: SparseBinaryMatrix, x, delta: float,
                        d: int | None = None, k: int | None = None, p: float | None = None,
                        tol: float = 1e-9) -> WeightedMassAudit:
    """``sum_{(i,j) in D_b ∪ D_b'} A_ij |x_j| <= 3 delta (dk)^(1-1/p)``.

    ``x`` is indexed by position in ``dec.support``; ``|x|`` must be
    non-increasing and ``||x||_p = 1``.
    """
    d = A.d if d is None else d
    p = A.p if p is None else p
    x = np.abs(np.asarray(x, dtype=float))
    k = len(dec.support) if k is None else k
    if x.shape != (len(dec.support),):
        raise ValueError("x must have one entry per support column")
    if np.any(np.diff(x) > tol):
        raise ValueError("|x| must be non-increasing along the support")
    if abs(np.sum(x**p) ** (1 / p) - 1) > 1e-6:
        raise ValueError("x must have unit p-norm")
    pos = dec.position
    val = d ** (-1.0 / p)
    lhs = sum(val * x[pos[j] - 1] for _, j in dec.secondary | dec.tertiary)
    bound = 3 * delta * (d * k) ** (1 - 1 / p)
    return WeightedMassAudit(float(lhs), float(bound), bool(lhs <= bound + tol))
