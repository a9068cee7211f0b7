"""Estimate and bound the RIP-p distortion of a matrix on column supports.

Three tiers, always labelled: a dense angular grid for supports of size <= 3,
sign-vector enumeration, and a projected-gradient extremizer.  Every estimate
also carries two cheap certified bounds that hold for any matrix:

* lower: rows touched by a single support column contribute exactly
  ``|B_ij x_j|^p``, so ``min ratio^p >= min_j sum_{private i} |B_ij|^p``;
* upper: by Jensen on each row, ``|sum_j B_ij x_j|^p <= r_i^(p-1) sum_j |B_ij| |x_j|^p``
  with ``r_i = sum_j |B_ij|``, so ``max ratio^p <= max_j sum_i |B_ij| r_i^(p-1)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import stream
from .matrix import SparseBinaryMatrix, as_csc
from .parallel import pmap

SIGN_ENUM_LIMIT = 10**6


@dataclass(frozen=True)
class RipEstimate:
    support: tuple[int, ...]
    p: float
    lo_min: float  # certified lower bound on min ratio
    hi_min: float  # best (smallest) ratio found
    lo_max: float  # best (largest) ratio found
    hi_max: float  # certified upper bound on max ratio
    method: str  # "grid" | "sign_enum" | "heuristic"
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def distortion(self) -> float:
        """``hi_max / hi_min``: distortion after rescaling so the found minimum is 1."""
        return self.hi_max / self.hi_min if self.hi_min > 0 else math.inf

    @property
    def distortion_found(self) -> float:
        return self.lo_max / self.hi_min if self.hi_min > 0 else math.inf

    def to_json_dict(self) -> dict:
        return {"support": list(self.support), "p": self.p, "lo_min": self.lo_min,
                "hi_min": self.hi_min, "lo_max": self.lo_max, "hi_max": _json_float(self.hi_max),
                "method": self.method, "diagnostics": self.diagnostics}


def _json_float(v):
    return v if math.isfinite(v) else "inf"


def submatrix(A, support) -> np.ndarray:
    """Dense ``A[:, support]`` with all-zero rows dropped."""
    sub = as_csc(A)[:, np.asarray(support, dtype=np.int64)]
    rows = np.unique(sub.indices)
    return sub[rows].toarray() if rows.size else np.zeros((1, sub.shape[1]))


def merged_submatrix(A, support, p: float) -> np.ndarray:
    """``submatrix`` with duplicate rows merged into one row scaled by ``count**(1/p)``.

    Exact for every ratio and for ``certified_bounds``; a binary support of
    size k collapses to at most ``2**k - 1`` rows.
    """
    B = submatrix(A, support)
    U, counts = np.unique(B, axis=0, return_counts=True)
    if U.shape[0] == B.shape[0]:
        return B
    return U * (counts.astype(float) ** (1.0 / p))[:, None]


def pnorm(v, p, axis=-1):
    return np.sum(np.abs(v) ** p, axis=axis) ** (1.0 / p)


def ratios(B: np.ndarray, X: np.ndarray, p: float) -> np.ndarray:
    """``||B x||_p / ||x||_p`` for each row ``x`` of ``X``."""
    return pnorm(X @ B.T, p) / pnorm(X, p)


def certified_bounds(B: np.ndarray, p: float) -> tuple[float, float]:
    absB = np.abs(B)
    nnz_per_row = (absB > 0).sum(axis=1)
    private = absB * (nnz_per_row == 1)[:, None]
    lo = float(np.min(np.sum(private**p, axis=0)) ** (1 / p))
    r = absB.sum(axis=1)
    jensen = float(np.max(absB.T @ r ** (p - 1)) ** (1 / p))
    k = B.shape[1]
    colwise = k ** (1 - 1 / p) * float(np.max(pnorm(B, p, axis=0)))
    return lo, min(jensen, colwise)


def binary_certified_bounds(A: SparseBinaryMatrix, support, p: float) -> tuple[float, float]:
    """:func:`certified_bounds` from integer row loads, for equal-valued binary columns."""
    sup = A.supports[np.asarray(support, dtype=np.int64)]
    k = sup.shape[0]
    rows, inv, cnt = np.unique(sup.ravel(), return_inverse=True, return_counts=True)
    c = cnt[inv].reshape(sup.shape)
    vp = A.value**p
    lo = float((np.min(np.sum(c == 1, axis=1)) * vp) ** (1 / p))
    powers = np.arange(k + 1, dtype=float) ** (p - 1)
    jensen = float((np.max(powers[c].sum(axis=1)) * vp) ** (1 / p))
    colwise = k ** (1 - 1 / p) * (A.d * vp) ** (1 / p)
    return lo, min(jensen, colwise)


def certified_estimate(A, support, p: float) -> RipEstimate:
    """Bounds only (no search); ``hi_min``/``lo_max`` come from the basis vectors."""
    if isinstance(A, SparseBinaryMatrix):
        lo, hi = binary_certified_bounds(A, support, p)
        col = float((A.d * A.value**p) ** (1 / p))
        return RipEstimate(tuple(int(c) for c in support), p, lo, col, col, hi, "certified")
    B = submatrix(A, support)
    lo, hi = certified_bounds(B, p)
    cols = pnorm(B, p, axis=0)
    return RipEstimate(tuple(int(c) for c in support), p, lo, float(cols.min()),
                       float(cols.max()), hi, "certified")


def _sphere_grid(k: int, res: int) -> tuple[np.ndarray, float]:
    """Unit-2-sphere grid (up to sign) and its geodesic covering radius."""
    if k == 2:
        th = np.pi * np.arange(res) / res
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.pi / (2 * res)
    th = np.pi * np.arange(res + 1) / res
    ph = 2 * np.pi * np.arange(2 * res) / (2 * res)
    T, P = np.meshgrid(th, ph, indexing="ij")
    V = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
    return V, np.pi / res


def brute_oracle(A, support, p: float, grid_res: int = 256) -> RipEstimate:
    """Grid-search extrema of ``||A_S x||_p / ||x||_p`` for ``|S| <= 3``.

    The error band is the grid covering radius times a Lipschitz modulus of the
    ratio on the unit 2-sphere, so ``[lo_min, hi_min]`` and ``[lo_max, hi_max]``
    bracket the true extrema.
    """
    support = tuple(int(c) for c in support)
    k = len(support)
    if not 1 <= k <= 3:
        raise ValueError("brute_oracle supports 1 to 3 columns")
    if grid_res < 64:
        raise ValueError("grid_res must be >= 64")
    B = submatrix(A, support)
    cert_lo, cert_hi = certified_bounds(B, p)
    if k == 1:
        v = float(pnorm(B[:, 0], p))
        return RipEstimate(support, p, v, v, v, v, "grid", {"band": 0.0})
    V, radius = _sphere_grid(k, grid_res)
    f = ratios(B, V, p)
    q_min = min(1.0, k ** (1 / p - 0.5))
    lip_q = max(1.0, k ** (1 / p - 0.5))
    lip_g = math.sqrt(float(np.sum(pnorm(B, p, axis=0) ** 2)))
    band = (lip_g + cert_hi * lip_q) / q_min * radius
    fmin, fmax = float(f.min()), float(f.max())
    return RipEstimate(support, p, max(fmin - band, cert_lo, 0.0), fmin, fmax,
                       min(fmax + band, cert_hi), "grid",
                       {"band": band, "grid_points": int(V.shape[0]),
                        "argmin": V[int(f.argmin())].tolist(), "argmax": V[int(f.argmax())].tolist()})


def _sign_vectors(k: int):
    for chunk in _batched(itertools.product((-1.0, 0.0, 1.0), repeat=k), 65536):
        X = np.asarray(chunk)
        yield X[np.any(X != 0, axis=1)]


def _batched(it, n):
    it = iter(it)
    while True:
        b = list(itertools.islice(it, n))
        if not b:
            return
        yield b


def sign_vector_bound(A, support, p: float, seed: int = 0, random_signs: int = 4096) -> float:
    """Largest ratio over ``{-1,0,1}`` vectors on the support.

    Exhaustive when ``3^k <= 10^6``; otherwise the row-sign-matched family
    (for each row, signs of its ``t`` largest entries) plus random sign vectors.
    The value is a certified lower bound on the maximum ratio.
    """
    B = submatrix(A, support)
    return _sign_bound(B, p, seed, random_signs)


def _sign_bound(B, p, seed=0, random_signs=4096):
    k = B.shape[1]
    best = 0.0
    if 3**k <= SIGN_ENUM_LIMIT:
        for X in _sign_vectors(k):
            best = max(best, float(ratios(B, X, p).max()))
        return best
    order = np.argsort(-np.abs(B), axis=1, kind="stable")
    fam = []
    for i in range(B.shape[0]):
        for t in range(1, k + 1):
            x = np.zeros(k)
            idx = order[i, :t]
            x[idx] = np.sign(B[i, idx])
            if np.any(x):
                fam.append(x)
    X = np.unique(np.asarray(fam), axis=0)
    best = float(ratios(B, X, p).max())
    rng = stream(seed, 1)
    R = rng.choice([-1.0, 1.0], size=(random_signs, k))
    return max(best, float(ratios(B, R, p).max()))


@dataclass(frozen=True)
class SearchOpts:
    restarts: int = 200
    iters: int = 500
    step: float = 1.0
    tol: float = 1e-10
    seed: int = 0


def _pgd(B: np.ndarray, p: float, X: np.ndarray, sense: int, opts: SearchOpts):
    """Projected gradient on ``||Bx||_p^p`` over the unit p-sphere, all restarts at once.

    ``sense`` is +1 for ascent, -1 for descent.  Step sizes backtrack by halving
    from ``opts.step``; a restart stops when its relative improvement drops
    below ``opts.tol``.
    """
    X = X / pnorm(X, p)[:, None]

    def obj(X):
        return np.sum(np.abs(X @ B.T) ** p, axis=1)

    F = obj(X)
    active = np.ones(X.shape[0], dtype=bool)
    it = 0
    for it in range(1, opts.iters + 1):
        if not active.any():
            break
        Xa = X[active]
        Y = Xa @ B.T
        G = p * (np.abs(Y) ** (p - 1) * np.sign(Y)) @ B
        # unit direction: near a zero minimum the raw gradient vanishes like |y|^(p-1)
        gn = np.linalg.norm(G, axis=1)
        G = G / np.where(gn > 0, gn, 1.0)[:, None]
        eta = np.full(Xa.shape[0], opts.step)
        Fa = F[active]
        newX, newF = Xa.copy(), Fa.copy()
        pending = np.ones(Xa.shape[0], dtype=bool)
        for _ in range(40):
            if not pending.any():
                break
            cand = Xa[pending] + sense * eta[pending, None] * G[pending]
            nrm = pnorm(cand, p)
            ok_norm = nrm > 0
            cand[ok_norm] /= nrm[ok_norm, None]
            Fc = obj(cand)
            better = ok_norm & (sense * (Fc - Fa[pending]) > 0)
            idx = np.flatnonzero(pending)
            newX[idx[better]] = cand[better]
            newF[idx[better]] = Fc[better]
            pending[idx[better]] = False
            eta[pending] *= 0.5
        rel = np.abs(newF - Fa) / np.maximum(np.abs(Fa), 1e-300)
        X[active], F[active] = newX, newF
        still = (rel > opts.tol) & ~pending
        active[np.flatnonzero(active)[~still]] = False
    return X, F, int(active.sum()), it


def rip_on_support(A, support, p: float, opts: SearchOpts | None = None) -> RipEstimate:
    """Heuristic extrema of the ratio on one support, merged with sign enumeration."""
    opts = opts or SearchOpts()
    support = tuple(int(c) for c in support)
    B = merged_submatrix(A, support, p)
    k = B.shape[1]
    lo, hi = certified_bounds(B, p)
    rng = stream(opts.seed, *support)
    starts = np.vstack([np.eye(k), rng.standard_normal((max(opts.restarts - k, 1), k))])
    signs = rng.choice([-1.0, 1.0], size=(min(opts.restarts, 64), k))
    Xmax, Fmax, unconv_max, it_max = _pgd(B, p, np.vstack([starts, signs]), +1, opts)
    Xmin, Fmin, unconv_min, it_min = _pgd(B, p, starts.copy(), -1, opts)
    found_max = float(Fmax.max() ** (1 / p))
    found_min = float(Fmin.min() ** (1 / p))
    found_max = max(found_max, _sign_bound(B, p, opts.seed))
    # the found values are attained, so they sit inside the certified brackets
    found_min = max(found_min, lo)
    found_max = min(found_max, hi)
    diag = {"restarts": int(starts.shape[0]), "unconverged_max": unconv_max,
            "unconverged_min": unconv_min, "iterations": max(it_max, it_min),
            "converged": unconv_max == 0 and unconv_min == 0,
            "argmin": Xmin[int(Fmin.argmin())].tolist(), "argmax": Xmax[int(Fmax.argmax())].tolist()}
    return RipEstimate(support, p, lo, found_min, found_max, hi, "heuristic", diag)


@dataclass(frozen=True)
class SampledRip:
    k: int
    p: float
    num_supports: int
    worst_min: float  # smallest found minimum ratio
    worst_max: float  # largest found maximum ratio
    certified_min: float  # smallest certified lower bound
    certified_max: float  # largest certified upper bound
    support_witnesses: dict
    estimates: tuple = field(default=(), repr=False, compare=False)

    def to_json_dict(self) -> dict:
        return {"k": self.k, "p": self.p, "num_supports": self.num_supports,
                "worst_min": self.worst_min, "worst_max": self.worst_max,
                "certified_min": self.certified_min, "certified_max": _json_float(self.certified_max),
                "support_witnesses": self.support_witnesses}


def random_support(n: int, k: int, seed: int, index: int) -> tuple[int, ...]:
    cols = stream(seed, 2, index).choice(n, size=k, replace=False)
    return tuple(sorted(int(c) for c in cols))


def fold(estimates, k: int, p: float) -> SampledRip:
    """Merge per-support estimates into the worst-case aggregate."""
    estimates = tuple(estimates)
    if not estimates:
        raise ValueError("nothing to aggregate")
    i_min = min(range(len(estimates)), key=lambda i: estimates[i].hi_min)
    i_max = max(range(len(estimates)), key=lambda i: estimates[i].lo_max)
    i_cmin = min(range(len(estimates)), key=lambda i: estimates[i].lo_min)
    i_cmax = max(range(len(estimates)), key=lambda i: estimates[i].hi_max)
    wit = {"min": list(estimates[i_min].support), "max": list(estimates[i_max].support),
           "certified_min": list(estimates[i_cmin].support),
           "certified_max": list(estimates[i_cmax].support)}
    return SampledRip(k, p, len(estimates), estimates[i_min].hi_min, estimates[i_max].lo_max,
                      estimates[i_cmin].lo_min, estimates[i_cmax].hi_max, wit, estimates)


def rip_sampled(A, k: int, p: float, num_supports: int = 100, opts: SearchOpts | None = None,
                seed: int = 0, mode: str = "heuristic", threads: int | None = None,
                supports=None) -> SampledRip:
    """Aggregate RIP estimates over uniformly random ``k``-column supports.

    ``mode="certified"`` skips the search and uses the certified bounds plus
    basis vectors; it is much cheaper and never optimistic.  Extra supports
    may be passed explicitly via ``supports``.
    """
    n = as_csc(A).shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}")
    opts = opts or SearchOpts()
    sups = [random_support(n, k, seed, i) for i in range(num_supports)]
    if supports is not None:
        sups.extend(tuple(int(c) for c in s) for s in supports)
    if mode == "certified":
        ests = pmap(lambda s: certified_estimate(A, s, p), sups, threads)
    elif mode == "heuristic":
        ests = pmap(lambda s: rip_on_support(A, s, p, replace(opts, seed=seed)), sups, threads)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return fold(ests, k, p)
