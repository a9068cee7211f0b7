"""Sparse binary measurement matrices stored as per-column row supports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

MATRIX_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SparseBinaryMatrix:
    """An ``m x n`` matrix whose column ``j`` is ``d**(-1/p)`` on ``supports[j]``.

    Only integer row indices are stored; the common entry value is applied
    lazily, which keeps the object exact and cheap to share between threads.
    """

    n: int
    m: int
    d: int
    p: float
    supports: np.ndarray = field(repr=False)  # (n, d) int64, rows sorted
    seed: int | None = None

    def __post_init__(self):
        sup = np.ascontiguousarray(np.asarray(self.supports, dtype=np.int64))
        if sup.ndim != 2 or sup.shape != (self.n, self.d):
            raise ValueError(f"supports must have shape ({self.n}, {self.d}), got {sup.shape}")
        if not 1 <= self.d <= self.m:
            raise ValueError(f"need 1 <= d <= m, got d={self.d}, m={self.m}")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if sup.size:
            if sup.min() < 0 or sup.max() >= self.m:
                raise ValueError("support row index out of range")
            if self.d > 1 and np.any(np.diff(sup, axis=1) <= 0):
                raise ValueError("each support must be strictly increasing (sorted, distinct)")
        sup.setflags(write=False)
        object.__setattr__(self, "supports", sup)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    @property
    def value(self) -> float:
        return float(self.d) ** (-1.0 / self.p)

    def support(self, j: int) -> np.ndarray:
        return self.supports[j]

    @cached_property
    def _csc(self) -> sp.csc_matrix:
        indptr = np.arange(0, self.n * self.d + 1, self.d, dtype=np.int64)
        data = np.full(self.n * self.d, self.value)
        return sp.csc_matrix((data, self.supports.ravel(), indptr), shape=self.shape)

    def to_csc(self) -> sp.csc_matrix:
        return self._csc

    def to_dense(self) -> np.ndarray:
        return self._csc.toarray()

    def incidence(self, cols=None) -> sp.csc_matrix:
        """0/1 adjacency restricted to ``cols`` (all columns by default)."""
        A = self._csc if cols is None else self._csc[:, np.asarray(cols)]
        B = A.copy()
        B.data[:] = 1.0
        return B

    def matvec(self, x) -> np.ndarray:
        return self._csc @ np.asarray(x, dtype=float)

    def rmatvec(self, y) -> np.ndarray:
        return self._csc.T @ np.asarray(y, dtype=float)

    def column_pnorms(self) -> np.ndarray:
        return np.full(self.n, (self.d * self.value**self.p) ** (1.0 / self.p))

    def row_loads(self, cols=None) -> np.ndarray:
        """Number of nonzeros per row, optionally restricted to ``cols``."""
        sup = self.supports if cols is None else self.supports[np.asarray(cols)]
        return np.bincount(sup.ravel(), minlength=self.m)

    def scaled(self, c: float) -> "ScaledMatrix":
        return ScaledMatrix(self, float(c))

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "version": MATRIX_FORMAT_VERSION,
            "n": self.n,
            "m": self.m,
            "d": self.d,
            "p": self.p,
            "seed": self.seed,
            "supports": self.supports.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SparseBinaryMatrix":
        version = obj.get("version")
        if version != MATRIX_FORMAT_VERSION:
            raise ValueError(f"unsupported matrix format version {version!r}")
        n, d = int(obj["n"]), int(obj["d"])
        supports = np.array(obj["supports"], dtype=np.int64).reshape(n, d)
        seed = obj.get("seed")
        return cls(n=n, m=int(obj["m"]), d=d, p=float(obj["p"]), supports=supports,
                   seed=None if seed is None else int(seed))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()))

    @classmethod
    def load(cls, path) -> "SparseBinaryMatrix":
        return cls.from_json_dict(json.loads(Path(path).read_text()))

    def write_csv(self, path) -> None:
        v = repr(self.value)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "value"])
            for j, rows in enumerate(self.supports):
                for i in rows:
                    w.writerow([int(i), j, v])

    @classmethod
    def read_csv(cls, path, *, m: int, n: int, p: float, seed: int | None = None) -> "SparseBinaryMatrix":
        cols: dict[int, list[int]] = {j: [] for j in range(n)}
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                cols[int(rec["col"])].append(int(rec["row"]))
        d = len(cols[0])
        if any(len(r) != d for r in cols.values()):
            raise ValueError("CSV columns do not share a common support size")
        supports = np.array([sorted(cols[j]) for j in range(n)], dtype=np.int64).reshape(n, d)
        return cls(n=n, m=m, d=d, p=p, supports=supports, seed=seed)


@dataclass(frozen=True)
class ScaledMatrix:
    """``c * A`` for a sparse binary ``A``; used for scale-equivariance checks."""

    base: SparseBinaryMatrix
    c: float

    @property
    def shape(self):
        return self.base.shape

    def to_csc(self) -> sp.csc_matrix:
        return self.base.to_csc() * self.c

    def to_dense(self) -> np.ndarray:
        return self.base.to_dense() * self.c


def as_csc(A) -> sp.csc_matrix:
    """Coerce any supported matrix representation to float CSC."""
    if isinstance(A, (SparseBinaryMatrix, ScaledMatrix)):
        return A.to_csc()
    if sp.issparse(A):
        return sp.csc_matrix(A, dtype=float)
    return sp.csc_matrix(np.atleast_2d(np.asarray(A, dtype=float)))


def as_dense(A) -> np.ndarray:
    if isinstance(A, (SparseBinaryMatrix, ScaledMatrix)):
        return A.to_dense()
    if sp.issparse(A):
        return A.toarray().astype(float)
    return np.atleast_2d(np.asarray(A, dtype=float))


def load_matrix(path):
    """Load a matrix file written by :meth:`SparseBinaryMatrix.save` or a dense JSON array."""
    obj = json.loads(Path(path).read_text())
    if isinstance(obj, dict):
        return SparseBinaryMatrix.from_json_dict(obj)
    return np.asarray(obj, dtype=float)
