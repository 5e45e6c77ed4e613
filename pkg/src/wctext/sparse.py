"""Immutable sparse matrix in canonical coordinate form.

Entries are sorted by (row, col), contain no duplicates and no explicit
zeros. A scipy CSR view is cached for products; the coordinate arrays
stay the source of truth for serialization and equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DataError


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    shape: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @classmethod
    def from_coo(cls, shape, rows, cols, vals) -> "SparseMatrix":
        """Canonicalize unordered COO triplets; rejects duplicate coordinates."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise DataError("COO arrays must have identical lengths")
        keep = vals != 0.0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            if rows.min() < 0 or rows.max() >= shape[0] or cols.min() < 0 or cols.max() >= shape[1]:
                raise DataError("COO coordinates outside matrix shape")
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise DataError(f"duplicate coordinate ({rows[k]}, {cols[k]})")
        return cls(shape=(int(shape[0]), int(shape[1])), rows=rows, cols=cols, vals=vals)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        idx = np.arange(n, dtype=np.int64)
        return cls(shape=(n, n), rows=idx, cols=idx, vals=np.ones(n))

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    @cached_property
    def csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)

    @cached_property
    def csr_t(self) -> sp.csr_matrix:
        return self.csr.T.tocsr()

    def matmul_dense(self, dense: np.ndarray) -> np.ndarray:
        return self.csr @ dense

    def t_matmul_dense(self, dense: np.ndarray) -> np.ndarray:
        return self.csr_t @ dense

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.vals, minlength=self.shape[0])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.vals
        return out

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_coo(
            (self.shape[1], self.shape[0]), self.cols, self.rows, self.vals
        )

    def equals(self, other: "SparseMatrix") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
        )
