"""Sparse complex direct solver used for the condensed trace systems.

Storage is compressed sparse row; factorization is a sparse LU with
threshold partial pivoting and an optional fill-reducing column
ordering (SuperLU via scipy), with one step of iterative refinement
applied when the raw residual is not already tiny.  The interface is
deliberately small so a different direct solver can be plugged in
without touching the assembly code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

ORDERINGS = {"natural": "NATURAL", "min_degree": "COLAMD"}


class SparseLinalgError(RuntimeError):
    pass


@dataclass
class SparseMatrix:
    """Square complex matrix in canonical CSR form."""

    n: int
    csr: sp.csr_matrix

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.csr @ x

    def dump_matrix_market(self, path) -> None:
        """Coordinate-format dump for external cross-checking."""
        scipy.io.mmwrite(str(path), self.csr.tocoo())


def from_triplets(n: int, rows, cols, values) -> SparseMatrix:
    """Build a canonical SparseMatrix; duplicate entries are summed."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=np.complex128)
    if len(rows) and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
        raise IndexError("triplet index out of range")
    mat = sp.coo_matrix((values, (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return SparseMatrix(n, mat)


@dataclass
class Factorization:
    """LU factorization with pivot diagnostics."""

    matrix: SparseMatrix
    lu: spla.SuperLU
    ordering: str
    min_pivot: float
    growth: float
    refine_steps: int = 1

    @property
    def fill_nnz(self) -> int:
        return self.lu.L.nnz + self.lu.U.nnz


def factorize_lu(A: SparseMatrix, ordering: str = "min_degree",
                 pivot_threshold: float = 0.1, refine_steps: int = 1) -> Factorization:
    """Sparse LU with threshold partial pivoting.

    Raises SparseLinalgError on a (structurally or numerically)
    singular matrix; that always signals a modelling error upstream.
    """
    if ordering not in ORDERINGS:
        raise ValueError(f"ordering must be one of {sorted(ORDERINGS)}")
    csc = A.csr.tocsc()
    try:
        lu = spla.splu(csc, permc_spec=ORDERINGS[ordering],
                       diag_pivot_thresh=pivot_threshold)
    except RuntimeError as exc:
        raise SparseLinalgError(f"sparse LU failed: {exc}") from exc
    diag = np.abs(lu.U.diagonal())
    if diag.size and diag.min() == 0.0:
        raise SparseLinalgError("zero pivot: singular matrix")
    amax = np.abs(A.csr.data).max() if A.nnz else 0.0
    umax = np.abs(lu.U.data).max() if lu.U.nnz else 0.0
    return Factorization(
        matrix=A,
        lu=lu,
        ordering=ordering,
        min_pivot=float(diag.min()) if diag.size else np.inf,
        growth=float(umax / amax) if amax else 0.0,
        refine_steps=refine_steps,
    )


def solve(F: Factorization, b: np.ndarray) -> np.ndarray:
    """Solve A x = b with iterative refinement when needed."""
    b = np.asarray(b, dtype=np.complex128)
    if b.shape[0] != F.matrix.n:
        raise ValueError(f"rhs length {b.shape[0]} != {F.matrix.n}")
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return np.zeros_like(b)
    x = F.lu.solve(b)
    for _ in range(F.refine_steps):
        r = b - F.matrix.matvec(x)
        if np.linalg.norm(r) <= 1e-11 * nb:
            break
        x = x + F.lu.solve(r)
    return x


def residual(A: SparseMatrix, x: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return float(np.linalg.norm(A.matvec(x)))
    return float(np.linalg.norm(A.matvec(x) - b) / nb)
