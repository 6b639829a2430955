"""Direct solves with reusable factorizations.

Sparse matrices are ``scipy.sparse`` CSR/CSC arrays, dense ones plain
``numpy`` arrays; LU is SuperLU (sparse) or LAPACK getrf (dense).
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularSystemError(ArithmeticError):
    pass


class Factorization:
    """LU factors of a square matrix; immutable, reusable for many right-hand sides."""

    PIVOT_TOL = 1e-14

    def __init__(self, matrix):
        shape = matrix.shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError(f"matrix must be square, got shape {shape}")
        self.n = shape[0]
        self._matrix = matrix
        if sp.issparse(matrix):
            csc = sp.csc_matrix(matrix)
            if not np.all(np.isfinite(csc.data)):
                raise ValueError("matrix has non-finite entries")
            scale = abs(csc).max() if csc.nnz else 0.0
            try:
                self._lu = spla.splu(csc)
            except RuntimeError as exc:
                raise SingularSystemError("singular system") from exc
            pivots = np.abs(self._lu.U.diagonal())
            self._dense = False
        else:
            a = np.asarray(matrix, dtype=float)
            if not np.all(np.isfinite(a)):
                raise ValueError("matrix has non-finite entries")
            scale = np.abs(a).max() if a.size else 0.0
            with warnings.catch_warnings():
                # exact zero pivots are reported below as SingularSystemError
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                self._lu = sla.lu_factor(a, check_finite=False)
            pivots = np.abs(np.diag(self._lu[0]))
            self._dense = True
        if self.n and (scale == 0.0 or pivots.min() < self.PIVOT_TOL * scale):
            raise SingularSystemError("singular system")

    def solve(self, rhs, check: bool = False) -> np.ndarray:
        b = np.asarray(rhs, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: system {self.n}, rhs {b.shape[0]}")
        x = sla.lu_solve(self._lu, b, check_finite=False) if self._dense else self._lu.solve(b)
        if check:
            a = self._matrix
            res = np.linalg.norm(a @ x - b)
            fro = sp.linalg.norm(a) if sp.issparse(a) else np.linalg.norm(a)
            bound = 1e-10 * (fro * np.linalg.norm(x) + np.linalg.norm(b))
            if res > bound:
                raise ArithmeticError(f"residual {res:.3e} exceeds {bound:.3e}")
        return x


def factorize(matrix) -> Factorization:
    return Factorization(matrix)


def solve(f: Factorization, rhs, check: bool = False) -> np.ndarray:
    return f.solve(rhs, check=check)


def block_matrix(blocks) -> sp.csc_matrix:
    """Assemble a block matrix from sparse/dense/None blocks into one CSC matrix."""
    return sp.bmat([[None if b is None else sp.csr_matrix(b) for b in row] for row in blocks],
                   format="csc")
