"""Small numerical kernel: sparse SPD solves and dense symmetric generalized eigensolver.

Sparse matrices are scipy CSR throughout; factorizations use SuperLU in
symmetric mode with diagonal pivoting so that a non-SPD input shows up as a
nonpositive pivot.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import NumericalError, SpdViolationError, UsageError


def spmv(A, x):
    """Sparse matrix-vector product y = A @ x with a dimension check."""
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise UsageError(
            f"dimension mismatch: matrix is {A.shape[0]}x{A.shape[1]}, vector has length {x.shape[0]}"
        )
    return A @ x


def check_csr(A, symmetric=False):
    """Validate CSR structure; optionally require exact symmetry."""
    A = sp.csr_matrix(A)
    n_rows, _ = A.shape
    if A.indptr.shape[0] != n_rows + 1 or np.any(np.diff(A.indptr) < 0):
        raise UsageError("malformed CSR row offsets")
    if A.nnz and (A.indices.min() < 0 or A.indices.max() >= A.shape[1]):
        raise UsageError("CSR column index out of bounds")
    for r in range(n_rows):
        cols = A.indices[A.indptr[r]:A.indptr[r + 1]]
        if np.any(np.diff(cols) <= 0):
            raise UsageError(f"row {r}: column indices not strictly increasing")
    if symmetric and (A != A.T).nnz != 0:
        raise UsageError("matrix is not exactly symmetric")
    return A


class SpdFactorization:
    """Sparse Cholesky-type factorization of an SPD matrix.

    Backed by SuperLU in symmetric mode with pure diagonal pivoting; for an
    SPD matrix all pivots are positive, so a nonpositive pivot is reported as
    an SPD violation naming the offending row.
    """

    def __init__(self, A):
        A = sp.csr_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise UsageError("matrix must be square")
        if (A != A.T).nnz != 0:
            raise UsageError("matrix must be symmetric")
        self.shape = A.shape
        try:
            self._lu = splu(
                A.tocsc(),
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options=dict(SymmetricMode=True),
            )
        except RuntimeError as exc:  # exactly singular
            raise SpdViolationError(f"SPD factorization failed: {exc}") from exc
        pivots = self._lu.U.diagonal()
        bad = np.flatnonzero(pivots <= 0.0)
        if bad.size:
            row = int(self._lu.perm_c[bad[0]])
            raise SpdViolationError(f"nonpositive pivot encountered at row {row}")

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise UsageError("right-hand side has wrong length")
        return self._lu.solve(b)


def spd_factorize(A):
    return SpdFactorization(A)


def spd_solve(F, b):
    return F.solve(b)


@dataclass
class DenseSymEigResult:
    """Full eigendecomposition of A v = lambda B v with B-orthonormal vectors."""

    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns, B-orthonormal, first nonzero entry > 0


def _fix_signs(vectors):
    """Flip each column so its first nonnegligible component is positive."""
    V = vectors.copy()
    for k in range(V.shape[1]):
        col = V[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))
        if idx.size and col[idx[0]] < 0:
            V[:, k] = -col
    return V


def dense_sym_generalized_eig(A, B):
    """Solve the generalized symmetric eigenproblem A v = lambda B v.

    A is dense symmetric, B a positive diagonal (1-D array of diagonal
    entries or a diagonal matrix). Returns all pairs, eigenvalues ascending,
    eigenvectors B-orthonormal with a deterministic sign convention.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 2:
        if np.any(B != np.diag(np.diag(B))):
            raise UsageError("B must be diagonal")
        bdiag = np.diag(B).copy()
    else:
        bdiag = np.atleast_1d(B).astype(float)
    if A.shape[0] != A.shape[1] or A.shape[0] != bdiag.shape[0]:
        raise UsageError("A must be square and match the size of B")
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(np.abs(A).max(), 1.0)):
        raise UsageError("A must be symmetric")
    if np.any(bdiag <= 0.0):
        k = int(np.flatnonzero(bdiag <= 0.0)[0])
        raise UsageError(f"B must have positive diagonal entries (entry {k} is {bdiag[k]})")
    try:
        w, V = scipy.linalg.eigh(0.5 * (A + A.T), np.diag(bdiag))
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"generalized eigensolver failed to converge: {exc}") from exc
    order = np.argsort(w, kind="stable")
    return DenseSymEigResult(eigenvalues=w[order], eigenvectors=_fix_signs(V[:, order]))
