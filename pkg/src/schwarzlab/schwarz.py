"""Two-level additive Schwarz preconditioner, PCG driver and condition oracles."""

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import linalg
from .errors import NumericalError, SpdViolationError, UsageError

MODES = ("two-level", "coarse-only", "local-only")


@dataclass(frozen=True, eq=False)
class Preconditioner:
    mode: str
    R0: sp.csr_matrix          # coarse basis by interior dof
    A0_cho: object             # dense Cholesky factor of R0 A R0^T, or None
    local_dofs: list           # per-subdomain interior-dof index arrays
    local_factors: list        # matching SPD factorizations
    n: int

    @property
    def coarse_dim(self):
        return 0 if self.R0 is None else self.R0.shape[0]


def build_preconditioner(A, local_dof_sets, coarse_vectors, mode="two-level"):
    """Factorize the coarse operator and the local subdomain blocks.

    coarse_vectors are rows over interior dofs; local_dof_sets are index
    arrays into the interior dof numbering.
    """
    if mode not in MODES:
        raise UsageError(f"unknown preconditioner mode {mode!r}")
    n = A.shape[0]
    R0, A0_cho = None, None
    if mode != "local-only":
        coarse_vectors = np.atleast_2d(np.asarray(coarse_vectors, dtype=float))
        if coarse_vectors.shape[1] != n:
            raise UsageError("coarse basis vectors do not match the system size")
        gram = coarse_vectors @ coarse_vectors.T
        d = np.sqrt(np.diag(gram))
        if np.any(d <= 0.0):
            raise NumericalError("coarse basis contains a zero vector")
        gram = gram / d[:, None] / d[None, :]  # scale-invariant independence check
        gw = np.linalg.eigvalsh(gram)
        if gw[0] <= 0.0 or gw[-1] / gw[0] > 1e12:
            raise NumericalError("coarse basis is numerically rank deficient")
        R0 = sp.csr_matrix(coarse_vectors)
        A0 = (R0 @ A @ R0.T).toarray()
        try:
            A0_cho = scipy.linalg.cho_factor(A0, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise SpdViolationError(f"coarse operator is not SPD: {exc}") from exc
    local_dofs, local_factors = [], []
    if mode != "coarse-only":
        for i, idx in enumerate(local_dof_sets):
            idx = np.asarray(idx, dtype=np.int64)
            block = A[idx][:, idx].tocsr()
            try:
                F = linalg.spd_factorize(block)
            except SpdViolationError as exc:
                raise SpdViolationError(f"local block of subdomain {i} is not SPD: {exc}") from exc
            local_dofs.append(idx)
            local_factors.append(F)
    return Preconditioner(mode=mode, R0=R0, A0_cho=A0_cho,
                          local_dofs=local_dofs, local_factors=local_factors, n=n)


def apply_preconditioner(P, r):
    """z = R0^T A0^{-1} R0 r + sum_i E_i A_i^{-1} E_i^T r (deterministic order)."""
    r = np.asarray(r, dtype=float)
    if r.shape[0] != P.n:
        raise UsageError("residual has wrong length")
    z = np.zeros_like(r)
    if P.R0 is not None:
        z += P.R0.T @ scipy.linalg.cho_solve(P.A0_cho, P.R0 @ r)
    for idx, F in zip(P.local_dofs, P.local_factors):
        z[idx] += F.solve(r[idx])
    return z


@dataclass
class SolveReport:
    iterations: int
    residual_history: list       # relative l2 residuals, starting at 1.0
    kappa_estimate: float
    converged: bool
    wall_time: float
    coarse_dim: int = 0
    lambda_m_plus_1: float = math.inf
    ritz_values: np.ndarray = field(default_factory=lambda: np.array([]))
    final_relres: float = 0.0


def lanczos_tridiagonal(alphas, betas):
    """CG scalars to Lanczos tridiagonal: diag and offdiag arrays."""
    k = len(alphas)
    diag = np.empty(k)
    off = np.empty(max(k - 1, 0))
    for j in range(k):
        diag[j] = 1.0 / alphas[j]
        if j > 0:
            diag[j] += betas[j - 1] / alphas[j - 1]
        if j < k - 1:
            off[j] = math.sqrt(betas[j]) / alphas[j]
    return diag, off


def _ritz_values(alphas, betas):
    if not alphas:
        return np.array([])
    diag, off = lanczos_tridiagonal(alphas, betas)
    if diag.size == 1:
        return diag.copy()
    return scipy.linalg.eigvalsh_tridiagonal(diag, off)


def pcg(A, P, b, tol=1e-6, maxit=2000):
    """Preconditioned conjugate gradients with Lanczos condition estimation.

    P is a Preconditioner or any callable r -> M^{-1} r. Starts from the zero
    initial guess and stops when ||r||_2 / ||r0||_2 <= tol.
    """
    apply_M = P if callable(P) else (lambda r: apply_preconditioner(P, r))
    b = np.asarray(b, dtype=float)
    if not (0.0 < tol < 1.0):
        raise UsageError("tolerance must lie in (0, 1)")
    t0 = time.perf_counter()
    x = np.zeros_like(b)
    r = b.copy()
    r0_norm = float(np.linalg.norm(r))
    history = [1.0]
    alphas, betas = [], []
    if r0_norm == 0.0:
        return x, SolveReport(iterations=0, residual_history=history, kappa_estimate=1.0,
                              converged=True, wall_time=time.perf_counter() - t0,
                              final_relres=0.0)
    z = apply_M(r)
    p = z.copy()
    rz = float(r @ z)
    converged = False
    it = 0
    while it < maxit:
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise NumericalError(f"PCG breakdown at iteration {it}: p'Ap = {pAp:g}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        alphas.append(alpha)
        it += 1
        relres = float(np.linalg.norm(r)) / r0_norm
        history.append(relres)
        if relres <= tol:
            converged = True
            break
        z = apply_M(r)
        rz_new = float(r @ z)
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p
    ritz = _ritz_values(alphas, betas[: max(len(alphas) - 1, 0)])
    kappa = float(ritz[-1] / ritz[0]) if ritz.size else 1.0
    report = SolveReport(iterations=it, residual_history=history,
                         kappa_estimate=max(kappa, 1.0), converged=converged,
                         wall_time=time.perf_counter() - t0,
                         ritz_values=ritz, final_relres=history[-1])
    return x, report


def pcg_kappa_history(A, P, b, tol=1e-6, maxit=2000):
    """Run PCG while recording the condition estimate after every iteration."""
    apply_M = P if callable(P) else (lambda r: apply_preconditioner(P, r))
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    r = b.copy()
    r0_norm = float(np.linalg.norm(r))
    kappas = []
    if r0_norm == 0.0:
        return kappas
    z = apply_M(r)
    p = z.copy()
    rz = float(r @ z)
    alphas, betas = [], []
    for it in range(maxit):
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        alphas.append(alpha)
        ritz = _ritz_values(alphas, betas)
        kappas.append(float(ritz[-1] / ritz[0]))
        if float(np.linalg.norm(r)) / r0_norm <= tol:
            break
        z = apply_M(r)
        rz_new = float(r @ z)
        betas.append(rz_new / rz)
        rz = rz_new
        p = z + betas[-1] * p
    return kappas


def dense_preconditioned_spectrum(A, P, size_cap=2000):
    """Exact spectrum of M^{-1} A via the symmetric similarity L^T M^{-1} L."""
    n = A.shape[0]
    if n > size_cap:
        raise UsageError(f"dense condition oracle limited to {size_cap} dofs, got {n}")
    apply_M = P if callable(P) else (lambda r: apply_preconditioner(P, r))
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    L = scipy.linalg.cholesky(Ad, lower=True)
    Minv = np.column_stack([apply_M(np.eye(n)[:, j]) for j in range(n)])
    K = L.T @ Minv @ L
    return scipy.linalg.eigvalsh(0.5 * (K + K.T))


def dense_condition_oracle(A, P, size_cap=2000):
    """Exact condition number of the preconditioned operator."""
    w = dense_preconditioned_spectrum(A, P, size_cap)
    if w[0] <= 0.0:
        raise NumericalError("preconditioned operator is not positive definite")
    return float(w[-1] / w[0])
