"""Sparse linear-algebra helpers: preconditioned CG and inertia counting."""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericError

log = logging.getLogger(__name__)


def jacobi(A):
    """Diagonal preconditioner of a symmetric matrix with positive diagonal."""
    d = sp.csr_matrix(A).diagonal()
    if np.any(d <= 0):
        raise NumericError("Jacobi preconditioner needs a positive diagonal")
    inv = 1.0 / d
    return lambda r: inv * r


def pcg(A, b, precond=None, rtol: float = 1e-8, maxiter: int | None = None, nullspace=None, x0=None):
    """Preconditioned conjugate gradients for symmetric positive (semi)definite ``A``.

    ``precond`` applies a symmetric positive definite approximate inverse
    (Jacobi by default).
    ``nullspace`` is a unit vector spanning the kernel of a singular ``A``;
    right-hand side, iterates and search directions are kept orthogonal to it.
    Convergence is declared on the true residual ``||b - A x|| <= rtol ||b||``.
    Raises :class:`NumericError` with the residual history on stagnation.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    b = np.asarray(b, dtype=float)

    def project(v):
        if nullspace is None:
            return v
        return v - nullspace * (nullspace @ v)

    b = project(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n)
    if precond is None:
        precond = jacobi(A)
    maxiter = maxiter or max(1000, 100 * int(np.sqrt(n)))
    x = np.zeros(n) if x0 is None else project(np.asarray(x0, dtype=float).copy())
    r = b - A @ x
    z = project(precond(r))
    p = z.copy()
    rz = r @ z
    history = []
    for it in range(maxiter):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rel = np.linalg.norm(r) / bnorm
        history.append(rel)
        if rel <= rtol:
            # recheck on the true residual
            true = np.linalg.norm(b - project(A @ x)) / bnorm
            if true <= rtol:
                log.debug("pcg converged in %d iterations (residual %.2e)", it + 1, true)
                return project(x)
            r = b - project(A @ x)
        z = project(precond(r))
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    true = np.linalg.norm(b - project(A @ x)) / bnorm
    if true <= rtol:
        return project(x)
    raise NumericError(f"pcg stagnated at relative residual {true:.3e}", residuals=history[-20:] + [true])


def inertia_below(K, M, sigma: float) -> int:
    """Number of eigenvalues of the pencil ``(K, M)`` strictly below ``sigma``.

    Sylvester's law of inertia applied to a symmetric ``LDL^T`` factorisation
    of ``K - sigma M`` (SuperLU in symmetric mode with diagonal pivots).
    """
    A = sp.csc_matrix(K - sigma * M)
    lu = spla.splu(
        A,
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options={"SymmetricMode": True},
    )
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise NumericError("off-diagonal pivoting spoiled the inertia count")
    d = lu.U.diagonal()
    if np.any(d == 0):
        raise NumericError(f"shift {sigma} is an eigenvalue to working precision")
    return int(np.count_nonzero(d < 0))
