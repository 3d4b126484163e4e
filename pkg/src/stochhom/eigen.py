"""Generalised symmetric eigenproblems ``K v = s M v``.

Two routes share one result type: a dense LAPACK solve for small pencils
and a shift-invert block subspace iteration with locking, whose inner solves
reuse one sparse LU of ``K - sigma M``.  Every returned pair is Rayleigh-Ritz
refined, M-orthonormal and carries a recomputed residual certificate;
eigenvalue counts are cross-checked by Sylvester inertia.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ContractError, NumericError
from .linalg import inertia_below

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = field(default=None, repr=False)
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    method: str = "dense"

    def __len__(self):
        return self.eigenvalues.size


def residual_norms(K, M, vals, vecs) -> np.ndarray:
    """``||K v - s M v|| / (||M v|| max(1, |s|))`` for every column of ``vecs``."""
    if vecs is None or vecs.size == 0:
        return np.zeros(0)
    KV = K @ vecs
    MV = M @ vecs
    num = np.linalg.norm(KV - MV * vals, axis=0)
    return num / (np.linalg.norm(MV, axis=0) * np.maximum(1.0, np.abs(vals)))


def _rayleigh_ritz(K, M, V):
    Kr = V.T @ (K @ V)
    Mr = V.T @ (M @ V)
    Kr = 0.5 * (Kr + Kr.T)
    Mr = 0.5 * (Mr + Mr.T)
    w, Q = sla.eigh(Kr, Mr)
    return w, V @ Q


def _dense(K, M, lo_idx=None, hi_idx=None, interval=None):
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M)
    if interval is not None:
        w, V = sla.eigh(Kd, Md, subset_by_value=interval)
    else:
        w, V = sla.eigh(Kd, Md, subset_by_index=[lo_idx, hi_idx])
    return w, V


def _block_iteration(K, M, sigma: float, count: int, tol: float, seed: int, guard: int | None = None,
                     maxiter: int = 300, start=None):
    """Shift-invert subspace iteration for the ``count`` eigenpairs nearest ``sigma``.

    Rayleigh-Ritz on ``(K - sigma M)^{-1} M V`` every sweep; pairs whose
    residual drops below ``tol / 10`` are locked and deflated from the active
    block.  ``start`` supplies leading columns of the initial block.
    """
    n = K.shape[0]
    lu = spla.splu(sp.csc_matrix(K - sigma * M))
    guard = guard if guard is not None else max(16, count // 10)
    p = min(count + guard, n)
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((n, p))
    if start is not None:
        start = np.asarray(start, dtype=float)[:, : min(p, start.shape[1])]
        V[:, : start.shape[1]] = start
    X = np.zeros((n, 0))
    locked = np.zeros(0)
    for it in range(maxiter):
        Y = lu.solve(M @ V)
        if X.shape[1]:
            Y -= X @ (X.T @ (M @ Y))
        Kr = Y.T @ (K @ Y)
        Mr = Y.T @ (M @ Y)
        theta, Q = sla.eigh(0.5 * (Kr + Kr.T), 0.5 * (Mr + Mr.T))
        V = Y @ Q
        MV = M @ V
        res = np.linalg.norm(K @ V - MV * theta, axis=0)
        res /= np.linalg.norm(MV, axis=0) * np.maximum(1.0, np.abs(theta))
        order = np.argsort(np.abs(theta - sigma))
        take = order[: count - locked.size]
        conv = take[res[take] <= 0.1 * tol]
        if conv.size:
            X = np.hstack([X, V[:, conv]])
            locked = np.concatenate([locked, theta[conv]])
        need = count - locked.size
        log.debug("block sweep %d: %d locked, %d remaining", it, locked.size, need)
        if need == 0:
            return locked, X
        rest = np.setdiff1d(order, conv, assume_unique=True)
        V = V[:, rest[: min(rest.size, need + guard)]]
    raise NumericError(f"block iteration locked {locked.size} of {count} pairs in {maxiter} sweeps")


def _finalise(K, M, w, V, tol, method, keep_vectors):
    w, V = _rayleigh_ritz(K, M, V)
    res = residual_norms(K, M, w, V)
    if np.any(res > tol):
        raise NumericError(f"eigenpair residual {res.max():.2e} exceeds tolerance {tol:.1e}", residuals=res)
    return EigenResult(w, V if keep_vectors else None, res, method)


def smallest_eigenpairs(
    K,
    M,
    k: int,
    tol: float = 1e-8,
    method: str = "auto",
    sigma: float = -1e-6,
    seed: int = 0,
    keep_vectors: bool = True,
) -> EigenResult:
    """The ``k`` algebraically smallest eigenpairs of ``K v = s M v``.

    Parameters
    ----------
    K, M : sparse or dense symmetric matrices
        ``K`` positive semidefinite, ``M`` positive definite.
    k : int
        Number of pairs, at most ``n // 4``.
    tol : float
        Bound certified on :func:`residual_norms` of every returned pair.
    method : {"auto", "dense", "iterative"}
        ``auto`` uses the dense route up to :data:`DENSE_LIMIT` unknowns.
    sigma : float
        Shift of the iterative route; must lie below the wanted eigenvalues.
    seed : int
        Seed of the random starting block.
    """
    n = K.shape[0]
    if k < 1 or k > n // 4:
        raise ContractError(f"k={k} must lie in [1, n/4] with n={n}")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "iterative"
    if method == "dense":
        w, V = _dense(K, M, 0, k - 1)
        return _finalise(K, M, w, V, tol, "dense", keep_vectors)
    if method != "iterative":
        raise ContractError(f"unknown method {method!r}")
    K = sp.csr_matrix(K)
    M = sp.csr_matrix(M)
    w, V = _block_iteration(K, M, sigma, k, tol, seed)
    result = _finalise(K, M, w, V, tol, "iterative", keep_vectors)
    # nothing may hide below the largest returned value
    top = result.eigenvalues[-1]
    if inertia_below(K, M, top - 1e-9 * max(1.0, abs(top))) > k - 1:
        raise NumericError("block iteration skipped an eigenvalue", residuals=result.residuals)
    log.debug("iterative eigensolve: k=%d, max residual %.2e", k, result.residuals.max())
    return result


def eigenvalues_in_interval(
    K,
    M,
    lo: float,
    hi: float,
    tol: float = 1e-8,
    seed: int = 0,
    method: str = "auto",
    keep_vectors: bool = False,
    start=None,
) -> EigenResult:
    """All eigenvalues in ``[lo, hi)``.

    The iterative route counts them by inertia, then runs the block iteration
    about the interval midpoint, whose nearest eigenvalues are exactly those
    inside.  The count of certified pairs must match the inertia count.
    ``start`` optionally seeds the block with good approximate eigenvectors.
    """
    n = K.shape[0]
    if hi <= lo:
        raise ContractError("empty interval")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "iterative"
    if method == "dense":
        w, V = _dense(K, M, interval=(lo, hi))
        if w.size == 0:
            return EigenResult(w, None, np.zeros(0), "dense")
        return _finalise(K, M, w, V, tol, "dense", keep_vectors)
    K = sp.csr_matrix(K)
    M = sp.csr_matrix(M)
    count = inertia_below(K, M, hi) - inertia_below(K, M, lo)
    if count == 0:
        return EigenResult(np.zeros(0), None, np.zeros(0), "iterative")
    if count > n // 2:
        raise ContractError(f"{count} eigenvalues in [{lo}, {hi}) exceed half the dimension {n}")
    w, V = _block_iteration(K, M, 0.5 * (lo + hi), count, tol, seed, start=start)
    result = _finalise(K, M, w, V, tol, "iterative", keep_vectors)
    inside = (result.eigenvalues >= lo) & (result.eigenvalues < hi)
    if inside.sum() != count:
        raise NumericError(f"resolved {int(inside.sum())} of {count} eigenvalues in [{lo}, {hi})")
    return result
