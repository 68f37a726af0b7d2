"""Pivoted Cholesky with a fixed jitter schedule."""
from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from .errors import FactorizationError

# relative ridges tried in order; the last failure raises. Pivoting handles
# semidefinite input, so the bare matrix goes first and stays exactly low rank.
JITTERS = (0.0, 1e-12, 1e-10)


class Factor:
    """Low-rank factor ``F`` with ``C ~= F @ F.T``.

    Attributes
    ----------
    F : ndarray, shape (n, rank)
    rank : int
    smallest_pivot : float
        Smallest accepted pivot (squared diagonal of the Cholesky factor);
        a cheap proxy for the smallest eigenvalue.
    jitter : float
        Relative ridge that was needed.
    """

    def __init__(self, F, smallest_pivot, jitter):
        self.F = F
        self.rank = F.shape[1]
        self.smallest_pivot = smallest_pivot
        self.jitter = jitter

    def __repr__(self):
        n = self.F.shape[0]
        return f"Factor(n={n}, rank={self.rank}, jitter={self.jitter:g})"


def _attempt(C, ridge, scale):
    n = C.shape[0]
    A = C.copy()
    A[np.diag_indices(n)] += ridge * scale
    tol = max(n, 16) * 10 * np.finfo(float).eps * scale
    c, piv, rank, info = lapack.dpstrf(A, lower=1, tol=tol)
    if info < 0:
        raise FactorizationError(f"dpstrf argument error {info}")
    L = np.tril(c)[:, :rank]
    F = np.empty((n, rank))
    F[piv - 1] = L
    pivots = np.diag(L) ** 2 if rank else np.array([0.0])
    # Schur remainder S = A - F F^T must be negligible and not indefinite
    rem_diag = np.diag(A) - np.einsum("ij,ij->i", F, F)
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n)
    resid = np.linalg.norm(A @ v - F @ (F.T @ v)) / np.linalg.norm(v)
    bound = max(1e-8 * scale, n * tol)
    ok = rem_diag.min() >= -1e-8 * scale and resid <= bound
    return F, float(pivots.min()), ok


def pivoted_cholesky(C, jitters=JITTERS):
    """Factor a symmetric positive semidefinite matrix.

    The matrix is tried as is, then with each relative ridge from
    ``jitters`` added to the diagonal. Rank deficiency is fine: pivots below roundoff are dropped,
    so a rank-one covariance yields an exact rank-one factor.

    Raises
    ------
    FactorizationError
        If the matrix is indefinite beyond roundoff at every ridge level.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("covariance must be a square matrix")
    n = C.shape[0]
    if n == 0:
        return Factor(np.zeros((0, 0)), 0.0, 0.0)
    scale = float(np.max(np.abs(np.diag(C))))
    if scale == 0.0:
        return Factor(np.zeros((n, 0)), 0.0, 0.0)
    smallest = None
    for ridge in jitters:
        F, smallest, ok = _attempt(C, ridge, scale)
        if ok:
            return Factor(F, smallest, ridge)
    raise FactorizationError("covariance is not positive semidefinite", smallest)
