"""Smallest eigenvalue of a small dense symmetric matrix.

Shifted inverse iteration. The shift is kept strictly below the smallest
eigenvalue at all times (checked by attempting a Cholesky factorization of
``A - sigma*I``), so the iteration can only converge to the bottom of the
spectrum. After each step the shift is pulled up to ``rho - ||r||`` where
``rho`` is the Rayleigh quotient and ``r`` the residual, which makes the
convergence rate approach that of Rayleigh quotient iteration.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ._validation import check_symmetric
from .exceptions import ConvergenceError

DEFAULT_TOL = 1e-10


def _try_cholesky(mat, sigma):
    try:
        return cho_factor(mat - sigma * np.eye(mat.shape[0]), lower=True, check_finite=False)
    except LinAlgError:
        return None


def smallest_eigenpair(matrix, tol=DEFAULT_TOL, max_iter=None):
    """Return ``(lambda_min, eigenvector)`` of a symmetric matrix.

    Parameters
    ----------
    matrix : array_like, shape (N, N)
        Symmetric real matrix.
    tol : float
        Convergence threshold on the residual ``||A x - rho x||`` (unit ``x``),
        relative to ``max(1, max|A|)``.
    max_iter : int, optional
        Iteration cap, ``10 * N**2`` by default.

    Raises
    ------
    ConvergenceError
        If the residual is still above ``tol`` after ``max_iter`` steps.
    """
    mat = check_symmetric(matrix, "matrix")
    N = mat.shape[0]
    if N == 1:
        return float(mat[0, 0]), np.ones(1)
    if max_iter is None:
        max_iter = 10 * N * N
    scale = max(1.0, float(np.max(np.abs(mat))))

    offdiag = np.sum(np.abs(mat), axis=1) - np.abs(np.diag(mat))
    safe = float(np.min(np.diag(mat) - offdiag)) - 0.01 * scale
    factor = _try_cholesky(mat, safe)
    while factor is None:  # pragma: no cover - Gershgorin bound is a true lower bound
        safe -= scale
        factor = _try_cholesky(mat, safe)
    sigma = safe

    x = np.random.default_rng(0).standard_normal(N)
    x /= np.linalg.norm(x)
    residual = np.inf
    for it in range(1, max_iter + 1):
        y = cho_solve(factor, x, check_finite=False)
        x = y / np.linalg.norm(y)
        ax = mat @ x
        rho = float(x @ ax)
        residual = float(np.linalg.norm(ax - rho * x))
        if residual <= tol * scale:
            return rho, x
        # some eigenvalue lies in [rho - r, rho + r]; try to move the shift up
        target = rho - residual
        if target > sigma:
            candidate = _try_cholesky(mat, target)
            if candidate is not None:
                sigma, safe, factor = target, target, candidate
            else:
                mid = 0.5 * (safe + target)
                candidate = _try_cholesky(mat, mid)
                if candidate is not None:
                    sigma, safe, factor = mid, mid, candidate
    raise ConvergenceError(
        f"smallest eigenvalue did not converge in {max_iter} iterations (residual {residual:.3g})",
        residual=residual,
        iterations=max_iter,
    )


def smallest_eigenvalue(matrix, tol=DEFAULT_TOL, max_iter=None):
    """Smallest eigenvalue of a symmetric matrix; see :func:`smallest_eigenpair`."""
    return smallest_eigenpair(matrix, tol=tol, max_iter=max_iter)[0]
