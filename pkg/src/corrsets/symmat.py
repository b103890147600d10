"""Dense symmetric-matrix primitives.

Symmetric matrices are plain ``numpy`` arrays. Every public routine that
expects one passes its input through :func:`as_symmetric`, which averages
``(X + X.T) / 2`` so downstream eigenvalue tests see exact symmetry.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, NumericalError

#: Relative tolerance used by :func:`psd_leq` when none is given.
PSD_RTOL = 1e-9


def as_square(M, name="matrix"):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def as_symmetric(X, name="matrix"):
    """Return ``X`` as a float array symmetrized by averaging with its transpose."""
    X = as_square(X, name)
    return 0.5 * (X + X.T)


def _check_same_dim(X, Y):
    if X.shape != Y.shape:
        raise ValueError(f"dimension mismatch: {X.shape} vs {Y.shape}")


def min_eig(X):
    return float(np.linalg.eigvalsh(as_symmetric(X))[0])


def psd_margin(X, Y):
    """Smallest eigenvalue of ``Y - X``; non-negative iff ``X ⪯ Y``."""
    X = as_symmetric(X)
    Y = as_symmetric(Y)
    _check_same_dim(X, Y)
    return min_eig(Y - X)


def psd_leq(X, Y, tol=None):
    """Loewner-order test ``X ⪯ Y``.

    Parameters
    ----------
    X, Y : (n, n) array_like
        Symmetric matrices of equal size.
    tol : float, optional
        Absolute slack on the smallest eigenvalue of ``Y - X``. Defaults to
        ``PSD_RTOL`` times the larger spectral norm of the two arguments.
    """
    X = as_symmetric(X)
    Y = as_symmetric(Y)
    _check_same_dim(X, Y)
    if tol is None:
        tol = PSD_RTOL * max(np.linalg.norm(X, 2), np.linalg.norm(Y, 2))
    elif tol < 0:
        raise ValueError("tol must be non-negative")
    return min_eig(Y - X) >= -tol


def is_pd(X):
    X = as_symmetric(X)
    w = np.linalg.eigvalsh(X)
    return bool(w[0] > PSD_RTOL * max(abs(w[-1]), 1e-300))


def spectral_radius(M):
    M = as_square(M)
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def sqrt_psd(X):
    """Symmetric PSD square root via eigendecomposition.

    Negative eigenvalues within round-off of zero are clamped; anything below
    ``-1e-9 * ||X||`` is rejected.
    """
    X = as_symmetric(X)
    w, V = np.linalg.eigh(X)
    scale = max(abs(w[-1]), abs(w[0]))
    if w[0] < -1e-9 * scale:
        raise ValueError(f"matrix is not positive semidefinite (min eig {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    R = (V * np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


def dlyap(M, Q, max_doublings=64):
    """Solve ``X = M X M^T + Q`` for stable ``M``.

    Uses the doubling iteration ``X <- X + M_j X M_j^T``, ``M_j <- M_j^2``,
    which after ``j`` rounds has summed the first ``2**j`` terms of the series
    ``sum_i M^i Q (M^i)^T``.
    """
    M = as_square(M, "M")
    Q = as_symmetric(Q, "Q")
    _check_same_dim(M, Q)
    rho = spectral_radius(M)
    if rho >= 1.0:
        raise ConvergenceError(f"dlyap needs spectral radius < 1, got {rho:.6g}")
    X = Q.copy()
    Mj = M.copy()
    for _ in range(max_doublings):
        inc = Mj @ X @ Mj.T
        X = X + inc
        X = 0.5 * (X + X.T)
        Mj = Mj @ Mj
        if np.linalg.norm(inc) <= 1e-12 * (1.0 + np.linalg.norm(X)) and np.linalg.norm(Mj) < 1e-6:
            break
    else:
        raise ConvergenceError("dlyap doubling did not converge")
    resid = np.linalg.norm(X - M @ X @ M.T - Q)
    if resid > 1e-9 * (1.0 + np.linalg.norm(X)):
        raise NumericalError(f"dlyap residual {resid:.3e} too large")
    return X


class GenEigResult(NamedTuple):
    lambda_max: float
    certificate_vector: np.ndarray


def max_gen_eig(M, W):
    """Smallest ``lam`` with ``M ⪯ lam * W``, with its eigenvector.

    Equivalently the largest eigenvalue of ``W^{-1/2} M W^{-1/2}``; the
    returned vector satisfies ``M v = lam W v``.
    """
    M = as_symmetric(M, "M")
    W = as_symmetric(W, "W")
    _check_same_dim(M, W)
    if not is_pd(W):
        raise ValueError("W must be positive definite")
    try:
        w, V = scipy.linalg.eigh(M, W)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"W must be positive definite ({exc})") from None
    return GenEigResult(float(w[-1]), V[:, -1])
