"""Ellipsoids, covariance tubes and confidence levels.

``B(Gamma, r) = {Gamma^{1/2} z : z^T z <= r}``. For ``Gamma ≻ 0`` this is
``{x : x^T Gamma^{-1} x <= r}``; singular shapes are handled in the range of
``Gamma`` (so ``B(0, r) = {0}``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from . import streams
from .errors import ConvergenceError, NumericalError
from .symmat import as_square, as_symmetric, is_pd, psd_leq, spectral_radius, sqrt_psd


@dataclass(frozen=True)
class Ellipsoid:
    Gamma: np.ndarray
    r: float

    def __post_init__(self):
        object.__setattr__(self, "Gamma", as_symmetric(self.Gamma, "Gamma"))
        if self.r < 0:
            raise ValueError("r must be non-negative")

    @property
    def dim(self):
        return self.Gamma.shape[0]

    def level(self, X):
        """``x^T Gamma^+ x`` for each row of ``X`` (``inf`` off the range of Gamma)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        w, V = np.linalg.eigh(self.Gamma)
        keep = w > 1e-12 * max(abs(w[-1]), 1e-300)
        coords = X @ V
        vals = np.sum(coords[:, keep] ** 2 / w[keep], axis=1)
        off = np.sum(coords[:, ~keep] ** 2, axis=1)
        scale = 1.0 + np.sum(X**2, axis=1)
        vals[off > 1e-18 * scale] = np.inf
        return vals

    def contains(self, x, tol=0.0):
        return contains(self, x, tol)


def contains(E, x, tol=0.0):
    """Membership ``x in B(Gamma, r)`` up to ``tol`` on the level."""
    x = np.asarray(x, dtype=float)
    if x.shape != (E.dim,):
        raise ValueError(f"expected a vector of length {E.dim}")
    return bool(E.level(x)[0] <= E.r + tol)


@dataclass
class InclusionReport:
    samples: int
    max_y_level: float
    max_w_level: float
    max_residual: float
    violations: int


def minkowski_outer_check(A, Gamma_tilde, Sigma, r, samples, seed=0):
    """Sample ``B(A Gt A^T + Sigma, r)`` and split each point as ``A Gt^{1/2} y + Sigma^{1/2} w``.

    The split uses ``y = Gt^{1/2} A^T M^{-1} x`` and ``w = Sigma^{1/2} M^{-1} x``
    with ``M = A Gt A^T + Sigma``. Reports the largest ``y^T y / r`` and
    ``w^T w / r`` seen (both must stay at or below one) and how many samples
    broke either bound.
    """
    A = as_square(A, "A")
    Gt = as_symmetric(Gamma_tilde, "Gamma_tilde")
    Sigma = as_symmetric(Sigma, "Sigma")
    if not is_pd(Sigma) or r <= 0:
        raise ValueError("need Sigma ≻ 0 and r > 0")
    n = A.shape[0]
    M = A @ Gt @ A.T + Sigma
    M_half = sqrt_psd(M)
    xi = streams.normals(seed, (streams.AUX, 0), samples, n + 1)
    u = xi[:, :n] / np.linalg.norm(xi[:, :n], axis=1, keepdims=True)
    # radius fraction skewed towards the boundary; a quarter exactly on it
    frac = 1.0 - np.abs(xi[:, n]) * 0.05
    frac[: samples // 4] = 1.0
    frac = np.clip(frac, 0.0, 1.0)
    X = (np.sqrt(r) * frac)[:, None] * (u @ M_half.T)

    Minv_x = np.linalg.solve(M, X.T).T
    Y = Minv_x @ A @ sqrt_psd(Gt)          # rows: (Gt^{1/2} A^T M^{-1} x)^T
    Wv = Minv_x @ sqrt_psd(Sigma)
    recon = Y @ sqrt_psd(Gt) @ A.T + Wv @ sqrt_psd(Sigma)
    resid = np.linalg.norm(recon - X, axis=1) / (1.0 + np.linalg.norm(X, axis=1))
    if resid.max() > 1e-8:
        raise NumericalError(f"decomposition residual {resid.max():.3e}")
    ylev = np.sum(Y**2, axis=1) / r
    wlev = np.sum(Wv**2, axis=1) / r
    bad = int(np.sum((ylev > 1 + 1e-9) | (wlev > 1 + 1e-9)))
    return InclusionReport(samples, float(ylev.max()), float(wlev.max()), float(resid.max()), bad)


@dataclass
class ReachTube:
    """Covariance bounds ``Gamma_1 .. Gamma_K`` and the confidence level ``r``."""

    levels: list
    r: float
    violation_level: float

    def ellipsoid(self, k):
        """``B(Gamma_k, r)`` for ``k >= 1`` (``k = 0`` is the singleton at the origin)."""
        if k == 0:
            return Ellipsoid(np.zeros_like(self.levels[0]), self.r)
        return Ellipsoid(self.levels[k - 1], self.r)

    def rows(self):
        n = self.levels[0].shape[0]
        header = ["k"] + [f"g_{i}_{j}" for i in range(n) for j in range(n)] + ["r"]
        body = [[k] + [float(v) for v in G.ravel()] + [float(self.r)]
                for k, G in enumerate(self.levels, start=1)]
        return header, body

    def to_csv(self, fh):
        header, body = self.rows()
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in body:
            writer.writerow([row[0]] + [repr(v) for v in row[1:]])


def reach_tube(A, Gw, r, K, distribution="chebyshev"):
    """Iterate ``Gamma_{k+1} = A Gamma_k A^T + Gw`` from ``Gamma_1 = Gw``.

    ``violation_level`` is ``n / r`` (Chebyshev), or ``1 - chi2_cdf(n, r)``
    when ``distribution="gaussian"``.
    """
    A = as_square(A, "A")
    Gw = as_symmetric(Gw, "Gw")
    if not is_pd(Gw) or r <= 0 or K < 1:
        raise ValueError("need Gw ≻ 0, r > 0 and K >= 1")
    if spectral_radius(A) >= 1:
        raise ConvergenceError("A must be Schur stable")
    n = A.shape[0]
    levels = [Gw.copy()]
    for _ in range(K - 1):
        G = A @ levels[-1] @ A.T + Gw
        levels.append(0.5 * (G + G.T))
    if distribution == "chebyshev":
        viol = n / r
    elif distribution == "gaussian":
        viol = 1.0 - chi2_cdf(n, r)
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    return ReachTube(levels, float(r), float(viol))


def tube_is_monotone(tube, tol=1e-9):
    return all(psd_leq(a, b, tol) for a, b in zip(tube.levels, tube.levels[1:]))


def chebyshev_level(n, epsilon):
    """Level ``r = n / epsilon`` giving violation probability at most ``epsilon``."""
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    return n / epsilon


def chi2_cdf(n, x):
    if n < 1:
        raise ValueError("n must be >= 1")
    if x <= 0:
        return 0.0
    return float(gammainc(n / 2.0, x / 2.0))


def _wilson_hilferty(n, q):
    # normal quantile by a rational approximation is enough for a starting point
    from scipy.special import ndtri

    z = float(ndtri(q))
    a = 2.0 / (9.0 * n)
    return max(n * (1.0 - a + z * math.sqrt(a)) ** 3, 1e-12)


def chi2_inv(n, q):
    """Quantile of the chi-squared law: ``chi2_cdf(n, x) = q``.

    Wilson--Hilferty start, then Newton steps safeguarded by a bracket.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    lo, hi = 0.0, max(1.0, 2.0 * n)
    while chi2_cdf(n, hi) < q:
        lo, hi = hi, 2.0 * hi
    x = min(max(_wilson_hilferty(n, q), lo), hi)
    half = n / 2.0
    log_norm = math.lgamma(half) + half * math.log(2.0)
    for _ in range(200):
        f = chi2_cdf(n, x) - q
        if f > 0:
            hi = x
        else:
            lo = x
        if abs(f) <= 1e-13 or hi - lo <= 1e-14 * max(1.0, hi):
            break
        pdf = math.exp((half - 1.0) * math.log(x) - x / 2.0 - log_norm) if x > 0 else 0.0
        step = x - f / pdf if pdf > 0 else None
        x = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
    return x
