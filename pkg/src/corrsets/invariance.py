"""Probabilistic invariant ellipsoids ``B(W, rho)``.

Two constructions are offered:

* ``lyapunov-equality``: ``W`` solves ``A W A^T + Gw = W``; the set is
  invariant with a violation budget set by the contraction rate
  ``lambda = min{l : A W A^T ⪯ l W}``.
* ``robust-sproc``: ``W`` certifies ``A B(W, 1) + B(Gw, r) ⊆ B(W, 1)`` through
  the multiplier family ``(1 + 1/s) A W A^T + (1 + s) r Gw ⪯ W``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import lmi
from .errors import InfeasibleError
from .probsets import chebyshev_level, chi2_inv
from .symmat import as_square, as_symmetric, dlyap, is_pd, max_gen_eig, psd_leq, spectral_radius

LYAPUNOV = "lyapunov-equality"
ROBUST = "robust-sproc"
DISTRIBUTIONS = ("chebyshev", "gaussian")


@dataclass(frozen=True)
class InvariantEllipsoid:
    W: np.ndarray
    lam: float
    construction: str
    s: float | None = None
    r: float | None = None

    @property
    def n(self):
        return self.W.shape[0]

    def to_dict(self, rho_table=None):
        out = {"construction": self.construction, "W": self.W.tolist(), "lambda": self.lam}
        if self.s is not None:
            out["s"] = self.s
            out["r"] = self.r
        if rho_table is not None:
            out["rho"] = [{"p_v": p, "rho": rho} for p, rho in rho_table]
        return out

    def to_csv(self, fh, rho_table=()):
        """One row per requested ``p_v``: flattened ``W``, ``lambda``, ``rho``."""
        n = self.n
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["construction", "p_v", "rho", "lambda"]
                        + [f"w_{i}_{j}" for i in range(n) for j in range(n)])
        flat = [repr(float(v)) for v in self.W.ravel()]
        for p, rho in rho_table:
            writer.writerow([self.construction, repr(float(p)), repr(float(rho)),
                             repr(float(self.lam))] + flat)

    def to_json(self, rho_table=None):
        return json.dumps(self.to_dict(rho_table), sort_keys=True)


@dataclass(frozen=True)
class ViolationSpec:
    n: int
    p_v: float
    distribution: str = "gaussian"
    conservative: bool = False

    def __post_init__(self):
        if not 0 < self.p_v < 1:
            raise ValueError(f"p_v must lie in (0, 1), got {self.p_v}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")


def _contraction(A, W):
    return max(0.0, max_gen_eig(A @ W @ A.T, W).lambda_max)


def synth_invariant(A, Gw):
    """Lyapunov-equality construction ``W = dlyap(A, Gw)``."""
    A = as_square(A, "A")
    Gw = as_symmetric(Gw, "Gw")
    if A.shape != Gw.shape:
        raise ValueError("A and Gw must have the same size")
    if not is_pd(Gw):
        raise ValueError("Gw must be positive definite")
    W = dlyap(A, Gw)
    return InvariantEllipsoid(W, _contraction(A, W), LYAPUNOV)


def level_for_violation(spec, lam):
    """Level ``rho`` such that ``B(W, rho)`` has violation probability ``spec.p_v``.

    The default shrink factor is ``1 - lambda``; ``spec.conservative`` uses
    ``(1 - sqrt(lambda))**2``, the level of the exact Minkowski difference
    ``B(W, rho) - B(W, lambda rho)``.
    """
    if not 0 <= lam < 1:
        raise ValueError(f"lambda must lie in [0, 1), got {lam}")
    shrink = (1.0 - math.sqrt(lam)) ** 2 if spec.conservative else 1.0 - lam
    if spec.distribution == "gaussian":
        return chi2_inv(spec.n, 1.0 - spec.p_v) / shrink
    return chebyshev_level(spec.n, spec.p_v) / shrink


def synth_invariant_robust(A, Gw, r, s_grid=None):
    """Minimum-trace ``W`` of the multiplier family over an ``s`` grid.

    For each ``s`` with ``(1 + 1/s) rho(A)^2 < 1`` the candidate is
    ``W(s) = dlyap(sqrt(1 + 1/s) A, (1 + s) r Gw)``, which meets the
    multiplier inequality with equality.
    """
    A = as_square(A, "A")
    Gw = as_symmetric(Gw, "Gw")
    if not is_pd(Gw) or r <= 0:
        raise ValueError("need Gw ≻ 0 and r > 0")
    if spectral_radius(A) >= 1:
        raise InfeasibleError("A is not Schur stable")
    s_grid = lmi.DEFAULT_S_GRID if s_grid is None else np.asarray(s_grid, dtype=float)
    rho2 = spectral_radius(A) ** 2
    best, best_tr, best_s = None, np.inf, None
    for s in s_grid:
        scale = 1.0 + 1.0 / s
        if scale * rho2 >= 1.0 - 1e-12:
            continue
        W = dlyap(math.sqrt(scale) * A, (1.0 + s) * r * Gw)
        tr = float(np.trace(W))
        if tr < best_tr:
            best, best_tr, best_s = W, tr, float(s)
    if best is None:
        raise InfeasibleError("no multiplier on the grid gives a contraction")
    return InvariantEllipsoid(best, _contraction(A, best), ROBUST, s=best_s, r=float(r))


def inclusion_implies_lyapunov(A, Gw, W, r, s_grid=None):
    """Whether the multiplier inclusion at ``r >= 1`` implies ``A W A^T + Gw ⪯ W``.

    Returns the truth value of the implication, so a ``W`` that fails the
    premise gives ``True``.
    """
    if r < 1:
        raise ValueError("the implication is only claimed for r >= 1")
    A = as_square(A, "A")
    W = as_symmetric(W, "W")
    Gw = as_symmetric(Gw, "Gw")
    premise = lmi.ellipsoid_sum_inclusion(A, W, Gw, r, s_grid).ok
    if not premise:
        return True
    return psd_leq(A @ W @ A.T + Gw, W, 1e-7)
