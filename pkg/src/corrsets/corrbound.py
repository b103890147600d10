"""Correlation bounds for disturbance-driven linear recursions.

A matrix ``Gw`` is a correlation bound of the sequence ``w_k`` for ``A`` when,
along ``z_{k+1} = A z_k + w_k`` with ``z_0 = 0``,

    A E[z_k w_k^T] + E[w_k z_k^T] A^T + E[w_k w_k^T] ⪯ Gw     for all k >= 0.

If the lagged correlations obey the exponential envelope
``Gamma_ij Gt^{-1} Gamma_ij^T ⪯ (alpha + beta gamma^(j-i)) Gt`` then, for any
``eta`` in ``[rho(A)^2, 1)``, any ``p`` in ``(max(eta, gamma eta), 1)`` and any
``S`` with ``Gt ⪯ S`` and ``A S A^T ⪯ eta S``, the matrix

    Gw = (alpha eta/(p - eta) + beta gamma eta/(p - gamma eta)) S + (1/(1 - p)) Gt

is such a bound (the "S form"). Bounding ``S ⪯ phi Gt`` gives the scalar
form ``Gw = c Gt``. Both constructions grid ``eta``, optimise the scalar
``p`` by bounded scalar search, and keep the best grid point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import lmi
from .errors import InfeasibleError
from .symmat import as_square, as_symmetric, is_pd, psd_margin, spectral_radius

P_CLAMP = 1e-9
DEFAULT_GRID_SIZE = 60
ETA_MAX = 0.999


@dataclass(frozen=True)
class CorrelationModel:
    """System matrix plus the correlation envelope ``(Gamma_tilde, alpha, beta, gamma)``.

    ``allow_growing`` admits ``gamma >= 1`` (increasingly correlated
    disturbances); ``eta`` is then further restricted to ``eta < 1/gamma``.
    """

    A: np.ndarray
    Gamma_tilde: np.ndarray
    alpha: float
    beta: float
    gamma: float
    allow_growing: bool = False

    def __post_init__(self):
        A = as_square(self.A, "A")
        G = as_symmetric(self.Gamma_tilde, "Gamma_tilde")
        if A.shape != G.shape:
            raise ValueError("A and Gamma_tilde must have the same size")
        if spectral_radius(A) >= 1.0:
            raise ValueError("A must be Schur stable")
        if not is_pd(G):
            raise ValueError("Gamma_tilde must be positive definite")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if not self.gamma > 0 or (self.gamma >= 1 and not self.allow_growing):
            raise ValueError("gamma must lie in (0, 1)")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Gamma_tilde", G)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n(self):
        return self.A.shape[0]

    def p_interval(self, eta):
        return max(eta, self.gamma * eta), 1.0

    def default_eta_grid(self, size=DEFAULT_GRID_SIZE):
        lo = spectral_radius(self.A) ** 2
        hi = ETA_MAX
        if self.allow_growing and self.gamma >= 1:
            hi = min(hi, (1.0 / self.gamma) * (1 - 1e-6))
        if lo >= hi:
            raise InfeasibleError(f"empty eta range [{lo:.6g}, {hi:.6g}]")
        return np.linspace(lo, hi, size)


@dataclass
class CorrelationBound:
    """A computed correlation bound together with the data that certifies it."""

    Gw: np.ndarray
    eta: float
    phi: float
    p: float
    S: np.ndarray
    coefficient: float
    method: str
    failures: dict = field(default_factory=dict)

    @property
    def trace(self):
        return float(np.trace(self.Gw))

    def to_dict(self):
        return {
            "method": self.method,
            "Gw": self.Gw.tolist(),
            "eta": self.eta,
            "phi": self.phi,
            "p": self.p,
            "S": self.S.tolist(),
            "coefficient": self.coefficient,
            "trace": self.trace,
            "skipped_eta": {f"{k!r}": v for k, v in self.failures.items()},
        }


def _h(p, alpha, beta, gamma, eta, phi):
    val = p / (1.0 - p)
    if alpha:
        val += alpha * phi * eta / (p - eta)
    if beta:
        val += beta * phi * gamma * eta / (p - gamma * eta)
    return val


def optimal_p(alpha, beta, gamma, eta, phi):
    """Minimise ``h(p) = a phi eta/(p-eta) + b phi g eta/(p-g eta) + p/(1-p)``.

    Returns ``(p, h(p))`` with ``p`` in ``(max(eta, gamma eta), 1)``, clamped
    ``1e-9`` away from both ends. ``h`` is convex on the interval, so a
    bounded scalar search finds the unique minimiser.
    """
    if not 0 <= eta < 1:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    if phi < 1:
        raise ValueError("phi must be >= 1")
    lo = max(eta, gamma * eta)
    if lo >= 1:
        raise ValueError("empty interval for p")
    a, b = lo + P_CLAMP, 1.0 - P_CLAMP
    res = minimize_scalar(
        _h, bounds=(a, b), args=(alpha, beta, gamma, eta, phi),
        method="bounded", options={"xatol": 1e-12, "maxiter": 500},
    )
    p = float(res.x)
    # bounded Brent never evaluates the end points themselves
    for cand in (a, b):
        if _h(cand, alpha, beta, gamma, eta, phi) < _h(p, alpha, beta, gamma, eta, phi):
            p = cand
    return p, _h(p, alpha, beta, gamma, eta, phi)


def _grid(model, eta_grid):
    grid = model.default_eta_grid() if eta_grid is None else np.asarray(eta_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("eta grid is empty")
    return grid


def _no_correlation_terms(model, eta):
    return (model.alpha == 0 and model.beta == 0) or eta == 0


def compute_bound_scalar(model, eta_grid=None):
    """Scalar-form bound ``Gw = c Gt`` with ``c`` minimised over the eta grid."""
    best = None
    failures = {}
    G = model.Gamma_tilde
    for eta in _grid(model, eta_grid):
        eta = float(eta)
        if _no_correlation_terms(model, eta):
            phi, S = 1.0, G.copy()
        else:
            cert = lmi.min_phi(model.A, G, eta)
            if not cert.ok:
                failures[eta] = cert.status
                continue
            phi, S = max(1.0, cert.objective), cert.S
        p, cost = optimal_p(model.alpha, model.beta, model.gamma, eta, phi)
        c = cost + 1.0
        if best is None or c < best.coefficient:
            best = CorrelationBound(c * G, eta, phi, p, S, c, "scalar")
    if best is None:
        raise InfeasibleError(f"no feasible eta on the grid: {failures}")
    best.failures = failures
    return best


def compute_bound_shaped(model, eta_grid=None):
    """S-form bound with minimum ``trace(Gw)`` over the eta grid.

    For fixed ``eta`` the admissible set of ``S`` does not depend on ``p``,
    so the inner problem is the minimum-trace ``S`` (one SDP per grid point),
    and ``p`` is then the scalar minimiser of the trace.
    """
    best, best_tr = None, np.inf
    failures = {}
    G = model.Gamma_tilde
    trG = float(np.trace(G))
    for eta in _grid(model, eta_grid):
        eta = float(eta)
        if _no_correlation_terms(model, eta):
            S = G.copy()
        else:
            cert = lmi.min_trace_S(model.A, G, eta)
            if not cert.ok:
                failures[eta] = cert.status
                continue
            S = cert.S
        # trace(Gw) = trace(G) * (1 + h(p; phi_eff)) with phi_eff = tr S / tr G
        phi_eff = max(1.0, float(np.trace(S)) / trG)
        p, cost = optimal_p(model.alpha, model.beta, model.gamma, eta, phi_eff)
        c_S, c_G = lmi.corrbound_coefficients(model.alpha, model.beta, model.gamma, eta, p)
        Gw = c_S * S + c_G * G
        Gw = 0.5 * (Gw + Gw.T)
        tr = float(np.trace(Gw))
        if tr < best_tr:
            best_tr = tr
            best = CorrelationBound(Gw, eta, phi_eff, p, S, cost + 1.0, "shaped")
    if best is None:
        raise InfeasibleError(f"no feasible eta on the grid: {failures}")
    best.failures = failures
    return best


def compute_bound(model, method="shaped", eta_grid=None):
    if method == "shaped":
        return compute_bound_shaped(model, eta_grid)
    if method == "scalar":
        return compute_bound_scalar(model, eta_grid)
    raise ValueError(f"unknown bound method {method!r}")


def satisfies_definition(model, bound, tol=lmi.FEAS_TOL):
    """Re-check the sufficient condition that produced ``bound``."""
    A, G, S, eta, p = model.A, model.Gamma_tilde, bound.S, bound.eta, bound.p
    lo, hi = model.p_interval(eta)
    if not (lo < p < hi) or not (spectral_radius(A) ** 2 - 1e-12 <= eta < 1):
        return False
    if psd_margin(G, S) < -tol or psd_margin(A @ S @ A.T, eta * S) < -tol:
        return False
    c_S, c_G = lmi.corrbound_coefficients(model.alpha, model.beta, model.gamma, eta, p)
    if bound.method == "scalar":
        if psd_margin(S, bound.phi * G) < -tol:
            return False
        c = bound.phi * c_S + c_G
        return psd_margin(c * G, bound.Gw) >= -tol
    return psd_margin(c_S * S + c_G * G, bound.Gw) >= -tol


@dataclass
class BoundCheck:
    """Per-step outcome of an empirical correlation-bound check."""

    max_eig: np.ndarray
    slack: np.ndarray
    passed: bool

    @property
    def worst_step(self):
        return int(np.argmax(self.max_eig - self.slack))


def verify_bound_empirically(bound, A, generator, horizon, trials, jobs=1):
    """Monte Carlo check of the correlation-bound inequality.

    For each ``k < horizon`` estimates the left-hand side by sample means over
    ``trials`` trajectories and reports ``lambda_max(LHS_hat - Gw)``. The
    check passes when each value is within three standard errors of the
    estimate (Frobenius norm of the entrywise standard errors).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    Gw = bound.Gw if isinstance(bound, CorrelationBound) else as_symmetric(bound, "Gw")
    A = as_square(A, "A")
    if getattr(generator, "dim", A.shape[0]) != A.shape[0] or Gw.shape != A.shape:
        raise ValueError("generator, A and Gw dimensions disagree")
    w = generator.sample(trials, horizon, jobs=jobs)
    z = np.zeros((trials, A.shape[0]))
    max_eig = np.empty(horizon)
    slack = np.empty(horizon)
    for k in range(horizon):
        wk = w[:, k]
        Az = z @ A.T
        # per-trial LHS_i = Az w^T + w (Az)^T + w w^T
        L = Az[:, :, None] * wk[:, None, :]
        L = L + np.transpose(L, (0, 2, 1)) + wk[:, :, None] * wk[:, None, :]
        mean = L.mean(axis=0)
        se = L.std(axis=0, ddof=1) / np.sqrt(trials)
        max_eig[k] = np.linalg.eigvalsh(mean - Gw)[-1]
        slack[k] = 3.0 * np.linalg.norm(se)
        z = Az + wk
    return BoundCheck(max_eig, slack, bool(np.all(max_eig <= slack)))
