"""Small semidefinite programs used by the correlation-bound construction.

The programs here have one symmetric matrix variable and at most a couple of
scalars, so a dense log-det barrier method is both adequate and fast. They
are solved in coordinates whitened by the covariance bound ``G``:
``S = G^{1/2} T G^{1/2}`` and ``Abar = G^{-1/2} A G^{1/2}``, which turns
``G ⪯ S ⪯ phi G`` into ``I ⪯ T ⪯ phi I`` and keeps the problems well scaled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CorrsetsError
from .symmat import as_square, as_symmetric, dlyap, is_pd, psd_margin, spectral_radius, sqrt_psd

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"

#: Absolute slack on minimum eigenvalues when re-verifying a certificate.
FEAS_TOL = 1e-7
#: Relaxation of the contraction LMI, in whitened units. Keeps a strict
#: interior when eta sits exactly on spectral_radius(A)**2.
CONTRACTION_RELAX = 1e-9

DEFAULT_S_GRID = np.logspace(-3, 3, 200)


@dataclass
class SdpCertificate:
    status: str
    objective: float = float("nan")
    S: np.ndarray | None = None
    scalars: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == OPTIMAL


# -- generic barrier solver --------------------------------------------------


def sym_basis(n):
    """Basis ``E_k`` of symmetric n x n matrices, upper-triangular order."""
    basis = []
    for a in range(n):
        for b in range(a, n):
            E = np.zeros((n, n))
            E[a, b] = E[b, a] = 1.0
            basis.append(E)
    return np.array(basis)


def _block_value(block, x):
    F0, Fs = block
    return F0 + np.tensordot(x, Fs, axes=1)


def _chol_all(blocks, x):
    Ls = []
    for blk in blocks:
        try:
            Ls.append(np.linalg.cholesky(_block_value(blk, x)))
        except np.linalg.LinAlgError:
            return None
    return Ls


def _barrier_value(c, t, blocks, x, Ls=None):
    if Ls is None:
        Ls = _chol_all(blocks, x)
        if Ls is None:
            return np.inf
    logdet = sum(2.0 * np.sum(np.log(np.diag(L))) for L in Ls)
    return t * (c @ x) - logdet


def _newton_center(c, t, blocks, x, max_iter=200, stop=None):
    """Minimise ``t c.x - sum log det F_j(x)`` from a strictly feasible ``x``."""
    m = x.size
    for _ in range(max_iter):
        Ls = _chol_all(blocks, x)
        g = t * c.copy()
        Hs = np.zeros((m, m))
        for (F0, Fs), L in zip(blocks, Ls):
            # G_i = L^{-1} F_i L^{-T}
            Y = np.linalg.solve(L, Fs)
            G = np.linalg.solve(L, np.transpose(Y, (0, 2, 1)))
            g -= np.trace(G, axis1=1, axis2=2)
            Gf = G.reshape(m, -1)
            Hs += Gf @ Gf.T
        Hs += 1e-14 * (np.trace(Hs) / m + 1.0) * np.eye(m)
        try:
            dx = -np.linalg.solve(Hs, g)
        except np.linalg.LinAlgError:
            dx = -np.linalg.lstsq(Hs, g, rcond=None)[0]
        dec = -(g @ dx)
        if dec < 0:
            dx = -g
            dec = g @ g
        if dec / 2.0 < 1e-11:
            return x, True
        f0 = _barrier_value(c, t, blocks, x, Ls)
        slack = 1e-13 * (abs(f0) + 1.0)
        s = 1.0
        while s > 1e-14:
            xn = x + s * dx
            fn = _barrier_value(c, t, blocks, xn)
            if fn <= f0 - 0.25 * s * dec + slack:
                break
            s *= 0.5
        else:
            # stalled on round-off: close enough to the centre
            return x, dec < 1e-6
        x = xn
        if stop is not None and stop(x):
            return x, True
    return x, False


def _phase_one(blocks, x0, radius):
    """Find a strictly feasible point, or return ``None`` if there is none.

    Solves ``min s`` subject to ``F_j(x) + s I ⪰ 0`` inside the ball
    ``||x|| <= radius`` and stops as soon as ``s < 0``.
    """
    m = x0.size
    aug = []
    for F0, Fs in blocks:
        k = F0.shape[0]
        aug.append((F0, np.concatenate([Fs, np.eye(k)[None]], axis=0)))
    # ball constraint as [[r I, x], [x^T, r]] ⪰ 0
    B0 = radius * np.eye(m + 1)
    Bs = np.zeros((m + 1, m + 1, m + 1))
    for i in range(m):
        Bs[i, i, m] = Bs[i, m, i] = 1.0
    aug.append((B0, Bs))
    s0 = max(0.0, -min(np.linalg.eigvalsh(_block_value(b, x0))[0] for b in blocks)) + 1.0
    y = np.append(x0, s0)
    c = np.zeros(m + 1)
    c[-1] = 1.0
    nu = sum(F0.shape[0] for F0, _ in aug)
    t = 1.0
    for _ in range(40):
        y, _ = _newton_center(c, t, aug, y, max_iter=60, stop=lambda z: z[-1] < 0)
        if y[-1] < 0 and _chol_all(blocks, y[:m]) is not None:
            return y[:m]
        # the optimal s is at least s(t) - nu/t
        if y[-1] - nu / t > 0 or nu / t < 1e-12:
            break
        t *= 10.0
    return None


def barrier_solve(c, blocks, x0, gap=1e-9, radius=1e9):
    """Minimise ``c @ x`` subject to ``F0_j + sum_i x_i F_ij ⪰ 0``.

    Stops once the duality gap ``nu / t`` falls below ``gap * (1 + |c @ x|)``.
    Returns ``(status, x)``. ``blocks`` is a list of ``(F0, Fs)`` pairs with
    ``Fs`` stacked along the first axis.
    """
    c = np.asarray(c, dtype=float)
    x = np.asarray(x0, dtype=float)
    if _chol_all(blocks, x) is None:
        x = _phase_one(blocks, x, radius)
        if x is None:
            return INFEASIBLE, None
    nu = sum(F0.shape[0] for F0, _ in blocks)
    t = 1.0
    last_gap, last_x = np.inf, x
    for _ in range(100):
        x, ok = _newton_center(c, t, blocks, x)
        if not ok or not np.all(np.isfinite(x)):
            # accept the previous centre if it was already accurate
            if last_gap < 1e-7:
                return OPTIMAL, last_x
            return NUMERICAL_FAILURE, x
        if np.linalg.norm(x) > radius:
            return NUMERICAL_FAILURE, x
        # duality gap relative to the objective scale
        rel_gap = nu / t / (1.0 + abs(c @ x))
        if rel_gap < gap:
            return OPTIMAL, x
        last_gap, last_x = rel_gap, x
        t *= 20.0
    return NUMERICAL_FAILURE, x


# -- problem-specific wrappers -----------------------------------------------


def _whiten(A, G):
    R = sqrt_psd(G)
    Rinv = np.linalg.inv(R)
    return R, Rinv @ A @ R


def _check_eta(A, eta):
    rho2 = spectral_radius(A) ** 2
    if not (eta >= rho2 - 1e-12 and eta < 1.0):
        raise ValueError(f"eta={eta} outside [rho(A)^2={rho2:.6g}, 1)")


def _contraction_block(Abar, eta, basis, extra=0):
    n = Abar.shape[0]
    Fs = np.array([eta * E - Abar @ E @ Abar.T for E in basis])
    if extra:
        Fs = np.concatenate([Fs, np.zeros((extra, n, n))])
    return CONTRACTION_RELAX * np.eye(n), Fs


def _interior_start(Abar, eta):
    """Whitened ``T0 ⪰ 2I`` with ``eta T0 - Abar T0 Abar^T ≻ 0``, if cheaply available.

    Falls back to ``2I`` (and hence to phase I) when eta is on the boundary.
    """
    n = Abar.shape[0]
    if eta <= 0 or spectral_radius(Abar) ** 2 >= eta * (1.0 - 1e-9):
        return 2.0 * np.eye(n)
    try:
        P = dlyap(Abar / np.sqrt(eta), np.eye(n))
    except CorrsetsError:
        return 2.0 * np.eye(n)
    return (2.0 / np.linalg.eigvalsh(P)[0]) * P


def _contraction_margin(A, S, eta):
    return psd_margin(A @ S @ A.T, eta * S)


def min_phi(A, Gamma_tilde, eta):
    """Smallest ``phi`` with ``G ⪯ S ⪯ phi G`` and ``A S A^T ⪯ eta S``.

    Returns an :class:`SdpCertificate` whose ``objective`` and
    ``scalars["phi"]`` hold the optimum and ``S`` the optimal matrix.
    """
    A = as_square(A, "A")
    G = as_symmetric(Gamma_tilde, "Gamma_tilde")
    if not is_pd(G):
        raise ValueError("Gamma_tilde must be positive definite")
    _check_eta(A, eta)
    n = A.shape[0]
    R, Abar = _whiten(A, G)
    basis = sym_basis(n)
    m = len(basis)
    I = np.eye(n)
    zeros = np.zeros((1, n, n))
    blocks = [
        (-I, np.concatenate([basis, zeros])),                  # T - I
        (np.zeros((n, n)), np.concatenate([-basis, I[None]])),  # phi I - T
        _contraction_block(Abar, eta, basis, extra=1),
        (-np.ones((1, 1)), np.concatenate([np.zeros((m, 1, 1)), np.ones((1, 1, 1))])),
    ]
    c = np.zeros(m + 1)
    c[-1] = 1.0
    T0 = _interior_start(Abar, eta)
    x0 = np.concatenate([_svec(T0), [2.0 * np.linalg.eigvalsh(T0)[-1]]])
    status, x = barrier_solve(c, blocks, x0)
    if status != OPTIMAL:
        return SdpCertificate(status, scalars={"eta": eta})
    T = np.tensordot(x[:m], basis, axes=1)
    S = R @ T @ R
    S = 0.5 * (S + S.T)
    phi = float(x[-1])
    cert = SdpCertificate(OPTIMAL, phi, S, {"phi": phi, "eta": eta})
    if not (
        psd_margin(G, S) >= -FEAS_TOL
        and psd_margin(S, phi * G) >= -FEAS_TOL
        and _contraction_margin(A, S, eta) >= -FEAS_TOL
    ):
        cert.status = NUMERICAL_FAILURE
    return cert


def _svec(T):
    n = T.shape[0]
    return np.array([T[a, b] for a in range(n) for b in range(a, n)])


def min_trace_S(A, Gamma_tilde, eta):
    """Minimum-trace ``S`` with ``G ⪯ S`` and ``A S A^T ⪯ eta S``."""
    A = as_square(A, "A")
    G = as_symmetric(Gamma_tilde, "Gamma_tilde")
    if not is_pd(G):
        raise ValueError("Gamma_tilde must be positive definite")
    _check_eta(A, eta)
    n = A.shape[0]
    R, Abar = _whiten(A, G)
    basis = sym_basis(n)
    blocks = [(-np.eye(n), basis), _contraction_block(Abar, eta, basis)]
    # trace(S) = trace(G T)
    c = np.array([np.sum(G * E) for E in basis])
    status, x = barrier_solve(c, blocks, _svec(_interior_start(Abar, eta)))
    if status != OPTIMAL:
        return SdpCertificate(status, scalars={"eta": eta})
    S = R @ np.tensordot(x, basis, axes=1) @ R
    S = 0.5 * (S + S.T)
    cert = SdpCertificate(OPTIMAL, float(np.trace(S)), S, {"eta": eta})
    if not (psd_margin(G, S) >= -FEAS_TOL and _contraction_margin(A, S, eta) >= -FEAS_TOL):
        cert.status = NUMERICAL_FAILURE
    return cert


def corrbound_coefficients(alpha, beta, gamma, eta, p):
    """Coefficients ``(c_S, c_G)`` of ``Gw = c_S S + c_G G`` in the S-form bound."""
    c_S = 0.0
    if alpha:
        c_S += alpha * eta / (p - eta)
    if beta:
        c_S += beta * gamma * eta / (p - gamma * eta)
    return c_S, p / (1.0 - p) + 1.0


def min_trace_corrbound(model, eta, p):
    """Minimise ``trace(Gw(S))`` over admissible ``S`` for fixed ``eta`` and ``p``.

    ``Gw(S) = c_S S + c_G G``; because the constraints on ``S`` do not involve
    ``p`` the minimiser is the minimum-trace ``S`` whenever ``c_S > 0``.
    """
    lo = max(eta, model.gamma * eta)
    if not (lo < p < 1.0):
        raise ValueError(f"p={p} outside ({lo}, 1)")
    G = model.Gamma_tilde
    c_S, c_G = corrbound_coefficients(model.alpha, model.beta, model.gamma, eta, p)
    scalars = {"eta": eta, "p": p, "c_S": c_S, "c_G": c_G}
    if c_S == 0.0:
        _check_eta(model.A, eta)
        return SdpCertificate(OPTIMAL, c_G * float(np.trace(G)), G.copy(), scalars)
    cert = min_trace_S(model.A, G, eta)
    cert.scalars.update(scalars)
    if cert.ok:
        cert.objective = c_S * float(np.trace(cert.S)) + c_G * float(np.trace(G))
    return cert


def ellipsoid_sum_inclusion(A, W, Gw, r, s_grid=None, tol=FEAS_TOL):
    """Grid certificate for ``A B(W,1) + B(Gw,r) ⊆ B(W,1)``.

    Succeeds if some multiplier ``s`` in ``s_grid`` gives
    ``(1 + 1/s) A W A^T + (1 + s) r Gw ⪯ W``. The test is sufficient only.
    """
    A = as_square(A, "A")
    W = as_symmetric(W, "W")
    Gw = as_symmetric(Gw, "Gw")
    s_grid = DEFAULT_S_GRID if s_grid is None else np.asarray(s_grid, dtype=float)
    if s_grid.size == 0:
        raise ValueError("s_grid must be non-empty")
    if np.any(s_grid <= 0):
        raise ValueError("s_grid entries must be positive")
    if not (is_pd(W) and is_pd(Gw)) or r <= 0:
        raise ValueError("need W ≻ 0, Gw ≻ 0 and r > 0")
    AWA = A @ W @ A.T
    best_margin, best_s = -np.inf, None
    for s in s_grid:
        margin = psd_margin((1.0 + 1.0 / s) * AWA + (1.0 + s) * r * Gw, W)
        if margin > best_margin:
            best_margin, best_s = margin, float(s)
    status = OPTIMAL if best_margin >= -tol else INFEASIBLE
    return SdpCertificate(status, best_margin, W, {"s": best_s, "margin": best_margin, "r": r})
