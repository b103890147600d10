"""Correlated disturbance generators.

Three regimes are supported:

* :class:`FilteredNoiseGenerator` -- i.i.d. Gaussian innovations ``u_k`` shaped
  by a stable filter ``w_{k+1} = H w_k + F u_k``, started from the stationary
  law ``w_0 ~ N(0, Gamma_tilde)``; correlation decays like ``gamma**lag``.
* :class:`ConstantGenerator` -- one draw ``w ~ N(0, Gamma_tilde)`` per
  trajectory, repeated at every step.
* :class:`IIDGenerator` -- fresh ``N(0, Gamma_tilde)`` draws each step.

Lag convention: ``Gamma_{i,j} = E[w_i w_j^T]`` for ``i <= j``. For the
filtered generator this equals ``Gamma_tilde (H^(j-i))^T``, the transpose of
``E[w_{k+l} w_k^T] = H^l Gamma_tilde``.

A generator instance is a single trajectory's stream, keyed by
``(seed, key, trajectory)``; :meth:`DisturbanceGenerator.sample` produces many
trajectories at once from the same keyed streams.
"""

from __future__ import annotations

import numpy as np

from . import streams
from .corrbound import CorrelationModel
from .symmat import as_square, as_symmetric, dlyap, is_pd, max_gen_eig, spectral_radius, sqrt_psd

# placeholder decay rate for models whose beta term is zero
_UNUSED_GAMMA = 0.5


def stationary_cov(H, F, U):
    """Stationary covariance ``X = H X H^T + F U F^T`` of the shaping filter."""
    H = as_square(H, "H")
    F = np.atleast_2d(np.asarray(F, dtype=float))
    U = as_symmetric(U, "U")
    if F.shape != (H.shape[0], U.shape[0]):
        raise ValueError(f"F must have shape {(H.shape[0], U.shape[0])}, got {F.shape}")
    return dlyap(H, F @ U @ F.T)


def decay_rate(H, Gamma_tilde):
    """Smallest ``gamma`` with ``H Gamma_tilde H^T ⪯ gamma Gamma_tilde``."""
    H = as_square(H, "H")
    G = as_symmetric(Gamma_tilde, "Gamma_tilde")
    if not is_pd(G):
        raise ValueError("Gamma_tilde must be positive definite")
    return max_gen_eig(H @ G @ H.T, G).lambda_max


class DisturbanceGenerator:
    """One keyed trajectory stream; subclasses define the dynamics."""

    width = 0

    def __init__(self, seed=0, trajectory=0, key=(streams.DISTURBANCE,)):
        self.seed = int(seed)
        self.trajectory = int(trajectory)
        self.key = tuple(key)
        self.reset()

    def reset(self):
        self.k = 0
        self.state = None

    def spawn(self, trajectory):
        """A fresh generator with the same configuration for another trajectory."""
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.trajectory = int(trajectory)
        clone.reset()
        return clone

    def _row(self, k):
        return streams.normals(self.seed, (*self.key, self.trajectory), 1, self.width, start=k)[0]

    def next(self):
        """Emit ``w_k`` and advance to ``k + 1``."""
        w = self._step(self._row(self.k))
        self.k += 1
        return w.copy()

    def sample(self, trajectories, steps, jobs=1):
        """Disturbances ``w_0 .. w_{steps-1}`` for many trajectories.

        ``trajectories`` is a count or an iterable of trajectory indices.
        Returns an array of shape ``(N, steps, dim)``.
        """
        if isinstance(trajectories, (int, np.integer)):
            trajectories = range(int(trajectories))
        xi = streams.batch_normals(self.seed, self.key, trajectories, steps, self.width, jobs)
        return self._propagate(xi)

    def correlation_model(self, A):
        """The (alpha, beta, gamma) envelope this generator satisfies, for system ``A``."""
        raise NotImplementedError


class FilteredNoiseGenerator(DisturbanceGenerator):
    def __init__(self, H, F, U, seed=0, trajectory=0, key=(streams.DISTURBANCE,), w0=None):
        self.H = as_square(H, "H")
        if spectral_radius(self.H) >= 1.0:
            raise ValueError("H must be Schur stable")
        self.F = np.atleast_2d(np.asarray(F, dtype=float))
        self.U = as_symmetric(U, "U")
        self.Gamma_tilde = stationary_cov(self.H, self.F, self.U)
        self._U_half = sqrt_psd(self.U)
        self._G_half = sqrt_psd(self.Gamma_tilde)
        self.w0 = None if w0 is None else np.asarray(w0, dtype=float)
        self.dim = self.H.shape[0]
        self.width = max(self.dim, self.U.shape[0])
        super().__init__(seed, trajectory, key)

    def _step(self, xi):
        if self.state is None:
            self.state = self.w0.copy() if self.w0 is not None else self._G_half @ xi[: self.dim]
        else:
            self.state = self.H @ self.state + self.F @ (self._U_half @ xi[: self.U.shape[0]])
        return self.state

    def _propagate(self, xi):
        N, steps, _ = xi.shape
        out = np.empty((N, steps, self.dim))
        if self.w0 is not None:
            w = np.broadcast_to(self.w0, (N, self.dim)).copy()
        else:
            w = xi[:, 0, : self.dim] @ self._G_half.T
        if steps:
            out[:, 0] = w
        FU = self.F @ self._U_half
        for k in range(1, steps):
            w = w @ self.H.T + xi[:, k, : self.U.shape[0]] @ FU.T
            out[:, k] = w
        return out

    def correlation_model(self, A):
        gamma = decay_rate(self.H, self.Gamma_tilde)
        if gamma <= 0.0:
            return CorrelationModel(A, self.Gamma_tilde, 0.0, 0.0, _UNUSED_GAMMA)
        return CorrelationModel(A, self.Gamma_tilde, 0.0, 1.0, gamma)

    def lagged_corr(self, lag):
        """Analytic ``E[w_i w_{i+lag}^T] = Gamma_tilde (H^lag)^T``."""
        return self.Gamma_tilde @ np.linalg.matrix_power(self.H, lag).T


class ConstantGenerator(DisturbanceGenerator):
    def __init__(self, Gamma_tilde, seed=0, trajectory=0, key=(streams.DISTURBANCE,)):
        self.Gamma_tilde = as_symmetric(Gamma_tilde, "Gamma_tilde")
        self._G_half = sqrt_psd(self.Gamma_tilde)
        self.dim = self.width = self.Gamma_tilde.shape[0]
        super().__init__(seed, trajectory, key)

    def _step(self, xi):
        if self.state is None:
            self.state = self._G_half @ xi
        return self.state

    def next(self):
        # only row 0 is ever consumed
        w = self._step(self._row(0) if self.state is None else None)
        self.k += 1
        return w.copy()

    def sample(self, trajectories, steps, jobs=1):
        if isinstance(trajectories, (int, np.integer)):
            trajectories = range(int(trajectories))
        xi = streams.batch_normals(self.seed, self.key, trajectories, 1, self.width, jobs)
        w = xi[:, 0] @ self._G_half.T
        return np.repeat(w[:, None, :], steps, axis=1)

    def correlation_model(self, A):
        return CorrelationModel(A, self.Gamma_tilde, 1.0, 0.0, _UNUSED_GAMMA)


class IIDGenerator(DisturbanceGenerator):
    def __init__(self, Gamma_tilde, seed=0, trajectory=0, key=(streams.DISTURBANCE,)):
        self.Gamma_tilde = as_symmetric(Gamma_tilde, "Gamma_tilde")
        self._G_half = sqrt_psd(self.Gamma_tilde)
        self.dim = self.width = self.Gamma_tilde.shape[0]
        super().__init__(seed, trajectory, key)

    def _step(self, xi):
        self.state = self._G_half @ xi
        return self.state

    def _propagate(self, xi):
        return xi @ self._G_half.T

    def correlation_model(self, A):
        return CorrelationModel(A, self.Gamma_tilde, 0.0, 0.0, _UNUSED_GAMMA)


def empirical_corr(generator, i, j, trials, jobs=1):
    """Sample mean of ``w_i w_j^T`` over ``trials`` independent trajectories."""
    if i > j:
        raise ValueError("need i <= j")
    if trials < 1000:
        raise ValueError("trials must be at least 1000")
    w = generator.sample(trials, j + 1, jobs=jobs)
    return w[:, i].T @ w[:, j] / trials


def make_generator(spec, seed=0, key=(streams.DISTURBANCE,)):
    """Build a generator from a config mapping with a ``kind`` tag."""
    kind = spec.get("kind")
    if kind == "filtered":
        return FilteredNoiseGenerator(spec["H"], spec["F"], spec["U"], seed=seed, key=key,
                                      w0=spec.get("w0"))
    if kind == "constant":
        return ConstantGenerator(spec["Gamma_tilde"], seed=seed, key=key)
    if kind == "iid":
        return IIDGenerator(spec["Gamma_tilde"], seed=seed, key=key)
    raise ValueError(f"unknown generator kind {kind!r}")
