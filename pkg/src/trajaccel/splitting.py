"""Fixed-point operators of first-order splitting methods.

Each operator maps the fixed-point variable ``z_k`` to ``z_{k+1}`` and can
recover the "shadow" primal point used for objectives and identification.
Operators are immutable; per-run state lives in :class:`SolverState`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Sequence

import numpy as np

from .dense import as_finite, spectral_norm
from .errors import InvalidConfigError
from .prox import ProxOracle, SmoothOracle, prox_conjugate


@dataclass
class SolverState:
    """Fixed-point variable, named auxiliary sequences and iteration counter."""

    z: np.ndarray
    shadows: Dict[str, np.ndarray] = field(default_factory=dict)
    k: int = 0


class FixedPointOperator:
    """Base class for ``z -> F(z)``.

    Subclasses set :attr:`dim` and implement :meth:`__call__`. The default
    shadow is ``z`` itself and the default residual is the Euclidean norm.
    """

    dim: int = 0
    #: Row-major shape of the primal variable when it is a matrix.
    matrix_shape: Optional[tuple] = None

    def __call__(self, z):
        raise NotImplementedError

    def initial(self, x0):
        """Fixed-point variable that starts the method at primal point ``x0``."""
        return np.array(x0, dtype=float)

    def shadow(self, z):
        return z

    def objective(self, x):
        return None

    def residual(self, v):
        return float(np.linalg.norm(v))

    def blocks(self):
        """Slices extrapolated independently by the predictor."""
        return [slice(0, self.dim)]

    def step(self, state: SolverState) -> SolverState:
        z = self(state.z)
        return SolverState(z, {"x": self.shadow(z)}, state.k + 1)


def _check_step(gamma, lipschitz, name):
    if not gamma > 0:
        raise InvalidConfigError(f"{name}: step size must be positive")
    if lipschitz > 0 and not gamma < 2.0 / lipschitz:
        raise InvalidConfigError(f"{name}: step size {gamma} must be below 2/L = {2.0 / lipschitz}")


class AffineOperator(FixedPointOperator):
    """``z -> T z + d``; a convenient exactly linear test operator."""

    def __init__(self, T, d):
        self.T = as_finite(T, ndim=2, name="T")
        self.d = as_finite(d, ndim=1, name="d")
        self.dim = self.d.shape[0]

    def __call__(self, z):
        return self.T @ z + self.d


class GradientDescent(FixedPointOperator):
    """``x -> x - gamma grad F(x)`` with default ``gamma = 1/L``."""

    def __init__(self, F: SmoothOracle, dim, gamma=None):
        self.F = F
        self.dim = int(dim)
        self.gamma = 1.0 / F.lipschitz if gamma is None else float(gamma)
        _check_step(self.gamma, F.lipschitz, "gradient descent")

    def __call__(self, z):
        return z - self.gamma * self.F.grad(z)

    def objective(self, x):
        return self.F.value(x)


class ForwardBackward(FixedPointOperator):
    """``x -> prox_{gamma R}(x - gamma grad F(x))`` with default ``gamma = 1/L``."""

    def __init__(self, R: ProxOracle, F: SmoothOracle, dim, gamma=None, matrix_shape=None):
        self.R = R
        self.F = F
        self.dim = int(dim)
        self.matrix_shape = matrix_shape
        if gamma is None:
            gamma = 1.0 / F.lipschitz if F.lipschitz > 0 else 1.0
        self.gamma = float(gamma)
        _check_step(self.gamma, F.lipschitz, "forward-backward")

    def __call__(self, z):
        return self.R.prox(z - self.gamma * self.F.grad(z), self.gamma)

    def objective(self, x):
        return self.R.value(x) + self.F.value(x)


class DouglasRachford(FixedPointOperator):
    """Douglas-Rachford map on the governing sequence ``z``.

    ``x = prox_{gamma J}(z)``, ``u = prox_{gamma R}(2x - z)``, ``z+ = z + u - x``.
    The shadow point is ``x``.
    """

    def __init__(self, R: ProxOracle, J: ProxOracle, dim, gamma=1.0, matrix_shape=None):
        if not gamma > 0:
            raise InvalidConfigError("Douglas-Rachford: gamma must be positive")
        self.R = R
        self.J = J
        self.dim = int(dim)
        self.gamma = float(gamma)
        self.matrix_shape = matrix_shape

    def __call__(self, z):
        x = self.J.prox(z, self.gamma)
        u = self.R.prox(2.0 * x - z, self.gamma)
        return z + u - x

    def shadow(self, z):
        return self.J.prox(z, self.gamma)

    def objective(self, x):
        return self.R.value(x) + self.J.value(x)

    def step(self, state):
        x = state.shadows.get("x")
        if x is None:
            x = self.shadow(state.z)
        u = self.R.prox(2.0 * x - state.z, self.gamma)
        z = state.z + u - x
        return SolverState(z, {"x": self.J.prox(z, self.gamma), "u": u}, state.k + 1)


class PrimalDual(FixedPointOperator):
    """Primal-dual map on the stacked variable ``z = (x, w)``.

    Solves ``min R(x) + J(L x)``::

        x+ = prox_{gR R}(x - gR L^T w)
        xbar = x+ + tau (x+ - x)
        w+ = prox_{gJ J*}(w + gJ L xbar)

    Defaults are ``gR = gJ = 0.99/||L||`` and ``tau = 1``.
    """

    def __init__(self, R: ProxOracle, J: ProxOracle, L_op, gamma_r=None, gamma_j=None, tau=1.0):
        self.R = R
        self.J = J
        self.L = as_finite(L_op, ndim=2, name="L")
        self.m, self.n = self.L.shape
        self.dim = self.m + self.n
        norm_L = spectral_norm(self.L)
        default = 0.99 / norm_L if norm_L > 0 else 1.0
        self.gamma_r = default if gamma_r is None else float(gamma_r)
        self.gamma_j = default if gamma_j is None else float(gamma_j)
        self.tau = float(tau)
        if not (self.gamma_r > 0 and self.gamma_j > 0):
            raise InvalidConfigError("primal-dual: step sizes must be positive")
        if not self.gamma_r * self.gamma_j * norm_L ** 2 < 1.0:
            raise InvalidConfigError("primal-dual: need gamma_r * gamma_j * ||L||^2 < 1")
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidConfigError("primal-dual: tau must lie in [0, 1]")

    def split(self, z):
        return z[: self.n], z[self.n:]

    def initial(self, x0, w0=None):
        w0 = np.zeros(self.m) if w0 is None else np.asarray(w0, dtype=float)
        return np.concatenate([np.asarray(x0, dtype=float), w0])

    def _parts(self, z):
        x, w = self.split(z)
        x_new = self.R.prox(x - self.gamma_r * (self.L.T @ w), self.gamma_r)
        x_bar = x_new + self.tau * (x_new - x)
        w_new = prox_conjugate(self.J, w + self.gamma_j * (self.L @ x_bar), self.gamma_j)
        return x_new, x_bar, w_new

    def __call__(self, z):
        x_new, _, w_new = self._parts(z)
        return np.concatenate([x_new, w_new])

    def shadow(self, z):
        return z[: self.n]

    def objective(self, x):
        return self.R.value(x) + self.J.value(self.L @ x)

    def step(self, state):
        x_new, x_bar, w_new = self._parts(state.z)
        z = np.concatenate([x_new, w_new])
        return SolverState(z, {"x": x_new, "w": w_new, "x_bar": x_bar}, state.k + 1)


class GeneralizedForwardBackward(FixedPointOperator):
    """Generalized forward-backward map on stacked copies ``z = (z_1, ..., z_m)``.

    ``x = sum_i w_i z_i`` and for every block
    ``u_i = prox_{(gamma/w_i) R_i}(2x - z_i - gamma grad F(x))``,
    ``z_i+ = z_i + u_i - x``. The residual is the sum of block norms.
    """

    def __init__(self, F: SmoothOracle, Rs: Sequence[ProxOracle], n, weights=None,
                 gamma=None, matrix_shape=None):
        self.F = F
        self.Rs = list(Rs)
        self.n = int(n)
        count = len(self.Rs)
        if count < 1:
            raise InvalidConfigError("generalized forward-backward needs at least one prox term")
        w = np.full(count, 1.0 / count) if weights is None else np.asarray(weights, dtype=float)
        upper_ok = count == 1 or np.all(w < 1)
        if w.shape != (count,) or np.any(w <= 0) or not upper_ok:
            raise InvalidConfigError("weights must lie in (0, 1)")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidConfigError("weights must sum to 1")
        self.weights = w
        if gamma is None:
            gamma = 1.0 / F.lipschitz if F.lipschitz > 0 else 1.0
        self.gamma = float(gamma)
        _check_step(self.gamma, F.lipschitz, "generalized forward-backward")
        self.dim = count * self.n
        self.matrix_shape = matrix_shape

    def _stack(self, z):
        return z.reshape(len(self.Rs), self.n)

    def initial(self, x0):
        return np.tile(np.asarray(x0, dtype=float), len(self.Rs))

    def shadow(self, z):
        return self.weights @ self._stack(z)

    def __call__(self, z):
        Z = self._stack(z)
        x = self.weights @ Z
        g = self.F.grad(x)
        out = np.empty_like(Z)
        for i, (R, w) in enumerate(zip(self.Rs, self.weights)):
            u = R.prox(2.0 * x - Z[i] - self.gamma * g, self.gamma / w)
            out[i] = Z[i] + u - x
        return out.ravel()

    def objective(self, x):
        return self.F.value(x) + sum(R.value(x) for R in self.Rs)

    def residual(self, v):
        return float(np.sum(np.linalg.norm(self._stack(v), axis=1)))

    def blocks(self):
        return [slice(i * self.n, (i + 1) * self.n) for i in range(len(self.Rs))]


class RelaxedOperator(FixedPointOperator):
    """Krasnosel'skii-Mann relaxation ``z -> z + lam (F(z) - z)``."""

    def __init__(self, base: FixedPointOperator, lam):
        if not lam > 0:
            raise InvalidConfigError("relaxation parameter must be positive")
        self.base = base
        self.lam = float(lam)
        self.dim = base.dim
        self.matrix_shape = base.matrix_shape

    def __call__(self, z):
        return km_relaxed_step(z, self.base, self.lam)

    def initial(self, x0):
        return self.base.initial(x0)

    def shadow(self, z):
        return self.base.shadow(z)

    def objective(self, x):
        return self.base.objective(x)

    def residual(self, v):
        return self.base.residual(v)

    def blocks(self):
        return self.base.blocks()


def km_relaxed_step(z, F, lam):
    """One relaxed step ``z + lam (F(z) - z)``."""
    return z + lam * (F(z) - z)


def inertial_extrapolate(points: Sequence[np.ndarray], a, b=0.0):
    """Inertial point ``z_k + a (z_k - z_{k-1}) + b (z_{k-1} - z_{k-2})``.

    Parameters
    ----------
    points : sequence of arrays, newest first
        ``(z_k,)``, ``(z_k, z_{k-1})`` or ``(z_k, z_{k-1}, z_{k-2})``. Missing
        history is treated as zero displacement.
    a, b : float
    """
    z = np.asarray(points[0], dtype=float)
    out = z.copy()
    if len(points) > 1 and a != 0.0:
        out += a * (z - points[1])
    if len(points) > 2 and b != 0.0:
        out += b * (np.asarray(points[1]) - points[2])
    return out


def fista_schedule() -> Iterator[float]:
    """Inertial coefficients ``a_k = (t_{k-1} - 1) / t_k`` with ``t_0 = 1``."""
    t = 1.0
    while True:
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        yield (t - 1.0) / t_next
        t = t_next


# Step functions mirroring the operator classes.


def fb_step(state, R, F, gamma):
    return ForwardBackward(R, F, state.z.size, gamma).step(state)


def dr_step(state, R, J, gamma):
    return DouglasRachford(R, J, state.z.size, gamma).step(state)


def pd_step(state, R, J, L_op, gamma_r, gamma_j, tau=1.0):
    return PrimalDual(R, J, L_op, gamma_r, gamma_j, tau).step(state)


def gfb_step(state, F, Rs, weights, gamma):
    n = state.z.size // len(Rs)
    return GeneralizedForwardBackward(F, Rs, n, weights, gamma).step(state)


__all__ = [
    "SolverState", "FixedPointOperator", "AffineOperator", "GradientDescent",
    "ForwardBackward", "DouglasRachford", "PrimalDual", "GeneralizedForwardBackward",
    "RelaxedOperator", "km_relaxed_step", "inertial_extrapolate", "fista_schedule",
    "fb_step", "dr_step", "pd_step", "gfb_step"
]
