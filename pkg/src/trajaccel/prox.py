"""Proximal and gradient oracles.

A :class:`ProxOracle` evaluates ``prox_{t*mu*R}`` for a scaled regularizer
``mu*R``; a :class:`SmoothOracle` evaluates the value and gradient of a
differentiable data-fit term together with its Lipschitz constant. Oracles
are immutable once built.
"""

from __future__ import annotations

import numpy as np

from .dense import as_finite, small_svd, spectral_norm
from .errors import InvalidConfigError, InvalidProblemError

#: Relative singular value tolerance for the full-row-rank check.
AFFINE_RANK_TOL = 1e-10


# --------------------------------------------------------------------------
# Closed-form maps


def prox_l1(x, t):
    """Soft thresholding ``sign(x) * max(|x| - t, 0)``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def prox_group_l12(x, blocks, t):
    """Block soft thresholding.

    Parameters
    ----------
    x : (n,) array_like
    blocks : sequence of index arrays partitioning ``range(n)``
    t : float
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for idx in blocks:
        xb = x[idx]
        norm = np.linalg.norm(xb)
        if norm > t:
            out[idx] = (1.0 - t / norm) * xb
    return out


def prox_nuclear(X, t):
    """Singular value soft thresholding of a matrix."""
    X = np.asarray(X, dtype=float)
    if t == 0:
        return X.copy()
    U, s, V = small_svd(X)
    return (U * np.maximum(s - t, 0.0)) @ V.T


def grad_least_squares(A, f, x):
    """Gradient ``A^T (A x - f)`` of ``0.5 * ||A x - f||^2``."""
    return A.T @ (A @ x - f)


def contiguous_blocks(n, block_size):
    """Partition ``range(n)`` into consecutive blocks of ``block_size``."""
    if block_size < 1 or n % block_size:
        raise InvalidConfigError(f"block size {block_size} does not divide {n}")
    return [np.arange(i, i + block_size) for i in range(0, n, block_size)]


# --------------------------------------------------------------------------
# Prox oracles


class ProxOracle:
    """Scaled regularizer ``mu * R`` with a proximity operator.

    Subclasses implement :meth:`_prox` for ``prox_{t R}`` and :meth:`_value`.
    """

    kind = "abstract"
    is_indicator = False

    def __init__(self, mu=1.0):
        if not mu > 0:
            raise InvalidConfigError("scale mu must be positive")
        self.mu = float(mu)

    def prox(self, x, t):
        """Evaluate ``prox_{t*mu*R}(x)``."""
        if t < 0:
            raise InvalidConfigError("prox step must be nonnegative")
        return self._prox(np.asarray(x, dtype=float), t * self.mu)

    def value(self, x):
        """Evaluate ``mu * R(x)``; indicators return 0 (callers pass feasible points)."""
        return self.mu * self._value(np.asarray(x, dtype=float))

    def _prox(self, x, t):
        raise NotImplementedError

    def _value(self, x):
        raise NotImplementedError


class ZeroProx(ProxOracle):
    kind = "zero"

    def _prox(self, x, t):
        return x.copy()

    def _value(self, x):
        return 0.0


class L1Prox(ProxOracle):
    kind = "l1"

    def _prox(self, x, t):
        return prox_l1(x, t)

    def _value(self, x):
        return float(np.sum(np.abs(x)))


class GroupL12Prox(ProxOracle):
    """Sum of Euclidean norms over consecutive blocks."""

    kind = "group_l12"

    def __init__(self, block_size, mu=1.0):
        super().__init__(mu)
        self.block_size = int(block_size)

    def _blocks(self, n):
        return contiguous_blocks(n, self.block_size)

    def _prox(self, x, t):
        return prox_group_l12(x, self._blocks(x.size), t)

    def _value(self, x):
        return float(np.sum(np.linalg.norm(x.reshape(-1, self.block_size), axis=1)))


class NuclearProx(ProxOracle):
    """Nuclear norm of a vector reshaped row-major to ``shape``."""

    kind = "nuclear"

    def __init__(self, shape, mu=1.0):
        super().__init__(mu)
        self.shape = tuple(int(s) for s in shape)

    def _prox(self, x, t):
        return prox_nuclear(x.reshape(self.shape), t).ravel()

    def _value(self, x):
        return float(np.sum(small_svd(x.reshape(self.shape))[1]))


class NonNegativeProx(ProxOracle):
    kind = "box_nonneg"
    is_indicator = True

    def _prox(self, x, t):
        return np.maximum(x, 0.0)

    def _value(self, x):
        return 0.0


class AffineProx(ProxOracle):
    """Indicator of ``{x : A x = b}``; the SVD of ``A`` is cached.

    Raises
    ------
    InvalidProblemError
        If ``A`` does not have full row rank.
    """

    kind = "affine_indicator"
    is_indicator = True

    def __init__(self, A, b):
        super().__init__(1.0)
        A = as_finite(A, ndim=2, name="A")
        b = as_finite(b, ndim=1, name="b")
        if b.shape[0] != A.shape[0]:
            raise InvalidProblemError("affine constraint dimensions differ")
        if A.shape[0] > A.shape[1]:
            raise InvalidProblemError("affine constraint has more rows than columns")
        # A = U diag(sigma) V^T gives A A^T = U diag(sigma^2) U^T.
        U, sigma, _ = small_svd(A)
        s2 = sigma ** 2
        if sigma[-1] <= AFFINE_RANK_TOL * max(sigma[0], 1.0):
            raise InvalidProblemError("affine constraint matrix is rank deficient")
        self.A = A
        self.b = b
        self._U = U
        self._inv_gram_diag = 1.0 / s2

    def _prox(self, x, t):
        return project_affine_cached(x, self)

    def _value(self, x):
        return 0.0


def project_affine_cached(x, oracle):
    """Projection ``x + A^T (A A^T)^{-1} (b - A x)`` using a cached factorization."""
    r = oracle.b - oracle.A @ x
    y = oracle._U @ (oracle._inv_gram_diag * (oracle._U.T @ r))
    return x + oracle.A.T @ y


def project_affine(x, A, b):
    """Euclidean projection onto ``{x : A x = b}`` (``A`` full row rank)."""
    return AffineProx(A, b).prox(np.asarray(x, dtype=float), 1.0)


class LeastSquaresProx(ProxOracle):
    """``0.5 * ||A x - f||^2`` used as a proximable term.

    The prox ``(I + t A^T A)^{-1}(x + t A^T f)`` is evaluated through the
    eigen-decomposition of the Gram matrix of the short side of ``A``.
    """

    kind = "least_squares"

    def __init__(self, A, f, mu=1.0):
        super().__init__(mu)
        self.A = as_finite(A, ndim=2, name="A")
        self.f = as_finite(f, ndim=1, name="f")
        m, n = self.A.shape
        self._wide = m <= n
        G = self.A @ self.A.T if self._wide else self.A.T @ self.A
        U, lam, _ = small_svd(G)
        self._U = U
        self._lam = lam
        self._Atf = self.A.T @ self.f

    def _prox(self, x, t):
        y = x + t * self._Atf
        if self._wide:
            # Woodbury: (I + t A^T A)^{-1} = I - t A^T (I + t A A^T)^{-1} A
            w = self._U @ ((self._U.T @ (self.A @ y)) / (1.0 + t * self._lam))
            return y - t * (self.A.T @ w)
        proj = self._U.T @ y
        return y + self._U @ (proj / (1.0 + t * self._lam) - proj)

    def _value(self, x):
        r = self.A @ x - self.f
        return 0.5 * float(r @ r)


def prox_conjugate(oracle, w, t):
    """``prox_{t J*}(w)`` through the Moreau identity ``w - t prox_{J/t}(w/t)``."""
    if not t > 0:
        raise InvalidConfigError("conjugate prox step must be positive")
    w = np.asarray(w, dtype=float)
    return w - t * oracle.prox(w / t, 1.0 / t)


# --------------------------------------------------------------------------
# Smooth oracles


class SmoothOracle:
    """Differentiable term with an ``L``-Lipschitz gradient."""

    kind = "abstract"
    lipschitz = 0.0

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError


class ZeroSmooth(SmoothOracle):
    kind = "zero"
    lipschitz = 0.0

    def value(self, x):
        return 0.0

    def grad(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


class LeastSquaresSmooth(SmoothOracle):
    """``0.5 * ||A x - f||^2`` with ``L = sigma_max(A)^2``."""

    kind = "least_squares"

    def __init__(self, A, f):
        self.A = as_finite(A, ndim=2, name="A")
        self.f = as_finite(f, ndim=1, name="f")
        self.lipschitz = spectral_norm(self.A) ** 2

    def value(self, x):
        r = self.A @ x - self.f
        return 0.5 * float(r @ r)

    def grad(self, x):
        return grad_least_squares(self.A, self.f, x)


class L1EnvelopeSmooth(SmoothOracle):
    """Moreau envelope of ``mu*||.||_1`` evaluated at ``b - x``.

    This is the Huber-type smooth term of the robust PCA toy. Its gradient
    in ``x`` is ``-(r - prox_{mu|.|}(r))`` with ``r = b - x``; ``L = 1``.
    """

    kind = "l1_envelope"
    lipschitz = 1.0

    def __init__(self, b, mu):
        self.b = as_finite(b, ndim=1, name="b")
        self.mu = float(mu)

    def value(self, x):
        r = self.b - x
        p = prox_l1(r, self.mu)
        return float(self.mu * np.sum(np.abs(p)) + 0.5 * np.sum((p - r) ** 2))

    def grad(self, x):
        r = self.b - x
        return -(r - prox_l1(r, self.mu))
