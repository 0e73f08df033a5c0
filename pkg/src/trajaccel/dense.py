"""Small dense linear algebra kernels.

Everything here works on plain float64 numpy arrays and is written for the
sizes that occur in the predictor (a handful of columns) and in the
regularizers (matrices up to 128 on the short side). Inputs are never
modified in place.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import InvalidInputError, SingularSystemError

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps

#: Relative rank tolerance used by :func:`least_squares`.
LSTSQ_RANK_TOL = 1e-12
#: Relative pivot tolerance used by :func:`solve_linear`.
PIVOT_TOL = 1e-12
#: Largest allowed short side for :func:`small_svd`.
SVD_MAX_DIM = 128


def as_finite(x, ndim=None, name="input"):
    """Return ``x`` as a float array, rejecting NaN/inf and wrong ranks."""
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise InvalidInputError(f"{name} must have {ndim} dimension(s), got {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


# --------------------------------------------------------------------------
# Householder QR


def _reflector(x):
    """Householder vector ``v`` and ``beta`` with (I - beta v v^T) x = alpha e1."""
    v = x.copy()
    sigma = np.linalg.norm(x)
    if sigma == 0.0:
        v[:] = 0.0
        v[0] = 1.0
        return v, 0.0, 0.0
    alpha = -sigma if x[0] >= 0 else sigma
    v[0] -= alpha
    return v, 2.0 / (v @ v), alpha


def _householder(A, pivot):
    R = A.copy()
    m, q = R.shape
    perm = np.arange(q)
    reflectors = []
    for j in range(min(m, q)):
        if pivot:
            p = j + int(np.argmax(np.einsum("ij,ij->j", R[j:, j:], R[j:, j:])))
            if p != j:
                R[:, [j, p]] = R[:, [p, j]]
                perm[[j, p]] = perm[[p, j]]
        v, beta, _ = _reflector(R[j:, j])
        if beta != 0.0:
            R[j:, j:] -= beta * np.outer(v, v @ R[j:, j:])
        R[j + 1:, j] = 0.0
        reflectors.append((v, beta))
    return reflectors, R, perm


def _apply_qt(reflectors, b):
    y = b.copy()
    for j, (v, beta) in enumerate(reflectors):
        y[j:] -= beta * v * (v @ y[j:])
    return y


def _apply_q(reflectors, Y):
    X = Y.copy()
    for j in range(len(reflectors) - 1, -1, -1):
        v, beta = reflectors[j]
        X[j:] -= beta * np.outer(v, v @ X[j:])
    return X


def householder_qr(A):
    """Thin QR factorization ``A = Q R`` with a nonnegative diagonal in ``R``.

    Parameters
    ----------
    A : (m, n) array_like with m >= n

    Returns
    -------
    Q : (m, n) ndarray with orthonormal columns
    R : (n, n) upper triangular ndarray
    """
    A = as_finite(A, ndim=2, name="A")
    m, n = A.shape
    if m < n:
        raise InvalidInputError("householder_qr needs rows >= cols")
    reflectors, R, _ = _householder(A, pivot=False)
    Q = _apply_q(reflectors, np.eye(m, n))
    R = R[:n].copy()
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def _back_substitute(U, b):
    n = len(b)
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - U[i, i + 1:] @ x[i + 1:]) / U[i, i]
    return x


def _forward_substitute(L, b):
    n = len(b)
    x = np.zeros(n)
    for i in range(n):
        x[i] = (b[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x


def least_squares(A, b):
    """Minimum-norm least-squares solution of ``A c ~ b``.

    Uses Householder QR with column pivoting. When the numerical rank is
    below the column count, a second QR of the leading rows turns the
    factorization into a complete orthogonal decomposition so that the
    returned coefficients have minimum norm.

    Parameters
    ----------
    A : (m, q) array_like
    b : (m,) array_like

    Returns
    -------
    coeffs : (q,) ndarray
    residual_norm : float
        ``||A coeffs - b||``.
    """
    A = as_finite(A, ndim=2, name="A")
    b = as_finite(b, ndim=1, name="b")
    m, q = A.shape
    if m < 1 or q < 1:
        raise InvalidInputError("least_squares needs a non-empty matrix")
    if b.shape[0] != m:
        raise InvalidInputError("row count of A and length of b differ")

    tol = LSTSQ_RANK_TOL * np.linalg.norm(A)
    reflectors, R, perm = _householder(A, pivot=True)
    qtb = _apply_qt(reflectors, b)
    diag = np.abs(np.diag(R))
    rank = 0
    while rank < len(diag) and diag[rank] > tol:
        rank += 1

    y = np.zeros(q)
    if rank == q:
        y = _back_substitute(R[:q, :q], qtb[:q])
    elif rank > 0:
        # [R11 R12] = T^T Z^T with Z orthonormal; the min-norm solution is Z t.
        Z, T = householder_qr(R[:rank, :].T)
        t = _forward_substitute(T.T, qtb[:rank])
        y = Z @ t

    coeffs = np.zeros(q)
    coeffs[perm] = y
    return coeffs, float(np.linalg.norm(A @ coeffs - b))


# --------------------------------------------------------------------------
# One-sided Jacobi SVD


def _round_robin(n):
    """Pairings (p, q) of ``n`` (even) indices; each round is a perfect matching."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        p = np.array([players[i] for i in range(n // 2)])
        q = np.array([players[n - 1 - i] for i in range(n // 2)])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _complete_basis(U, keep):
    """Replace columns not in ``keep`` by an orthonormal completion."""
    m, n = U.shape
    basis = [U[:, j] for j in range(n) if keep[j]]
    out = U.copy()
    candidate = 0
    for j in range(n):
        if keep[j]:
            continue
        while True:
            e = np.zeros(m)
            e[candidate % m] = 1.0
            candidate += 1
            for _ in range(2):
                for u in basis:
                    e -= (u @ e) * u
            norm = np.linalg.norm(e)
            if norm > 0.5:
                e /= norm
                break
        basis.append(e)
        out[:, j] = e
    return out


def _jacobi_columns(A, max_sweeps):
    """Orthogonalize the columns of square ``A`` by plane rotations.

    Returns ``(B, V)`` with ``A V = B``, ``V`` orthogonal and the columns of
    ``B`` mutually orthogonal.
    """
    m, n = A.shape
    width = n + (n % 2)
    # One stacked array so each rotation updates A and V together.
    W = np.zeros((m + width, width))
    W[:m, :n] = A
    W[m:, :] = np.eye(width)
    # Columns below this squared norm are rounding noise and stay unrotated.
    negligible = (_EPS * np.linalg.norm(A)) ** 2
    rounds = _round_robin(width) if width > 1 else []
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            ap, aq = W[:m, p], W[:m, q]
            alpha = np.einsum("ij,ij->j", ap, ap)
            beta = np.einsum("ij,ij->j", aq, aq)
            gamma = np.einsum("ij,ij->j", ap, aq)
            active = ((np.abs(gamma) > _EPS * np.sqrt(alpha * beta))
                      & (alpha > negligible) & (beta > negligible))
            if not np.any(active):
                continue
            rotated = True
            p, q = p[active], q[active]
            zeta = (beta[active] - alpha[active]) / (2.0 * gamma[active])
            t = np.copysign(1.0, zeta) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            wp, wq = W[:, p], W[:, q]
            W[:, p], W[:, q] = c * wp - s * wq, s * wp + c * wq
        if not rotated:
            break
    return W[:m, :n], W[m:m + n, :n]


def small_svd(M, max_sweeps=60):
    """Thin singular value decomposition by one-sided (Hestenes) Jacobi.

    The matrix is first reduced by Householder QR with column pivoting,
    ``M P = Q R``, and the rotations act on ``R^T``; this preconditioning
    cuts the number of sweeps, most of all for low-rank input. Rotations on
    disjoint column pairs are applied together (round-robin ordering).

    Parameters
    ----------
    M : (m, n) array_like
        ``min(m, n)`` must not exceed :data:`SVD_MAX_DIM`.
    max_sweeps : int, optional

    Returns
    -------
    U : (m, k) ndarray
        Orthonormal columns, ``k = min(m, n)``.
    sigma : (k,) ndarray
        Singular values in descending order.
    V : (n, k) ndarray
        Orthonormal columns.
    """
    M = as_finite(M, ndim=2, name="M")
    m, n = M.shape
    if m < 1 or n < 1:
        raise InvalidInputError("small_svd needs a non-empty matrix")
    if min(m, n) > SVD_MAX_DIM:
        raise InvalidInputError(f"small_svd supports a short side up to {SVD_MAX_DIM}")
    if m < n:
        V, s, U = small_svd(M.T, max_sweeps)
        return U, s, V

    reflectors, R, perm = _householder(M, pivot=True)
    # R^T X = B with orthogonal columns, so R = X S Y^T with Y = B / S.
    B, X = _jacobi_columns(R[:n].T, max_sweeps)
    sigma = np.linalg.norm(B, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, B, X = sigma[order], B[:, order], X[:, order]
    keep = sigma > sigma[0] * n * _EPS if sigma[0] > 0 else np.zeros(n, bool)
    Y = np.zeros((n, n))
    Y[:, keep] = B[:, keep] / sigma[keep]
    if not np.all(keep):
        Y = _complete_basis(Y, keep)
    Q_X = np.zeros((m, n))
    Q_X[:n] = X
    U = _apply_q(reflectors, Q_X)
    V = np.empty((n, n))
    V[perm] = Y
    return U, sigma, V


def spectral_norm(A):
    """Largest singular value of ``A`` (via the Gram matrix of the short side)."""
    A = as_finite(A, ndim=2, name="A")
    if min(A.shape) == 0:
        return 0.0
    G = A @ A.T if A.shape[0] <= A.shape[1] else A.T @ A
    return float(np.sqrt(small_svd(G)[1][0]))


# --------------------------------------------------------------------------
# Linear solve


def solve_linear(A, b):
    """Solve the square system ``A x = b`` by LU with partial pivoting.

    Raises
    ------
    SingularSystemError
        If a pivot falls below ``1e-12 * ||A||_inf``.
    """
    A = as_finite(A, ndim=2, name="A")
    b = as_finite(b, ndim=1, name="b")
    n = A.shape[0]
    if A.shape != (n, n) or b.shape[0] != n:
        raise InvalidInputError("solve_linear needs a square matrix and matching vector")
    LU = A.copy()
    x = b.copy()
    threshold = PIVOT_TOL * np.max(np.sum(np.abs(A), axis=1)) if n else 0.0
    for j in range(n):
        p = j + int(np.argmax(np.abs(LU[j:, j])))
        if abs(LU[p, j]) <= threshold or LU[p, j] == 0.0:
            raise SingularSystemError("matrix is numerically singular")
        if p != j:
            LU[[j, p]] = LU[[p, j]]
            x[[j, p]] = x[[p, j]]
        factors = LU[j + 1:, j] / LU[j, j]
        LU[j + 1:, j:] -= np.outer(factors, LU[j, j:])
        x[j + 1:] -= factors * x[j]
    return _back_substitute(LU, x)


# --------------------------------------------------------------------------
# Companion polynomial


def companion_roots(c, max_iter=200, tol=1e-12):
    """Roots of ``z^q - c1 z^(q-1) - ... - cq`` by Durand-Kerner iteration.

    A root counts as converged when its update falls below ``tol`` (relative)
    or its polynomial residual is within the floating point evaluation error.

    Returns
    -------
    roots : (q,) complex ndarray
    converged : bool
    """
    c = as_finite(c, ndim=1, name="c")
    q = c.shape[0]
    if q < 1:
        raise InvalidInputError("need at least one coefficient")
    trailing = 0
    while trailing < q and c[q - 1 - trailing] == 0.0:
        trailing += 1
    zeros = np.zeros(trailing, dtype=complex)
    c = c[: q - trailing]
    q = c.shape[0]
    if q == 0:
        return zeros, True
    if q == 1:
        return np.concatenate([np.array([c[0] + 0j]), zeros]), True

    poly = np.concatenate([[1.0], -c])
    abs_poly = np.abs(poly)
    radius = 1.0 + np.max(np.abs(c))
    z = radius * (0.4 + 0.9j) ** np.arange(q)
    converged = False
    for _ in range(max_iter):
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        value = np.polyval(poly, z)
        step = value / np.prod(diff, axis=1)
        z = z - step
        small_step = np.abs(step) <= tol * np.maximum(1.0, np.abs(z))
        # Clustered roots stall at rounding level before the step gets tiny;
        # a residual within the evaluation error means the root is exact.
        at_rounding = np.abs(value) <= 4 * (q + 1) * _EPS * np.polyval(abs_poly, np.abs(z))
        if np.all(small_step | at_rounding):
            converged = True
            break
    return np.concatenate([z, zeros]), converged


def companion_gershgorin_bound(c):
    """Row-sum bound on the spectral radius of the companion matrix."""
    c = np.abs(as_finite(c, ndim=1, name="c"))
    rows = c + 1.0
    rows[-1] = c[-1]
    return float(np.max(rows))


def companion_max_modulus(c):
    """Largest root modulus of ``z^q - c1 z^(q-1) - ... - cq``.

    This equals the spectral radius of the companion matrix ``H(c)``. If the
    root iteration does not converge, a warning is logged and the Gershgorin
    bound (an upper bound) is returned instead.
    """
    roots, converged = companion_roots(c)
    if not converged:
        logger.warning("Durand-Kerner did not converge; using Gershgorin bound")
        return companion_gershgorin_bound(c)
    return float(np.max(np.abs(roots)))
