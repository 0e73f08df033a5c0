import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajaccel.accel import companion
from trajaccel.dense import (companion_max_modulus, companion_roots, householder_qr,
                             least_squares, small_svd, solve_linear, spectral_norm)
from trajaccel.errors import InvalidInputError, SingularSystemError


def test_least_squares_exact_column():
    c, res = least_squares([[1.0], [0.0]], [2.0, 0.0])
    assert np.allclose(c, [2.0]) and res == pytest.approx(0.0, abs=1e-15)


def test_least_squares_mean_of_two():
    c, res = least_squares([[1.0], [1.0]], [1.0, 3.0])
    assert np.allclose(c, [2.0]) and res == pytest.approx(math.sqrt(2.0))


def test_least_squares_recovers_planted_coefficients():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 3))
    c, res = least_squares(A, A @ np.array([1.0, -2.0, 3.0]))
    assert np.allclose(c, [1.0, -2.0, 3.0], atol=1e-10) and res <= 1e-10


def test_least_squares_min_norm_on_rank_deficient():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((8, 2))
    A = np.hstack([B, B[:, :1] + B[:, 1:]])
    b = rng.standard_normal(8)
    c, _ = least_squares(A, b)
    assert np.allclose(c, np.linalg.pinv(A) @ b, atol=1e-10)


def test_least_squares_beats_random_candidates():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((10, 4))
    b = rng.standard_normal(10)
    c, res = least_squares(A, b)
    assert res <= np.linalg.norm(b) + 1e-12
    for _ in range(100):
        assert res <= np.linalg.norm(A @ (c + rng.standard_normal(4)) - b) + 1e-12


def test_least_squares_rejects_nonfinite():
    with pytest.raises(InvalidInputError):
        least_squares([[1.0], [np.nan]], [1.0, 2.0])


def test_householder_qr_factors():
    A = np.random.default_rng(3).standard_normal((7, 4))
    Q, R = householder_qr(A)
    assert np.allclose(Q @ R, A) and np.allclose(Q.T @ Q, np.eye(4))
    assert np.allclose(R, np.triu(R)) and np.all(np.diag(R) >= 0)


def test_svd_identity_and_diagonal():
    assert np.allclose(small_svd(np.eye(3))[1], [1, 1, 1])
    assert np.allclose(small_svd(np.diag([3.0, 0.0]))[1], [3.0, 0.0])


@pytest.mark.parametrize("shape", [(5, 4), (4, 5), (12, 12), (30, 7)])
def test_svd_reconstruction_and_orthogonality(shape):
    M = np.random.default_rng(4).standard_normal(shape)
    U, s, V = small_svd(M)
    assert np.abs((U * s) @ V.T - M).max() <= 1e-10
    k = min(shape)
    assert np.abs(U.T @ U - np.eye(k)).max() <= 1e-10
    assert np.abs(V.T @ V - np.eye(k)).max() <= 1e-10
    assert np.allclose(s, np.linalg.svd(M, compute_uv=False), atol=1e-12)


def test_svd_low_rank_keeps_orthonormal_basis():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((9, 2)) @ rng.standard_normal((2, 6))
    U, s, V = small_svd(M)
    assert np.abs(U.T @ U - np.eye(6)).max() <= 1e-10
    assert np.all(s[2:] <= 1e-12 * s[0])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 10_000))
def test_svd_matches_numpy(m, n, seed):
    M = np.random.default_rng(seed).standard_normal((m, n))
    _, s, _ = small_svd(M)
    assert np.allclose(s, np.linalg.svd(M, compute_uv=False), atol=1e-11)
    assert np.all(np.diff(s) <= 1e-15)


def test_spectral_norm():
    A = np.random.default_rng(6).standard_normal((5, 9))
    assert spectral_norm(A) == pytest.approx(np.linalg.norm(A, 2), rel=1e-12)


def test_solve_linear_examples():
    assert np.allclose(solve_linear(np.eye(2), [1.0, 2.0]), [1, 2])
    assert np.allclose(solve_linear([[2.0, 0], [0, 4.0]], [2.0, 4.0]), [1, 1])
    assert np.allclose(solve_linear(np.eye(1) - companion([0.5]), [0.5]), [1.0])


def test_solve_linear_singular():
    with pytest.raises(SingularSystemError):
        solve_linear([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0])


@pytest.mark.parametrize("c, expected", [([0.5], 0.5), ([1.5, -0.5], 1.0), ([0.0, -0.25], 0.5)])
def test_companion_max_modulus_examples(c, expected):
    assert companion_max_modulus(c) == pytest.approx(expected, abs=1e-10)


def test_companion_max_modulus_against_eigenvalues():
    rng = np.random.default_rng(7)
    for _ in range(20):
        c = rng.uniform(-1, 1, rng.integers(1, 7))
        expected = np.abs(np.linalg.eigvals(companion(c))).max()
        assert companion_max_modulus(c) == pytest.approx(expected, abs=1e-8)


def test_companion_roots_trailing_zeros():
    roots, ok = companion_roots([0.5, 0.0, 0.0])
    assert ok and sorted(np.abs(roots)) == pytest.approx([0.0, 0.0, 0.5])
