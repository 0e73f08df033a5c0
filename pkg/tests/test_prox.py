import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from trajaccel.errors import InvalidProblemError
from trajaccel.prox import (AffineProx, GroupL12Prox, L1EnvelopeSmooth, L1Prox, LeastSquaresProx,
                            LeastSquaresSmooth, NonNegativeProx, NuclearProx, ZeroProx,
                            contiguous_blocks, grad_least_squares, project_affine,
                            prox_conjugate, prox_group_l12, prox_l1, prox_nuclear)

vectors = arrays(np.float64, 6, elements=st.floats(-10, 10))


def test_prox_l1_examples():
    assert np.allclose(prox_l1([2.0, -0.5, 0.0], 1.0), [1.0, 0.0, 0.0])
    x = np.array([0.3, -7.0])
    assert np.allclose(prox_l1(x, 0.0), x)


def test_prox_l1_matches_grid_minimizer():
    grid = np.arange(-1.0, 5.0, 1e-4)
    best = grid[np.argmin(np.abs(grid) + 0.5 * (grid - 3.0) ** 2)]
    assert prox_l1([3.0], 1.0)[0] == pytest.approx(best, abs=1e-4)


def test_prox_group_examples():
    blocks = [np.arange(2)]
    assert np.allclose(prox_group_l12([3.0, 4.0], blocks, 5.0), [0.0, 0.0])
    assert np.allclose(prox_group_l12([3.0, 4.0], blocks, 2.5), [1.5, 2.0])


def test_prox_group_matches_radial_grid():
    x = np.random.default_rng(0).standard_normal(8) * 2
    t = 0.8
    out = prox_group_l12(x, contiguous_blocks(8, 4), t)
    for idx in contiguous_blocks(8, 4):
        xb = x[idx]
        radii = np.linspace(0, np.linalg.norm(xb), 200_001)
        # the minimizer lies on the ray through xb; search its length
        objective = t * radii + 0.5 * (radii - np.linalg.norm(xb)) ** 2
        r = radii[np.argmin(objective)]
        assert np.linalg.norm(out[idx]) == pytest.approx(r, abs=1e-4)


def test_prox_nuclear_examples():
    assert np.allclose(prox_nuclear(np.diag([3.0, 1.0]), 1.0), np.diag([2.0, 0.0]))
    assert np.allclose(prox_nuclear(np.zeros((3, 3)), 1.0), 0.0)


def test_prox_nuclear_local_optimality():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((4, 4))
    t = 0.7

    def objective(Z):
        return t * np.linalg.svd(Z, compute_uv=False).sum() + 0.5 * np.sum((Z - X) ** 2)

    Z = prox_nuclear(X, t)
    base = objective(Z)
    for _ in range(1000):
        assert base <= objective(Z + 1e-3 * rng.standard_normal((4, 4))) + 1e-12


@pytest.mark.parametrize("fn", [lambda x: prox_l1(x, 0.0),
                                lambda x: prox_group_l12(x, contiguous_blocks(6, 3), 0.0),
                                lambda x: prox_nuclear(x.reshape(2, 3), 0.0).ravel()])
def test_zero_step_is_identity(fn):
    x = np.random.default_rng(2).standard_normal(6)
    assert np.allclose(fn(x), x)


def test_project_affine_examples():
    assert np.allclose(project_affine([0.0, 5.0], [[1.0, 0.0]], [1.0]), [1.0, 5.0])
    assert np.allclose(project_affine([1.0, 5.0], [[1.0, 0.0]], [1.0]), [1.0, 5.0])


def test_project_affine_is_nearest_sampled_point():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((3, 6))
    x0 = rng.standard_normal(6)
    b = A @ x0
    x = rng.standard_normal(6) * 3
    p = project_affine(x, A, b)
    assert np.allclose(A @ p, b)
    assert np.allclose(project_affine(p, A, b), p, atol=1e-10)
    null = np.linalg.svd(A)[2][3:].T
    samples = p + (rng.standard_normal((10_000, 3)) @ null.T)
    assert np.linalg.norm(x - p) <= np.linalg.norm(samples - x, axis=1).min() + 1e-12


def test_affine_rejects_rank_deficient():
    with pytest.raises(InvalidProblemError):
        AffineProx([[1.0, 0.0], [2.0, 0.0]], [1.0, 2.0])


def test_prox_conjugate_of_l1_is_clamp():
    assert np.allclose(prox_conjugate(L1Prox(), [5.0], 1.0), [1.0])
    assert np.allclose(prox_conjugate(L1Prox(), [0.3], 1.0), [0.3])


@settings(max_examples=50, deadline=None)
@given(vectors, st.floats(0.05, 5.0))
def test_moreau_identity(w, t):
    oracle = L1Prox(0.7)
    lhs = prox_conjugate(oracle, w, t) + t * oracle.prox(w / t, 1.0 / t)
    assert np.allclose(lhs, w, atol=1e-12)


def test_grad_least_squares_examples():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((4, 6))
    x = rng.standard_normal(6)
    assert np.allclose(grad_least_squares(A, A @ x, x), 0.0)
    assert np.allclose(grad_least_squares(np.eye(3), np.zeros(3), x[:3]), x[:3])


def test_grad_least_squares_finite_differences():
    rng = np.random.default_rng(5)
    h = 1e-6
    for _ in range(20):
        A = rng.standard_normal((5, 4))
        f = rng.standard_normal(5)
        x = rng.standard_normal(4)
        value = lambda y: 0.5 * np.sum((A @ y - f) ** 2)
        fd = np.array([(value(x + h * e) - value(x - h * e)) / (2 * h) for e in np.eye(4)])
        g = grad_least_squares(A, f, x)
        assert np.linalg.norm(fd - g) <= 1e-5 * max(np.linalg.norm(g), 1.0)


def _oracles():
    rng = np.random.default_rng(6)
    A = rng.standard_normal((3, 6))
    return [ZeroProx(), L1Prox(0.5), GroupL12Prox(3, 0.8), NuclearProx((2, 3), 0.6),
            NonNegativeProx(), AffineProx(A, rng.standard_normal(3)),
            LeastSquaresProx(A, rng.standard_normal(3), 1.3)]


@pytest.mark.parametrize("oracle", _oracles(), ids=lambda o: o.kind)
def test_firm_nonexpansiveness(oracle):
    rng = np.random.default_rng(7)
    for _ in range(100):
        x, y = rng.standard_normal(6) * 3, rng.standard_normal(6) * 3
        t = rng.uniform(0.1, 2.0)
        d = oracle.prox(x, t) - oracle.prox(y, t)
        assert d @ d <= d @ (x - y) + 1e-10


def test_least_squares_prox_solves_normal_equations():
    rng = np.random.default_rng(8)
    for m, n in [(3, 6), (6, 3)]:
        A = rng.standard_normal((m, n))
        f = rng.standard_normal(m)
        x = rng.standard_normal(n)
        t = 0.9
        p = LeastSquaresProx(A, f).prox(x, t)
        assert np.allclose(p - x + t * A.T @ (A @ p - f), 0.0, atol=1e-10)


def test_least_squares_smooth_lipschitz():
    A = np.random.default_rng(9).standard_normal((4, 7))
    assert LeastSquaresSmooth(A, np.zeros(4)).lipschitz == pytest.approx(np.linalg.norm(A, 2) ** 2)


def test_l1_envelope_gradient_finite_differences():
    rng = np.random.default_rng(10)
    b = rng.standard_normal(5) * 2
    F = L1EnvelopeSmooth(b, 0.4)
    x = rng.standard_normal(5)
    h = 1e-6
    fd = np.array([(F.value(x + h * e) - F.value(x - h * e)) / (2 * h) for e in np.eye(5)])
    assert np.allclose(fd, F.grad(x), atol=1e-6)
