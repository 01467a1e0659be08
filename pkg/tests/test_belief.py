"""Covariance factorization and the three Kalman gains."""

import numpy as np
import pytest

from liekf.belief import (
    factor,
    noise_free_gain,
    regularized_gain,
    riccati_update,
    standard_gain,
)
from liekf.errors import NotPSDError, SingularInnovationError


def random_psd(rng, n, rank=None):
    rank = rank or n
    A = rng.normal(size=(n, rank))
    return A @ A.T


class TestFactor:
    def test_identity(self):
        f = factor(np.eye(3))
        assert f.rank == 3
        np.testing.assert_allclose(f.L @ f.L.T, np.eye(3), atol=1e-12)

    def test_zero_eigenvalue_truncated(self):
        f = factor(np.diag([1.0, 0.0]))
        assert f.rank == 1
        assert f.L.shape == (2, 1)
        np.testing.assert_allclose(f.L @ f.L.T, np.diag([1.0, 0.0]), atol=1e-12)

    def test_reconstruction_rank_deficient(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            P = random_psd(rng, 5, rank=3)
            f = factor(P)
            assert f.rank == 3
            err = np.linalg.norm(f.L @ f.L.T - P)
            assert err <= 1e-10 * (1.0 + np.linalg.norm(P))

    def test_columns_span_image(self):
        rng = np.random.default_rng(1)
        P = random_psd(rng, 6, rank=2)
        f = factor(P)
        # im(L) == im(P): P projected onto the orthogonal complement of L is 0
        Q, _ = np.linalg.qr(f.L)
        resid = P - Q @ (Q.T @ P)
        assert np.abs(resid).max() < 1e-10

    def test_not_psd_raises(self):
        with pytest.raises(NotPSDError):
            factor(np.diag([1.0, -1e-6]))

    def test_tiny_negative_tolerated(self):
        f = factor(np.diag([1.0, -1e-12]))
        assert f.rank == 1

    def test_zero_matrix(self):
        f = factor(np.zeros((4, 4)))
        assert f.rank == 0
        assert f.L.shape == (4, 0)


class TestStandardGain:
    def test_scalar_example(self):
        K = standard_gain(np.eye(2), np.array([[1.0, 0.0]]), np.array([[1.0]]))
        np.testing.assert_allclose(K, [[0.5], [0.0]], atol=1e-14)

    def test_zero_covariance_gives_zero_gain(self):
        K = standard_gain(np.zeros((2, 2)), np.array([[1.0, 0.0]]), np.array([[1.0]]))
        np.testing.assert_array_equal(K, np.zeros((2, 1)))

    def test_solve_residual(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            P = random_psd(rng, 4)
            H = rng.normal(size=(2, 4))
            N = random_psd(rng, 2) + 0.1 * np.eye(2)
            K = standard_gain(P, H, N)
            S = H @ P @ H.T + N
            resid = np.linalg.norm(S @ K.T - H @ P)
            assert resid <= 1e-10 * (1.0 + np.linalg.norm(H @ P))

    def test_singular_innovation_raises(self):
        P = np.diag([1.0, 0.0])
        H = np.eye(2)
        with pytest.raises(SingularInnovationError):
            standard_gain(P, H, np.zeros((2, 2)))


class TestNoiseFreeGain:
    def test_full_rank_example(self):
        K = noise_free_gain(np.eye(2), np.array([[1.0, 0.0]]))
        np.testing.assert_allclose(K, [[1.0], [0.0]], atol=1e-12)
        K_rg = regularized_gain(np.eye(2), np.array([[1.0, 0.0]]), delta=1e-12)
        np.testing.assert_allclose(K, K_rg, atol=1e-6)

    def test_zero_output_matrix(self):
        K = noise_free_gain(np.eye(3), np.zeros((2, 3)))
        np.testing.assert_array_equal(K, np.zeros((3, 2)))

    def test_image_in_kernel_gives_zero(self):
        # im(P) inside ker(H) forces H L = 0, hence K = 0
        P = np.diag([0.0, 1.0])
        H = np.array([[1.0, 0.0]])
        K = noise_free_gain(P, H)
        np.testing.assert_array_equal(K, np.zeros((2, 1)))

    def test_image_of_gain_inside_image_of_p(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            P = random_psd(rng, 5, rank=rng.integers(1, 5))
            H = rng.normal(size=(2, 5))
            K = noise_free_gain(P, H)
            # components of K orthogonal to im(P) must vanish
            Q, _ = np.linalg.qr(factor(P).L)
            resid = K - Q @ (Q.T @ K)
            assert np.abs(resid).max() < 1e-10


class TestRegularizedGain:
    def test_matches_standard_with_ridge_noise(self):
        rng = np.random.default_rng(4)
        P = random_psd(rng, 3)
        H = rng.normal(size=(2, 3))
        np.testing.assert_allclose(
            regularized_gain(P, H, delta=0.37),
            standard_gain(P, H, 0.37 * np.eye(2)),
            atol=1e-12,
        )

    def test_scalar_example(self):
        K = regularized_gain(np.eye(2), np.array([[1.0, 0.0]]), delta=1.0)
        np.testing.assert_allclose(K, [[0.5], [0.0]], atol=1e-14)

    def test_small_delta_approaches_noise_free(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            P = random_psd(rng, 4, rank=2)
            H = rng.normal(size=(2, 4))
            K_rg = regularized_gain(P, H, delta=1e-10)
            K_nf = noise_free_gain(P, H)
            assert np.abs(K_rg - K_nf).max() <= 1e-4

    def test_nonpositive_delta_rejected(self):
        with pytest.raises(ValueError):
            regularized_gain(np.eye(2), np.array([[1.0, 0.0]]), delta=0.0)


class TestRiccatiUpdate:
    def test_zero_gain_keeps_covariance(self):
        rng = np.random.default_rng(6)
        P = random_psd(rng, 3)
        np.testing.assert_allclose(
            riccati_update(P, np.zeros((3, 1)), np.ones((1, 3))), P, atol=1e-15
        )

    def test_projection_example(self):
        P = riccati_update(np.eye(2), np.array([[1.0], [0.0]]), np.array([[1.0, 0.0]]))
        np.testing.assert_allclose(P, np.diag([0.0, 1.0]), atol=1e-15)

    def test_noise_free_update_zeroes_measured_direction(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            P = random_psd(rng, 4)
            H = rng.normal(size=(1, 4))
            K = noise_free_gain(P, H)
            P_plus = riccati_update(P, K, H)
            assert np.abs(H @ P_plus @ H.T).max() <= 1e-10 * (1 + np.linalg.norm(P))

    def test_compatibility_for_any_psd_p(self):
        # with the noise-free gain, H P+ H^T vanishes even for singular P
        rng = np.random.default_rng(8)
        for _ in range(20):
            P = random_psd(rng, 5, rank=rng.integers(1, 6))
            H = rng.normal(size=(2, 5))
            K = noise_free_gain(P, H)
            P_plus = riccati_update(P, K, H)
            assert np.abs(H @ P_plus @ H.T).max() <= 1e-9

    def test_never_increases_largest_eigenvalue(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            P = random_psd(rng, 4)
            H = rng.normal(size=(2, 4))
            N = random_psd(rng, 2) + 1e-3 * np.eye(2)
            K = standard_gain(P, H, N)
            P_plus = riccati_update(P, K, H)
            assert (
                np.linalg.eigvalsh(P_plus)[-1]
                <= np.linalg.eigvalsh(P)[-1] + 1e-9
            )

    def test_output_symmetric(self):
        rng = np.random.default_rng(10)
        P = random_psd(rng, 4)
        H = rng.normal(size=(2, 4))
        P_plus = riccati_update(P, standard_gain(P, H, np.eye(2)), H)
        np.testing.assert_array_equal(P_plus, P_plus.T)
