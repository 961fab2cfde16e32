"""Class statistics and Mahalanobis geometry."""

import numpy as np
import pytest

from oosguard.errors import DataError, NumericError
from oosguard.linalg import (
    ClassStatistics,
    class_means,
    fit_class_statistics,
    mahalanobis,
    mahalanobis_table,
    regularized_inverse,
    shared_covariance,
)


def random_spd(rng, d, scale=1.0):
    a = rng.standard_normal((d, d))
    m = a @ a.T + scale * d * np.eye(d)
    return (m + m.T) / 2.0


class TestClassMeans:
    def test_two_point_mean(self):
        mu = class_means([(0.0, 0.0), (2.0, 2.0)], [0, 0])
        np.testing.assert_array_equal(mu, [[1.0, 1.0]])

    def test_single_sample_identity(self):
        mu = class_means([(3.0, -1.0), (5.0, 2.0)], [0, 1])
        np.testing.assert_array_equal(mu, [[3.0, -1.0], [5.0, 2.0]])

    def test_hand_summed_mean(self):
        # (1+5+0)/3 = 2, (3+7+2)/3 = 4
        mu = class_means([(1.0, 3.0), (5.0, 7.0), (0.0, 2.0)], [0, 0, 0])
        np.testing.assert_allclose(mu, [[2.0, 4.0]], rtol=0, atol=1e-15)

    def test_empty_class_named(self):
        with pytest.raises(DataError, match="class 1"):
            class_means([(1.0, 2.0)], [0], class_count=2)

    def test_ragged_dims_rejected(self):
        with pytest.raises(DataError):
            class_means([np.zeros(2), np.zeros(3)], [0, 0])

    def test_label_out_of_range(self):
        with pytest.raises(DataError):
            class_means([(1.0,), (2.0,)], [0, 3], class_count=2)


class TestSharedCovariance:
    def test_two_cluster_pooled(self):
        x = [(0.0, 0.0), (2.0, 0.0), (10.0, 0.0), (12.0, 0.0)]
        y = [0, 0, 1, 1]
        mu = class_means(x, y)
        sigma = shared_covariance(x, y, mu)
        np.testing.assert_allclose(sigma, [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)

    def test_zero_residuals(self):
        x = [(1.0, 2.0), (1.0, 2.0), (5.0, 5.0), (5.0, 5.0)]
        y = [0, 0, 1, 1]
        sigma = shared_covariance(x, y, class_means(x, y))
        np.testing.assert_array_equal(sigma, np.zeros((2, 2)))

    def test_one_dim_pm_one(self):
        x = [(-1.0,), (1.0,)]
        sigma = shared_covariance(x, [0, 0], class_means(x, [0, 0]))
        np.testing.assert_allclose(sigma, [[1.0]], atol=1e-15)

    def test_needs_two_samples(self):
        with pytest.raises(DataError):
            shared_covariance([(1.0, 2.0)], [0], np.array([[1.0, 2.0]]))

    def test_global_centered_mode(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((50, 3))
        y = rng.integers(0, 2, size=50)
        sigma = shared_covariance(x, y, class_means(x, y), mode="global-centered")
        centered = x - x.mean(axis=0)
        np.testing.assert_allclose(sigma, centered.T @ centered / 50, rtol=1e-12)

    def test_bessel_flag(self):
        x = np.array([[-1.0], [1.0]])
        mu = class_means(x, [0, 0])
        ml = shared_covariance(x, [0, 0], mu)
        unbiased = shared_covariance(x, [0, 0], mu, bessel=True)
        assert ml[0, 0] == pytest.approx(1.0)
        assert unbiased[0, 0] == pytest.approx(2.0)

    def test_trace_equals_mean_squared_centered_norm(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n, d, c = 40, rng.integers(2, 6), 3
            x = rng.standard_normal((n, int(d)))
            y = rng.integers(0, c, size=n)
            y[:c] = np.arange(c)  # every class populated
            mu = class_means(x, y, class_count=c)
            sigma = shared_covariance(x, y, mu)
            norms = ((x - mu[y]) ** 2).sum(axis=1)
            np.testing.assert_allclose(np.trace(sigma), norms.mean(), rtol=1e-9)

    def test_symmetric_output(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((30, 8))
        y = rng.integers(0, 3, size=30)
        y[:3] = [0, 1, 2]
        sigma = shared_covariance(x, y, class_means(x, y, 3))
        np.testing.assert_array_equal(sigma, sigma.T)


class TestRegularizedInverse:
    def test_identity_with_auto_ridge(self):
        precision, lam = regularized_inverse(np.eye(3), ridge=0.0)
        assert lam == pytest.approx(1e-6)
        np.testing.assert_allclose(precision, np.eye(3) / (1 + 1e-6), rtol=1e-12)

    def test_diagonal_with_explicit_ridge(self):
        sigma = np.array([[1.0, 0.0], [0.0, 0.0]])
        precision, lam = regularized_inverse(sigma, ridge=1e-6)
        assert lam == 1e-6
        np.testing.assert_allclose(
            precision, np.diag([1.0 / (1.0 + 1e-6), 1e6]), rtol=1e-9
        )

    def test_multiply_back_random_spd(self):
        rng = np.random.default_rng(7)
        sigma = random_spd(rng, 8)
        precision, lam = regularized_inverse(sigma, ridge=0.0)
        residual = precision @ (sigma + lam * np.eye(8)) - np.eye(8)
        assert np.abs(residual).max() < 1e-8

    def test_multiply_back_up_to_64(self):
        rng = np.random.default_rng(8)
        for d in (2, 5, 16, 64):
            sigma = random_spd(rng, d)
            precision, lam = regularized_inverse(sigma, ridge=0.0)
            residual = precision @ (sigma + lam * np.eye(d)) - np.eye(d)
            assert np.abs(residual).max() < 1e-8, f"d={d}"

    def test_zero_matrix_engages_floor(self):
        precision, lam = regularized_inverse(np.zeros((4, 4)), ridge=0.0)
        assert lam == pytest.approx(1e-6)
        np.testing.assert_allclose(precision, 1e6 * np.eye(4), rtol=1e-9)

    def test_asymmetric_rejected(self):
        with pytest.raises(DataError):
            regularized_inverse(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_negative_ridge_rejected(self):
        with pytest.raises(DataError):
            regularized_inverse(np.eye(2), ridge=-1.0)


class TestMahalanobis:
    def test_zero_at_mean(self):
        assert mahalanobis([1.0, 2.0], [1.0, 2.0], np.eye(2)) == 0.0

    def test_identity_is_euclidean(self):
        assert mahalanobis([3.0, 0.0], [0.0, 0.0], np.eye(2)) == pytest.approx(3.0)

    def test_diagonal_case(self):
        precision = np.diag([0.25, 1.0])  # inverse of diag(4, 1)
        assert mahalanobis([2.0, 0.0], [0.0, 0.0], precision) == pytest.approx(1.0)

    def test_not_psd_raises(self):
        with pytest.raises(NumericError):
            mahalanobis([1.0], [0.0], np.array([[-1.0]]))

    def test_dim_mismatch(self):
        with pytest.raises(DataError):
            mahalanobis([1.0, 2.0], [0.0], np.eye(2))

    def test_zero_iff_at_mean_on_random_spd(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            d = int(rng.integers(2, 6))
            p = random_spd(rng, d)
            mu = rng.standard_normal(d)
            assert mahalanobis(mu, mu, p) == 0.0
            s = mu + rng.standard_normal(d) * 0.5
            if not np.array_equal(s, mu):
                assert mahalanobis(s, mu, p) > 0.0

    def test_identity_matches_euclidean_tightly(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            d = int(rng.integers(2, 6))
            s = rng.standard_normal(d)
            mu = rng.standard_normal(d)
            expected = float(np.linalg.norm(s - mu))
            assert abs(mahalanobis(s, mu, np.eye(d)) - expected) < 1e-12

    def test_table_matches_scalar(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((20, 4))
        means = rng.standard_normal((3, 4))
        p = random_spd(rng, 4)
        table = mahalanobis_table(x, means, p)
        for i in range(20):
            for j in range(3):
                assert table[i, j] == pytest.approx(
                    mahalanobis(x[i], means[j], p), rel=1e-12
                )


class TestLinearMapInvariance:
    def test_invariance_under_invertible_maps(self):
        # Mahalanobis distances are invariant when samples, means, and the
        # covariance are all recomputed after an invertible map; with a
        # scale-relative auto ridge the property survives at 1e-6.
        rng = np.random.default_rng(13)
        for trial in range(10):
            d = int(rng.integers(2, 6))
            n = 500
            x = rng.standard_normal((n, d))
            y = rng.integers(0, 3, size=n)
            y[:3] = [0, 1, 2]

            q1, _ = np.linalg.qr(rng.standard_normal((d, d)))
            q2, _ = np.linalg.qr(rng.standard_normal((d, d)))
            a = q1 @ np.diag(rng.uniform(0.9, 1.2, size=d)) @ q2

            stats1 = fit_class_statistics(x, y, class_count=3)
            stats2 = fit_class_statistics(x @ a.T, y, class_count=3)

            queries = rng.standard_normal((10, d))
            d1 = mahalanobis_table(queries, stats1.means, stats1.precision)
            d2 = mahalanobis_table(queries @ a.T, stats2.means, stats2.precision)
            np.testing.assert_allclose(d1, d2, rtol=1e-6, err_msg=f"trial {trial}")


class TestClassStatistics:
    def test_fit_bundles_everything(self):
        rng = np.random.default_rng(14)
        x = rng.standard_normal((60, 5))
        y = rng.integers(0, 4, size=60)
        y[:4] = np.arange(4)
        stats = fit_class_statistics(x, y)
        assert stats.class_count == 4
        assert stats.dim == 5
        residual = stats.precision @ (
            stats.covariance + stats.ridge_used * np.eye(5)
        ) - np.eye(5)
        assert np.abs(residual).max() < 1e-8

    def test_requires_two_classes(self):
        with pytest.raises(DataError):
            ClassStatistics(
                class_count=1,
                dim=2,
                means=np.zeros((1, 2)),
                covariance=np.eye(2),
                precision=np.eye(2),
                ridge_used=0.0,
            )

    def test_rejects_asymmetric_precision(self):
        with pytest.raises(DataError):
            ClassStatistics(
                class_count=2,
                dim=2,
                means=np.zeros((2, 2)),
                covariance=np.eye(2),
                precision=np.array([[1.0, 0.5], [0.0, 1.0]]),
                ridge_used=0.0,
            )
