"""Ellipsoid and covariance-floor tests."""

import numpy as np
import pytest

from npvo.geometry import (
    Ellipsoid,
    chi2_threshold,
    confidence_ellipsoid,
    floor_covariance,
)


class TestChi2Threshold:
    def test_known_quantiles(self):
        # c(gamma) = -2 ln(1 - gamma): the 2-D chi-square quantile.
        assert chi2_threshold(0.95) == pytest.approx(5.991464547107979)
        assert chi2_threshold(0.5) == pytest.approx(2.0 * np.log(2.0))

    def test_monotone_in_gamma(self):
        gammas = [0.1, 0.5, 0.9, 0.99, 0.999]
        cs = [chi2_threshold(g) for g in gammas]
        assert all(a < b for a, b in zip(cs, cs[1:]))

    def test_rejects_out_of_range(self):
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                chi2_threshold(bad)


class TestFloorCovariance:
    def test_degenerate_matrix_floored(self):
        sigma = np.array([[1.0, 0.0], [0.0, 0.0]])
        out = floor_covariance(sigma, 1e-6)
        np.testing.assert_allclose(out, [[1.0, 0.0], [0.0, 1e-6]], atol=1e-15)

    def test_zero_matrix_becomes_floor_identity(self):
        out = floor_covariance(np.zeros((2, 2)), 1e-6)
        np.testing.assert_allclose(out, 1e-6 * np.eye(2), atol=1e-18)

    def test_correlated_rank_deficient_matrix(self):
        # [[1,1],[1,1]] has eigenvalues {2, 0}; flooring must act on the zero
        # eigenvalue, not the (already positive) diagonal.
        out = floor_covariance(np.ones((2, 2)), 1e-6)
        vals = np.linalg.eigvalsh(out)
        assert vals.min() >= 1e-6 * (1 - 1e-12)
        assert vals.max() == pytest.approx(2.0)

    def test_healthy_matrix_untouched(self):
        sigma = np.array([[2.0, 0.3], [0.3, 1.0]])
        np.testing.assert_allclose(floor_covariance(sigma, 1e-6), sigma, atol=1e-12)


class TestEllipsoid:
    def test_membership_is_closed(self):
        e = Ellipsoid(center=np.zeros(2), sigma=np.eye(2), threshold=4.0)
        assert e.contains(np.array([2.0, 0.0]))        # on the boundary
        assert e.contains(np.array([0.0, 0.0]))
        assert not e.contains(np.array([2.0 + 1e-9, 0.0]))

    def test_vectorized_membership(self):
        e = Ellipsoid(center=np.array([1.0, 0.0]), sigma=np.diag([4.0, 1.0]), threshold=1.0)
        pts = np.array([[1.0, 0.0], [3.0, 0.0], [3.1, 0.0], [1.0, 1.0], [1.0, 1.1]])
        np.testing.assert_array_equal(e.contains(pts), [True, True, False, True, False])

    def test_semi_axes(self):
        e = Ellipsoid(center=np.zeros(2), sigma=np.diag([4.0, 1.0]), threshold=2.0)
        lengths, _ = e.semi_axes()
        np.testing.assert_allclose(sorted(lengths), [np.sqrt(2.0), np.sqrt(8.0)])

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            Ellipsoid(center=np.zeros(2), sigma=np.diag([1.0, -1.0]), threshold=1.0)
        with pytest.raises(ValueError):
            Ellipsoid(center=np.zeros(2), sigma=np.array([[1.0, 0.5], [0.0, 1.0]]), threshold=1.0)
        with pytest.raises(ValueError):
            Ellipsoid(center=np.zeros(2), sigma=np.eye(2), threshold=0.0)
        with pytest.raises(ValueError):
            Ellipsoid(center=np.array([np.inf, 0.0]), sigma=np.eye(2), threshold=1.0)


class TestInflation:
    def test_circle_inflates_to_sum_exactly(self):
        # For a circle the Minkowski sum with a disk is again a circle of
        # radius r + r_s; the support-scaling bound is tight there.
        e = Ellipsoid(center=np.zeros(2), sigma=np.eye(2), threshold=4.0)  # radius 2
        big = e.inflated(1.0)
        lengths, _ = big.semi_axes()
        np.testing.assert_allclose(lengths, [3.0, 3.0], rtol=1e-12)

    def test_inflation_dominates_minkowski_sum(self):
        # Every point within radius r_s of the base ellipsoid must be inside
        # the inflated one.
        rng = np.random.default_rng(0)
        e = Ellipsoid(
            center=np.array([0.5, -0.2]),
            sigma=np.array([[2.0, 0.6], [0.6, 0.3]]),
            threshold=3.0,
        )
        r_s = 0.4
        big = e.inflated(r_s)
        # Sample boundary points of e, push them r_s outward in all directions.
        angles = np.linspace(0, 2 * np.pi, 720, endpoint=False)
        lengths, vecs = e.semi_axes()
        boundary = (
            e.center
            + np.outer(np.cos(angles), lengths[0] * vecs[:, 0])
            + np.outer(np.sin(angles), lengths[1] * vecs[:, 1])
        )
        push = rng.normal(size=(720, 2))
        push = r_s * push / np.linalg.norm(push, axis=1, keepdims=True)
        assert bool(np.all(big.contains(boundary + push)))

    def test_zero_radius_is_identity(self):
        e = Ellipsoid(center=np.zeros(2), sigma=np.eye(2), threshold=1.0)
        assert e.inflated(0.0) is e

    def test_negative_radius_rejected(self):
        e = Ellipsoid(center=np.zeros(2), sigma=np.eye(2), threshold=1.0)
        with pytest.raises(ValueError):
            e.inflated(-0.1)


class TestConfidenceCoverage:
    def test_mc_coverage_matches_gamma(self):
        # 50k draws from the exact Gaussian: empirical mass inside the
        # ellipsoid must match gamma to binomial accuracy.
        rng = np.random.default_rng(2024)
        mu = np.array([1.0, -2.0])
        A = np.array([[1.2, 0.0], [0.7, 0.5]])
        sigma = A @ A.T
        for gamma in (0.5, 0.9, 0.95):
            e = confidence_ellipsoid(mu, sigma, gamma)
            pts = mu + rng.standard_normal((50_000, 2)) @ A.T
            frac = float(np.mean(e.contains(pts)))
            assert abs(frac - gamma) < 0.008, f"gamma={gamma}: {frac}"
