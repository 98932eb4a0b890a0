import math

import numpy as np
import pytest

from kerncollab.exceptions import DimensionError, NumericalError
from kerncollab.gp_exact import (ConfidenceParams, GPPosterior, beta, cholesky_with_retry,
                                 clamp_variance, max_std_bound_check, max_variance_point)
from kerncollab.kernels import KernelSpec, cross_matrix, gram
from kerncollab.problem import uniform_grid


def max_variance_run(kernel, lam, grid, steps):
    gp = GPPosterior(kernel, lam, 2, grid=grid)
    for _ in range(steps):
        _, x = max_variance_point(gp, grid)
        gp.append(x, 0.0)
        yield gp


class TestPosterior:

    def test_empty_prior(self, se_kernel):
        gp = GPPosterior(se_kernel, 0.01, 2)
        assert gp.mean((0.3, 0.3)) == 0.0
        assert gp.variance((0.3, 0.3)) == 1.0

    def test_single_observation(self, se_kernel):
        lam = 0.01
        gp = GPPosterior(se_kernel, lam, 2).append((0.2, 0.7), 1.5)
        assert gp.mean((0.2, 0.7)) == pytest.approx(1.5 / (1 + lam), rel=1e-12)
        assert gp.variance((0.2, 0.7)) == pytest.approx(lam / (1 + lam), rel=1e-10)

    def test_matches_dense_solve(self, se_kernel, rng, oracle):
        for _ in range(100):
            t = int(rng.integers(1, 31))
            m = int(rng.integers(1, 51))
            lam = float(rng.choice([0.01, 0.1, 1.0]))
            X = rng.uniform(size=(t, 2))
            y = rng.normal(size=t)
            grid = rng.uniform(size=(m, 2))
            gp = GPPosterior(se_kernel, lam, 2, grid=grid)
            for x, v in zip(X, y):
                gp.append(x, v)
            mu, var = oracle(se_kernel, lam, X, y, grid)
            got_mu, got_var = gp.predict(grid)
            np.testing.assert_allclose(got_mu, mu, rtol=1e-10, atol=1e-12)
            np.testing.assert_allclose(got_var, var, rtol=1e-10, atol=1e-12)
            np.testing.assert_allclose(gp.grid_mean(), mu, rtol=1e-10, atol=1e-12)
            np.testing.assert_allclose(gp.grid_variance(), var, rtol=1e-10, atol=1e-12)

    def test_factor_reproduces_matrix(self, se_kernel, rng):
        X = rng.uniform(size=(25, 2))
        gp = GPPosterior(se_kernel, 0.01, 2)
        for x in X:
            gp.append(x, 0.0)
        A = gram(se_kernel, X) + 0.01 * np.eye(25)
        L = gp.chol
        assert np.linalg.norm(L @ L.T - A) <= 1e-10 * np.linalg.norm(A)

    def test_incremental_matches_refactorization(self, se_kernel, rng):
        X = rng.uniform(size=(20, 2))
        y = rng.normal(size=20)
        grid = uniform_grid(6)
        fast = GPPosterior(se_kernel, 0.05, 2, grid=grid)
        full = GPPosterior(se_kernel, 0.05, 2, grid=grid)
        for x, v in zip(X, y):
            fast.append(x, v)
            full.append(x, v, incremental=False)
        np.testing.assert_allclose(fast.grid_mean(), full.grid_mean(), rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(fast.grid_variance(), full.grid_variance(), rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(fast.alpha, full.alpha, rtol=1e-9, atol=1e-12)
        assert fast.info_gain == pytest.approx(full.info_gain, rel=1e-12)

    def test_dimension_mismatch(self, se_kernel):
        gp = GPPosterior(se_kernel, 0.01, 2)
        with pytest.raises(DimensionError):
            gp.mean((0.1, 0.2, 0.3))
        with pytest.raises(DimensionError):
            gp.append((0.1,), 1.0)

    def test_lambda_must_be_positive(self, se_kernel):
        with pytest.raises(ValueError):
            GPPosterior(se_kernel, 0.0, 2)


class TestAppend:

    def test_first_append_gains_prior_variance(self, se_kernel):
        gp = GPPosterior(se_kernel, 0.01, 2).append((0.5, 0.5), 0.3)
        assert gp.info_gain == 1.0

    def test_repeated_point_gains_less(self, se_kernel):
        gp = GPPosterior(se_kernel, 0.01, 2).append((0.5, 0.5), 0.3)
        first = gp.info_gain
        gp.append((0.5, 0.5), 0.2)
        assert gp.info_gain - first < first

    def test_information_gain_is_sum_of_prior_variances(self, se_kernel, rng, oracle):
        X = rng.uniform(size=(10, 2))
        gp = GPPosterior(se_kernel, 0.01, 2)
        expected = 0.0
        for i, x in enumerate(X):
            _, var = oracle(se_kernel, 0.01, X[:i], np.zeros(i), x[None, :])
            expected += var[0]
            gp.append(x, 0.0)
        assert gp.info_gain == pytest.approx(expected, rel=1e-10)

    def test_variance_never_increases(self, se_kernel, rng, small_grid):
        gp = GPPosterior(se_kernel, 0.01, 2, grid=small_grid)
        for x in rng.uniform(size=(15, 2)):
            before = gp.grid_variance().copy()
            gp.append(x, rng.normal())
            assert np.all(gp.grid_variance() <= before + 1e-9)

    def test_interpolates_for_tiny_lambda(self, se_kernel):
        X = np.array([[0.0, 0.0], [0.25, 0.5], [0.5, 1.0], [0.75, 0.0], [1.0, 0.5]])
        y = np.array([0.3, -1.2, 0.8, 2.0, -0.4])
        gp = GPPosterior(se_kernel, 1e-8, 2)
        for x, v in zip(X, y):
            gp.append(x, v)
        for x, v in zip(X, y):
            assert gp.mean(x) == pytest.approx(v, abs=1e-4)

    def test_mean_is_linear_in_targets(self, se_kernel, rng, small_grid):
        X = rng.uniform(size=(12, 2))
        y1, y2 = rng.normal(size=12), rng.normal(size=12)
        gps = [GPPosterior(se_kernel, 0.01, 2) for _ in range(3)]
        for x, a, b in zip(X, y1, y2):
            gps[0].append(x, a)
            gps[1].append(x, b)
            gps[2].append(x, a + b)
        lhs = gps[2].predict(small_grid)[0]
        rhs = gps[0].predict(small_grid)[0] + gps[1].predict(small_grid)[0]
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)

    def test_provenance_recorded(self, se_kernel):
        gp = GPPosterior(se_kernel, 0.01, 2)
        gp.append((0.1, 0.1), 0.0).append((0.2, 0.2), 0.0, tag='greedy')
        assert gp.provenance == ['explore', 'greedy']


class TestNumerics:

    def test_cholesky_retry_rescues_singular_matrix(self):
        A = np.ones((2, 2))
        L = cholesky_with_retry(A)
        np.testing.assert_allclose(L @ L.T, A, atol=1e-9)

    def test_cholesky_gives_up_on_indefinite_matrix(self):
        with pytest.raises(NumericalError):
            cholesky_with_retry(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_clamp_window(self):
        np.testing.assert_array_equal(clamp_variance([-1e-12, 0.5]), [0.0, 0.5])
        with pytest.raises(NumericalError):
            clamp_variance([-1e-9])


class TestBeta:

    def test_noiseless(self):
        assert beta(ConfidenceParams(B=1.0, R=0.0, delta=0.3), 0.5) == 1.0

    def test_forced_log(self):
        params = ConfidenceParams(B=1.0, R=1.0, delta=2.0 / math.e ** 2)
        assert beta(params, 1.0) == pytest.approx(3.0, rel=1e-12)

    def test_experiment_defaults(self):
        expected = 15 + 0.01 * math.sqrt((2 / 0.01) * math.log(2 / 0.001))
        assert beta(ConfidenceParams(15.0, 0.01, 0.001), 0.01) == pytest.approx(expected, rel=1e-12)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            ConfidenceParams(B=1.0, R=1.0, delta=1.0)
        with pytest.raises(ValueError):
            ConfidenceParams(B=-1.0, R=1.0, delta=0.1)

    def test_empirical_coverage(self, se_kernel):
        """Violations of |h - mu_t| <= beta sigma_t over all (x, t) pairs stay within delta + 0.02"""
        rng = np.random.default_rng(2024)
        B, R, lam, delta = 1.0, 0.1, 0.01, 0.05
        width = beta(ConfidenceParams(B, R, delta), lam)
        violations = total = 0
        for _ in range(200):
            centers = rng.uniform(size=(8, 2))
            coef = rng.normal(size=8)
            norm = math.sqrt(coef @ gram(se_kernel, centers) @ coef)
            coef *= B * rng.uniform(0.1, 1.0) / norm
            X = rng.uniform(size=(20, 2))
            test = rng.uniform(size=(30, 2))
            h_X = cross_matrix(se_kernel, centers, X).T @ coef
            h_test = cross_matrix(se_kernel, centers, test).T @ coef
            gp = GPPosterior(se_kernel, lam, 2)
            for x, v in zip(X, h_X + R * rng.normal(size=20)):
                gp.append(x, v)
                # every t = 1..20, not only the final posterior
                mu, var = gp.predict(test)
                violations += int(np.sum(np.abs(h_test - mu) > width * np.sqrt(var)))
                total += test.shape[0]
        assert violations / total <= delta + 0.02


class TestMaxVariance:

    def test_prior_tie_breaks_to_first(self, se_kernel, small_grid):
        idx, point = max_variance_point(GPPosterior(se_kernel, 0.01, 2), small_grid)
        assert idx == 0
        np.testing.assert_array_equal(point, small_grid[0])

    def test_observed_point_not_chosen(self, se_kernel, small_grid):
        gp = GPPosterior(se_kernel, 0.01, 2)
        for _ in range(5):
            gp.append(small_grid[7], 1.0)
        assert max_variance_point(gp, small_grid)[0] != 7

    def test_matches_exhaustive_scan(self, se_kernel):
        grid = np.array([[0.0, 0.0], [0.3, 0.1], [0.5, 0.9], [0.8, 0.4], [1.0, 1.0]])
        gp = GPPosterior(se_kernel, 0.01, 2)
        for x in ([0.0, 0.1], [0.5, 0.8], [0.9, 0.5]):
            gp.append(x, 0.0)
        expected = int(np.argmax([gp.variance(x) for x in grid]))
        assert max_variance_point(gp, grid)[0] == expected

    def test_tracked_and_untracked_agree(self, se_kernel, rng):
        grid = rng.uniform(size=(40, 2))
        tracked = GPPosterior(se_kernel, 0.01, 2, grid=grid)
        plain = GPPosterior(se_kernel, 0.01, 2)
        for x in rng.uniform(size=(6, 2)):
            tracked.append(x, 0.0)
            plain.append(x, 0.0)
        assert max_variance_point(tracked, grid)[0] == max_variance_point(plain, grid)[0]

    def test_empty_grid(self, se_kernel):
        with pytest.raises(ValueError):
            max_variance_point(GPPosterior(se_kernel, 0.01, 2), np.zeros((0, 2)))

    def test_argmax_invariant_to_common_scale(self, se_kernel, rng):
        grid = rng.uniform(size=(50, 2))
        gp = GPPosterior(se_kernel, 0.01, 2, grid=grid)
        for x in rng.uniform(size=(5, 2)):
            gp.append(x, 0.0)
        sigma = np.sqrt(gp.grid_variance())
        assert int(np.argmax(3.7 * sigma)) == max_variance_point(gp, grid)[0]


class TestMaxStdBound:

    def test_after_one_step(self, se_kernel, small_grid):
        gp = next(max_variance_run(se_kernel, 0.01, small_grid, 1))
        assert max_std_bound_check(gp, small_grid)

    def test_holds_along_max_variance_runs(self, se_kernel):
        for seed in range(20):
            grid = np.random.default_rng(seed).uniform(size=(400, 2))
            for gp in max_variance_run(se_kernel, 0.01, grid, 100):
                assert max_std_bound_check(gp, grid)

    def test_requires_data(self, se_kernel, small_grid):
        with pytest.raises(ValueError):
            max_std_bound_check(GPPosterior(se_kernel, 0.01, 2), small_grid)
