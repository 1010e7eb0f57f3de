"""Inducing-variable constructions, the optimal variational law, and the KL.

The main oracle is the dense KL between two multivariate Gaussians, applied
to the training-point marginals.  For the matrix construction the inducing
variables are functions of the training values, so both processes share the
conditional law off the training set and the process-level KL equals the
marginal KL exactly.
"""

import numpy as np
import pytest
from scipy.special import zeta

from eigengp import (
    ConditioningError,
    Dataset,
    InputMeasure,
    KernelSpec,
    exact_posterior,
    gram_matrix,
    inducing_from_matrix,
    inducing_from_operator,
    kl_variational_to_posterior,
    operator_eigensystem,
    optimal_variational_params,
    variational_mean,
    variational_predictive,
)
from eigengp.kernels import CENTERED_GAUSSIAN
from eigengp.rngs import rng_stream


def matern_spec(alpha=0.6):
    return KernelSpec("Matern", alpha=alpha)


def series_spec(alpha=1.0, J=60):
    return KernelSpec("RandomSeries", alpha=alpha, series_truncation=J)


def random_instance(rng, spec, n, sigma=0.3):
    xs = rng.uniform(0, 1, (n, 1))
    ys = rng.normal(0, 1, n)
    return Dataset(xs, ys, sigma), gram_matrix(spec, xs)


def gaussian_kl(m1, S1, m2, S2):
    """KL(N(m1, S1) || N(m2, S2)) by the textbook formula."""
    n = len(m1)
    S2_inv = np.linalg.inv(S2)
    diff = m2 - m1
    return 0.5 * (
        np.trace(S2_inv @ S1)
        + diff @ S2_inv @ diff
        - n
        + np.linalg.slogdet(S2)[1]
        - np.linalg.slogdet(S1)[1]
    )


def training_marginals(ind, params, data, k_ff):
    """Means and covariances of f(x_1..x_n) under the variational law and
    under the exact posterior."""
    sigma2 = data.noise_sd**2
    A = ind.k_fu @ np.linalg.inv(ind.k_uu)
    mean_v = A @ params.mean
    cov_v = k_ff - ind.nystrom() + A @ params.cov @ A.T
    Kn = k_ff + sigma2 * np.eye(data.n)
    mean_e = k_ff @ np.linalg.solve(Kn, data.ys)
    cov_e = k_ff - k_ff @ np.linalg.solve(Kn, k_ff)
    return mean_v, cov_v, mean_e, cov_e


class TestMatrixConstruction:
    def test_full_rank_reproduces_gram(self):
        rng = np.random.default_rng(0)
        _, K = random_instance(rng, matern_spec(), 15)
        ind = inducing_from_matrix(K, 15)
        np.testing.assert_allclose(ind.nystrom(), K, atol=1e-10)

    def test_trace_and_norm_identities(self):
        """tr(K - Q) = sum of discarded eigenvalues and |K - Q| = mu_{m+1}."""
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(5, 25))
            m = int(rng.integers(1, n))
            _, K = random_instance(rng, matern_spec(), n)
            ind = inducing_from_matrix(K, m)
            mu = np.linalg.eigvalsh(K)[::-1]
            D = K - ind.nystrom()
            assert np.trace(D) == pytest.approx(mu[m:].sum(), rel=1e-8, abs=1e-12)
            assert np.linalg.norm(D, 2) == pytest.approx(mu[m], rel=1e-8, abs=1e-12)

    def test_residual_psd(self):
        rng = np.random.default_rng(2)
        for spec in (matern_spec(), series_spec()):
            data, K = random_instance(rng, spec, 20)
            ind = inducing_from_matrix(K, 6)
            floor = -1e-8 * np.trace(K)
            assert np.linalg.eigvalsh(K - ind.nystrom()).min() >= floor

    def test_diagonal_k_uu(self):
        rng = np.random.default_rng(3)
        _, K = random_instance(rng, matern_spec(), 10)
        ind = inducing_from_matrix(K, 4)
        np.testing.assert_allclose(ind.k_uu, np.diag(np.diag(ind.k_uu)))

    def test_m_out_of_range(self):
        K = np.eye(4)
        with pytest.raises(ValueError):
            inducing_from_matrix(K, 5)


class TestOperatorConstruction:
    def test_full_series_rank_reproduces_gram(self):
        """With m = J the truncated-series Nystrom matrix is the Gram matrix."""
        spec = series_spec(J=30)
        rng = np.random.default_rng(4)
        xs = rng.uniform(0, 1, (12, 1))
        K = gram_matrix(spec, xs)
        ind = inducing_from_operator(operator_eigensystem(spec), xs, 30)
        np.testing.assert_allclose(ind.nystrom(), K, atol=1e-10)

    def test_trace_identity_against_double_sum(self):
        """tr(K - Q) on fixed points equals the explicit double sum
        sum_{j>m} lambda_j sum_i phi_j(x_i)^2."""
        spec = series_spec(alpha=1.0, J=50)
        sys_ = operator_eigensystem(spec)
        rng = np.random.default_rng(5)
        xs = rng.uniform(0, 1, (18, 1))
        K = gram_matrix(spec, xs)
        m = 5
        ind = inducing_from_operator(sys_, xs, m)
        direct = 0.0
        for j in range(m + 1, 51):
            lam_j = float(sys_.eigenvalues(j)[-1])
            direct += lam_j * float(np.sum(sys_.eigenfunction(j, xs) ** 2))
        assert np.trace(K - ind.nystrom()) == pytest.approx(direct, rel=1e-10)

    def test_expected_trace_matches_tail_sum(self):
        """E_x tr(K - Q) = n sum_{j>m} lambda_j: Monte Carlo over 500
        design draws within three standard errors."""
        spec = series_spec(alpha=1.0, J=400)
        sys_ = operator_eigensystem(spec)
        n, m, reps = 30, 5, 500
        samples = np.empty(reps)
        for rep in range(reps):
            rng = rng_stream(2024, rep)
            xs = rng.random((n, 1))
            ind = inducing_from_operator(sys_, xs, m)
            K = gram_matrix(spec, xs)
            samples[rep] = np.trace(K - ind.nystrom())
        expected = n * (zeta(3.0) - np.sum(np.arange(1.0, m + 1) ** -3.0)
                        - (zeta(3.0) - np.sum(np.arange(1.0, 401.0) ** -3.0)))
        stderr = samples.std(ddof=1) / np.sqrt(reps)
        assert abs(samples.mean() - expected) <= 3 * stderr

    def test_conditioning_error_reports_usable_m(self):
        """Geometric eigenvalue decay caps the usable number of inducing
        variables; the error names the cap."""
        spec = KernelSpec(
            "SquaredExponential",
            alpha=0.8,
            length_scale=1.0,
            input_measure=InputMeasure(CENTERED_GAUSSIAN, 1.0),
        )
        sys_ = operator_eigensystem(spec)
        xs = np.linspace(-2, 2, 40)[:, None]
        with pytest.raises(ConditioningError, match="largest usable m"):
            inducing_from_operator(sys_, xs, 60)

    def test_residual_psd(self):
        spec = series_spec(J=80)
        rng = np.random.default_rng(6)
        xs = rng.uniform(0, 1, (25, 1))
        K = gram_matrix(spec, xs)
        ind = inducing_from_operator(operator_eigensystem(spec), xs, 7)
        assert np.linalg.eigvalsh(K - ind.nystrom()).min() >= -1e-8 * np.trace(K)


class TestOptimalParams:
    def test_zero_data_gives_zero_mean(self):
        rng = np.random.default_rng(7)
        spec = matern_spec()
        xs = rng.uniform(0, 1, (12, 1))
        data = Dataset(xs, np.zeros(12), 0.2)
        ind = inducing_from_matrix(gram_matrix(spec, xs), 5, xs=xs)
        params = optimal_variational_params(ind, data)
        np.testing.assert_allclose(params.mean, 0.0)

    def test_perturbing_mean_increases_direct_kl(self):
        """n = 6, m = 3: coordinate perturbations of mu' by +-1e-3 cannot
        decrease the dense-oracle KL."""
        rng = np.random.default_rng(8)
        spec = matern_spec()
        data, K = random_instance(rng, spec, 6)
        ind = inducing_from_matrix(K, 3, xs=data.xs)
        params = optimal_variational_params(ind, data)
        _, cov_v, mean_e, cov_e = training_marginals(ind, params, data, K)
        A = ind.k_fu @ np.linalg.inv(ind.k_uu)
        base = gaussian_kl(A @ params.mean, cov_v, mean_e, cov_e)
        for i in range(3):
            for step in (1e-3, -1e-3):
                mu = params.mean.copy()
                mu[i] += step
                perturbed = gaussian_kl(A @ mu, cov_v, mean_e, cov_e)
                assert perturbed >= base - 1e-12

    def test_sigma_prime_psd(self):
        rng = np.random.default_rng(9)
        data, K = random_instance(rng, matern_spec(), 14)
        ind = inducing_from_matrix(K, 6, xs=data.xs)
        params = optimal_variational_params(ind, data)
        assert np.linalg.eigvalsh(0.5 * (params.cov + params.cov.T)).min() >= -1e-12


class TestVariationalPredictive:
    def test_prior_recovery_at_identity_params(self):
        """Sigma' = K_uu and mu' = 0 collapse the correction: the predictive
        covariance is the prior kernel."""
        from eigengp.svgp import VariationalParams

        rng = np.random.default_rng(10)
        spec = matern_spec()
        data, K = random_instance(rng, spec, 10)
        ind = inducing_from_matrix(K, 4, xs=data.xs)
        params = VariationalParams(np.zeros(4), ind.k_uu.copy())
        grid = np.linspace(0, 1, 15)[:, None]
        pred = variational_predictive(ind, params, spec, grid)
        np.testing.assert_allclose(pred.mean, 0.0, atol=1e-12)
        np.testing.assert_allclose(pred.cov, gram_matrix(spec, grid), atol=1e-10)

    def test_full_rank_matches_exact_posterior(self):
        """m = n: the variational family contains the posterior."""
        rng = np.random.default_rng(11)
        spec = matern_spec()
        data, K = random_instance(rng, spec, 40)
        ind = inducing_from_matrix(K, 40, xs=data.xs)
        params = optimal_variational_params(ind, data)
        grid = np.linspace(0, 1, 50)[:, None]
        vp = variational_predictive(ind, params, spec, grid)
        ep = exact_posterior(data, spec, grid)
        np.testing.assert_allclose(vp.mean, ep.mean, atol=1e-6)
        np.testing.assert_allclose(vp.cov, ep.cov, atol=1e-6)
        # and on the training points
        vp_t = variational_predictive(ind, params, spec, data.xs)
        ep_t = exact_posterior(data, spec, data.xs)
        np.testing.assert_allclose(vp_t.mean, ep_t.mean, atol=1e-8)

    def test_variational_variance_dominates_exact_at_training_points(self):
        """Sparsification never understates uncertainty at the data:
        20 random instances with m < n."""
        rng = np.random.default_rng(12)
        spec = matern_spec()
        for _ in range(20):
            n = int(rng.integers(8, 30))
            m = int(rng.integers(1, n))
            data, K = random_instance(rng, spec, n)
            ind = inducing_from_matrix(K, m, xs=data.xs)
            params = optimal_variational_params(ind, data)
            vp = variational_predictive(ind, params, spec, data.xs)
            ep = exact_posterior(data, spec, data.xs)
            assert np.all(vp.variances() >= ep.variances() - 1e-10)

    def test_variational_mean_matches_predictive(self):
        rng = np.random.default_rng(13)
        spec = matern_spec()
        data, K = random_instance(rng, spec, 20)
        ind = inducing_from_matrix(K, 8, xs=data.xs)
        params = optimal_variational_params(ind, data)
        pts = rng.uniform(0, 1, (9, 1))
        pred = variational_predictive(ind, params, spec, pts)
        np.testing.assert_allclose(
            variational_mean(ind, params, spec, pts), pred.mean, atol=1e-12
        )

    def test_operator_method_predictive_consistency(self):
        spec = series_spec(J=40)
        rng = np.random.default_rng(14)
        xs = rng.uniform(0, 1, (20, 1))
        data = Dataset(xs, rng.normal(0, 1, 20), 0.25)
        K = gram_matrix(spec, xs)
        ind = inducing_from_operator(operator_eigensystem(spec), xs, 40, k_ff=K)
        params = optimal_variational_params(ind, data)
        grid = np.linspace(0, 1, 30)[:, None]
        vp = variational_predictive(ind, params, spec, grid)
        ep = exact_posterior(data, spec, grid)
        np.testing.assert_allclose(vp.mean, ep.mean, atol=1e-7)
        np.testing.assert_allclose(vp.cov, ep.cov, atol=1e-7)


class TestDivergence:
    def test_zero_at_full_rank(self):
        rng = np.random.default_rng(15)
        data, K = random_instance(rng, matern_spec(), 25)
        ind = inducing_from_matrix(K, 25, xs=data.xs)
        assert kl_variational_to_posterior(ind, data) <= 1e-8

    def test_matches_dense_gaussian_kl(self):
        """20 random n = 6, m = 3 instances against the dense marginal KL."""
        rng = np.random.default_rng(16)
        spec = matern_spec()
        for _ in range(20):
            data, K = random_instance(rng, spec, 6)
            ind = inducing_from_matrix(K, 3, xs=data.xs)
            params = optimal_variational_params(ind, data)
            mean_v, cov_v, mean_e, cov_e = training_marginals(ind, params, data, K)
            direct = gaussian_kl(mean_v, cov_v, mean_e, cov_e)
            formula = kl_variational_to_posterior(ind, data)
            assert formula == pytest.approx(direct, abs=1e-8)

    def test_monotone_in_m(self):
        """Nested inducing sets: KL(m+1) <= KL(m) + 1e-8."""
        rng = np.random.default_rng(17)
        data, K = random_instance(rng, matern_spec(), 20)
        kls = []
        for m in range(1, 21):
            ind = inducing_from_matrix(K, m)
            kls.append(kl_variational_to_posterior(ind, data))
        diffs = np.diff(kls)
        assert np.all(diffs <= 1e-8)

    def test_logdet_ratio_nonpositive(self):
        """log |Q_n| / |K_n| <= 0 since Q_ff <= K_ff."""
        rng = np.random.default_rng(18)
        for _ in range(10):
            data, K = random_instance(rng, matern_spec(), 15)
            m = int(rng.integers(1, 15))
            ind = inducing_from_matrix(K, m)
            s2 = data.noise_sd**2
            Qn = ind.nystrom() + s2 * np.eye(15)
            Kn = K + s2 * np.eye(15)
            assert np.linalg.slogdet(Qn)[1] <= np.linalg.slogdet(Kn)[1] + 1e-10

    def test_operator_marginal_kl_is_lower_bound(self):
        """For the operator construction the inducing variables are not
        functions of the training values, so the training-marginal KL can
        only fall below the process-level value."""
        spec = series_spec(J=100)
        sys_ = operator_eigensystem(spec)
        rng = np.random.default_rng(19)
        for _ in range(10):
            xs = rng.uniform(0, 1, (12, 1))
            data = Dataset(xs, rng.normal(0, 1, 12), 0.3)
            K = gram_matrix(spec, xs)
            m = int(rng.integers(2, 9))
            ind = inducing_from_operator(sys_, xs, m, k_ff=K)
            params = optimal_variational_params(ind, data)
            mean_v, cov_v, mean_e, cov_e = training_marginals(ind, params, data, K)
            marginal = gaussian_kl(mean_v, cov_v, mean_e, cov_e)
            process = kl_variational_to_posterior(ind, data)
            assert marginal <= process + 1e-8

    def test_matrix_construction_is_trace_and_norm_optimal(self):
        """Among rank-m surrogates, the Gram-eigenvector choice minimizes
        both the trace and the norm of K - Q."""
        spec = series_spec(J=80)
        sys_ = operator_eigensystem(spec)
        rng = np.random.default_rng(20)
        for _ in range(10):
            xs = rng.uniform(0, 1, (18, 1))
            K = gram_matrix(spec, xs)
            m = int(rng.integers(1, 10))
            D1 = K - inducing_from_matrix(K, m).nystrom()
            D2 = K - inducing_from_operator(sys_, xs, m).nystrom()
            assert np.trace(D1) <= np.trace(D2) + 1e-8
            assert np.linalg.norm(D1, 2) <= np.linalg.norm(D2, 2) + 1e-8

    def test_requires_gram_matrix(self):
        spec = series_spec(J=30)
        rng = np.random.default_rng(21)
        xs = rng.uniform(0, 1, (8, 1))
        data = Dataset(xs, rng.normal(0, 1, 8), 0.3)
        ind = inducing_from_operator(operator_eigensystem(spec), xs, 4)
        with pytest.raises(ValueError, match="K_ff"):
            kl_variational_to_posterior(ind, data)
