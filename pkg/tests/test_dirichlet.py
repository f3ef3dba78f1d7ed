"""Flat Dirichlet model: density, sampling, fitting, information."""

import numpy as np
import pytest
import scipy.optimize
import scipy.stats as st

from simplexstats import dirichlet
from simplexstats.composition import SufficientStats
from simplexstats.dirichlet import DirichletParams
from simplexstats.errors import DegenerateDataError, DomainError
from simplexstats.numerics import Tolerance, digamma


def test_params_validate_and_freeze():
    p = DirichletParams(alpha=[2.0, 3.0, 5.0])
    assert p.precision == pytest.approx(10.0)
    assert np.allclose(p.mean, [0.2, 0.3, 0.5])
    with pytest.raises(ValueError):
        p.alpha[0] = 1.0
    with pytest.raises(DomainError):
        DirichletParams(alpha=[1.0, -2.0])
    with pytest.raises(DomainError):
        DirichletParams(alpha=[1.0, np.inf])


def test_from_mean_precision_round_trip():
    p = DirichletParams.from_mean_precision([0.423, 0.194, 0.181, 0.202], 27.025)
    assert np.allclose(p.alpha, np.array([0.423, 0.194, 0.181, 0.202]) * 27.025)
    with pytest.raises(DomainError):
        DirichletParams.from_mean_precision([0.5, 0.5], -1.0)


def test_log_density_matches_scipy():
    rng = np.random.default_rng(21)
    for _ in range(25):
        alpha = rng.uniform(0.3, 15.0, size=4)
        params = DirichletParams(alpha=alpha)
        x = rng.dirichlet(alpha, size=6)
        ref = st.dirichlet.logpdf(x.T, alpha)
        assert np.allclose(dirichlet.log_density(params, x), ref, atol=1e-10)


def test_log_density_scalar_for_single_vector():
    params = DirichletParams(alpha=[2.0, 3.0])
    out = dirichlet.log_density(params, np.array([0.4, 0.6]))
    assert isinstance(out, float)


def test_moments_match_closed_form():
    params = DirichletParams(alpha=[2.0, 3.0, 5.0])
    mean, cov = dirichlet.moments(params)
    a = params.alpha
    total = a.sum()
    assert np.allclose(mean, a / total)
    expected_cov = (np.diag(mean) - np.outer(mean, mean)) / (total + 1.0)
    assert np.allclose(cov, expected_cov, atol=1e-14)


def test_sampling_is_deterministic_per_seed():
    params = DirichletParams(alpha=[3.0, 4.0, 5.0])
    x1 = dirichlet.sample(params, 10, np.random.default_rng(99))
    x2 = dirichlet.sample(params, 10, np.random.default_rng(99))
    assert np.array_equal(x1, x2)
    assert np.allclose(x1.sum(axis=1), 1.0, atol=1e-12)


def test_sampling_moments_approach_theory():
    params = DirichletParams(alpha=[9.8, 6.1, 5.4, 5.9])
    x = dirichlet.sample(params, 200_000, np.random.default_rng(4))
    mean, cov = dirichlet.moments(params)
    se_mean = np.sqrt(np.diag(cov) / x.shape[0])
    assert np.all(np.abs(x.mean(axis=0) - mean) < 5.0 * se_mean)
    sample_cov = np.cov(x, rowvar=False)
    assert np.allclose(sample_cov, cov, atol=4e-5)


def test_mle_recovers_generating_parameters():
    params = DirichletParams(alpha=[9.8, 6.1, 5.4, 5.9])
    x = dirichlet.sample(params, 100_000, np.random.default_rng(17))
    fit = dirichlet.mle(x)
    assert fit.converged
    assert np.allclose(fit.params.alpha, params.alpha, rtol=0.03)


def test_mle_matches_direct_optimizer_on_small_sample():
    rng = np.random.default_rng(31)
    x = rng.dirichlet([4.0, 2.0, 3.0], size=12)
    stats = SufficientStats.from_matrix(x)
    fit = dirichlet.mle(x)

    def negative_loglik(log_alpha):
        alpha = np.exp(log_alpha)
        val = (
            scipy.special.gammaln(alpha.sum())
            - scipy.special.gammaln(alpha).sum()
            + ((alpha - 1.0) * stats.mean_log).sum()
        )
        return -stats.n * val

    opt = scipy.optimize.minimize(
        negative_loglik, np.log(fit.params.alpha) + 0.3, method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 5000},
    )
    assert np.allclose(fit.params.alpha, np.exp(opt.x), rtol=1e-5)
    assert fit.log_likelihood == pytest.approx(-opt.fun, rel=1e-10)


def test_mle_log_likelihood_is_total_over_observations():
    rng = np.random.default_rng(53)
    x = rng.dirichlet([3.0, 5.0, 2.0], size=9)
    fit = dirichlet.mle(x)
    ref = st.dirichlet.logpdf(x.T, fit.params.alpha).sum()
    assert fit.log_likelihood == pytest.approx(ref, rel=1e-10)


def test_mle_accepts_sufficient_stats_input():
    rng = np.random.default_rng(67)
    x = rng.dirichlet([2.0, 2.0, 6.0], size=20)
    from_matrix = dirichlet.mle(x)
    from_stats = dirichlet.mle(SufficientStats.from_matrix(x))
    assert np.allclose(from_matrix.params.alpha, from_stats.params.alpha, rtol=1e-12)


def test_mle_rejects_degenerate_inputs():
    with pytest.raises(DegenerateDataError):
        dirichlet.mle(np.array([[0.5, 0.5]]))
    constant = np.array([[0.4, 0.3, 0.3], [0.4, 0.2, 0.4], [0.4, 0.35, 0.25]])
    with pytest.raises(DegenerateDataError):
        dirichlet.mle(constant)


def _expected_loglik_factory(pi0, a0, n):
    """Log-likelihood with the data replaced by its expectation at (pi0, a0).

    The likelihood is linear in the log-data means, so the Hessian of this
    function equals the expected Hessian and its negative is the information.
    """
    alpha0 = a0 * pi0
    mean_log = digamma(alpha0) - digamma(a0)

    def loglik(theta):
        pi_free = theta[:-1]
        a = theta[-1]
        pi = np.append(pi_free, 1.0 - pi_free.sum())
        alpha = a * pi
        return n * (
            scipy.special.gammaln(a)
            - scipy.special.gammaln(alpha).sum()
            + ((alpha - 1.0) * mean_log).sum()
        )

    return loglik


def _numerical_hessian(f, x0, h=1e-4):
    d = x0.size
    hess = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            if i == j:
                e = np.zeros(d)
                e[i] = h
                val = (f(x0 + e) - 2.0 * f(x0) + f(x0 - e)) / h**2
            else:
                ei = np.zeros(d)
                ej = np.zeros(d)
                ei[i] = h
                ej[j] = h
                val = (
                    f(x0 + ei + ej) - f(x0 + ei - ej) - f(x0 - ei + ej) + f(x0 - ei - ej)
                ) / (4.0 * h**2)
            hess[i, j] = val
            hess[j, i] = val
    return hess


def test_fisher_information_matches_numerical_hessian():
    # Matrix-norm relative agreement at 1e-6: entrywise relative comparison is
    # meaningless for the near-zero cross terms, whose absolute magnitude sits
    # below what central differences can resolve.
    pi0 = np.array([0.301, 0.255, 0.216, 0.228])
    a0 = 41.678
    n = 7
    params = DirichletParams.from_mean_precision(pi0, a0)
    info = dirichlet.fisher_information(params, n)
    f = _expected_loglik_factory(pi0, a0, n)
    theta0 = np.append(pi0[:-1], a0)
    hess = _numerical_hessian(f, theta0)
    assert np.linalg.norm(info + hess) <= 1e-6 * np.linalg.norm(info)


def test_fisher_information_scales_linearly_in_n():
    params = DirichletParams(alpha=[3.0, 4.0, 5.0])
    one = dirichlet.fisher_information(params, 1)
    many = dirichlet.fisher_information(params, 13)
    assert np.allclose(many, 13.0 * one, rtol=1e-12)


def test_mean_standard_errors_invariant_under_component_rotation():
    # The SE of a given component must not depend on whether it happens to be
    # the one eliminated by the sum constraint.
    alpha = np.array([9.8, 6.1, 5.4, 5.9])
    n = 7
    base = dirichlet.mean_standard_errors(DirichletParams(alpha=alpha), n)
    rolled = dirichlet.mean_standard_errors(DirichletParams(alpha=np.roll(alpha, 1)), n)
    assert np.allclose(np.roll(base, 1), rolled, rtol=1e-10)


def test_mean_standard_errors_match_monte_carlo():
    params = DirichletParams(alpha=[6.0, 3.0, 2.0])
    n = 60
    analytic = dirichlet.mean_standard_errors(params, n)
    rng = np.random.default_rng(2024)
    means = []
    for _ in range(400):
        x = dirichlet.sample(params, n, rng)
        means.append(dirichlet.mle(x).params.mean)
    observed = np.asarray(means).std(axis=0, ddof=1)
    assert np.allclose(observed, analytic, rtol=0.15)
