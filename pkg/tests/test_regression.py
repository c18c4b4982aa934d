import numpy as np
import pandas as pd
import pytest

from abcapp.errors import InsufficientSampleError
from abcapp.services.kernels import KernelSpec
from abcapp.services.models import GaussianOracle, GaussianOracleModel
from abcapp.services.regression import (
    adjust,
    beta_error_scaling,
    beta_zero,
    error_slope,
    fit_linear,
    fit_linear_arrays,
    oracle_beta,
)
from abcapp.services.samplers import ProposalSpec, posterior_estimates, run_rejection

ORACLE = GaussianOracle(0.0, 1.0, 1.0, 100)


def _oracle_run(eps, N=200_000, seed=31):
    model = GaussianOracleModel(ORACLE)
    kernel = KernelSpec.identity("gaussian", 1, eps)
    return run_rejection(model, kernel, ProposalSpec.prior(), np.array([0.0]), N, "bernoulli", seed)


def test_exact_linear_recovery():
    rng = np.random.default_rng(0)
    s = rng.normal(size=(100, 4))
    s_obs = rng.normal(size=4)
    alpha = np.array([1.0, -2.0])
    beta = rng.normal(size=(2, 4))
    theta = alpha + (s - s_obs) @ beta.T
    fit = fit_linear_arrays(theta, s, s_obs)
    np.testing.assert_allclose(fit.beta_hat, beta, atol=1e-10)
    np.testing.assert_allclose(fit.alpha_hat, alpha, atol=1e-10)
    assert fit.ridge == 0.0 and fit.n_used == 100


def test_weighted_recovery_ignores_weights_when_exact():
    rng = np.random.default_rng(1)
    s = rng.normal(size=(50, 2))
    theta = 0.5 + s @ np.array([2.0, -1.0])
    fit = fit_linear_arrays(theta, s, np.zeros(2), rng.uniform(0.1, 3.0, size=50))
    np.testing.assert_allclose(fit.beta_hat, [[2.0, -1.0]], atol=1e-10)
    assert fit.weighted


def test_adjustment_identities():
    rng = np.random.default_rng(2)
    t = rng.normal(size=500)
    s = 0.6 * t + rng.normal(size=500)
    fit = fit_linear_arrays(t, s, [0.4])
    star = t - fit.beta_hat[0, 0] * (s - 0.4)
    c = np.cov(np.vstack([t, s]))
    assert star.mean() == pytest.approx(fit.alpha_hat[0], abs=1e-10)
    assert np.var(star, ddof=1) == pytest.approx(c[0, 0] - c[0, 1] ** 2 / c[1, 1], abs=1e-12)


def test_too_few_draws():
    with pytest.raises(InsufficientSampleError):
        fit_linear_arrays(np.zeros((3, 1)), np.zeros((3, 2)), np.zeros(2))


def test_mismatched_rows():
    with pytest.raises(ValueError):
        fit_linear_arrays(np.zeros((10, 1)), np.zeros((9, 1)), [0.0])


def test_ill_conditioned_gram_gets_jitter(caplog):
    rng = np.random.default_rng(3)
    x = rng.normal(size=200)
    s = np.column_stack([x, x])
    theta = 2.0 * x + 0.01 * rng.normal(size=200)
    with caplog.at_level("WARNING"):
        fit = fit_linear_arrays(theta, s, np.zeros(2))
    assert fit.ridge > 0
    assert np.isfinite(fit.beta_hat).all()
    assert fit.beta_hat.sum() == pytest.approx(2.0, abs=0.01)
    assert "jitter" in caplog.text


def test_oracle_beta_recovered():
    run = _oracle_run(0.3)
    fit = fit_linear(run, [0.0], use_weights=False)
    assert fit.beta_hat[0, 0] == pytest.approx(oracle_beta(ORACLE), abs=0.02)
    assert oracle_beta(ORACLE) == pytest.approx(1.0 / 1.01)
    assert beta_zero(ORACLE) == 1.0


def test_adjusted_variance_is_calibrated():
    run = _oracle_run(0.3)
    adj = adjust(run, fit_linear(run, [0.0], use_weights=False), [0.0])
    assert np.var(adj.theta[:, 0], ddof=1) == pytest.approx(1.0 / 101.0, rel=0.05)
    mean, _, _ = posterior_estimates(adj)
    assert mean[0] == pytest.approx(0.0, abs=0.003)
    np.testing.assert_array_equal(adj.weight, run.weight)


def test_kernel_weighted_fit_runs_and_differs():
    run = _oracle_run(0.3, N=20_000)
    plain = fit_linear(run, [0.0])
    local = fit_linear(run, [0.0], kernel_weighted=True)
    assert local.beta_hat[0, 0] != plain.beta_hat[0, 0]
    assert local.beta_hat[0, 0] == pytest.approx(oracle_beta(ORACLE), abs=0.1)


def test_adjust_dimension_check():
    run = _oracle_run(0.3, N=5_000)
    fit = fit_linear_arrays(np.zeros((10, 1)) + np.arange(10)[:, None], np.random.default_rng(0).normal(size=(10, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        adjust(run, fit, [0.0])


def test_error_slope_on_exact_rate():
    N = np.array([1_000, 4_000, 16_000])
    table = pd.DataFrame({"N": np.repeat(N, 3), "error": np.repeat(3.0 / np.sqrt(N), 3)})
    assert error_slope(table) == pytest.approx(-0.5, abs=1e-12)


def test_beta_error_scaling_rate():
    table = beta_error_scaling(ORACLE, 100, 0.1, [1_000, 4_000, 16_000], 60, seed=4, N_ref=400_000)
    assert set(table.columns) == {"N", "replicate", "beta_hat", "beta_ref", "error"}
    assert len(table) == 180
    assert -0.7 <= error_slope(table) <= -0.3


def test_beta_error_scaling_requires_increasing_grid():
    with pytest.raises(ValueError):
        beta_error_scaling(ORACLE, 100, 0.1, [4_000, 1_000], 2, seed=1)


def test_null_slope_within_sampling_error():
    rng = np.random.default_rng(33)
    s = rng.normal(size=(500, 3))
    theta = rng.normal(size=500)
    fit = fit_linear_arrays(theta, s, np.zeros(3))
    xc = s - s.mean(axis=0)
    resid = theta - theta.mean() - xc @ fit.beta_hat[0]
    sigma2 = resid @ resid / (500 - 4)
    se = np.sqrt(sigma2 * np.diag(np.linalg.inv(xc.T @ xc)))
    assert np.all(np.abs(fit.beta_hat[0]) <= 4 * se)
