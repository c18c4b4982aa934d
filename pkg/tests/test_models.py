import numpy as np
import pytest
from scipy import integrate, stats

from abcapp.config import ModelBlock
from abcapp.services.models import (
    BoxPrior,
    GaussianOracle,
    GaussianOracleModel,
    GkModel,
    GkParams,
    abc_posterior_oracle,
    build_model,
    gaussian_sample,
    gaussian_summary,
    gk_quantile,
    gk_sample,
    prior_density,
    prior_sample,
    quantile_levels,
    quantile_summaries,
    read_dataset,
    true_posterior,
    write_dataset,
)
from abcapp.utils.normal_quantile import norm_ppf
from abcapp.utils.outputs import read_header

TRUTH = GkParams(3.0, 1.0, 2.0, 0.5)


class TestGkQuantile:
    def test_median_is_alpha(self):
        assert gk_quantile(0.5, TRUTH) == pytest.approx(3.0, abs=1e-15)

    def test_frozen_value(self):
        assert gk_quantile(0.8413447, TRUTH) == pytest.approx(5.27585825, abs=1e-6)

    def test_monotone(self):
        x = np.linspace(1e-8, 1 - 1e-8, 20001)
        assert np.all(np.diff(gk_quantile(x, TRUTH)) > 0)

    def test_gamma_zero_is_symmetric(self):
        p = GkParams(0.0, 1.0, 0.0, 0.3)
        x = np.linspace(0.01, 0.49, 30)
        np.testing.assert_allclose(gk_quantile(x, p), -gk_quantile(1 - x, p), atol=1e-12)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 2.0])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            gk_quantile(bad, TRUTH)

    @pytest.mark.parametrize("vec", [(3, 0, 2, 0.5), (3, -1, 2, 0.5), (3, 1, 2, -0.5), (np.nan, 1, 2, 0.5)])
    def test_invalid_params(self, vec):
        with pytest.raises(ValueError):
            GkParams.from_vector(vec)


class TestGkSample:
    def test_deterministic(self):
        np.testing.assert_array_equal(gk_sample(100, TRUTH, 7), gk_sample(100, TRUTH, 7))
        assert not np.array_equal(gk_sample(100, TRUTH, 7), gk_sample(100, TRUTH, 8))

    def test_empirical_quantiles_track_quantile_function(self):
        x = gk_sample(200_000, TRUTH, 11)
        levels = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
        np.testing.assert_allclose(np.quantile(x, levels), gk_quantile(levels, TRUTH), atol=0.05)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            gk_sample(0, TRUTH, 1)


class TestQuantileSummaries:
    def test_levels(self):
        np.testing.assert_allclose(quantile_levels(19), np.arange(1, 20) / 20)

    def test_type7_on_integers(self):
        data = np.arange(1.0, 21.0)
        expected = 1.0 + 19.0 * np.arange(1, 20) / 20.0
        np.testing.assert_allclose(quantile_summaries(data, 19), expected, atol=1e-12)

    def test_row_wise(self):
        rng = np.random.default_rng(3)
        data = rng.normal(size=(5, 300))
        out = quantile_summaries(data, 9)
        assert out.shape == (5, 9)
        np.testing.assert_allclose(out[2], quantile_summaries(data[2], 9))

    def test_errors(self):
        with pytest.raises(ValueError):
            quantile_summaries([], 3)
        with pytest.raises(ValueError):
            quantile_summaries([1.0, 2.0], 3)


class TestGkModel:
    def test_batched_summaries_shape_and_validity(self):
        model = GkModel(n=200, d=9)
        thetas = np.array([[3, 1, 2, 0.5], [3, 0, 2, 0.5], [3, 1, 2, -0.7]], dtype=float)
        assert model.valid(thetas).tolist() == [True, False, False]
        out = model.simulate_summaries(thetas[:1].repeat(4, axis=0), np.random.default_rng(0))
        assert out.shape == (4, 9)
        assert np.all(np.diff(out, axis=1) >= 0)

    def test_summary_of_simulation(self):
        model = GkModel()
        s = model.observed_summary(TRUTH.as_array(), 5)
        assert s.shape == (19,)
        assert s[9] == pytest.approx(3.0, abs=0.3)


class TestPriors:
    def test_box_prior(self):
        prior = BoxPrior.cube(0.0, 10.0, 4)
        inside = np.array([[1.0, 2.0, 3.0, 4.0], [0.0, 10.0, 5.0, 5.0]])
        np.testing.assert_allclose(prior.pdf(inside), 1e-4)
        assert prior.logpdf(np.array([[11.0, 1, 1, 1]]))[0] == -np.inf
        draws = prior.sample(np.random.default_rng(1), 1000)
        assert draws.shape == (1000, 4) and draws.min() >= 0 and draws.max() <= 10

    def test_box_prior_rejects_empty_box(self):
        with pytest.raises(ValueError):
            BoxPrior.cube(1.0, 1.0, 2)

    def test_prior_density_scalar(self):
        assert prior_density(GkModel(), [1, 1, 1, 1]) == pytest.approx(1e-4)
        model = GaussianOracleModel(GaussianOracle())
        assert prior_density(model, [0.0]) == pytest.approx(1.0 / np.sqrt(2 * np.pi))


class TestGaussianOracle:
    def test_true_posterior(self):
        oracle = GaussianOracle(0.0, 1.0, 1.0, 100)
        mean, var = true_posterior(oracle, 0.5)
        assert var == pytest.approx(1.0 / 101.0)
        assert mean == pytest.approx(0.5 * 100.0 / 101.0)

    def test_abc_posterior(self):
        oracle = GaussianOracle(0.0, 1.0, 1.0, 100)
        assert abc_posterior_oracle(oracle, 0.0, 0.1)[1] == pytest.approx(1.0 / 51.0)
        assert abc_posterior_oracle(oracle, 0.0, 0.3)[1] == pytest.approx(1.0 / 11.0)
        assert abc_posterior_oracle(oracle, 0.2, 0.0) == pytest.approx(true_posterior(oracle, 0.2))
        with pytest.raises(ValueError):
            abc_posterior_oracle(oracle, 0.0, -0.1)

    def test_closed_form_quantities(self):
        oracle = GaussianOracle(0.0, 1.0, 2.0, 400)
        assert oracle.a_n == 20.0
        assert oracle.information == pytest.approx(0.5)
        assert oracle.beta0 == pytest.approx(1.0)

    def test_batched_summary_law(self):
        model = GaussianOracleModel(GaussianOracle(0.0, 1.0, 1.0, 100))
        s = model.simulate_summaries(np.full((50_000, 1), 2.0), np.random.default_rng(4))
        assert s.mean() == pytest.approx(2.0, abs=0.003)
        assert s.var() == pytest.approx(0.01, rel=0.03)

    def test_with_n(self):
        model = GaussianOracleModel(GaussianOracle(0.0, 1.0, 1.0, 100)).with_n(1000)
        assert model.n == 1000 and model.oracle.summary_var == pytest.approx(1e-3)


def test_build_model():
    assert isinstance(build_model(ModelBlock()), GkModel)
    gauss = build_model(ModelBlock(name="gaussian", n=50, prior_var=2.0))
    assert isinstance(gauss, GaussianOracleModel) and gauss.n == 50 and gauss.oracle.prior_var == 2.0


def test_dataset_dump(tmp_path):
    data = gk_sample(50, TRUTH, 2)
    path = write_dataset(data, tmp_path / "d.txt", "abc123", 2)
    np.testing.assert_array_equal(read_dataset(path), data)
    header = read_header(path)
    assert header["config_hash"] == "abc123" and header["seed"] == "2"


class TestGkProperties:
    def test_monotone_for_random_valid_params(self):
        rng = np.random.default_rng(40)
        x = np.linspace(1e-4, 1 - 1e-4, 1000)
        for _ in range(100):
            p = GkParams(rng.uniform(-5, 5), rng.uniform(0.1, 5), rng.uniform(-3, 3), rng.uniform(0, 2))
            assert np.all(np.diff(gk_quantile(x, p)) > 0), p

    def test_standard_params_give_normal_quantile(self):
        x = np.linspace(0.001, 0.999, 999)
        np.testing.assert_allclose(gk_quantile(x, GkParams(0.0, 1.0, 0.0, 0.0)), norm_ppf(x), rtol=1e-15, atol=0)

    def test_standard_sample_is_normal(self):
        x = gk_sample(100_000, GkParams(0.0, 1.0, 0.0, 0.0), 41)
        assert stats.kstest(x, "norm").statistic < 0.01
        assert abs(x.mean()) < 0.02
        assert abs(x.var() - 1.0) < 0.05

    def test_sample_median(self):
        assert np.median(gk_sample(100_000, TRUTH, 42)) == pytest.approx(3.0, abs=0.02)


class TestQuantileSummaryProperties:
    def test_permutation_invariant(self):
        data = gk_sample(300, TRUTH, 3)
        perm = np.random.default_rng(1).permutation(300)
        np.testing.assert_array_equal(quantile_summaries(data, 19), quantile_summaries(data[perm], 19))

    def test_single_level_is_median(self):
        np.testing.assert_array_equal(quantile_summaries([1.0, 2.0, 3.0], 1), [2.0])

    def test_matches_order_statistic_interpolation(self):
        data = np.arange(1.0, 101.0)
        expected = []
        for k in range(1, 20):
            h = 99 * k / 20
            lo = int(np.floor(h))
            expected.append(data[lo] + (h - lo) * (data[min(lo + 1, 99)] - data[lo]))
        np.testing.assert_allclose(quantile_summaries(data, 19), expected, rtol=1e-14)


class TestGaussianSampling:
    def test_summary_of_constant_dataset(self):
        assert gaussian_summary(np.full(25, 1.75)) == 1.75
        with pytest.raises(ValueError):
            gaussian_summary([])

    def test_sample_mean(self):
        oracle = GaussianOracle(0.0, 1.0, 1.0, 1_000_000)
        assert abs(gaussian_summary(gaussian_sample(oracle, 0.0, 43))) < 0.004

    def test_sample_is_deterministic(self):
        oracle = GaussianOracle(0.0, 1.0, 1.0, 50)
        np.testing.assert_array_equal(gaussian_sample(oracle, 0.3, 9), gaussian_sample(oracle, 0.3, 9))


def _moments(density, lo, hi):
    z = integrate.quad(density, lo, hi, epsabs=0, epsrel=1e-11, limit=200)[0]
    m1 = integrate.quad(lambda t: t * density(t), lo, hi, epsabs=0, epsrel=1e-11, limit=200)[0] / z
    m2 = integrate.quad(lambda t: t * t * density(t), lo, hi, epsabs=0, epsrel=1e-11, limit=200)[0] / z
    return m1, m2 - m1 * m1


class TestOracleQuadrature:
    ORACLE = GaussianOracle(0.4, 2.0, 1.5, 60)

    def test_true_posterior(self):
        o, s_obs = self.ORACLE, 0.7
        sd = np.sqrt(o.summary_var)

        def density(t):
            return stats.norm.pdf(t, o.prior_mean, np.sqrt(o.prior_var)) * stats.norm.pdf(s_obs, t, sd)

        mean, var = _moments(density, s_obs - 30 * sd, s_obs + 30 * sd)
        exact = true_posterior(o, s_obs)
        assert exact[0] == pytest.approx(mean, rel=1e-8)
        assert exact[1] == pytest.approx(var, rel=1e-8)

    def test_flat_prior_limit(self):
        o = GaussianOracle(0.0, 1e12, 1.0, 100)
        mean, var = true_posterior(o, 0.3)
        assert mean == pytest.approx(0.3, rel=1e-9)
        assert var == pytest.approx(0.01, rel=1e-9)

    @pytest.mark.parametrize("eps", [0.1, 0.3])
    def test_abc_posterior(self, eps):
        o, s_obs = self.ORACLE, 0.7
        sd = np.sqrt(o.summary_var)
        half = 30 * np.sqrt(o.summary_var + eps**2)

        def joint(s, t, power):
            prior = stats.norm.pdf(t, o.prior_mean, np.sqrt(o.prior_var))
            return t**power * prior * stats.norm.pdf(s, t, sd) * np.exp(-0.5 * ((s - s_obs) / eps) ** 2)

        def integral(power):
            return integrate.dblquad(
                joint, s_obs - half, s_obs + half, lambda t: t - 12 * sd, lambda t: t + 12 * sd,
                args=(power,), epsabs=0, epsrel=1e-9,
            )[0]

        z = integral(0)
        mean = integral(1) / z
        var = integral(2) / z - mean**2
        exact = abc_posterior_oracle(o, s_obs, eps)
        assert exact[0] == pytest.approx(mean, rel=1e-6)
        assert exact[1] == pytest.approx(var, rel=1e-6)


def test_prior_sample_and_density():
    model = GkModel()
    draws = prior_sample(model, 1_000_000, 44)
    assert draws.shape == (1_000_000, 4)
    np.testing.assert_allclose(draws.mean(axis=0), 5.0, atol=0.02)
    assert prior_density(model, [11.0, 0.0, 0.0, 0.0]) == 0.0
