"""Closed-form score oracles, the perturbation kernel and the DSM loss."""

import numpy as np
import pytest
from scipy import stats
from scipy.special import logsumexp

from gmsdi.core import AudioTensor
from gmsdi.errors import ConfigurationError, DegenerateDensityError
from gmsdi.score_model import (
    GaussianPriorField,
    LabelEncoder,
    analytic_gaussian_score,
    analytic_gmm_score,
    dsm_loss,
    perturb,
)

SIGMAS = (0.01, 0.1, 1.0, 10.0)
GMM = [(0.2, -1.5, 0.3), (0.5, 0.4, 0.5), (0.3, 2.0, 0.2)]


def _gauss_logpdf(x, mu, var):
    return stats.norm.logpdf(x, mu, np.sqrt(var))


def _gmm_logpdf(x, comps, sigma):
    return logsumexp([np.log(w) + _gauss_logpdf(x, mu, s2 + sigma**2) for w, mu, s2 in comps], axis=0)


def _central_difference(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


def _fd_check(score, logpdf, xs, scale):
    h = 1e-4 * np.maximum(1.0, np.abs(xs)) * np.sqrt(scale)
    expected = _central_difference(logpdf, xs, h)
    # atol guards the zero crossing, where a relative check is meaningless
    np.testing.assert_allclose(score, expected, rtol=1e-4, atol=1e-6 / scale)


class TestGaussianScore:
    @pytest.mark.parametrize("sigma", SIGMAS)
    def test_matches_finite_difference(self, sigma):
        xs = np.linspace(-4, 5, 120)
        mu, s2 = 0.7, 0.4
        score = analytic_gaussian_score(AudioTensor(xs), mu, s2, sigma).samples.ravel()
        _fd_check(score, lambda x: _gauss_logpdf(x, mu, s2 + sigma**2), xs, s2 + sigma**2)

    def test_zero_at_mean(self):
        mu = AudioTensor([0.3, -2.0, 5.0])
        np.testing.assert_array_equal(analytic_gaussian_score(mu, mu, 1.0, 0.5).samples, 0.0)

    def test_worked_value(self):
        out = analytic_gaussian_score(AudioTensor([2.0]), 0.0, 1.0, 1.0).samples.item()
        fd = _central_difference(lambda x: _gauss_logpdf(x, 0.0, 2.0), 2.0, 1e-4)
        assert out == pytest.approx(-1.0, abs=1e-12)
        assert fd == pytest.approx(-1.0, abs=1e-8)

    def test_flattens_as_sigma_grows(self):
        x = AudioTensor([3.0, -1.0])
        mags = [np.abs(analytic_gaussian_score(x, 0.0, 1.0, s).samples) for s in (0.1, 1, 10, 100, 1e4)]
        for a, b in zip(mags, mags[1:]):
            assert np.all(b < a)
        assert np.all(mags[-1] < 1e-7)

    def test_degenerate(self):
        with pytest.raises(DegenerateDensityError):
            analytic_gaussian_score(AudioTensor([0.0]), 0.0, 0.0, 0.0)


class TestGmmScore:
    @pytest.mark.parametrize("sigma", SIGMAS)
    def test_matches_finite_difference(self, sigma):
        xs = np.linspace(-4, 5, 120)
        scores = np.array([analytic_gmm_score(AudioTensor([x]), GMM, sigma).samples.item() for x in xs])
        _fd_check(scores, lambda x: _gmm_logpdf(x, GMM, sigma), xs, 0.2 + sigma**2)

    def test_single_component_reduces_to_gaussian(self):
        x = AudioTensor(np.linspace(-2, 2, 9))
        np.testing.assert_allclose(analytic_gmm_score(x, [(1.0, 0.3, 0.5)], 0.2).samples,
                                   analytic_gaussian_score(x, 0.3, 0.5, 0.2).samples, rtol=1e-14)

    def test_symmetric_pair_at_origin(self):
        out = analytic_gmm_score(AudioTensor([0.0]), [(0.5, -1.0, 0.3), (0.5, 1.0, 0.3)], 0.5)
        assert out.samples.item() == pytest.approx(0.0, abs=1e-15)

    def test_configuration_errors(self):
        with pytest.raises(ConfigurationError):
            analytic_gmm_score(AudioTensor([0.0]), [], 1.0)
        with pytest.raises(ConfigurationError):
            analytic_gmm_score(AudioTensor([0.0]), [(0.5, 0.0, 1.0)], 1.0)


class TestPerturb:
    def test_sigma_zero_is_identity(self, rng):
        x = AudioTensor([1.0, 2.0])
        assert perturb(x, 0.0, rng) is x

    def test_moments_and_ks(self):
        draws = perturb(AudioTensor(np.zeros(100_000)), 1.0, np.random.default_rng(0)).samples.ravel()
        assert abs(draws.mean()) <= 0.02
        assert 0.98 <= draws.var() <= 1.02
        assert stats.kstest(draws, "norm").pvalue > 0.01

    def test_reproducible(self):
        x = AudioTensor(np.ones(16))
        a = perturb(x, 0.3, np.random.default_rng(7))
        b = perturb(x, 0.3, np.random.default_rng(7))
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_negative_sigma(self, rng):
        with pytest.raises(ConfigurationError):
            perturb(AudioTensor([0.0]), -1.0, rng)


class TestDsmLoss:
    enc = LabelEncoder(["a"])

    def test_oracle_model_has_zero_loss(self):
        x0 = AudioTensor(np.random.default_rng(1).standard_normal(32))
        sigma = 0.7

        def oracle(xt, z, s):
            return xt.like((x0.samples - xt.samples) / s**2)

        assert dsm_loss(oracle, x0, self.enc.encode(["a"]), sigma, np.random.default_rng(3)) == 0.0

    @pytest.mark.parametrize("sigma", [1.0, 0.25])
    def test_zero_model_loss_is_scaled_noise_energy(self, sigma):
        x0 = AudioTensor(np.linspace(-1, 1, 64))
        eps = np.random.default_rng(9).standard_normal(x0.shape)

        def zero(xt, z, s):
            return xt.like(np.zeros(xt.shape))

        loss = dsm_loss(zero, x0, self.enc.encode(["a"]), sigma, np.random.default_rng(9))
        assert loss == pytest.approx(np.sum((eps / sigma) ** 2), rel=1e-12)

    def test_sigma_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            dsm_loss(lambda x, z, s: x, AudioTensor([0.0]), self.enc.encode(["a"]), 0.0, np.random.default_rng(0))


class TestGaussianPriorField:
    def test_lookup_by_embedding_key(self):
        enc = LabelEncoder(["a", "b"])
        field = GaussianPriorField({"a": (1.0, 0.5), "a,b": [(0.5, -1.0, 0.1), (0.5, 1.0, 0.1)]})
        x = AudioTensor([0.0, 2.0])
        np.testing.assert_array_equal(field(x, enc.encode(["a"]), 0.3).samples,
                                      analytic_gaussian_score(x, 1.0, 0.5, 0.3).samples)
        assert field(AudioTensor([0.0]), enc.encode(["b", "a"]), 0.3).samples.item() == pytest.approx(0.0, abs=1e-15)
        with pytest.raises(ConfigurationError):
            field(x, enc.encode(["b"]), 0.3)

    def test_default_entry(self):
        enc = LabelEncoder(["a"])
        field = GaussianPriorField({}, default=(0.0, 1.0))
        assert field(AudioTensor([1.0]), enc.unconditional(), 0.0).samples.item() == -1.0
