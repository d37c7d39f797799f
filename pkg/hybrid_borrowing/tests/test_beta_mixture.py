import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, stats

from hybrid_borrowing import beta_mixture
from hybrid_borrowing.beta_mixture import (
    BetaMixture,
    HierarchicalHyperPrior,
    HistoricalPool,
    HistoricalTrial,
    MapFitSettings,
    ess_elir,
    fit_map,
    posterior_update,
    robust_single,
    robustify,
    superiority_probability,
)
from hybrid_borrowing.exact_stats import BetaParams, beta_superiority
from hybrid_borrowing.exceptions import DomainError, FittingError
from hybrid_borrowing.tests.factories import HistoricalTrialFactory, pool_from_counts


class TestHistoricalPool:
    def test_factory_trials_are_valid(self):
        trials = HistoricalTrialFactory.create_batch(5)
        pool = HistoricalPool(tuple(trials))
        assert pool.k == 5
        assert all(0 <= t.responders <= t.size for t in pool)

    def test_indices_must_increase(self):
        with pytest.raises(DomainError, match="strictly increasing"):
            HistoricalPool((HistoricalTrial(2, 1, 10), HistoricalTrial(1, 1, 10)))

    def test_responders_bounded_by_size(self):
        with pytest.raises(DomainError, match="responders must lie"):
            HistoricalTrial(1, 11, 10)

    def test_subset_keeps_order(self, as_pool):
        subset = as_pool.subset([i % 2 == 0 for i in range(as_pool.k)])
        assert subset.indices == (1, 3, 5, 7)
        assert subset.counts_key() == ((23, 107), (19, 51), (39, 139), (9, 78))

    def test_subset_mask_length(self, as_pool):
        with pytest.raises(DomainError, match="Mask length"):
            as_pool.subset([True])

    def test_totals(self, as_pool):
        assert (as_pool.responders, as_pool.size) == (127, 513)


class TestBetaMixture:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(DomainError, match="sum to 1"):
            BetaMixture((0.5, 0.4), (BetaParams(1, 1), BetaParams(2, 2)))

    def test_needs_components(self):
        with pytest.raises(DomainError):
            BetaMixture((), ())

    def test_moments(self):
        mixture = BetaMixture((0.25, 0.75), (BetaParams(2, 8), BetaParams(6, 4)))
        assert mixture.mean() == pytest.approx(0.25 * 0.2 + 0.75 * 0.6)
        draws = np.concatenate(
            [stats.beta(2, 8).rvs(25_000, random_state=1), stats.beta(6, 4).rvs(75_000, random_state=2)]
        )
        assert mixture.variance() == pytest.approx(draws.var(), rel=0.02)

    def test_pdf_integrates_to_one(self):
        mixture = BetaMixture((0.3, 0.7), (BetaParams(1, 1), BetaParams(12, 30)))
        value, _ = integrate.quad(lambda x: float(mixture.pdf(x)), 0, 1, points=[12 / 42])
        assert value == pytest.approx(1.0, abs=1e-8)

    def test_ppf_inverts_cdf(self):
        mixture = BetaMixture((0.3, 0.7), (BetaParams(1, 1), BetaParams(12, 30)))
        for q in (0.025, 0.5, 0.975):
            assert float(mixture.cdf(mixture.ppf(q))) == pytest.approx(q, abs=1e-10)


class TestConjugateUpdate:
    def test_single_component(self):
        posterior = posterior_update(BetaMixture.single(2, 3), 4, 10)
        assert posterior.components == (BetaParams(6, 9),)

    def test_no_data_returns_prior(self):
        prior = BetaMixture.single(2, 3)
        assert posterior_update(prior, 0, 0) is prior

    def test_weights_follow_marginal_likelihood(self):
        prior = BetaMixture((0.5, 0.5), (BetaParams(1, 1), BetaParams(10, 40)))
        posterior = posterior_update(prior, 1, 6)
        # beta-binomial marginals of each component
        m1 = stats.betabinom.pmf(1, 6, 1, 1)
        m2 = stats.betabinom.pmf(1, 6, 10, 40)
        assert posterior.weights[1] == pytest.approx(m2 / (m1 + m2), rel=1e-10)

    def test_rejects_invalid_counts(self):
        with pytest.raises(DomainError):
            posterior_update(BetaMixture.vague(), 7, 6)


class TestRobustification:
    def test_robustify_prepends_vague_component(self):
        robust = robustify(BetaMixture.single(20, 80), 0.2)
        assert robust.weights == pytest.approx((0.2, 0.8))
        assert robust.components[0] == BetaParams(1, 1)

    def test_robust_single(self):
        robust = robust_single(HistoricalTrial(7, 9, 78), 0.1)
        assert robust.components[1] == BetaParams(10, 70)
        assert robust.weights == pytest.approx((0.1, 0.9))

    @pytest.mark.parametrize("weight", [0.0, 1.0, -0.1])
    def test_weight_range(self, weight):
        with pytest.raises(DomainError):
            robustify(BetaMixture.vague(), weight)

    def test_near_total_robust_weight_recovers_uniform_posterior(self):
        posterior = posterior_update(robustify(BetaMixture.single(20, 80), 0.999), 1, 6)
        assert posterior.weights[0] > 0.99
        assert posterior.mean() == pytest.approx(2 / 8, abs=1e-3)

    def test_conflicting_data_raises_vague_weight(self):
        robust = robustify(BetaMixture.single(20, 80), 0.2)
        assert posterior_update(robust, 5, 6).weights[0] > 0.2
        assert posterior_update(robust, 1, 6).weights[0] < 0.2

    def test_update_is_componentwise(self):
        robust = robustify(BetaMixture((0.6, 0.4), (BetaParams(20, 80), BetaParams(6, 4))), 0.25)
        y, n = 4, 11
        posterior = posterior_update(robust, y, n)
        marginal = robust.w * stats.betabinom.pmf(y, n, robust.a, robust.b)
        np.testing.assert_allclose(posterior.w, marginal / marginal.sum(), rtol=1e-10)
        np.testing.assert_allclose(posterior.a, robust.a + y, rtol=1e-12)
        np.testing.assert_allclose(posterior.b, robust.b + n - y, rtol=1e-12)


class TestSuperiority:
    def test_reduces_to_beta_superiority(self):
        x, y = BetaParams(15, 11), BetaParams(2, 6)
        prob = superiority_probability(BetaMixture((1.0,), (x,)), BetaMixture((1.0,), (y,)))
        assert prob == pytest.approx(beta_superiority(x, y), abs=1e-15)

    def test_invariant_to_component_order(self):
        control = BetaMixture((0.2, 0.8), (BetaParams(1, 1), BetaParams(12, 50)))
        swapped = BetaMixture((0.8, 0.2), (BetaParams(12, 50), BetaParams(1, 1)))
        treatment = BetaMixture.single(9, 7)
        assert superiority_probability(treatment, control) == pytest.approx(
            superiority_probability(treatment, swapped), abs=1e-14
        )


class TestEffectiveSampleSize:
    def test_single_beta(self):
        assert ess_elir(BetaMixture.single(10, 30)) == 40

    def test_mixture_of_identical_components(self):
        mixture = BetaMixture((0.5, 0.5), (BetaParams(10, 30), BetaParams(10, 30)))
        assert ess_elir(mixture) == pytest.approx(40.0, rel=1e-4)

    def test_robustification_lowers_ess(self):
        informative = BetaMixture.single(30, 90)
        assert ess_elir(robustify(informative, 0.2)) < 120

    def test_two_component_mixture_matches_direct_integration(self):
        w, a, b = np.array([0.3, 0.7]), np.array([3.0, 20.0]), np.array([12.0, 30.0])

        def integrand(p):
            f = w * stats.beta.pdf(p, a, b)
            score = (a - 1.0) / p - (b - 1.0) / (1.0 - p)
            d1 = f @ score
            d2 = f @ (score ** 2 - (a - 1.0) / p ** 2 - (b - 1.0) / (1.0 - p) ** 2)
            return p * (1.0 - p) * (d1 ** 2 / f.sum() - d2)

        expected, _ = integrate.quad(integrand, 0.0, 1.0, points=[0.2, 0.4], limit=200)
        mixture = BetaMixture((0.3, 0.7), (BetaParams(3, 12), BetaParams(20, 30)))
        assert ess_elir(mixture) == pytest.approx(expected, rel=1e-5)


class TestMapFit:
    def test_needs_two_trials(self):
        with pytest.raises(DomainError, match="at least two"):
            fit_map(pool_from_counts((5, 20)))

    def test_case_study_pool(self, as_pool):
        fit = fit_map(as_pool, HierarchicalHyperPrior(), settings=MapFitSettings.coarse())
        assert math.fsum(fit.mixture.weights) == pytest.approx(1.0, abs=1e-12)
        assert 0.18 < fit.mixture.mean() < 0.32
        assert fit.mixture.mean() == pytest.approx(fit.diagnostics.predictive_mean, abs=0.01)
        assert 1 <= fit.diagnostics.n_components <= MapFitSettings.coarse().max_components
        assert fit.diagnostics.tv_distance <= MapFitSettings.coarse().tv_max

    def test_homogeneous_pool_is_informative(self):
        pool = pool_from_counts((20, 100), (21, 100), (19, 100), (20, 100))
        fit = fit_map(pool, settings=MapFitSettings.coarse())
        assert fit.mixture.mean() == pytest.approx(0.2, abs=0.02)
        assert ess_elir(fit.mixture) > 20

    def test_fixed_component_count(self, as_pool):
        fit = fit_map(as_pool, n_components=1, settings=MapFitSettings.coarse())
        assert fit.mixture.n_components == 1

    def test_unreachable_total_variation_bound(self, as_pool):
        settings = replace(MapFitSettings.coarse(), tv_max=1e-6)
        with pytest.raises(FittingError, match="total variation") as excinfo:
            fit_map(as_pool, settings=settings)
        diagnostics = excinfo.value.diagnostics
        assert diagnostics["n_draws"] == settings.max_draws
        assert diagnostics["tv_refits"] == 2
        assert diagnostics["tv_distance"] > settings.tv_max

    def test_no_converged_component_count(self, as_pool, monkeypatch):
        monkeypatch.setattr(beta_mixture, "_em_fit", lambda draws, k, settings: (BetaMixture.vague(), -1.0, False))
        with pytest.raises(FittingError, match="did not converge for any K"):
            fit_map(as_pool, settings=MapFitSettings.coarse())

    def test_vanishing_heterogeneity_pools_the_trials(self, as_pool):
        fit = fit_map(as_pool, HierarchicalHyperPrior(tau_scale=1e-3), settings=MapFitSettings.coarse())
        pooled = (1 + as_pool.responders) / (2 + as_pool.size)
        assert fit.mixture.mean() == pytest.approx(pooled, abs=0.01)

    def test_identical_large_trials(self):
        fit = fit_map(pool_from_counts((200, 1000), (200, 1000)), settings=MapFitSettings.coarse())
        assert fit.mixture.ppf(0.5) == pytest.approx(0.2, abs=0.01)
        assert fit.mixture.mean() == pytest.approx(fit.diagnostics.predictive_mean, abs=0.005)
        assert fit.mixture.mean() == pytest.approx(0.2, abs=0.02)
