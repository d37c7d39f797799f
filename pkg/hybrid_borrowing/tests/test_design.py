import numpy as np
import pytest
from scipy import stats

from hybrid_borrowing.analysis import BayesSeparate, RobustMap, build_control_prior
from hybrid_borrowing.beta_mixture import BetaMixture, MapFitSettings, posterior_update, superiority_probability
from hybrid_borrowing.design import (
    MAX_ENUMERATED_TRIALS,
    DecisionBoundary,
    DesignSpec,
    boundary,
    conditional_oc,
    conditional_power,
    default_pi_grid,
    design_for_total,
    oc_from_boundary,
    prefer,
    probability_of_success,
    subset_masks,
    worst_case_selection,
)
from hybrid_borrowing.exact_stats import BetaParams
from hybrid_borrowing.exceptions import DomainError
from hybrid_borrowing.selection import RuleKind, SelectionRule, select
from hybrid_borrowing.tests.factories import pool_from_counts

ROBUST = BetaMixture((0.2, 0.5, 0.3), (BetaParams(1, 1), BetaParams(12, 48), BetaParams(30, 70)))


def exhaustive_boundary(prior_c, n_t, n_c, gamma):
    d1 = []
    for y_c in range(n_c + 1):
        post_c = posterior_update(prior_c, y_c, n_c)
        failing = [
            y_t for y_t in range(n_t + 1)
            if superiority_probability(BetaMixture.single(1 + y_t, 1 + n_t - y_t), post_c) <= gamma
        ]
        d1.append(max(failing, default=-1))
    return tuple(d1)


class TestDesignSize:
    @pytest.mark.parametrize(
        "n_total, expected", [(30, (24, 6)), (60, (48, 12)), (300, (240, 60)), (3000, (2400, 600))]
    )
    def test_four_to_one(self, n_total, expected):
        assert design_for_total(n_total, 4) == expected

    def test_empty_arm(self):
        with pytest.raises(DomainError, match="empty arm"):
            design_for_total(1, 4)

    def test_spec_from_total(self):
        design = DesignSpec.from_total(30, 4)
        assert (design.n_t, design.n_c, design.n_total) == (24, 6, 30)


class TestBoundary:
    @pytest.mark.parametrize("prior", [BetaMixture.vague(), BetaMixture.single(8, 32), ROBUST])
    def test_matches_exhaustive_search(self, prior):
        assert boundary(prior, 15, 9, 0.975).d1 == exhaustive_boundary(prior, 15, 9, 0.975)

    def test_unequal_arms(self):
        assert boundary(ROBUST, 8, 20, 0.9).d1 == exhaustive_boundary(ROBUST, 8, 20, 0.9)

    def test_tiny_trial_never_succeeds(self):
        bnd = boundary(BetaMixture.vague(), 1, 1, 0.975)
        assert bnd.d1 == (1, 1)

    def test_boundary_validation(self):
        with pytest.raises(DomainError, match="entries"):
            DecisionBoundary((0, 1), n_t=5, n_c=3, gamma=0.975)

    def test_succeeds(self):
        bnd = DecisionBoundary((3, 4, 6), n_t=8, n_c=2, gamma=0.975)
        assert bnd.succeeds(4, 0)
        assert not bnd.succeeds(4, 1)


class TestConditionalOperatingCharacteristics:
    def test_vague_type_one_error_by_enumeration(self):
        n_t, n_c, gamma, pi = 12, 8, 0.95, 0.3
        bnd = boundary(BetaMixture.vague(), n_t, n_c, gamma)
        expected = 0.0
        for y_c in range(n_c + 1):
            post_c = BetaMixture.single(1 + y_c, 1 + n_c - y_c)
            for y_t in range(n_t + 1):
                prob = superiority_probability(BetaMixture.single(1 + y_t, 1 + n_t - y_t), post_c)
                if prob > gamma:
                    expected += stats.binom.pmf(y_t, n_t, pi) * stats.binom.pmf(y_c, n_c, pi)
        assert conditional_power(bnd, pi, pi) == pytest.approx(expected, abs=1e-12)

    def test_zero_effect_power_equals_type_one_error(self):
        curve = conditional_oc(ROBUST, 20, 10, 0.975, [0.1, 0.2, 0.3], 0.0)
        assert curve.power == curve.t1e

    def test_power_exceeds_type_one_error(self):
        curve = conditional_oc(ROBUST, 40, 20, 0.975, [0.1, 0.2, 0.3], 0.3)
        assert all(p > a for p, a in zip(curve.power, curve.t1e))

    def test_rows(self):
        bnd = boundary(BetaMixture.vague(), 10, 5, 0.975)
        rows = oc_from_boundary(bnd, [0.2, 0.4], 0.2).as_rows()
        assert [row["pi_c"] for row in rows] == [0.2, 0.4]

    def test_default_grid(self):
        grid = default_pi_grid()
        assert grid[0] == 0.01 and grid[-1] == 0.6
        assert len(grid) == 119

    @pytest.mark.parametrize("grid, rd", [([0.3, 0.2], 0.0), ([0.0, 0.2], 0.0), ([0.5, 0.7], 0.35), ([], 0.0)])
    def test_grid_validation(self, grid, rd):
        with pytest.raises(DomainError):
            conditional_oc(BetaMixture.vague(), 10, 5, 0.975, grid, rd)


class TestProbabilityOfSuccess:
    def test_matches_beta_binomial_sum(self):
        prior_c = BetaMixture.single(3, 12)
        bnd = boundary(prior_c, 24, 6, 0.975)
        y_c = np.arange(7)
        exact = float(stats.betabinom.pmf(y_c, 6, 3, 12) @ stats.betabinom.sf(np.array(bnd.d1), 24, 1, 1))
        pos = probability_of_success(prior_c, BetaMixture.vague(), 24, 6, 0.975)
        assert pos == pytest.approx(exact, abs=1e-4)

    def test_mixture_design_prior(self):
        design_prior_c = BetaMixture((0.4, 0.6), (BetaParams(2, 10), BetaParams(20, 60)))
        bnd = boundary(BetaMixture.vague(), 20, 10, 0.975)
        y_c = np.arange(11)
        control = 0.4 * stats.betabinom.pmf(y_c, 10, 2, 10) + 0.6 * stats.betabinom.pmf(y_c, 10, 20, 60)
        exact = float(control @ stats.betabinom.sf(np.array(bnd.d1), 20, 1, 1))
        pos = probability_of_success(
            BetaMixture.vague(), BetaMixture.vague(), 20, 10, 0.975, design_prior_c=design_prior_c
        )
        assert pos == pytest.approx(exact, abs=1e-4)

    @pytest.mark.slow
    def test_case_study_values(self, as_pool):
        method = RobustMap(w_robust=0.2)
        full_prior = build_control_prior(as_pool, method)
        separate = probability_of_success(
            build_control_prior(as_pool, BayesSeparate()), BetaMixture.vague(), 24, 6, 0.975,
            design_prior_c=full_prior,
        )
        full = probability_of_success(full_prior, BetaMixture.vague(), 24, 6, 0.975)
        assert separate == pytest.approx(0.189, abs=0.02)
        assert full == pytest.approx(0.436, abs=0.02)

    @pytest.mark.slow
    def test_case_study_boundary(self, as_pool):
        bnd = boundary(build_control_prior(as_pool, RobustMap(w_robust=0.2)), 24, 6, 0.975)
        assert bnd.succeeds(14, 1)


class TestWorstCase:
    def test_subset_masks(self):
        masks = dict(subset_masks(3))
        assert len(masks) == 8
        assert masks[0b101] == (True, False, True)

    def test_tie_rule(self):
        assert prefer(0.5, 0b11, 0.5, 0b01)
        assert prefer(0.5, 0b01, 0.5, 0b10)
        assert not prefer(0.5, 0b10, 0.5, 0b01)
        assert not prefer(0.4, 0b11, 0.5, 0b01)
        assert prefer(0.1, 0b0, None, None)

    def test_envelope_dominates_every_subset(self):
        pool = pool_from_counts((3, 30), (12, 30))
        method = RobustMap(w_robust=0.2, fit_settings=MapFitSettings.coarse())
        design = DesignSpec(20, 10)
        grid = [0.1, 0.2, 0.3, 0.4]
        worst = worst_case_selection(pool, design, grid, method, workers=2)
        assert len(worst.curves) == 4
        for j in range(len(grid)):
            assert worst.envelope[j] == pytest.approx(max(curve[j] for curve in worst.curves.values()), abs=1e-12)
            assert worst.curves[worst.masks[j]][j] == worst.envelope[j]

    def test_enumeration_limit(self):
        pool = pool_from_counts(*[(5, 20)] * (MAX_ENUMERATED_TRIALS + 1))
        with pytest.raises(DomainError, match=f"limited to {MAX_ENUMERATED_TRIALS} trials"):
            worst_case_selection(pool, DesignSpec(10, 5), [0.2], BayesSeparate())


class TestCaseStudySelection:
    """Conditional type-I error at pi_c = 0.25 for the 24:6 design with gamma = 0.975."""

    method = RobustMap(w_robust=0.2, fit_settings=MapFitSettings.coarse())

    def t1e(self, pool):
        prior = build_control_prior(pool, self.method)
        return conditional_oc(prior, 24, 6, 0.975, [0.25], 0.0).t1e[0]

    def test_full_pool_controls_type_one_error(self, as_pool):
        assert self.t1e(as_pool) <= 0.025

    def test_low_rate_threshold_inflates_type_one_error(self, as_pool):
        selected = select(as_pool, SelectionRule(RuleKind.THRESHOLD, threshold=0.25)).selected
        assert selected.k < as_pool.k
        assert self.t1e(selected) > 0.025

    @pytest.mark.slow
    def test_worst_case_exceeds_full_pool(self, as_pool):
        worst = worst_case_selection(as_pool, DesignSpec(24, 6), [0.25], self.method, workers=4)
        everything = (True,) * as_pool.k
        assert worst.envelope[0] > worst.curves[everything][0]
        assert worst.masks[0] != everything
