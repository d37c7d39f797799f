"""
Analysis of one prospective trial given the selected historical controls.

Four methods are available: frequentist test-then-pool, frequentist separate
analysis, Bayesian separate analysis and the Bayesian robust MAP analysis.
"""
import hashlib
import logging
from dataclasses import dataclass, field
from typing import ClassVar, Optional

import numpy as np
from django.conf import settings as django_settings
from django.core.cache import InvalidCacheBackendError, caches

from hybrid_borrowing.beta_mixture import (
    BetaMixture,
    HierarchicalHyperPrior,
    MapFitSettings,
    ess_elir,
    fit_map_prior,
    posterior_update,
    robust_single,
    robustify,
    superiority_probability,
)
from hybrid_borrowing.exact_stats import (
    Counts2x2,
    fisher_exact_one_sided,
    fisher_exact_two_sided,
    prop_diff_ci_cc,
)
from hybrid_borrowing.exceptions import DomainError

logger = logging.getLogger(__name__)

CREDIBLE_GRID = 2048
MAP_CACHE_ALIAS = "map_fits"


@dataclass(frozen=True)
class ProspectiveData:
    y_t: int
    n_t: int
    y_c: int
    n_c: int

    def __post_init__(self):
        counts = Counts2x2(self.y_t, self.n_t, self.y_c, self.n_c)
        for name in ("y_t", "n_t", "y_c", "n_c"):
            object.__setattr__(self, name, getattr(counts, name))

    @property
    def counts(self):
        return Counts2x2(self.y_t, self.n_t, self.y_c, self.n_c)


def _check_level(name, value):
    if not 0 < value < 1:
        raise DomainError(f"{name} must lie in (0, 1), got {value}")


def _check_gamma(value):
    if not 0.5 < value < 1:
        raise DomainError(f"gamma must lie in (0.5, 1), got {value}")


@dataclass(frozen=True)
class TestThenPool:
    __test__ = False

    name: ClassVar[str] = "ttp"
    alpha_pre: float = 0.10
    alpha: float = 0.025

    def __post_init__(self):
        _check_level("alpha_pre", self.alpha_pre)
        _check_level("alpha", self.alpha)


@dataclass(frozen=True)
class FrequentistSeparate:
    name: ClassVar[str] = "freq_separate"
    alpha: float = 0.025

    def __post_init__(self):
        _check_level("alpha", self.alpha)


@dataclass(frozen=True)
class BayesSeparate:
    name: ClassVar[str] = "bayes_separate"
    gamma: float = 0.975

    def __post_init__(self):
        _check_gamma(self.gamma)


@dataclass(frozen=True)
class RobustMap:
    name: ClassVar[str] = "robust_map"
    w_robust: float = 0.1
    gamma: float = 0.975
    hyper: HierarchicalHyperPrior = field(default_factory=HierarchicalHyperPrior)
    fit_settings: MapFitSettings = field(default_factory=MapFitSettings.default)

    def __post_init__(self):
        _check_level("w_robust", self.w_robust)
        _check_gamma(self.gamma)


@dataclass(frozen=True)
class AnalysisResult:
    method: str
    success: bool
    rd_estimate: float
    interval: Optional[tuple] = None
    p_value: Optional[float] = None
    posterior_prob: Optional[float] = None
    pooled: Optional[bool] = None
    pretest_p_value: Optional[float] = None
    ess: Optional[float] = None
    control_mean_prospective: Optional[float] = None
    n_selected: int = 0


# MAP prior cache
# ------------------------------------------------------------------------------


def get_fit_cache(alias=MAP_CACHE_ALIAS):
    """The Django cache holding fitted MAP priors, or None outside a configured project."""
    if not django_settings.configured:
        return None
    try:
        return caches[alias]
    except InvalidCacheBackendError:
        logger.warning(f"Cache alias '{alias}' is not configured; MAP fits will not be cached")
        return None


def map_cache_key(pool, hyper, fit_settings):
    raw = repr((pool.counts_key(), hyper, fit_settings))
    return "map:" + hashlib.sha256(raw.encode("utf-8")).hexdigest()


def cached_map_prior(pool, hyper, fit_settings, cache=None):
    if cache is None:
        return fit_map_prior(pool, hyper, settings=fit_settings)
    key = map_cache_key(pool, hyper, fit_settings)
    mixture = cache.get(key)
    if mixture is None:
        mixture = fit_map_prior(pool, hyper, settings=fit_settings)
        cache.add(key, mixture)
    return mixture


def build_control_prior(selected, cfg, cache=None):
    """
    Control-arm prior for a Bayesian analysis.

    Two or more selected trials give the robust MAP prior, one trial gives the
    robust mixture of Beta(1, 1) and that trial's posterior, and an empty
    selection (or a separate analysis) gives Beta(1, 1).
    """
    if isinstance(cfg, BayesSeparate) or selected.k == 0:
        return BetaMixture.vague()
    if selected.k == 1:
        return robust_single(selected.trials[0], cfg.w_robust)
    return robustify(cached_map_prior(selected, cfg.hyper, cfg.fit_settings, cache), cfg.w_robust)


# Frequentist analyses
# ------------------------------------------------------------------------------


def analyze_freq_separate(data, cfg):
    tbl = data.counts
    p_value = fisher_exact_one_sided(tbl)
    estimate, lower, upper = prop_diff_ci_cc(tbl)
    return AnalysisResult(
        method=FrequentistSeparate.name,
        success=p_value <= cfg.alpha,
        rd_estimate=estimate,
        interval=(lower, upper),
        p_value=p_value,
        control_mean_prospective=tbl.rate_c,
    )


def analyze_ttp(selected, data, cfg):
    """
    Test-then-pool: a two-sided Fisher pre-test of pooled historical against
    prospective controls decides whether the control arm is augmented, then a
    one-sided Fisher test compares treatment with the (possibly pooled) control.
    """
    if selected.k == 0:
        return analyze_freq_separate(data, FrequentistSeparate(alpha=cfg.alpha))

    pretest = fisher_exact_two_sided(Counts2x2(selected.responders, selected.size, data.y_c, data.n_c))
    pooled = pretest >= cfg.alpha_pre
    if pooled:
        tbl = Counts2x2(data.y_t, data.n_t, data.y_c + selected.responders, data.n_c + selected.size)
    else:
        tbl = data.counts
    p_value = fisher_exact_one_sided(tbl)
    estimate, lower, upper = prop_diff_ci_cc(tbl)
    return AnalysisResult(
        method=TestThenPool.name,
        success=p_value <= cfg.alpha,
        rd_estimate=estimate,
        interval=(lower, upper),
        p_value=p_value,
        pooled=pooled,
        pretest_p_value=pretest,
        control_mean_prospective=data.counts.rate_c,
        n_selected=selected.k,
    )


# Bayesian analyses
# ------------------------------------------------------------------------------


def difference_interval(treatment, control, level=0.95, grid=CREDIBLE_GRID):
    """
    Equal-tailed interval of pi_t - pi_c from the convolution of cell masses
    of the two posteriors on a regular grid over [0, 1].
    """
    edges = np.linspace(0.0, 1.0, grid + 1)
    mass_t = np.clip(np.diff(treatment.cdf(edges)), 0.0, None)
    mass_c = np.clip(np.diff(control.cdf(edges)), 0.0, None)
    dist = np.convolve(mass_t / mass_t.sum(), mass_c[::-1] / mass_c.sum())
    h = 1.0 / grid
    x_edges = (np.arange(2 * grid) - grid + 0.5) * h
    cum = np.concatenate(([0.0], np.cumsum(dist)))
    tail = 0.5 * (1.0 - level)
    lower = float(np.interp(tail, cum, x_edges))
    upper = float(np.interp(1.0 - tail, cum, x_edges))
    return max(lower, -1.0), min(upper, 1.0)


def analyze_bayes(selected, data, cfg, cache=None, credible_interval=True, compute_ess=True):
    """
    Bayesian analysis with a Beta(1, 1) treatment prior. Success requires the
    posterior probability of pi_t > pi_c to exceed gamma.
    """
    prior_c = build_control_prior(selected, cfg, cache)
    post_c = posterior_update(prior_c, data.y_c, data.n_c)
    post_t = BetaMixture.single(1.0 + data.y_t, 1.0 + data.n_t - data.y_t)
    prob = superiority_probability(post_t, post_c)
    return AnalysisResult(
        method=cfg.name,
        success=prob > cfg.gamma,
        rd_estimate=post_t.mean() - post_c.mean(),
        interval=difference_interval(post_t, post_c) if credible_interval else None,
        posterior_prob=prob,
        ess=ess_elir(prior_c) if compute_ess else None,
        control_mean_prospective=data.counts.rate_c,
        n_selected=selected.k,
    )


ANALYSIS_METHODS = {
    TestThenPool.name: {
        "config": TestThenPool,
        "runner": analyze_ttp,
        "bayesian": False,
        "description": "Fisher pre-test then pooled one-sided Fisher test",
    },
    FrequentistSeparate.name: {
        "config": FrequentistSeparate,
        "runner": lambda selected, data, cfg: analyze_freq_separate(data, cfg),
        "bayesian": False,
        "description": "One-sided Fisher test on prospective data only",
    },
    BayesSeparate.name: {
        "config": BayesSeparate,
        "runner": analyze_bayes,
        "bayesian": True,
        "description": "Beta(1, 1) priors on both arms",
    },
    RobustMap.name: {
        "config": RobustMap,
        "runner": analyze_bayes,
        "bayesian": True,
        "description": "Robust MAP prior from the selected historical controls",
    },
}


def method_from_name(name, **params):
    if name not in ANALYSIS_METHODS:
        raise DomainError(f"Unknown analysis method: {name}")
    return ANALYSIS_METHODS[name]["config"](**params)


def run_analysis(selected, data, cfg, **options):
    """
    Dispatch to the runner registered for ``cfg``. Keyword options
    (cache, credible_interval, compute_ess) only reach Bayesian runners.
    """
    entry = ANALYSIS_METHODS.get(cfg.name)
    if entry is None:
        raise DomainError(f"Unknown analysis method: {cfg.name}")
    if entry["bayesian"]:
        return entry["runner"](selected, data, cfg, **options)
    return entry["runner"](selected, data, cfg)
