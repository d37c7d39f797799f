"""
Monte Carlo operating characteristics of selection rules and analysis methods.

Historical and prospective control logits share a normal random-effects
distribution around logit(0.20). Every replicate draws one historical pool and
one prospective trial, and every rule and method is applied to that same data.
"""
import enum
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import special

from hybrid_borrowing.analysis import ProspectiveData, get_fit_cache, run_analysis
from hybrid_borrowing.beta_mixture import HierarchicalHyperPrior, HistoricalPool, MapFitSettings, fit_map
from hybrid_borrowing.exceptions import AggregationError, ConfigError, DomainError, NumericalError
from hybrid_borrowing.rng import ReplicateStreams
from hybrid_borrowing.selection import PlanningAssumptions, RuleKind, select

logger = logging.getLogger(__name__)

HISTORICAL_MEAN = 0.20
BASE_LOGIT = float(special.logit(HISTORICAL_MEAN))
PLAN_GAMMA = 0.975

TAU_LEVELS = (0.1, 0.3, 0.5)
K_LEVELS = (4, 8)
COUPLINGS = ((30, 60), (90, 180))
RATIO_LEVELS = (1, 2, 3)
SHIFT_LEVELS = tuple(round(0.15 + 0.05 * i, 2) for i in range(13))
TIME_TREND_DRIFT = -0.05
LARGE_TOTAL = 500
LARGE_RDS = (0.0635, 0.1152)
LARGE_N_HC = (30, 60)


class ScenarioFamily(str, enum.Enum):
    EXCHANGEABLE = "exchangeable"
    SHIFT = "shift"
    TIME_TREND = "time_trend"
    LARGE_PROSPECTIVE = "large_prospective"


class Hypothesis(str, enum.Enum):
    NULL = "null"
    ALT = "alt"


class EffectScale(str, enum.Enum):
    LOGIT = "logit"
    PROBABILITY = "probability"


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str
    tau: float
    k: int
    n_hc: int
    n_total: int
    ratio: int = 1
    family: ScenarioFamily = ScenarioFamily.EXCHANGEABLE
    pi_c_target: float = HISTORICAL_MEAN
    rd: float = 0.20
    effect_scale: EffectScale = EffectScale.LOGIT
    drift: float = 0.0
    hypothesis: Hypothesis = Hypothesis.ALT
    replicates: int = 1000
    seed: int = 2024
    stream_key: int = 0
    extrapolated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", ScenarioFamily(self.family))
        object.__setattr__(self, "hypothesis", Hypothesis(self.hypothesis))
        object.__setattr__(self, "effect_scale", EffectScale(self.effect_scale))
        if self.tau < 0:
            raise ConfigError(f"{self.scenario_id}: tau must be non-negative, got {self.tau}")
        if self.k < 1 or self.n_hc < 1:
            raise ConfigError(f"{self.scenario_id}: k and n_hc must be at least 1")
        if self.ratio <= 0:
            raise ConfigError(f"{self.scenario_id}: ratio must be positive, got {self.ratio}")
        if self.n_c < 1 or self.n_t < 1:
            raise ConfigError(f"{self.scenario_id}: n_total={self.n_total} at ratio {self.ratio} leaves an empty arm")
        if not 0 < self.pi_c_target < 1:
            raise ConfigError(f"{self.scenario_id}: pi_c_target must lie in (0, 1), got {self.pi_c_target}")
        if not 0 < HISTORICAL_MEAN + self.rd < 1:
            raise ConfigError(f"{self.scenario_id}: 0.20 + rd must lie in (0, 1), got rd={self.rd}")
        if self.replicates < 1:
            raise ConfigError(f"{self.scenario_id}: replicates must be at least 1")

    @property
    def n_c(self):
        return int(self.n_total // (self.ratio + 1))

    @property
    def n_t(self):
        return self.n_total - self.n_c

    @property
    def beta1(self):
        """Treatment log-odds shift; zero under the null."""
        if self.hypothesis is Hypothesis.NULL:
            return 0.0
        return float(special.logit(HISTORICAL_MEAN + self.rd) - BASE_LOGIT)

    def planning(self):
        return PlanningAssumptions(HISTORICAL_MEAN + self.rd, HISTORICAL_MEAN, self.n_t, self.n_c, PLAN_GAMMA)

    def describe(self):
        return {
            "scenario_id": self.scenario_id,
            "family": self.family.value,
            "tau": self.tau,
            "k": self.k,
            "n_hc": self.n_hc,
            "n_total": self.n_total,
            "ratio": self.ratio,
            "pi_c": self.pi_c_target,
            "hypothesis": self.hypothesis.value,
        }


@dataclass(frozen=True)
class OCRecord:
    scenario: ScenarioConfig
    rule: str
    method: str
    rejection_rate: float
    bias: float
    rmse: float
    mean_ess: float
    mc_se: dict = field(default_factory=dict)
    n_replicates: int = 0
    n_failed: int = 0

    @property
    def metric(self):
        return "t1e" if self.scenario.hypothesis is Hypothesis.NULL else "power"


# Data generation
# ------------------------------------------------------------------------------


def _treatment_rate(cfg, pi_c):
    if cfg.hypothesis is Hypothesis.NULL:
        return pi_c
    if cfg.effect_scale is EffectScale.PROBABILITY:
        return float(np.clip(pi_c + cfg.rd, 0.0, 1.0))
    return float(special.expit(special.logit(pi_c) + cfg.beta1))


def generate_replicate(cfg, streams):
    """
    Draw one historical pool and one prospective trial.

    Returns:
        (pool, data, realized_rd)
    """
    rng = streams.historical
    u = rng.normal(0.0, cfg.tau, size=cfg.k + 1)
    i = np.arange(1, cfg.k + 1)
    pi_h = special.expit(BASE_LOGIT + cfg.drift * (cfg.k - i + 1) + u[: cfg.k])
    y_h = rng.binomial(cfg.n_hc, pi_h)
    pool = HistoricalPool.from_counts((int(y), cfg.n_hc) for y in y_h)

    pi_c = float(special.expit(special.logit(cfg.pi_c_target) + u[cfg.k]))
    pi_t = _treatment_rate(cfg, pi_c)
    rng = streams.prospective
    y_c = int(rng.binomial(cfg.n_c, pi_c))
    y_t = int(rng.binomial(cfg.n_t, pi_t))
    return pool, ProspectiveData(y_t, cfg.n_t, y_c, cfg.n_c), pi_t - pi_c


def _simulate_replicate(task):
    cfg, rules, methods, replicate, compute_ess = task
    streams = ReplicateStreams(cfg.seed, cfg.stream_key, replicate)
    pool, data, realized_rd = generate_replicate(cfg, streams)
    selection_rng = streams.selection
    cache = get_fit_cache()
    outcomes = []
    for rule in rules:
        selection = select(pool, rule, rng=selection_rng)
        for method in methods:
            try:
                result = run_analysis(
                    selection.selected, data, method, cache=cache, credible_interval=False, compute_ess=compute_ess
                )
            except NumericalError as exc:
                logger.warning(f"{cfg.scenario_id} replicate {replicate} {rule.label}/{method.name}: {exc}")
                outcomes.append((math.nan, math.nan, math.nan))
                continue
            ess = result.ess if result.ess is not None else math.nan
            outcomes.append((float(result.success), result.rd_estimate, ess))
    return realized_rd, outcomes


# Aggregation
# ------------------------------------------------------------------------------


def _mean_se(values):
    if values.size < 2:
        return math.nan
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


def aggregate(cfg, rule, method, success, estimate, realized, ess):
    """Rejection rate, bias, RMSE and mean ESS with Monte Carlo standard errors."""
    ok = ~np.isnan(estimate)
    n = int(ok.sum())
    if n == 0:
        raise AggregationError(f"{cfg.scenario_id} {rule}/{method}: no successful replicate to aggregate")
    rate = float(success[ok].mean())
    error = estimate[ok] - realized[ok]
    bias = float(error.mean())
    mse = float(np.mean(error ** 2))
    rmse = math.sqrt(mse)
    rmse_se = _mean_se(error ** 2) / (2.0 * rmse) if rmse > 0 else math.nan
    ess_ok = ess[ok & ~np.isnan(ess)]
    return OCRecord(
        scenario=cfg,
        rule=rule,
        method=method,
        rejection_rate=rate,
        bias=bias,
        rmse=rmse,
        mean_ess=float(ess_ok.mean()) if ess_ok.size else math.nan,
        mc_se={
            "rejection_rate": math.sqrt(rate * (1.0 - rate) / n),
            "bias": _mean_se(error),
            "rmse": rmse_se,
            "mean_ess": _mean_se(ess_ok),
        },
        n_replicates=n,
        n_failed=int(estimate.size - n),
    )


def _check_rules(cfg, rules):
    for rule in rules:
        if rule.kind in (RuleKind.RANDOM, RuleKind.DROP_BEST) and cfg.k < 2:
            raise ConfigError(f"{cfg.scenario_id}: rule '{rule.label}' needs k >= 2, got k={cfg.k}")


def run_scenario(cfg, rules, methods, workers=1, compute_ess=True):
    """
    Simulate ``cfg.replicates`` replicates and aggregate one OCRecord per
    rule and method. Replicates run on a process pool and are reduced in
    replicate order.
    """
    _check_rules(cfg, rules)
    rules = [rule.with_planning(cfg.planning()) for rule in rules]
    tasks = ((cfg, rules, methods, replicate, compute_ess) for replicate in range(cfg.replicates))
    started = time.monotonic()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_simulate_replicate, tasks, chunksize=max(1, cfg.replicates // (4 * workers))))
    else:
        results = [_simulate_replicate(task) for task in tasks]

    realized = np.array([r[0] for r in results])
    outcomes = np.array([r[1] for r in results], dtype=float)
    records = []
    pairs = [(rule.label, method.name) for rule in rules for method in methods]
    for j, (rule, method) in enumerate(pairs):
        records.append(
            aggregate(cfg, rule, method, outcomes[:, j, 0], outcomes[:, j, 1], realized, outcomes[:, j, 2])
        )
    failed = sum(r.n_failed for r in records)
    logger.info(
        f"Scenario {cfg.scenario_id}: {cfg.replicates} replicates, {len(pairs)} rule/method pairs, "
        f"{failed} failed analyses in {time.monotonic() - started:.1f}s"
    )
    return records


def summarize_records(records):
    """One row per record and metric in the long CSV layout."""
    rows = []
    for record in records:
        base = dict(record.scenario.describe(), rule=record.rule, method=record.method)
        values = (
            (record.metric, record.rejection_rate, record.mc_se["rejection_rate"]),
            ("bias", record.bias, record.mc_se["bias"]),
            ("rmse", record.rmse, record.mc_se["rmse"]),
        )
        for metric, value, se in values:
            rows.append(dict(base, metric=metric, value=value, mc_se=se))
        if not math.isnan(record.mean_ess):
            rows.append(dict(base, metric="ess", value=record.mean_ess, mc_se=record.mc_se["mean_ess"]))
    columns = [
        "scenario_id", "family", "tau", "k", "n_hc", "n_total", "ratio", "pi_c",
        "hypothesis", "rule", "method", "metric", "value", "mc_se",
    ]
    return pd.DataFrame(rows, columns=columns)


# Scenario grid
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    families: tuple = (ScenarioFamily.EXCHANGEABLE,)
    taus: tuple = TAU_LEVELS
    ks: tuple = K_LEVELS
    couplings: tuple = COUPLINGS
    ratios: tuple = RATIO_LEVELS
    shift_pi_c: tuple = SHIFT_LEVELS
    drift: float = TIME_TREND_DRIFT
    large_rds: tuple = LARGE_RDS
    large_n_hc: tuple = LARGE_N_HC
    rd: float = 0.20
    effect_scale: EffectScale = EffectScale.LOGIT
    hypotheses: tuple = (Hypothesis.NULL, Hypothesis.ALT)
    replicates: int = 1000
    seed: int = 2024
    stream_key: int = 0


def _extrapolated(tau, k, n_hc, ratio, n_hc_levels=(30, 90)):
    return tau not in TAU_LEVELS or k not in K_LEVELS or n_hc not in n_hc_levels or ratio not in RATIO_LEVELS


def _scenario_id(family, tau, k, n_hc, n_total, ratio, pi_c, hypothesis, rd=None):
    parts = [family.value, f"tau{tau:g}", f"k{k}", f"nhc{n_hc}", f"n{n_total}", f"r{ratio}", f"pc{pi_c:g}"]
    if rd is not None:
        parts.append(f"rd{rd:g}")
    return "-".join(parts + [hypothesis.value])


def scenario_grid(spec):
    """
    Expand a grid description into scenarios. Historical size and prospective
    total are coupled as n_total = 2 * n_hc; the time trend only runs at
    k=8 with n_hc=30 and the large prospective trial at n_total=500.

    Raises:
        ConfigError: if a requested coupling breaks n_total = 2 * n_hc.
    """
    for n_hc, n_total in spec.couplings:
        if n_total != 2 * n_hc:
            raise ConfigError(f"Coupling (n_hc={n_hc}, n_total={n_total}) breaks n_total = 2 * n_hc")

    common = dict(replicates=spec.replicates, seed=spec.seed, stream_key=spec.stream_key,
                  effect_scale=spec.effect_scale)
    scenarios = []
    for family in (ScenarioFamily(f) for f in spec.families):
        for hypothesis in (Hypothesis(h) for h in spec.hypotheses):
            if family is ScenarioFamily.EXCHANGEABLE:
                points = [
                    (tau, k, n_hc, n_total, ratio, HISTORICAL_MEAN, spec.rd, 0.0)
                    for tau, k, (n_hc, n_total), ratio in itertools.product(
                        spec.taus, spec.ks, spec.couplings, spec.ratios
                    )
                ]
            elif family is ScenarioFamily.SHIFT:
                points = [
                    (tau, k, n_hc, n_total, ratio, pi_c, spec.rd, 0.0)
                    for pi_c, tau, k, (n_hc, n_total), ratio in itertools.product(
                        spec.shift_pi_c, spec.taus, spec.ks, spec.couplings, spec.ratios
                    )
                ]
            elif family is ScenarioFamily.TIME_TREND:
                points = [
                    (tau, 8, 30, 60, ratio, HISTORICAL_MEAN, spec.rd, spec.drift)
                    for tau, ratio in itertools.product(spec.taus, spec.ratios)
                ]
            else:
                points = [
                    (tau, k, n_hc, LARGE_TOTAL, ratio, HISTORICAL_MEAN, rd, 0.0)
                    for tau, k, ratio, rd, n_hc in itertools.product(
                        spec.taus, spec.ks, spec.ratios, spec.large_rds, spec.large_n_hc
                    )
                ]
            for tau, k, n_hc, n_total, ratio, pi_c, rd, drift in points:
                large = family is ScenarioFamily.LARGE_PROSPECTIVE
                scenarios.append(
                    ScenarioConfig(
                        scenario_id=_scenario_id(family, tau, k, n_hc, n_total, ratio, pi_c, hypothesis,
                                                 rd if large else None),
                        family=family, tau=tau, k=k, n_hc=n_hc, n_total=n_total, ratio=ratio,
                        pi_c_target=pi_c, rd=rd, drift=drift, hypothesis=hypothesis,
                        extrapolated=_extrapolated(tau, k, n_hc, ratio, LARGE_N_HC if large else (30, 90)),
                        **common,
                    )
                )
    flagged = sum(s.extrapolated for s in scenarios)
    if flagged:
        logger.warning(f"{flagged} of {len(scenarios)} scenarios lie outside the studied factor levels")
    return scenarios


# Coarse MAP fit check
# ------------------------------------------------------------------------------


def coarse_fit_agreement(n_pools=100, seed=7, hyper=None, tolerance=0.002):
    """
    Largest gap in predictive mean between coarse and default MAP fits on
    random pools drawn from the exchangeable model.

    Raises:
        NumericalError: if the gap exceeds ``tolerance``.
    """
    hyper = hyper or HierarchicalHyperPrior()
    coarse, fine = MapFitSettings.coarse(), MapFitSettings.default()
    worst = 0.0
    for replicate in range(n_pools):
        cfg = ScenarioConfig("self-check", tau=0.3, k=8, n_hc=30, n_total=60, seed=seed)
        pool, _, _ = generate_replicate(cfg, ReplicateStreams(seed, 0, replicate))
        try:
            coarse_mean = fit_map(pool, hyper, settings=coarse).mixture.mean()
            gap = abs(coarse_mean - fit_map(pool, hyper, settings=fine).mixture.mean())
        except DomainError:
            continue
        worst = max(worst, gap)
    if worst > tolerance:
        raise NumericalError(
            f"Coarse MAP fits disagree with default fits by {worst:.4f} in predictive mean",
            diagnostics={"worst": worst, "pools": n_pools},
        )
    logger.info(f"Coarse MAP fit check passed on {n_pools} pools (max gap {worst:.5f})")
    return worst
