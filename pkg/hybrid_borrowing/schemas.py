"""
pydantic models for run configuration files.

Every model forbids unknown keys so a misspelt factor fails validation
instead of silently falling back to a default.
"""
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from hybrid_borrowing.analysis import ProspectiveData, RobustMap, method_from_name
from hybrid_borrowing.beta_mixture import HierarchicalHyperPrior, MapFitSettings
from hybrid_borrowing.design import DesignSpec, default_pi_grid
from hybrid_borrowing.selection import PlanningAssumptions, SelectionRule
from hybrid_borrowing.simulation import (
    COUPLINGS,
    K_LEVELS,
    LARGE_N_HC,
    LARGE_RDS,
    RATIO_LEVELS,
    SHIFT_LEVELS,
    TAU_LEVELS,
    TIME_TREND_DRIFT,
    GridSpec,
    ScenarioConfig,
    scenario_grid,
)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class HyperModel(StrictModel):
    mu_mean: float = 0.0
    mu_sd: float = Field(2.0, gt=0)
    tau_scale: float = Field(1.0, gt=0)

    def to_hyper(self):
        return HierarchicalHyperPrior(self.mu_mean, self.mu_sd, self.tau_scale)


class RuleModel(StrictModel):
    name: str
    drop_index: Optional[int] = None

    def to_rule(self):
        params = {"drop_index": self.drop_index} if self.drop_index is not None else {}
        return SelectionRule.from_name(self.name, **params)


def _rule_entries(value):
    if not isinstance(value, list):
        return value
    return [{"name": item} if isinstance(item, str) else item for item in value]


def _first_set(*candidates):
    return next(c for c in candidates if c is not None)


class MethodModel(StrictModel):
    name: Literal["ttp", "freq_separate", "bayes_separate", "robust_map"]
    alpha_pre: Optional[float] = Field(None, gt=0, lt=1)
    alpha: Optional[float] = Field(None, gt=0, lt=1)
    gamma: Optional[float] = Field(None, gt=0.5, lt=1)
    w_robust: Optional[float] = Field(None, gt=0, lt=1)
    fit: Literal["default", "coarse"] = "default"

    def to_method(self, hyper=None):
        params = {
            key: getattr(self, key)
            for key in ("alpha_pre", "alpha", "gamma", "w_robust")
            if getattr(self, key) is not None
        }
        if self.name == RobustMap.name:
            params["hyper"] = hyper or HierarchicalHyperPrior()
            params["fit_settings"] = MapFitSettings.coarse() if self.fit == "coarse" else MapFitSettings.default()
        return method_from_name(self.name, **params)


# Simulation
# ------------------------------------------------------------------------------


class ScenarioModel(StrictModel):
    scenario_id: str
    family: Literal["exchangeable", "shift", "time_trend", "large_prospective"] = "exchangeable"
    tau: float = Field(ge=0)
    k: int = Field(ge=1)
    n_hc: int = Field(ge=1)
    n_total: int = Field(ge=2)
    ratio: int = Field(1, ge=1)
    pi_c_target: float = Field(0.20, gt=0, lt=1)
    rd: float = 0.20
    effect_scale: Literal["logit", "probability"] = "logit"
    drift: float = 0.0
    hypothesis: Literal["null", "alt"] = "alt"
    replicates: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = Field(None, ge=0)
    stream_key: int = Field(0, ge=0)


class GridModel(StrictModel):
    families: List[Literal["exchangeable", "shift", "time_trend", "large_prospective"]] = ["exchangeable"]
    taus: List[float] = list(TAU_LEVELS)
    ks: List[int] = list(K_LEVELS)
    couplings: List[Tuple[int, int]] = [tuple(c) for c in COUPLINGS]
    ratios: List[int] = list(RATIO_LEVELS)
    shift_pi_c: List[float] = list(SHIFT_LEVELS)
    drift: float = TIME_TREND_DRIFT
    large_rds: List[float] = list(LARGE_RDS)
    large_n_hc: List[int] = list(LARGE_N_HC)
    rd: float = 0.20
    effect_scale: Literal["logit", "probability"] = "logit"
    hypotheses: List[Literal["null", "alt"]] = ["null", "alt"]
    stream_key: int = Field(0, ge=0)

    def to_spec(self, replicates, seed):
        return GridSpec(
            families=tuple(self.families), taus=tuple(self.taus), ks=tuple(self.ks),
            couplings=tuple(self.couplings), ratios=tuple(self.ratios), shift_pi_c=tuple(self.shift_pi_c),
            drift=self.drift, large_rds=tuple(self.large_rds), large_n_hc=tuple(self.large_n_hc),
            rd=self.rd, effect_scale=self.effect_scale, hypotheses=tuple(self.hypotheses),
            replicates=replicates, seed=seed, stream_key=self.stream_key,
        )


class SimulationConfig(StrictModel):
    seed: int = Field(ge=0)
    replicates: int = Field(ge=1)
    rules: List[RuleModel]
    methods: List[MethodModel]
    hyper: HyperModel = HyperModel()
    scenarios: List[ScenarioModel] = []
    grid: Optional[GridModel] = None
    compute_ess: bool = True

    @field_validator("rules", mode="before")
    @classmethod
    def rules_as_models(cls, value):
        return _rule_entries(value)

    @model_validator(mode="after")
    def needs_scenarios(self):
        if not self.scenarios and self.grid is None:
            raise ValueError("either 'scenarios' or 'grid' must be given")
        return self

    def selection_rules(self):
        return [rule.to_rule() for rule in self.rules]

    def analysis_methods(self):
        hyper = self.hyper.to_hyper()
        return [method.to_method(hyper) for method in self.methods]

    def to_scenarios(self, seed=None, replicates=None):
        scenarios = []
        for item in self.scenarios:
            values = item.model_dump()
            values["seed"] = _first_set(seed, values["seed"], self.seed)
            values["replicates"] = _first_set(replicates, values["replicates"], self.replicates)
            scenarios.append(ScenarioConfig(**values))
        if self.grid is not None:
            spec = self.grid.to_spec(_first_set(replicates, self.replicates), _first_set(seed, self.seed))
            scenarios.extend(scenario_grid(spec))
        return scenarios


# Design evaluation and case study
# ------------------------------------------------------------------------------


class PlanningModel(StrictModel):
    pi_t_star: float = Field(gt=0, lt=1)
    pi_c_star: float = Field(gt=0, lt=1)
    gamma: float = Field(0.975, gt=0.5, lt=1)

    def for_design(self, design):
        return PlanningAssumptions(self.pi_t_star, self.pi_c_star, design.n_t, design.n_c, self.gamma)


class PiGridModel(StrictModel):
    lo: float = Field(0.01, gt=0, lt=1)
    hi: float = Field(0.60, gt=0, lt=1)
    step: float = Field(0.005, gt=0)

    def values(self):
        return default_pi_grid(self.lo, self.hi, self.step)


class DesignEvalConfig(StrictModel):
    design_id: str = "case-study"
    n_totals: List[int] = [30, 60, 300, 3000]
    ratio: float = Field(4.0, gt=0)
    gamma: float = Field(0.975, gt=0.5, lt=1)
    planning: PlanningModel = PlanningModel(pi_t_star=0.60, pi_c_star=0.25)
    rules: List[RuleModel]
    method: MethodModel = MethodModel(name="robust_map", w_robust=0.2)
    hyper: HyperModel = HyperModel()
    pi_grid: PiGridModel = PiGridModel()
    rd_alt: Optional[float] = None
    worst_case: bool = True
    worst_case_n_totals: Optional[List[int]] = None
    worst_case_fit: Literal["default", "coarse"] = "coarse"
    pos_control_prior: Literal["map", "vague"] = "map"
    seed: int = Field(0, ge=0)

    @field_validator("rules", mode="before")
    @classmethod
    def rules_as_models(cls, value):
        return _rule_entries(value)

    def designs(self):
        return [DesignSpec.from_total(n_total, self.ratio, self.gamma) for n_total in self.n_totals]

    def alternative_rd(self):
        return self.planning.pi_t_star - self.planning.pi_c_star if self.rd_alt is None else self.rd_alt


class ProspectiveModel(StrictModel):
    y_t: int = Field(ge=0)
    n_t: int = Field(ge=1)
    y_c: int = Field(ge=0)
    n_c: int = Field(ge=1)

    def to_data(self):
        return ProspectiveData(self.y_t, self.n_t, self.y_c, self.n_c)


class CaseStudyConfig(StrictModel):
    dataset: str = "ankylosing_spondylitis.csv"
    sha256: Optional[str] = None
    prospective: ProspectiveModel
    rules: List[RuleModel]
    ttp: MethodModel = MethodModel(name="ttp")
    bayes: MethodModel = MethodModel(name="robust_map", w_robust=0.2)
    hyper: HyperModel = HyperModel()
    planning: PlanningModel = PlanningModel(pi_t_star=0.60, pi_c_star=0.25)
    probability_of_success: bool = True
    pos_control_prior: Literal["map", "vague"] = "map"
    expected_full_ttp_estimate: Optional[float] = 0.337
    seed: int = Field(0, ge=0)

    @field_validator("rules", mode="before")
    @classmethod
    def rules_as_models(cls, value):
        return _rule_entries(value)

    @model_validator(mode="after")
    def method_kinds(self):
        if self.ttp.name != "ttp":
            raise ValueError("'ttp' must configure the ttp method")
        if self.bayes.name != "robust_map":
            raise ValueError("'bayes' must configure the robust_map method")
        return self

    def design(self):
        return DesignSpec(self.prospective.n_t, self.prospective.n_c, self.planning.gamma)
