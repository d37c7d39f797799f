"""
Case-study tables and design-evaluation curves for a fixed historical pool.
"""
import logging
import math
from dataclasses import replace

import numpy as np
import pandas as pd

from hybrid_borrowing.analysis import RobustMap, analyze_bayes, analyze_ttp, build_control_prior
from hybrid_borrowing.beta_mixture import BetaMixture, MapFitSettings
from hybrid_borrowing.design import boundary, oc_from_boundary, probability_of_success, worst_case_selection
from hybrid_borrowing.exceptions import ConfigError, RuleInapplicableError
from hybrid_borrowing.selection import RuleKind, SelectionRule, select

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["design_id", "rule", "pi_c", "t1e", "power"]


def select_all(pool, rules, planning, seed, workers=1):
    """Apply every rule to the pool; rules that cannot apply are skipped with a warning."""
    rng = np.random.default_rng(seed)
    selections = []
    for rule in rules:
        try:
            selections.append(select(pool, rule.with_planning(planning), rng=rng, workers=workers))
        except RuleInapplicableError as exc:
            logger.warning(f"Skipping rule '{rule.label}': {exc}")
    return selections


def _design_control_prior(selected_prior, selection, full_prior, mode):
    if selection.n_selected or mode == "vague" or full_prior is None:
        return selected_prior
    return full_prior


# Case study
# ------------------------------------------------------------------------------


def check_full_ttp(pool, data, ttp_cfg, expected, places=3):
    """
    Reproduce the full-selection test-then-pool estimate as a consistency
    check on the dataset.

    Raises:
        ConfigError: if the rounded estimate differs from ``expected``.
    """
    estimate = analyze_ttp(pool, data, ttp_cfg).rd_estimate
    if round(estimate, places) != round(expected, places):
        raise ConfigError(
            f"Dataset check failed: full-selection TTP estimate {estimate:.{places}f}, expected {expected:.{places}f}"
        )
    return estimate


def case_study_tables(config, pool, workers=1, cache=None):
    """
    Bayesian and test-then-pool analyses of the prospective trial for every
    configured selection rule.

    Returns:
        (bayes_table, ttp_table) as DataFrames with one row per rule.
    """
    data = config.prospective.to_data()
    design = config.design()
    planning = config.planning.for_design(design)
    ttp_cfg = config.ttp.to_method()
    bayes_cfg = config.bayes.to_method(config.hyper.to_hyper())
    full_prior = build_control_prior(pool, bayes_cfg, cache) if pool.k else None

    bayes_rows, ttp_rows = [], []
    for selection in select_all(pool, [rule.to_rule() for rule in config.rules], planning, config.seed, workers):
        label = selection.rule.label
        selected = selection.selected

        ttp = analyze_ttp(selected, data, ttp_cfg)
        ttp_rows.append({
            "rule": label,
            "n_selected": selected.k,
            "selected": " ".join(str(i) for i in selected.indices),
            "pooled": ttp.pooled,
            "pretest_p_value": ttp.pretest_p_value,
            "estimate": ttp.rd_estimate,
            "ci_lower": ttp.interval[0],
            "ci_upper": ttp.interval[1],
            "p_value": ttp.p_value,
            "success": ttp.success,
        })

        bayes = analyze_bayes(selected, data, bayes_cfg, cache=cache)
        pos = math.nan
        if config.probability_of_success:
            prior_c = build_control_prior(selected, bayes_cfg, cache)
            pos = probability_of_success(
                prior_c, BetaMixture.vague(), design.n_t, design.n_c, design.gamma,
                design_prior_c=_design_control_prior(prior_c, selection, full_prior, config.pos_control_prior),
            )
        bayes_rows.append({
            "rule": label,
            "n_selected": selected.k,
            "selected": " ".join(str(i) for i in selected.indices),
            "pos": pos,
            "estimate": bayes.rd_estimate,
            "ci_lower": bayes.interval[0],
            "ci_upper": bayes.interval[1],
            "posterior_prob": bayes.posterior_prob,
            "success": bayes.success,
            "ess": bayes.ess,
        })
        logger.info(f"Case study {label}: {selected.k} trials, TTP {ttp.rd_estimate:.3f}, "
                    f"Bayes {bayes.rd_estimate:.3f} (P={bayes.posterior_prob:.3f})")
    return pd.DataFrame(bayes_rows), pd.DataFrame(ttp_rows)


# Design evaluation
# ------------------------------------------------------------------------------


def _worst_case_method(method, fit):
    if isinstance(method, RobustMap) and fit == "coarse":
        return replace(method, fit_settings=MapFitSettings.coarse())
    return method


def design_evaluation(config, pool, workers=1, cache=None):
    """
    Conditional type-I error and power curves, probability of success per
    rule and design size, and the worst-case selection envelope.

    Returns:
        (curves, summary) where curves is a DataFrame and summary a dict.
    """
    method = config.method.to_method(config.hyper.to_hyper())
    grid = config.pi_grid.values()
    rd_alt = config.alternative_rd()
    rules = [rule.to_rule() for rule in config.rules]
    if pool.k == 0:
        logger.warning("Historical pool is empty; only the separate analysis is evaluated")
        rules = [SelectionRule(RuleKind.SEPARATE)]
    full_prior = build_control_prior(pool, method, cache) if pool.k else None

    rows, summary = [], {}
    for design in config.designs():
        design_id = f"{config.design_id}-n{design.n_total}"
        planning = config.planning.for_design(design)
        entry = {"n_t": design.n_t, "n_c": design.n_c, "gamma": design.gamma, "rules": {}}
        for selection in select_all(pool, rules, planning, config.seed, workers):
            prior = build_control_prior(selection.selected, method, cache)
            bnd = boundary(prior, design.n_t, design.n_c, design.gamma)
            curve = oc_from_boundary(bnd, grid, rd_alt)
            for point in curve.as_rows():
                rows.append(dict(point, design_id=design_id, rule=selection.rule.label))
            pos = probability_of_success(
                prior, BetaMixture.vague(), design.n_t, design.n_c, design.gamma,
                design_prior_c=_design_control_prior(prior, selection, full_prior, config.pos_control_prior),
                bnd=bnd,
            )
            entry["rules"][selection.rule.label] = {
                "pos": pos,
                "n_selected": selection.n_selected,
                "selected": list(selection.selected.indices),
            }

        wanted = config.worst_case_n_totals is None or design.n_total in config.worst_case_n_totals
        if config.worst_case and pool.k and wanted:
            worst = worst_case_selection(
                pool, design, grid, _worst_case_method(method, config.worst_case_fit), workers=workers, cache=cache
            )
            for pi_c, value in zip(worst.grid, worst.envelope):
                rows.append({"design_id": design_id, "rule": "worst_case", "pi_c": pi_c, "t1e": value,
                             "power": math.nan})
            entry["worst_case"] = {
                "pi_c": list(worst.grid),
                "selected": [[t.index for t, keep in zip(pool, mask) if keep] for mask in worst.masks],
            }
        summary[design_id] = entry
        logger.info(f"Design {design_id}: n_t={design.n_t}, n_c={design.n_c} evaluated")
    return pd.DataFrame(rows, columns=CURVE_COLUMNS), summary
