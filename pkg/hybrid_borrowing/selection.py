"""
Selection of historical control trials before borrowing.

Every rule returns a boolean mask over the pool in chronological order. The
optimal-power rules enumerate subsets and keep the one maximising the exact
conditional power of the pooled-prior design at planning values.
"""
import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Optional

from hybrid_borrowing.beta_mixture import BetaMixture, HistoricalPool
from hybrid_borrowing.design import MAX_ENUMERATED_TRIALS, boundary, conditional_power, prefer, subset_masks
from hybrid_borrowing.exact_stats import _as_count
from hybrid_borrowing.exceptions import DomainError, RuleInapplicableError

logger = logging.getLogger(__name__)

CLAMP_SHAPE = 0.5


class RuleKind(str, enum.Enum):
    FULL = "full"
    RANDOM = "random"
    DROP_BEST = "drop_best"
    THRESHOLD = "threshold"
    OPTIMAL_POWER = "optimal_power"
    MONOTONE_OPTIMAL_POWER = "monotone_optimal_power"
    SEPARATE = "separate"


@dataclass(frozen=True)
class PlanningAssumptions:
    pi_t_star: float
    pi_c_star: float
    n_t: int
    n_c: int
    gamma: float = 0.975

    def __post_init__(self):
        for name in ("pi_t_star", "pi_c_star"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise DomainError(f"{name} must lie in (0, 1), got {value}")
        object.__setattr__(self, "n_t", _as_count("n_t", self.n_t))
        object.__setattr__(self, "n_c", _as_count("n_c", self.n_c))
        if self.n_t < 1 or self.n_c < 1:
            raise DomainError(f"Planned arm sizes must be at least 1, got ({self.n_t}, {self.n_c})")
        if not 0.5 < self.gamma < 1:
            raise DomainError(f"gamma must lie in (0.5, 1), got {self.gamma}")


@dataclass(frozen=True)
class SelectionRule:
    kind: RuleKind
    threshold: Optional[float] = None
    planning: Optional[PlanningAssumptions] = None
    drop_index: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        if self.kind is RuleKind.THRESHOLD:
            if self.threshold is None or not 0 < self.threshold < 1:
                raise DomainError(f"Threshold rule needs a threshold in (0, 1), got {self.threshold}")
        elif self.threshold is not None:
            raise DomainError(f"Rule '{self.kind.value}' takes no threshold")
        if self.drop_index is not None and self.kind is not RuleKind.RANDOM:
            raise DomainError("Only the random rule accepts a pinned drop_index")

    @classmethod
    def from_name(cls, name, **params):
        """Parse ``full``, ``threshold:0.25`` and the other rule names."""
        kind, _, argument = name.partition(":")
        if argument:
            if kind != RuleKind.THRESHOLD.value:
                raise DomainError(f"Rule '{kind}' takes no argument, got '{name}'")
            params["threshold"] = float(argument)
        try:
            kind = RuleKind(kind)
        except ValueError:
            raise DomainError(f"Unknown selection rule: {name}") from None
        return cls(kind, **params)

    @property
    def is_optimal(self):
        return self.kind in (RuleKind.OPTIMAL_POWER, RuleKind.MONOTONE_OPTIMAL_POWER)

    @property
    def label(self):
        if self.kind is RuleKind.THRESHOLD:
            return f"threshold:{self.threshold:g}"
        return self.kind.value

    def with_planning(self, planning):
        return replace(self, planning=planning) if self.is_optimal else self


@dataclass(frozen=True)
class SelectionResult:
    mask: tuple
    selected: HistoricalPool
    rule: SelectionRule
    rng_draw: Optional[dict] = None
    diagnostics: dict = field(default_factory=dict)
    conditional_power: Optional[float] = None

    @property
    def n_selected(self):
        return self.selected.k


def _result(pool, mask, rule, **kwargs):
    mask = tuple(bool(m) for m in mask)
    return SelectionResult(mask=mask, selected=pool.subset(mask), rule=rule, **kwargs)


# Conditional power of the pooled-prior design
# ------------------------------------------------------------------------------


def pooled_prior(subset):
    """
    Analysis prior Beta(x, n - x) of a pooled subset, with shapes clamped to
    0.5 when the pool has no responders or no failures.

    Returns:
        (prior, clamped)
    """
    if subset.k == 0:
        return BetaMixture.vague(), False
    x, n = subset.responders, subset.size
    a, b = max(x, CLAMP_SHAPE), max(n - x, CLAMP_SHAPE)
    clamped = (a, b) != (x, n - x)
    if clamped:
        logger.warning(f"Degenerate pooled prior x={x}, n={n}; clamped to Beta({a}, {b})")
    return BetaMixture.single(a, b), clamped


@lru_cache(maxsize=4096)
def _pooled_power(x, n, plan):
    subset = HistoricalPool() if n == 0 else HistoricalPool.from_counts([(x, n)])
    prior, clamped = pooled_prior(subset)
    bnd = boundary(prior, plan.n_t, plan.n_c, plan.gamma)
    return conditional_power(bnd, plan.pi_t_star, plan.pi_c_star), clamped


def conditional_power_pooled(subset, plan):
    """
    Exact conditional power at the planning values of the design whose
    control prior pools the subset. The empty subset is the separate design.
    """
    return _pooled_power(subset.responders, subset.size, plan)[0]


def optimal_power_select(pool, plan, monotone=False, workers=1, rule=None):
    """
    Subset of ``pool`` maximising conditional_power_pooled. The monotone
    variant only considers chronological suffixes and the empty set.
    """
    if pool.k > MAX_ENUMERATED_TRIALS:
        raise DomainError(f"Subset enumeration is limited to {MAX_ENUMERATED_TRIALS} trials, got {pool.k}")
    if rule is None:
        kind = RuleKind.MONOTONE_OPTIMAL_POWER if monotone else RuleKind.OPTIMAL_POWER
        rule = SelectionRule(kind, planning=plan)

    if monotone:
        full = (1 << pool.k) - 1
        allowed = {0} | {full ^ ((1 << start) - 1) for start in range(pool.k)}
        candidates = [(bits, mask) for bits, mask in subset_masks(pool.k) if bits in allowed]
    else:
        candidates = list(subset_masks(pool.k))

    def evaluate(item):
        subset = pool.subset(item[1])
        return _pooled_power(subset.responders, subset.size, plan)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        values = list(executor.map(evaluate, candidates))

    best_value, best_bits, best_mask = None, None, None
    for (bits, mask), (value, _) in zip(candidates, values):
        if prefer(value, bits, best_value, best_bits):
            best_value, best_bits, best_mask = value, bits, mask
    clamped = [bits for (bits, _), (_, was_clamped) in zip(candidates, values) if was_clamped]
    diagnostics = {"evaluated": len(candidates), "clamped_subsets": clamped}
    return _result(pool, best_mask, rule, diagnostics=diagnostics, conditional_power=best_value)


# Rules
# ------------------------------------------------------------------------------


def _drop(pool, position):
    return tuple(i != position for i in range(pool.k))


def _threshold_mask(pool, threshold):
    limit = Fraction(repr(float(threshold)))
    return tuple(Fraction(t.responders, t.size) <= limit for t in pool)


def select(pool, rule, rng=None, workers=1):
    """
    Apply ``rule`` to ``pool``.

    Raises:
        RuleInapplicableError: random or drop-the-best selection on fewer than two trials.
    """
    kind = rule.kind
    if kind is RuleKind.FULL:
        return _result(pool, (True,) * pool.k, rule)
    if kind is RuleKind.SEPARATE:
        return _result(pool, (False,) * pool.k, rule)
    if kind is RuleKind.THRESHOLD:
        return _result(pool, _threshold_mask(pool, rule.threshold), rule)

    if kind in (RuleKind.RANDOM, RuleKind.DROP_BEST) and pool.k < 2:
        raise RuleInapplicableError(f"Rule '{kind.value}' needs at least two historical trials, got {pool.k}")

    if kind is RuleKind.RANDOM:
        if rule.drop_index is not None:
            if rule.drop_index not in pool.indices:
                raise RuleInapplicableError(f"Pinned drop_index {rule.drop_index} is not in the pool")
            position = pool.indices.index(rule.drop_index)
            draw = {"pinned": True, "position": position}
        else:
            if rng is None:
                raise DomainError("Random selection needs a random stream")
            position = int(rng.integers(pool.k))
            draw = {"pinned": False, "position": position}
        return _result(pool, _drop(pool, position), rule, rng_draw=draw)

    if kind is RuleKind.DROP_BEST:
        rates = [Fraction(t.responders, t.size) for t in pool]
        best = max(rates)
        # ties drop the most recent trial
        position = max(i for i, rate in enumerate(rates) if rate == best)
        return _result(pool, _drop(pool, position), rule)

    if rule.planning is None:
        raise DomainError(f"Rule '{kind.value}' needs planning assumptions")
    return optimal_power_select(
        pool, rule.planning, monotone=kind is RuleKind.MONOTONE_OPTIMAL_POWER, workers=workers, rule=rule
    )
