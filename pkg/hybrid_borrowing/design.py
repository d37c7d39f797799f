"""
Exact design-stage operating characteristics for a fixed historical pool.

A Bayesian design with control prior ``prior_c`` and a Beta(1, 1) treatment
prior declares success at (y_t, y_c) when Pr(pi_t > pi_c | data) > gamma.
The decision boundary d1(y_c) is the largest treatment count that fails, so
conditional power is a double binomial sum over the boundary.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special, stats

from hybrid_borrowing.analysis import build_control_prior
from hybrid_borrowing.beta_mixture import BetaMixture, posterior_update, superiority_probability
from hybrid_borrowing.exact_stats import _as_count
from hybrid_borrowing.exceptions import DomainError, NumericalError

logger = logging.getLogger(__name__)

POS_START_NODES = 128
POS_MAX_NODES = 1024
POS_TOL = 1e-4
TIE_TOL = 1e-12
MAX_ENUMERATED_TRIALS = 20


@dataclass(frozen=True)
class DecisionBoundary:
    d1: tuple
    n_t: int
    n_c: int
    gamma: float

    def __post_init__(self):
        d1 = tuple(int(d) for d in self.d1)
        if len(d1) != self.n_c + 1:
            raise DomainError(f"Boundary needs {self.n_c + 1} entries, got {len(d1)}")
        if any(not -1 <= d <= self.n_t for d in d1):
            raise DomainError(f"Boundary entries must lie in [-1, {self.n_t}]")
        object.__setattr__(self, "d1", d1)

    def succeeds(self, y_t, y_c):
        return y_t > self.d1[y_c]


@dataclass(frozen=True)
class OCCurve:
    grid: tuple
    t1e: tuple
    power: tuple

    def as_rows(self):
        return [{"pi_c": p, "t1e": a, "power": b} for p, a, b in zip(self.grid, self.t1e, self.power)]


@dataclass(frozen=True)
class DesignSpec:
    n_t: int
    n_c: int
    gamma: float = 0.975

    def __post_init__(self):
        object.__setattr__(self, "n_t", _as_count("n_t", self.n_t))
        object.__setattr__(self, "n_c", _as_count("n_c", self.n_c))
        if self.n_t < 1 or self.n_c < 1:
            raise DomainError(f"Arm sizes must be at least 1, got n_t={self.n_t}, n_c={self.n_c}")
        if not 0.5 < self.gamma < 1:
            raise DomainError(f"gamma must lie in (0.5, 1), got {self.gamma}")

    @classmethod
    def from_total(cls, n_total, ratio, gamma=0.975):
        n_t, n_c = design_for_total(n_total, ratio)
        return cls(n_t, n_c, gamma)

    @property
    def n_total(self):
        return self.n_t + self.n_c


def design_for_total(n_total, ratio):
    """Split a total sample size at ratio:1, rounding the control arm half-up."""
    n_total = _as_count("n_total", n_total)
    if ratio <= 0:
        raise DomainError(f"ratio must be positive, got {ratio}")
    n_c = int(math.floor(n_total / (ratio + 1.0) + 0.5))
    n_t = n_total - n_c
    if n_c < 1 or n_t < 1:
        raise DomainError(f"n_total={n_total} at ratio {ratio} leaves an empty arm")
    return n_t, n_c


# Boundary and conditional power
# ------------------------------------------------------------------------------


def boundary(prior_c, n_t, n_c, gamma, prior_t=None):
    """
    Largest failing treatment count for every control count.

    Two pointers walk the boundary across y_c: the candidate moves down while
    it succeeds and up while the next count still fails. Only monotonicity of
    the superiority probability in y_t is relied on.
    """
    prior_t = prior_t or BetaMixture.vague()
    posteriors_c = [posterior_update(prior_c, y_c, n_c) for y_c in range(n_c + 1)]
    posteriors_t = {}

    def prob(y_t, y_c):
        if y_t not in posteriors_t:
            posteriors_t[y_t] = posterior_update(prior_t, y_t, n_t)
        return superiority_probability(posteriors_t[y_t], posteriors_c[y_c])

    d1 = []
    d = -1
    for y_c in range(n_c + 1):
        while d >= 0 and prob(d, y_c) > gamma:
            d -= 1
        while d < n_t and prob(d + 1, y_c) <= gamma:
            d += 1
        d1.append(d)
    return DecisionBoundary(tuple(d1), n_t, n_c, gamma)


def conditional_power(bnd, pi_t, pi_c):
    """Pr(success) when the arms respond with probabilities pi_t and pi_c."""
    y_c = np.arange(bnd.n_c + 1)
    weights = stats.binom.pmf(y_c, bnd.n_c, pi_c)
    success = stats.binom.sf(np.array(bnd.d1), bnd.n_t, pi_t)
    return float(min(1.0, max(0.0, weights @ success)))


def _check_grid(pi_grid, rd_alt):
    grid = np.asarray(pi_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("pi_grid must be a non-empty sequence")
    if np.any(grid <= 0) or np.any(grid >= 1):
        raise DomainError("pi_grid values must lie in (0, 1)")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("pi_grid must be strictly increasing")
    if np.any(grid + rd_alt >= 1) or np.any(grid + rd_alt <= 0):
        raise DomainError(f"pi + rd_alt must stay inside (0, 1) on the grid, rd_alt={rd_alt}")
    return grid


def default_pi_grid(lo=0.01, hi=0.60, step=0.005):
    count = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(count + 1), 10)


def oc_from_boundary(bnd, pi_grid, rd_alt):
    grid = _check_grid(pi_grid, rd_alt)
    t1e = tuple(conditional_power(bnd, p, p) for p in grid)
    power = tuple(conditional_power(bnd, p + rd_alt, p) for p in grid)
    return OCCurve(tuple(grid.tolist()), t1e, power)


def conditional_oc(prior_c, n_t, n_c, gamma, pi_grid, rd_alt, prior_t=None):
    """Conditional type-I error at (pi, pi) and power at (pi + rd_alt, pi) across the grid."""
    _check_grid(pi_grid, rd_alt)
    return oc_from_boundary(boundary(prior_c, n_t, n_c, gamma, prior_t), pi_grid, rd_alt)


# Probability of success
# ------------------------------------------------------------------------------


def _quantile_nodes(prior, n_nodes):
    # Gauss-Legendre on the quantile scale of every component
    x, w = leggauss(n_nodes)
    u = 0.5 * (x + 1.0)
    pi = special.betaincinv(prior.a[:, None], prior.b[:, None], u[None, :])
    weights = 0.5 * prior.w[:, None] * w[None, :]
    return pi.ravel(), weights.ravel()


def _pos_tensor(bnd, design_prior_t, design_prior_c, n_nodes):
    pi_t, w_t = _quantile_nodes(design_prior_t, n_nodes)
    pi_c, w_c = _quantile_nodes(design_prior_c, n_nodes)
    y_c = np.arange(bnd.n_c + 1)
    # CP(pi_t, pi_c) = sum_yc pmf(yc; pi_c) sf(d1(yc); pi_t), so the product rule factorises
    control = w_c @ stats.binom.pmf(y_c[None, :], bnd.n_c, pi_c[:, None])
    treatment = w_t @ stats.binom.sf(np.array(bnd.d1)[None, :], bnd.n_t, pi_t[:, None])
    return float(control @ treatment)


def probability_of_success(prior_c, design_prior_t, n_t, n_c, gamma, design_prior_c=None, bnd=None):
    """
    Expected conditional power under design priors for both arms.

    The analysis uses ``prior_c`` for the control arm; the control design
    prior defaults to the same mixture. Nodes double from 128 until two
    successive values agree within 1e-4.

    Raises:
        NumericalError: if 1024 nodes per component are not enough.
    """
    design_prior_c = design_prior_c or prior_c
    bnd = bnd or boundary(prior_c, n_t, n_c, gamma)
    n_nodes = POS_START_NODES
    previous = _pos_tensor(bnd, design_prior_t, design_prior_c, n_nodes)
    while n_nodes < POS_MAX_NODES:
        n_nodes *= 2
        current = _pos_tensor(bnd, design_prior_t, design_prior_c, n_nodes)
        if abs(current - previous) < POS_TOL:
            return min(1.0, max(0.0, current))
        previous = current
    raise NumericalError(
        f"Probability of success did not settle within {POS_MAX_NODES} nodes",
        diagnostics={"last": previous, "n_t": n_t, "n_c": n_c},
    )


# Worst-case selection
# ------------------------------------------------------------------------------


def subset_masks(k):
    """All 2^k masks; bit i of the counter selects the i-th trial."""
    for bits in range(1 << k):
        yield bits, tuple(bool(bits >> i & 1) for i in range(k))


def prefer(value, bits, best_value, best_bits):
    """Tie rule shared by subset optimisers: more trials, then the smaller mask."""
    if best_bits is None or value > best_value + TIE_TOL:
        return True
    if abs(value - best_value) <= TIE_TOL:
        more = bin(bits).count("1") - bin(best_bits).count("1")
        return more > 0 or (more == 0 and bits < best_bits)
    return False


@dataclass(frozen=True)
class WorstCase:
    grid: tuple
    masks: tuple
    envelope: tuple
    curves: dict


def worst_case_selection(pool, design, pi_grid, method_cfg, workers=1, cache=None):
    """
    For every grid point, the subset whose analysis prior maximises the
    conditional type-I error, with the resulting envelope curve.
    """
    if pool.k > MAX_ENUMERATED_TRIALS:
        raise DomainError(f"Subset enumeration is limited to {MAX_ENUMERATED_TRIALS} trials, got {pool.k}")
    grid = _check_grid(pi_grid, 0.0)
    enumerated = list(subset_masks(pool.k))

    def t1e_curve(item):
        bits, mask = item
        prior = build_control_prior(pool.subset(mask), method_cfg, cache)
        bnd = boundary(prior, design.n_t, design.n_c, design.gamma)
        return np.array([conditional_power(bnd, p, p) for p in grid])

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        curves = list(executor.map(t1e_curve, enumerated))

    masks, envelope = [], []
    for j in range(grid.size):
        best_value, best_bits, best_mask = None, None, None
        for (bits, mask), curve in zip(enumerated, curves):
            if prefer(curve[j], bits, best_value, best_bits):
                best_value, best_bits, best_mask = curve[j], bits, mask
        masks.append(best_mask)
        envelope.append(float(best_value))
    logger.info(f"Worst-case selection over {len(enumerated)} subsets and {grid.size} grid points")
    return WorstCase(
        grid=tuple(grid.tolist()),
        masks=tuple(masks),
        envelope=tuple(envelope),
        curves={mask: tuple(curve.tolist()) for (_, mask), curve in zip(enumerated, curves)},
    )
