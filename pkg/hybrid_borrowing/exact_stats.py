"""
Exact small-sample kernels for two-arm binary data.

Fisher tests are enumerated with integer arithmetic so that tail sums are
correctly rounded. Beta superiority probabilities use the finite Beta-function
series when the first shape is an integer and adaptive Gauss-Legendre
quadrature otherwise.
"""
import logging
import math
import operator
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special, stats

from hybrid_borrowing.exceptions import DomainError, NumericalError

logger = logging.getLogger(__name__)

SERIES_MAX_SHAPE = 10_000
QUADRATURE_NODES = 64
QUADRATURE_TOL = 1e-10
MIN_PANEL_WIDTH = 1e-12
MAX_PANELS = 4096

_GL_NODES, _GL_WEIGHTS = leggauss(QUADRATURE_NODES)


def _as_count(name, value):
    try:
        return operator.index(value)
    except TypeError:
        raise DomainError(f"{name} must be an integer count, got {value!r}") from None


def _as_shape(name, value):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be finite and positive, got {value!r}")
    return value


@dataclass(frozen=True)
class Counts2x2:
    """Responders and sizes of two arms; arm 1 is the treatment arm."""

    y_t: int
    n_t: int
    y_c: int
    n_c: int

    def __post_init__(self):
        for name in ("y_t", "n_t", "y_c", "n_c"):
            object.__setattr__(self, name, _as_count(name, getattr(self, name)))
        if self.n_t < 1 or self.n_c < 1:
            raise DomainError(f"Arm sizes must be at least 1, got n_t={self.n_t}, n_c={self.n_c}")
        if not 0 <= self.y_t <= self.n_t:
            raise DomainError(f"y_t must lie in [0, {self.n_t}], got {self.y_t}")
        if not 0 <= self.y_c <= self.n_c:
            raise DomainError(f"y_c must lie in [0, {self.n_c}], got {self.y_c}")

    @property
    def responders(self):
        return self.y_t + self.y_c

    @property
    def size(self):
        return self.n_t + self.n_c

    @property
    def rate_t(self):
        return self.y_t / self.n_t

    @property
    def rate_c(self):
        return self.y_c / self.n_c


@dataclass(frozen=True)
class BetaParams:
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _as_shape("a", self.a))
        object.__setattr__(self, "b", _as_shape("b", self.b))

    def mean(self):
        return self.a / (self.a + self.b)

    def variance(self):
        total = self.a + self.b
        return self.a * self.b / (total * total * (total + 1.0))

    def __str__(self):
        return f"Beta({self.a:.4g}, {self.b:.4g})"


def log_beta_fn(a, b):
    """Natural log of the Beta function B(a, b).

    Raises:
        DomainError: if either argument is non-finite or not positive.
    """
    return float(special.betaln(_as_shape("a", a), _as_shape("b", b)))


def _hypergeometric_weights(tbl):
    # integer weights C(n_t, x) C(n_c, m - x) over the support of x
    m = tbl.responders
    lo = max(0, m - tbl.n_c)
    hi = min(tbl.n_t, m)
    weights = [math.comb(tbl.n_t, x) * math.comb(tbl.n_c, m - x) for x in range(lo, hi + 1)]
    return lo, weights, math.comb(tbl.size, m)


def hypergeometric_table(tbl):
    """Support and probabilities of the arm-1 responder count given both margins."""
    lo, weights, total = _hypergeometric_weights(tbl)
    support = np.arange(lo, lo + len(weights))
    probs = np.array([w / total for w in weights])
    return support, probs


def fisher_exact_one_sided(tbl):
    """P(X >= y_t) under the hypergeometric law with the table margins fixed."""
    lo, weights, total = _hypergeometric_weights(tbl)
    return sum(weights[tbl.y_t - lo:]) / total


def fisher_exact_two_sided(tbl):
    """
    Two-sided Fisher p-value by the minimum-likelihood rule: the total
    probability of every table no more likely than the observed one. Ties are
    compared exactly on the integer weights.
    """
    lo, weights, total = _hypergeometric_weights(tbl)
    observed = weights[tbl.y_t - lo]
    return sum(w for w in weights if w <= observed) / total


def prop_diff_ci_cc(tbl, level=0.95):
    """
    Risk difference with a Wald interval using the Yates continuity
    correction, clamped to [-1, 1].

    Returns:
        (estimate, lower, upper)
    """
    if not 0 < level < 1:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    p_t, p_c = tbl.rate_t, tbl.rate_c
    delta = p_t - p_c
    inv_n = 1.0 / tbl.n_t + 1.0 / tbl.n_c
    yates = min(0.5, abs(delta) / inv_n)
    z = stats.norm.ppf(0.5 + level / 2.0)
    width = z * math.sqrt(p_t * (1 - p_t) / tbl.n_t + p_c * (1 - p_c) / tbl.n_c) + yates * inv_n
    return delta, max(delta - width, -1.0), min(delta + width, 1.0)


def _gl_panel(func, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return half * float(np.dot(_GL_WEIGHTS, func(mid + half * _GL_NODES)))


def adaptive_gauss_legendre(func, lo, hi, tol=QUADRATURE_TOL, max_panels=MAX_PANELS):
    """
    Integrate a vectorised ``func`` over [lo, hi] by bisecting 64-node
    Gauss-Legendre panels until each panel meets its share of ``tol``.

    Returns:
        (value, diagnostics)

    Raises:
        NumericalError: if more than ``max_panels`` panels are needed.
    """
    span = hi - lo
    stack = [(lo, hi, _gl_panel(func, lo, hi))]
    total = 0.0
    accepted = 0
    evaluations = 1
    while stack:
        a, b, whole = stack.pop()
        mid = 0.5 * (a + b)
        left = _gl_panel(func, a, mid)
        right = _gl_panel(func, mid, b)
        evaluations += 2
        refined = left + right
        if abs(refined - whole) <= tol * (b - a) / span or (b - a) <= MIN_PANEL_WIDTH:
            total += refined
            accepted += 1
        else:
            stack.append((mid, b, right))
            stack.append((a, mid, left))
        if accepted + len(stack) > max_panels:
            raise NumericalError(
                f"Adaptive quadrature exceeded {max_panels} panels on [{lo}, {hi}]",
                diagnostics={"panels": accepted + len(stack), "evaluations": evaluations, "tol": tol},
            )
    return total, {"panels": accepted, "evaluations": evaluations}


def _superiority_series(x, y):
    i = np.arange(int(x.a), dtype=float)
    log_terms = (
        special.betaln(y.a + i, x.b + y.b)
        - np.log(x.b + i)
        - special.betaln(1.0 + i, x.b)
        - special.betaln(y.a, y.b)
    )
    return float(np.exp(special.logsumexp(log_terms)))


def _superiority_quadrature(x, y):
    def integrand(u):
        return special.betainc(y.a, y.b, special.betaincinv(x.a, x.b, u))

    value, diagnostics = adaptive_gauss_legendre(integrand, 0.0, 1.0)
    logger.debug(f"Quadrature for P[{x} > {y}] used {diagnostics['panels']} panels")
    return value


def beta_superiority(x, y):
    """
    Pr[X > Y] for independent X ~ Beta(x.a, x.b) and Y ~ Beta(y.a, y.b).

    The closed-form series is used when x.a is an integer no larger than
    SERIES_MAX_SHAPE; otherwise the CDF form E[F_Y(X)] is integrated over the
    quantile scale of X.

    Raises:
        NumericalError: if the quadrature path fails to converge.
    """
    if float(x.a).is_integer() and x.a <= SERIES_MAX_SHAPE:
        value = _superiority_series(x, y)
    else:
        value = _superiority_quadrature(x, y)
    return min(1.0, max(0.0, value))


def superiority_by_quadrature(x, y):
    """Pr[X > Y] by quadrature regardless of the shape of X."""
    return min(1.0, max(0.0, _superiority_quadrature(x, y)))
