"""
Historical pools, Beta mixtures and meta-analytic-predictive (MAP) priors.

The MAP prior is the predictive distribution of a new trial's control rate
under a normal random-effects model on the logit scale. It is evaluated
deterministically: per-trial marginal likelihoods by mode-centred
Gauss-Hermite quadrature, the (mu, tau) posterior on a rectangular grid, and
the predictive approximated by a Beta mixture fitted with EM.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import integrate, optimize, special, stats

from hybrid_borrowing.exact_stats import BetaParams, _as_count, beta_superiority
from hybrid_borrowing.exceptions import DomainError, FittingError, NumericalError

logger = logging.getLogger(__name__)

GH_NODES = 41
_GH_X, _GH_W = hermgauss(GH_NODES)
_GH_LOG_W = np.log(_GH_W)
_NEWTON_STEPS = 30
_ZOOM_LOG_DROP = 20.0
_SIGNIFICANT_CELL = 1e-14

ELIR_EPS = 1e-8
ELIR_TOL = 1e-6
MIN_SHAPE = 1e-3


@dataclass(frozen=True)
class HistoricalTrial:
    index: int
    responders: int
    size: int

    def __post_init__(self):
        for name in ("index", "responders", "size"):
            object.__setattr__(self, name, _as_count(name, getattr(self, name)))
        if self.size < 1:
            raise DomainError(f"Trial {self.index}: size must be at least 1, got {self.size}")
        if not 0 <= self.responders <= self.size:
            raise DomainError(f"Trial {self.index}: responders must lie in [0, {self.size}], got {self.responders}")

    @property
    def rate(self):
        return self.responders / self.size


@dataclass(frozen=True)
class HistoricalPool:
    """Historical control arms in chronological order."""

    trials: tuple = ()

    def __post_init__(self):
        trials = tuple(self.trials)
        for earlier, later in zip(trials, trials[1:]):
            if later.index <= earlier.index:
                raise DomainError(
                    f"Trial indices must be strictly increasing, got {earlier.index} then {later.index}"
                )
        object.__setattr__(self, "trials", trials)

    @classmethod
    def from_counts(cls, counts):
        """Build a pool from (responders, size) pairs, indexed 1..k in order."""
        return cls(tuple(HistoricalTrial(i, r, n) for i, (r, n) in enumerate(counts, start=1)))

    def __len__(self):
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    @property
    def k(self):
        return len(self.trials)

    @property
    def responders(self):
        return sum(t.responders for t in self.trials)

    @property
    def size(self):
        return sum(t.size for t in self.trials)

    @property
    def rates(self):
        return np.array([t.rate for t in self.trials])

    @property
    def indices(self):
        return tuple(t.index for t in self.trials)

    def subset(self, mask):
        if len(mask) != self.k:
            raise DomainError(f"Mask length {len(mask)} does not match pool size {self.k}")
        return HistoricalPool(tuple(t for t, keep in zip(self.trials, mask) if keep))

    def counts_key(self):
        """Hashable summary of the data; the MAP fit depends on nothing else."""
        return tuple((t.responders, t.size) for t in self.trials)


@dataclass(frozen=True)
class BetaMixture:
    weights: tuple
    components: tuple

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        components = tuple(self.components)
        if not components:
            raise DomainError("A Beta mixture needs at least one component")
        if len(weights) != len(components):
            raise DomainError(f"Got {len(weights)} weights for {len(components)} components")
        if any(w < 0 or not math.isfinite(w) for w in weights):
            raise DomainError(f"Mixture weights must be finite and non-negative, got {weights}")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise DomainError(f"Mixture weights must sum to 1, got {math.fsum(weights)!r}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", components)

    @classmethod
    def from_arrays(cls, weights, a, b):
        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
        components = tuple(BetaParams(float(ai), float(bi)) for ai, bi in zip(np.atleast_1d(a), np.atleast_1d(b)))
        return cls(tuple(weights.tolist()), components)

    @classmethod
    def single(cls, a, b):
        return cls((1.0,), (BetaParams(a, b),))

    @classmethod
    def vague(cls):
        return cls.single(1.0, 1.0)

    @property
    def n_components(self):
        return len(self.components)

    @property
    def a(self):
        return np.array([c.a for c in self.components])

    @property
    def b(self):
        return np.array([c.b for c in self.components])

    @property
    def w(self):
        return np.array(self.weights)

    def mean(self):
        return float(self.w @ (self.a / (self.a + self.b)))

    def variance(self):
        a, b = self.a, self.b
        second = self.w @ (a * (a + 1.0) / ((a + b) * (a + b + 1.0)))
        return float(second - self.mean() ** 2)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            log_w = np.log(self.w)
        terms = log_w + stats.beta.logpdf(x[..., None], self.a, self.b)
        return special.logsumexp(terms, axis=-1)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return special.betainc(self.a, self.b, x[..., None]) @ self.w

    def ppf(self, q):
        """Quantile function by root finding on the mixture CDF."""
        def solve(level):
            if level <= 0.0:
                return 0.0
            if level >= 1.0:
                return 1.0
            return optimize.brentq(lambda x: float(self.cdf(x)) - level, 0.0, 1.0, xtol=1e-14)

        q = np.asarray(q, dtype=float)
        return np.vectorize(solve)(q) if q.ndim else solve(float(q))

    def describe(self):
        return "\n".join(f"  w={w:.4f}  {c}" for w, c in zip(self.weights, self.components))

    def __str__(self):
        return " + ".join(f"{w:.3f}*{c}" for w, c in zip(self.weights, self.components))


@dataclass(frozen=True)
class HierarchicalHyperPrior:
    """Normal prior on the logit-scale mean and Half-Normal prior on tau."""

    mu_mean: float = 0.0
    mu_sd: float = 2.0
    tau_scale: float = 1.0

    def __post_init__(self):
        if not self.mu_sd > 0:
            raise DomainError(f"mu_sd must be positive, got {self.mu_sd}")
        if not self.tau_scale > 0:
            raise DomainError(f"tau_scale must be positive, got {self.tau_scale}")


@dataclass(frozen=True)
class MapFitSettings:
    grid_size: int = 200
    refine_max: int = 4
    refine_tol: float = 1e-4
    predictive_points: int = 512
    n_draws: int = 20_000
    max_components: int = 4
    em_tol: float = 1e-7
    em_max_iter: int = 2000
    tv_max: float = 0.01
    max_draws: int = 80_000

    @classmethod
    def default(cls):
        return cls()

    @classmethod
    def coarse(cls):
        """Cheaper settings used inside the simulator."""
        return cls(grid_size=100, n_draws=2000, max_draws=8000)


@dataclass(frozen=True)
class MapFitDiagnostics:
    grid_size: int
    refinements: int
    n_components: int
    aic: dict = field(default_factory=dict)
    tv_distance: float = float("nan")
    predictive_mean: float = float("nan")
    predictive_sd: float = float("nan")
    n_draws: int = 0
    tv_refits: int = 0


@dataclass(frozen=True)
class MapFit:
    mixture: BetaMixture
    diagnostics: MapFitDiagnostics


# Grid posterior over (mu, tau)
# ------------------------------------------------------------------------------


def _log_marginal(y, n, mu, tau):
    """log p(y | mu, tau) by Gauss-Hermite quadrature centred on the integrand's mode."""
    prec = 1.0 / tau ** 2
    p_hat = (y + 0.5) / (n + 1.0)
    info = n * p_hat * (1.0 - p_hat)
    theta = (info * special.logit(p_hat) + prec * mu) / (info + prec)
    for _ in range(_NEWTON_STEPS):
        p = special.expit(theta)
        grad = y - n * p - (theta - mu) * prec
        hess = -n * p * (1.0 - p) - prec
        theta = theta - np.clip(grad / hess, -2.0, 2.0)
    p = special.expit(theta)
    scale = 1.0 / np.sqrt(n * p * (1.0 - p) + prec)

    nodes = theta[..., None] + math.sqrt(2.0) * scale[..., None] * _GH_X
    log_lik = y * nodes - n * np.logaddexp(0.0, nodes)
    log_norm = stats.norm.logpdf(nodes, loc=mu[..., None], scale=tau[..., None])
    log_comb = special.gammaln(n + 1.0) - special.gammaln(y + 1.0) - special.gammaln(n - y + 1.0)
    summed = special.logsumexp(_GH_LOG_W + _GH_X ** 2 + log_lik + log_norm, axis=-1)
    return log_comb + 0.5 * math.log(2.0) + np.log(scale) + summed


@dataclass
class _Grid:
    mu_edges: np.ndarray
    tau_edges: np.ndarray
    mu: np.ndarray
    tau: np.ndarray
    log_post: np.ndarray
    weights: np.ndarray


def _grid_posterior(pool, hyper, mu_box, tau_box, size):
    mu_edges = np.linspace(mu_box[0], mu_box[1], size + 1)
    tau_edges = np.linspace(tau_box[0], tau_box[1], size + 1)
    mu, tau = np.meshgrid(0.5 * (mu_edges[1:] + mu_edges[:-1]), 0.5 * (tau_edges[1:] + tau_edges[:-1]), indexing="ij")
    log_post = stats.norm.logpdf(mu, hyper.mu_mean, hyper.mu_sd) + stats.halfnorm.logpdf(tau, scale=hyper.tau_scale)
    for trial in pool:
        log_post = log_post + _log_marginal(float(trial.responders), float(trial.size), mu, tau)
    weights = np.exp(log_post - log_post.max())
    weights /= weights.sum()
    return _Grid(mu_edges, tau_edges, mu, tau, log_post, weights)


def _significant(grid):
    """
    Cells carrying non-negligible posterior mass as (mu, scale, weight).

    Each cell's logit-normal is widened by one mu-cell width so the mixture
    over cells stays smooth when tau is small against the grid spacing.
    """
    keep = grid.weights > _SIGNIFICANT_CELL * grid.weights.max()
    w = grid.weights[keep]
    h_mu = float(grid.mu_edges[1] - grid.mu_edges[0])
    return grid.mu[keep], np.hypot(grid.tau[keep], h_mu), w / w.sum()


def _predictive_moments(grid):
    mu, scale, w = _significant(grid)
    pi = special.expit(mu[:, None] + math.sqrt(2.0) * scale[:, None] * _GH_X)
    first = (pi @ _GH_W) / math.sqrt(math.pi)
    second = ((pi ** 2) @ _GH_W) / math.sqrt(math.pi)
    mean = float(w @ first)
    return mean, float(w @ second) - mean ** 2


def _zoom_box(grid, mu_box, tau_box):
    keep = grid.log_post >= grid.log_post.max() - _ZOOM_LOG_DROP
    i_idx, j_idx = np.nonzero(keep)
    i_lo, i_hi = max(i_idx.min() - 1, 0), min(i_idx.max() + 2, len(grid.mu_edges) - 1)
    j_lo, j_hi = max(j_idx.min() - 1, 0), min(j_idx.max() + 2, len(grid.tau_edges) - 1)
    new_mu = (max(grid.mu_edges[i_lo], mu_box[0]), min(grid.mu_edges[i_hi], mu_box[1]))
    new_tau = (max(grid.tau_edges[j_lo], tau_box[0]), min(grid.tau_edges[j_hi], tau_box[1]))
    return new_mu, new_tau


def _fit_grid(pool, hyper, settings):
    mu_box = (hyper.mu_mean - 6.0 * hyper.mu_sd, hyper.mu_mean + 6.0 * hyper.mu_sd)
    tau_box = (0.0, 5.0 * hyper.tau_scale)
    size = settings.grid_size
    grid = _grid_posterior(pool, hyper, mu_box, tau_box, size)
    moments = _predictive_moments(grid)
    for refinement in range(1, settings.refine_max + 1):
        mu_box, tau_box = _zoom_box(grid, mu_box, tau_box)
        size = int(settings.grid_size * (1.0 + 0.25 * (refinement - 1)))
        grid = _grid_posterior(pool, hyper, mu_box, tau_box, size)
        previous, moments = moments, _predictive_moments(grid)
        change = max(abs(moments[0] - previous[0]), abs(moments[1] - previous[1]))
        logger.debug(f"Grid refinement {refinement}: size={size} mean={moments[0]:.6f} change={change:.2e}")
        if change < settings.refine_tol:
            return grid, moments, refinement
    raise FittingError(
        f"MAP grid posterior did not settle after {settings.refine_max} refinements",
        diagnostics={"grid_size": size, "mean": moments[0], "variance": moments[1], "k": pool.k},
    )


# Predictive draws and mixture EM
# ------------------------------------------------------------------------------


def _predictive_grid(grid, points):
    """Logit grid spanning the central predictive mass, with CDF and density values."""
    mu, scale, w = _significant(grid)

    def cdf(theta):
        return float(w @ special.ndtr((theta - mu) / scale))

    lo0 = float((mu - 12.0 * scale).min())
    hi0 = float((mu + 12.0 * scale).max())
    lo = optimize.brentq(lambda t: cdf(t) - 1e-7, lo0, hi0)
    hi = optimize.brentq(lambda t: cdf(t) - (1.0 - 1e-7), lo0, hi0)
    theta = np.linspace(lo, hi, points)
    z = (theta[:, None] - mu) / scale
    cdf_values = special.ndtr(z) @ w
    density = (stats.norm.pdf(z) / scale) @ w
    return theta, cdf_values, density


def _quantile_draws(theta, cdf_values, n_draws):
    levels = (np.arange(n_draws) + 0.5) / n_draws
    draws = special.expit(np.interp(levels, cdf_values, theta))
    return np.clip(draws, 1e-12, 1.0 - 1e-12)


def _beta_mle(s1, s2, a, b):
    """Solve digamma(a) - digamma(a+b) = s1, digamma(b) - digamma(a+b) = s2 by Newton."""
    for _ in range(100):
        dab = special.polygamma(1, a + b)
        f1 = special.digamma(a) - special.digamma(a + b) - s1
        f2 = special.digamma(b) - special.digamma(a + b) - s2
        j11 = special.polygamma(1, a) - dab
        j22 = special.polygamma(1, b) - dab
        det = j11 * j22 - dab * dab
        da = (j22 * f1 + dab * f2) / det
        db = (j11 * f2 + dab * f1) / det
        step = 1.0
        while (a - step * da <= 0 or b - step * db <= 0) and step > 1e-12:
            step *= 0.5
        a, b = a - step * da, b - step * db
        if abs(da) <= 1e-10 * a and abs(db) <= 1e-10 * b:
            break
    return max(float(a), MIN_SHAPE), max(float(b), MIN_SHAPE)


def _moment_match(x):
    m = float(x.mean())
    v = float(x.var())
    factor = m * (1.0 - m) / v - 1.0 if v > 0 else 1e3
    factor = max(factor, 0.1)
    return max(m * factor, MIN_SHAPE), max((1.0 - m) * factor, MIN_SHAPE)


def _em_fit(draws, n_components, settings):
    """
    EM for a K-component Beta mixture on sorted draws.

    Returns:
        (BetaMixture, mean log-likelihood, converged)
    """
    log_x = np.log(draws)
    log_1mx = np.log1p(-draws)
    groups = np.array_split(draws, n_components)
    a = np.empty(n_components)
    b = np.empty(n_components)
    for k, group in enumerate(groups):
        a[k], b[k] = _moment_match(group)
    weights = np.full(n_components, 1.0 / n_components)

    if n_components == 1:
        a[0], b[0] = _beta_mle(log_x.mean(), log_1mx.mean(), a[0], b[0])
        ll = float(np.mean((a[0] - 1) * log_x + (b[0] - 1) * log_1mx - special.betaln(a[0], b[0])))
        return BetaMixture.from_arrays(weights, a, b), ll, True

    previous = -np.inf
    for iteration in range(settings.em_max_iter):
        log_dens = np.log(weights) + np.outer(log_x, a - 1) + np.outer(log_1mx, b - 1) - special.betaln(a, b)
        log_norm = special.logsumexp(log_dens, axis=1)
        ll = float(log_norm.mean())
        if abs(ll - previous) < settings.em_tol:
            return BetaMixture.from_arrays(weights, a, b), ll, True
        previous = ll
        resp = np.exp(log_dens - log_norm[:, None])
        nk = resp.sum(axis=0)
        if nk.min() < 1e-8 * len(draws):
            logger.debug(f"EM with K={n_components} collapsed a component at iteration {iteration}")
            return BetaMixture.from_arrays(weights, a, b), ll, False
        weights = nk / len(draws)
        for k in range(n_components):
            a[k], b[k] = _beta_mle((resp[:, k] @ log_x) / nk[k], (resp[:, k] @ log_1mx) / nk[k], a[k], b[k])
    return BetaMixture.from_arrays(weights, a, b), previous, False


def _tv_distance(mixture, theta, density):
    pi = special.expit(theta)
    fitted = mixture.pdf(pi) * pi * (1.0 - pi)
    return 0.5 * float(integrate.trapezoid(np.abs(density - fitted), theta))


def _fit_candidates(draws, candidates, settings, strict):
    """EM fits keyed by K with their AIC; non-converged K are dropped unless ``strict``."""
    fits = {}
    for k in candidates:
        mixture, ll, converged = _em_fit(draws, k, settings)
        if not converged:
            if strict:
                raise FittingError(
                    f"EM for {k} components did not converge in {settings.em_max_iter} iterations",
                    diagnostics={"k": k, "log_likelihood": ll, "n_draws": len(draws)},
                )
            logger.info(f"Dropping K={k} from AIC selection: EM did not converge")
            continue
        fits[k] = (mixture, 2.0 * (3 * k - 1) - 2.0 * len(draws) * ll)
    return fits


def fit_map(pool, hyper=None, n_components="auto", settings=None):
    """
    Fit the MAP prior of a historical pool and return it with diagnostics.

    The returned mixture is within ``settings.tv_max`` of the predictive in
    total variation. The lowest-AIC fit meeting that bound is taken; when none
    does, the draws are doubled (and one more component allowed in auto mode)
    until ``settings.max_draws`` is reached.

    Args:
        pool: HistoricalPool with at least two trials
        hyper: HierarchicalHyperPrior, defaults to N(0, 2) / Half-Normal(1)
        n_components: "auto" to choose K in 1..max_components by AIC, or an int
        settings: MapFitSettings

    Raises:
        DomainError: for pools with fewer than two trials
        FittingError: when the grid or the mixture does not converge, or no
            mixture gets within ``tv_max`` of the predictive
    """
    hyper = hyper or HierarchicalHyperPrior()
    settings = settings or MapFitSettings.default()
    if pool.k < 2:
        raise DomainError(f"MAP fitting needs at least two historical trials, got {pool.k}")

    grid, (mean, variance), refinements = _fit_grid(pool, hyper, settings)
    theta, cdf_values, density = _predictive_grid(grid, settings.predictive_points)

    auto = n_components == "auto"
    max_k = settings.max_components if auto else int(n_components)
    n_draws, tv_refits = settings.n_draws, 0
    while True:
        draws = _quantile_draws(theta, cdf_values, n_draws)
        candidates = range(1, max_k + 1) if auto else [max_k]
        fits = _fit_candidates(draws, candidates, settings, strict=not auto)
        if not fits:
            raise FittingError(
                f"EM did not converge for any K in 1..{max_k}",
                diagnostics={"k": pool.k, "n_draws": n_draws, "max_components": max_k},
            )
        ranked = sorted(fits, key=lambda k: fits[k][1])
        tv = {k: _tv_distance(fits[k][0], theta, density) for k in ranked}
        accepted = next((k for k in ranked if tv[k] <= settings.tv_max), None)
        if accepted is not None:
            break
        closest = min(tv, key=tv.get)
        if 2 * n_draws > settings.max_draws:
            raise FittingError(
                f"No MAP mixture within {settings.tv_max} of the predictive in total variation "
                f"(closest K={closest} at {tv[closest]:.4f})",
                diagnostics={"tv_distance": tv[closest], "n_components": closest, "n_draws": n_draws,
                             "tv_refits": tv_refits, "k": pool.k},
            )
        logger.info(f"Refitting MAP mixture: closest K={closest} is {tv[closest]:.4f} from the predictive")
        n_draws, tv_refits = 2 * n_draws, tv_refits + 1
        if auto:
            max_k += 1

    best = fits[accepted][0]
    if accepted != ranked[0]:
        logger.info(f"K={ranked[0]} has the lowest AIC but misses the total-variation bound; using K={accepted}")
    diagnostics = MapFitDiagnostics(
        grid_size=grid.mu.shape[0],
        refinements=refinements,
        n_components=best.n_components,
        aic={k: fits[k][1] for k in sorted(fits)},
        tv_distance=tv[accepted],
        predictive_mean=mean,
        predictive_sd=math.sqrt(max(variance, 0.0)),
        n_draws=n_draws,
        tv_refits=tv_refits,
    )
    logger.debug(f"MAP fit for {pool.k} trials: K={best.n_components} mean={best.mean():.4f} tv={tv[accepted]:.2e}")
    return MapFit(best, diagnostics)


def fit_map_prior(pool, hyper=None, n_components="auto", settings=None):
    """Beta-mixture approximation of the MAP prior for a new trial's control rate."""
    return fit_map(pool, hyper, n_components, settings).mixture


# Robustification, conjugate updating, superiority and ESS
# ------------------------------------------------------------------------------


def _check_robust_weight(w_robust):
    if not 0 < w_robust < 1:
        raise DomainError(f"Robust weight must lie in (0, 1), got {w_robust}")


def robustify(map_prior, w_robust):
    """Prepend a vague Beta(1, 1) component with weight ``w_robust``."""
    _check_robust_weight(w_robust)
    weights = (w_robust,) + tuple((1.0 - w_robust) * w for w in map_prior.weights)
    return BetaMixture(weights, (BetaParams(1.0, 1.0),) + map_prior.components)


def robust_single(trial, w_robust):
    _check_robust_weight(w_robust)
    return BetaMixture(
        (w_robust, 1.0 - w_robust),
        (BetaParams(1.0, 1.0), BetaParams(1.0 + trial.responders, 1.0 + trial.size - trial.responders)),
    )


def posterior_update(prior, y, n):
    """Conjugate update of every component with y responders out of n."""
    y = _as_count("y", y)
    n = _as_count("n", n)
    if not 0 <= y <= n:
        raise DomainError(f"y must lie in [0, {n}], got {y}")
    if n == 0:
        return prior
    a = prior.a + y
    b = prior.b + (n - y)
    with np.errstate(divide="ignore"):
        log_w = np.log(prior.w) + special.betaln(a, b) - special.betaln(prior.a, prior.b)
    weights = np.exp(log_w - special.logsumexp(log_w))
    return BetaMixture.from_arrays(weights, a, b)


def superiority_probability(treatment, control):
    """Pr(pi_t > pi_c) for independent mixture-distributed rates."""
    total = 0.0
    for w_t, x in zip(treatment.weights, treatment.components):
        if w_t == 0:
            continue
        for w_c, y in zip(control.weights, control.components):
            if w_c == 0:
                continue
            total += w_t * w_c * beta_superiority(x, y)
    return min(1.0, max(0.0, total))


def _elir_integrand(t, log_w, a, b):
    pi = special.expit(t)
    pi_c = special.expit(-t)
    log_f = log_w + (a - 1.0) * np.log(pi) + (b - 1.0) * np.log(pi_c) - special.betaln(a, b)
    log_p = special.logsumexp(log_f)
    rho = np.exp(log_f - log_p)
    curvature = (a - 1.0) * pi_c ** 2 + (b - 1.0) * pi ** 2
    slope = (a - 1.0) * pi_c - (b - 1.0) * pi
    info = rho @ curvature - (rho @ slope ** 2 - (rho @ slope) ** 2)
    return math.exp(log_p) * info


def ess_elir(prior):
    """
    Effective sample size by the expected local-information ratio.

    A single Beta(a, b) has ESS a + b. Mixtures are integrated on the logit
    scale over (eps, 1 - eps).

    Raises:
        NumericalError: if the quadrature error stays above tolerance.
    """
    if prior.n_components == 1:
        component = prior.components[0]
        return component.a + component.b
    with np.errstate(divide="ignore"):
        log_w = np.log(prior.w)
    lo, hi = special.logit(ELIR_EPS), special.logit(1.0 - ELIR_EPS)
    modes = np.clip(special.logit(prior.a / (prior.a + prior.b)), lo + 1e-6, hi - 1e-6)
    result = integrate.quad(
        _elir_integrand, lo, hi, args=(log_w, prior.a, prior.b),
        points=sorted(set(modes.tolist())), epsabs=ELIR_TOL, epsrel=1e-10, limit=500, full_output=1,
    )
    value, abserr = result[0], result[1]
    if len(result) > 3 and abserr > 1e-4 * max(1.0, abs(value)):
        raise NumericalError(
            f"ELIR quadrature did not converge: {result[3]}",
            diagnostics={"value": value, "abserr": abserr, "components": prior.n_components},
        )
    return value
