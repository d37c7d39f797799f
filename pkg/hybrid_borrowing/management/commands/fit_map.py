from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
import logging
import math

from hybrid_borrowing.beta_mixture import HierarchicalHyperPrior, ess_elir, fit_map, robustify
from hybrid_borrowing.exceptions import ConfigError, DomainError, NumericalError
from hybrid_borrowing.io import load_historical_csv

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Fit the MAP prior for a historical CSV and print its mixture and effective sample size'

    def add_arguments(self, parser):
        parser.add_argument(
            '--historical',
            type=str,
            default=str(settings.HYBRID_DATA_DIR / 'ankylosing_spondylitis.csv'),
            help='CSV of historical control arms with columns study, responders, size',
        )
        parser.add_argument(
            '--w-robust',
            type=float,
            default=0.1,
            help='Weight of the vague component in the robust MAP prior. Default: 0.1',
        )
        parser.add_argument(
            '--tau-scale',
            type=float,
            default=1.0,
            help='Scale of the half-normal prior on tau. Default: 1.0',
        )
        parser.add_argument(
            '--components',
            type=str,
            default='auto',
            help="Number of mixture components, or 'auto' to choose by AIC",
        )

    def handle(self, *args, **options):
        components = options['components']
        try:
            if components != 'auto':
                components = int(components)
            pool = load_historical_csv(options['historical'])
            hyper = HierarchicalHyperPrior(tau_scale=options['tau_scale'])
        except (ConfigError, DomainError, ValueError) as exc:
            raise CommandError(str(exc), returncode=2)

        try:
            fit = fit_map(pool, hyper, n_components=components)
            robust = robustify(fit.mixture, options['w_robust'])
            ess_map = ess_elir(fit.mixture)
            ess_robust = ess_elir(robust)
        except DomainError as exc:
            raise CommandError(str(exc), returncode=2)
        except NumericalError as exc:
            raise CommandError(f"MAP fit failed: {exc}", returncode=3)

        diagnostics = fit.diagnostics
        self.stdout.write(f"Historical pool: {pool.k} trials, {pool.responders}/{pool.size} responders")
        self.stdout.write(f"MAP prior ({diagnostics.n_components} component(s), grid {diagnostics.grid_size}):")
        self.stdout.write(fit.mixture.describe())
        self.stdout.write(
            f"  mean {fit.mixture.mean():.4f}  sd {math.sqrt(fit.mixture.variance()):.4f}  ESS {ess_map:.1f}"
        )
        self.stdout.write(f"Robust MAP prior (w_robust={options['w_robust']}):")
        self.stdout.write(robust.describe())
        self.stdout.write(
            f"  mean {robust.mean():.4f}  sd {math.sqrt(robust.variance()):.4f}  ESS {ess_robust:.1f}"
        )
        self.stdout.write(self.style.SUCCESS(
            f"Total variation to the predictive: {diagnostics.tv_distance:.4f} ({diagnostics.n_draws} draws)"
        ))
