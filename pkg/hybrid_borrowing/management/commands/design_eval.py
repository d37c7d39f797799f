from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from pathlib import Path
import logging
import time

from hybrid_borrowing.analysis import get_fit_cache
from hybrid_borrowing.exceptions import ConfigError, DomainError, NumericalError
from hybrid_borrowing.io import RunManifest, load_config, load_historical_csv, write_csv, write_json
from hybrid_borrowing.reports import design_evaluation
from hybrid_borrowing.schemas import DesignEvalConfig

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Exact conditional type I error, power and probability of success for a fixed historical pool'

    def add_arguments(self, parser):
        parser.add_argument(
            '--config',
            type=str,
            default=str(settings.HYBRID_CONFIG_DIR / 'design_eval.json'),
            help='Path to a design-evaluation config (JSON). Defaults to the bundled case-study design',
        )
        parser.add_argument(
            '--historical',
            type=str,
            default=str(settings.HYBRID_DATA_DIR / 'ankylosing_spondylitis.csv'),
            help='CSV of historical control arms with columns study, responders, size',
        )
        parser.add_argument(
            '--out',
            type=str,
            default=settings.HYBRID_OUTPUT_DIR,
            help='Output directory for curves.csv, pos.json and manifest.json',
        )
        parser.add_argument(
            '--threads',
            type=int,
            default=settings.HYBRID_THREADS,
            help='Worker threads for subset enumeration. Default: HYBRID_THREADS',
        )

    def handle(self, *args, **options):
        config_path = Path(options['config'])
        historical_path = Path(options['historical'])
        try:
            config = load_config(config_path, DesignEvalConfig)
            pool = load_historical_csv(historical_path)
            config.designs()
        except (ConfigError, DomainError) as exc:
            raise CommandError(str(exc), returncode=2)

        if pool.k == 0:
            self.stdout.write(self.style.WARNING("No historical trials; only the separate analysis is evaluated"))
        else:
            self.stdout.write(f"Loaded {pool.k} historical trial(s) from {historical_path}")

        started = time.monotonic()
        try:
            curves, summary = design_evaluation(config, pool, workers=options['threads'], cache=get_fit_cache())
        except (ConfigError, DomainError) as exc:
            raise CommandError(str(exc), returncode=2)
        except NumericalError as exc:
            raise CommandError(f"Design {config.design_id}: {exc}", returncode=3)
        runtime = round(time.monotonic() - started, 3)

        for design_id, entry in summary.items():
            self.stdout.write(f"--- {design_id} (n_t={entry['n_t']}, n_c={entry['n_c']}) ---")
            for label, values in entry['rules'].items():
                self.stdout.write(f"  {label:<24} PoS {values['pos']:.3f}  selected {values['n_selected']}")

        out_dir = Path(options['out'])
        out_dir.mkdir(parents=True, exist_ok=True)
        curves_path = write_csv(curves, out_dir / 'curves.csv')
        pos_path = write_json(summary, out_dir / 'pos.json')

        manifest = RunManifest(
            command='design_eval', config=config.model_dump(mode='json'), seed=config.seed,
            runtimes={config.design_id: runtime},
        )
        manifest.record_input('config', config_path)
        manifest.record_input('historical', historical_path)
        manifest.record_output(curves_path)
        manifest.record_output(pos_path)
        manifest.write(out_dir / 'manifest.json')

        self.stdout.write(self.style.SUCCESS(f"Wrote {len(curves)} curve rows to {curves_path}"))
