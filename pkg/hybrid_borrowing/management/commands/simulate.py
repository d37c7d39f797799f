from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from pathlib import Path
import logging
import time

from hybrid_borrowing.exceptions import AggregationError, ConfigError, DomainError, NumericalError
from hybrid_borrowing.io import RunManifest, load_config, write_csv
from hybrid_borrowing.schemas import SimulationConfig
from hybrid_borrowing.simulation import coarse_fit_agreement, run_scenario, summarize_records

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Simulate marginal operating characteristics of selection rules for the configured scenarios'

    def add_arguments(self, parser):
        parser.add_argument(
            '--config',
            type=str,
            required=True,
            help='Path to a simulation config (JSON)',
        )
        parser.add_argument(
            '--out',
            type=str,
            default=settings.HYBRID_OUTPUT_DIR,
            help='Output directory for oc_results.csv and manifest.json',
        )
        parser.add_argument(
            '--threads',
            type=int,
            default=settings.HYBRID_THREADS,
            help='Worker processes for replicates. Default: HYBRID_THREADS',
        )
        parser.add_argument(
            '--seed',
            type=int,
            help='Override the seed of every scenario',
        )
        parser.add_argument(
            '--replicates',
            type=int,
            help='Override the replicate count of every scenario',
        )
        parser.add_argument(
            '--self-check-pools',
            type=int,
            default=0,
            help='Compare coarse and default MAP fits on this many random pools first. Default: 0 (skip)',
        )

    def handle(self, *args, **options):
        config_path = Path(options['config'])
        try:
            config = load_config(config_path, SimulationConfig)
            scenarios = config.to_scenarios(seed=options['seed'], replicates=options['replicates'])
            rules = config.selection_rules()
            methods = config.analysis_methods()
        except (ConfigError, DomainError) as exc:
            raise CommandError(str(exc), returncode=2)

        self.stdout.write(f"Loaded {len(scenarios)} scenario(s), {len(rules)} rule(s), {len(methods)} method(s)")

        if options['self_check_pools']:
            try:
                gap = coarse_fit_agreement(options['self_check_pools'])
            except NumericalError as exc:
                raise CommandError(f"MAP fit self-check: {exc}", returncode=3)
            self.stdout.write(f"Coarse MAP fits agree with default fits (max gap {gap:.5f})")

        records = []
        runtimes = {}
        for scenario in scenarios:
            started = time.monotonic()
            if scenario.extrapolated:
                self.stdout.write(
                    self.style.WARNING(f"  {scenario.scenario_id} lies outside the studied factor levels")
                )
            try:
                records.extend(
                    run_scenario(scenario, rules, methods, workers=options['threads'], compute_ess=config.compute_ess)
                )
            except ConfigError as exc:
                raise CommandError(str(exc), returncode=2)
            except (NumericalError, AggregationError) as exc:
                raise CommandError(f"Scenario {scenario.scenario_id}: {exc}", returncode=3)
            runtimes[scenario.scenario_id] = round(time.monotonic() - started, 3)
            self.stdout.write(
                f"  {scenario.scenario_id}: {scenario.replicates} replicates in {runtimes[scenario.scenario_id]}s"
            )

        out_dir = Path(options['out'])
        out_dir.mkdir(parents=True, exist_ok=True)
        results_path = write_csv(summarize_records(records), out_dir / 'oc_results.csv')

        snapshot = config.model_dump(mode='json')
        snapshot['seed'] = options['seed'] if options['seed'] is not None else config.seed
        snapshot['replicates'] = options['replicates'] if options['replicates'] is not None else config.replicates
        manifest = RunManifest(command='simulate', config=snapshot, seed=snapshot['seed'], runtimes=runtimes)
        manifest.record_input('config', config_path)
        manifest.record_output(results_path)
        manifest.write(out_dir / 'manifest.json')

        self.stdout.write(self.style.SUCCESS(f"Wrote {len(records)} OC records to {results_path}"))
