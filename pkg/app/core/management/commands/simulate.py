"""
Django command running simulation batches
"""
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from core.models import SimulationRun
from sim.config import Algorithm, ConfigError, load_config, replica_name
from sim.engine import run_batch
from sim.metrics import export_metrics, format_summary
from sim.workload import WorkloadError

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = (
        'Run the simulations of a JSON config and write ops.csv and '
        'aggregate.csv'
    )

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True)
        parser.add_argument(
            '--out-dir',
            help='Output directory, by default beside the config'
        )
        parser.add_argument('--seed', type=int)
        parser.add_argument(
            '--algorithm',
            choices=[algorithm.value for algorithm in Algorithm]
        )
        parser.add_argument(
            '--trace',
            help='Write the event trace as JSON lines to this file'
        )
        parser.add_argument(
            '--save',
            action='store_true',
            help='Store the runs in the database'
        )

    def handle(self, *args, **options):
        """ Entrypoint for command."""
        config_path = Path(options['config'])
        try:
            config = load_config(
                config_path,
                seed=options['seed'],
                algorithm=options['algorithm']
            )
        except ConfigError as err:
            details = ''.join(
                f'\n  {name}: {problem}'
                for name, problem in err.errors.items()
            )
            raise CommandError(f'{err}{details}', returncode=2)

        out_dir = options['out_dir']
        if out_dir is None:
            out_dir = config_path.parent / f'{config_path.stem}-results'

        trace = None
        try:
            if options['trace']:
                trace = open(options['trace'], 'w', encoding='utf-8')
            runs = run_batch(config, trace)
        except WorkloadError as err:
            raise CommandError(str(err), returncode=2)
        except OSError as err:
            raise CommandError(f'cannot write trace: {err}', returncode=2)
        finally:
            if trace is not None:
                trace.close()

        try:
            ops_path, aggregate_path = export_metrics(runs, out_dir)
        except OSError as err:
            raise CommandError(f'cannot write results: {err}', returncode=2)

        if options['save']:
            for metrics in runs:
                SimulationRun.objects.create_from_metrics(metrics, config)

        self.stdout.write(format_summary(
            runs,
            names=lambda origin: replica_name(origin, config.latency)
        ))
        self.stdout.write(self.style.SUCCESS(
            f'Wrote {ops_path} and {aggregate_path}'
        ))
        diverged = [metrics.run for metrics in runs if not metrics.converged]
        if diverged:
            raise CommandError(
                f'replicas diverged in run(s) {diverged}',
                returncode=1
            )
