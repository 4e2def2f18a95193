"""
Django command running randomized delivery schedules
"""
from django.core.management.base import BaseCommand, CommandError

from core.fuzz import (
    FUZZ_ALGORITHMS,
    describe,
    replay_steps,
    run_fuzz,
    shrink,
)
from crdt.codec import write_oplog
from sim.config import Algorithm, ConfigError, seed_override


class Command(BaseCommand):
    help = (
        'Fuzz convergence, invariant preservation and stability over random '
        'causal schedules'
    )

    def add_arguments(self, parser):
        parser.add_argument('--schedules', type=int, default=100)
        parser.add_argument('--seed', type=int)
        parser.add_argument('--replicas', type=int, default=3)
        parser.add_argument('--ops', type=int, default=60)
        parser.add_argument(
            '--algorithm',
            choices=[algorithm.value for algorithm in FUZZ_ALGORITHMS],
            default=Algorithm.MARAM.value
        )
        parser.add_argument(
            '--expect-unsafe',
            action='store_true',
            help='Report invariant violations without failing'
        )
        parser.add_argument(
            '--trace',
            help='On failure, write the failing replica op-log here'
        )

    def handle(self, *args, **options):
        """ Entrypoint for command."""
        try:
            seed = seed_override(options['seed'])
        except ConfigError as err:
            raise CommandError(str(err), returncode=2)
        seed = 0 if seed is None else seed
        replicas, ops = options['replicas'], options['ops']
        if options['schedules'] < 1 or replicas < 1 or ops < 0:
            raise CommandError(
                '--schedules and --replicas must be positive, --ops '
                'non-negative',
                returncode=2
            )
        algorithm = Algorithm(options['algorithm'])
        expect_unsafe = options['expect_unsafe']

        violations = 0
        for index in range(options['schedules']):
            result = run_fuzz(
                seed + index,
                replicas,
                ops,
                algorithm,
                expect_unsafe=expect_unsafe
            )
            violations += result.execution.violations
            if not result.ok:
                self._report(result, replicas, expect_unsafe,
                             options['trace'])

        self.stdout.write(self.style.SUCCESS(
            f'{options["schedules"]} schedule(s) passed '
            f'({algorithm.value}, seeds {seed}..'
            f'{seed + options["schedules"] - 1})'
        ))
        if expect_unsafe:
            self.stdout.write(
                f'{violations} invariant violation(s) observed'
            )

    def _report(self, result, replicas, expect_unsafe, trace):
        steps = shrink(result.algorithm, replicas, result.steps,
                       expect_unsafe)
        execution = replay_steps(result.algorithm, replicas, steps,
                                 expect_unsafe)
        self.stdout.write(self.style.ERROR(
            f'schedule with seed {result.seed} failed '
            f'(conflict rate {result.conflict_rate}%)'
        ))
        for failure in (execution.failures or result.failures):
            self.stdout.write(f'  {failure}')
        self.stdout.write(
            f'minimized schedule, {len(steps)} of {len(result.steps)} '
            f'steps:\n{describe(steps)}'
        )
        if trace:
            failed = execution.failed_replica
            if failed is None:
                failed = result.execution.failed_replica or 0
                log = result.execution.replicas[failed].log
            else:
                log = execution.replicas[failed].log
            write_oplog(trace, log)
            self.stdout.write(f'op-log of replica {failed} written to {trace}')
        raise CommandError(
            f'fuzz failure, rerun with --seed {result.seed} --schedules 1',
            returncode=1
        )
