"""
Django command running the exhaustive property suites
"""
from django.core.management.base import BaseCommand, CommandError

from core.checks import SCOPES, run_checks

SHOWN_FAILURES = 3


class Command(BaseCommand):
    help = (
        'Check sequential safety (seq), pairwise commutation (commute), '
        'stability side-conditions (stability), concurrent up-move '
        'antichains (upmoves) or op-log round-trips (codec)'
    )

    def add_arguments(self, parser):
        parser.add_argument('scope', choices=[*SCOPES, 'all'])
        parser.add_argument(
            '--bound',
            type=int,
            help=(
                'Tree size bound for seq and commute, schedule count for '
                'stability, trial count for upmoves and codec'
            )
        )

    def handle(self, *args, **options):
        """ Entrypoint for command."""
        bound = options['bound']
        if bound is not None and bound < 1:
            raise CommandError('--bound must be positive', returncode=2)
        reports = run_checks(options['scope'], bound)
        for report in reports:
            style = self.style.SUCCESS if report.ok else self.style.ERROR
            self.stdout.write(style(str(report)))
            for failure in report.failures[:SHOWN_FAILURES]:
                self.stdout.write(failure)
        if not all(report.ok for report in reports):
            raise CommandError('property check failed', returncode=1)
