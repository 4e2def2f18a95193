"""
Django command to wait for database to be available
"""
import logging
import time

from psycopg2 import OperationalError as Psycopg2Error
from django.db.utils import OperationalError
from django.core.management.base import BaseCommand, CommandError

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Block until the default database accepts connections'

    def add_arguments(self, parser):
        parser.add_argument(
            '--attempts',
            type=int,
            default=0,
            help='Give up after this many failed checks (0 waits forever)'
        )

    def handle(self, *args, **options):
        """ Entrypoint for command."""
        attempts = options['attempts']
        self.stdout.write('Waiting for database...')
        failures = 0
        while True:
            try:
                self.check(databases=['default'])
                break
            except (Psycopg2Error, OperationalError) as err:
                failures += 1
                logger.debug('database check %d failed: %s', failures, err)
                if attempts and failures >= attempts:
                    raise CommandError(
                        f'Database unavailable after {failures} attempts',
                        returncode=2
                    )
                self.stdout.write('Database unavailable, waiting 1 second...')
                time.sleep(1)
        self.stdout.write(self.style.SUCCESS('Database available!'))
