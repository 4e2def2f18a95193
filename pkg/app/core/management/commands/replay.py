"""
Django command replaying an op-log through a fresh replica
"""
from django.core.management.base import BaseCommand, CommandError

from crdt.codec import read_oplog
from crdt.exceptions import DecodeError, OperationError
from sim.config import Algorithm
from sim.engine import make_replica
from tree.state import AbstractionMode, check_invariant, render_tree


class Command(BaseCommand):
    help = 'Deliver an op-log in recorded order and print the final tree'

    def add_arguments(self, parser):
        parser.add_argument('oplog')
        parser.add_argument(
            '--algorithm',
            choices=[algorithm.value for algorithm in Algorithm],
            default=Algorithm.MARAM.value
        )

    def handle(self, *args, **options):
        """ Entrypoint for command."""
        try:
            ops = read_oplog(options['oplog'])
        except DecodeError as err:
            raise CommandError(f'cannot parse op-log: {err}', returncode=2)
        except OSError as err:
            raise CommandError(f'cannot read op-log: {err}', returncode=2)

        origins = {op.origin for op in ops}
        observer = max(origins, default=-1) + 1
        replica = make_replica(
            Algorithm(options['algorithm']),
            observer,
            origins
        )
        try:
            for op in ops:
                replica.deliver(op)
        except OperationError as err:
            raise CommandError(f'cannot replay op-log: {err}', returncode=2)

        state = replica.state
        for mode in (AbstractionMode.KEEPING, AbstractionMode.SKIPPING):
            self.stdout.write(f'{mode.value} view:')
            self.stdout.write(render_tree(state, mode))
        report = check_invariant(state)
        style = self.style.SUCCESS if report.ok else self.style.ERROR
        self.stdout.write(style(str(report)))

        if replica.buffer:
            raise CommandError(
                f'undeliverable operations remain: '
                f'{", ".join(str(op_id) for op_id in sorted(replica.buffer))}',
                returncode=1
            )
        if not report.ok:
            raise CommandError(str(report), returncode=1)
