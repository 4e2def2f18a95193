"""
Database Models
"""
from django.db import models, transaction

ALGORITHM_CHOICES = [
    ('maram', 'Maram'),
    ('udr', 'Undo-do-redo'),
    ('global_lock', 'Global lock'),
    ('subtree_lock', 'Subtree lock'),
    ('naive', 'Naive'),
]


class SimulationRunManager(models.Manager):

    @transaction.atomic
    def create_from_metrics(self, metrics, config):
        """Store one simulation run together with its per-op records"""
        run = self.create(
            run=metrics.run,
            algorithm=metrics.algorithm,
            conflict_rate=metrics.conflict_rate,
            latency_preset=metrics.latency_preset,
            seed=metrics.seed,
            mean_resp_ms=metrics.mean_resp_ms,
            median_resp_ms=metrics.median_resp_ms,
            p99_resp_ms=metrics.p99_resp_ms,
            mean_stab_ms=metrics.mean_stab_ms,
            median_stab_ms=metrics.median_stab_ms,
            aborts=metrics.aborts,
            invariant_violations=metrics.invariant_violations,
            converged=metrics.converged,
            bytes_per_op=metrics.bytes_per_op,
            config=config.as_data(),
        )
        OperationRecord.objects.bulk_create(
            OperationRecord(
                simulation=run,
                op_id=record.op_id,
                origin=record.origin,
                kind=record.kind,
                mtype=record.mtype or '',
                submit_ms=record.submit_ms,
                ack_ms=record.ack_ms,
                stable_ms=record.stable_ms,
                status=record.status or '',
            )
            for record in metrics.records
        )
        return run


class SimulationRun(models.Model):
    """Aggregates of one simulated run"""
    run = models.PositiveIntegerField(default=0)
    algorithm = models.CharField(max_length=32, choices=ALGORITHM_CHOICES)
    conflict_rate = models.FloatField(default=0)
    latency_preset = models.CharField(max_length=32)
    seed = models.BigIntegerField()
    mean_resp_ms = models.FloatField()
    median_resp_ms = models.FloatField()
    p99_resp_ms = models.FloatField()
    mean_stab_ms = models.FloatField()
    median_stab_ms = models.FloatField()
    aborts = models.PositiveIntegerField(default=0)
    invariant_violations = models.PositiveIntegerField(default=0)
    converged = models.BooleanField(default=True)
    bytes_per_op = models.FloatField(default=0)
    config = models.JSONField(default=dict)
    created = models.DateTimeField(auto_now_add=True)

    objects = SimulationRunManager()

    class Meta:
        ordering = ['-created', '-id']

    def __str__(self) -> str:
        return (
            f'{self.algorithm} run {self.run} '
            f'({self.latency_preset}, {self.conflict_rate:g}%)'
        )


class OperationRecord(models.Model):
    """One client request of a stored run, as measured at its origin"""
    simulation = models.ForeignKey(
        SimulationRun,
        on_delete=models.CASCADE,
        related_name='records'
    )
    op_id = models.CharField(max_length=64)
    origin = models.PositiveIntegerField()
    kind = models.CharField(max_length=16)
    mtype = models.CharField(max_length=8, blank=True)
    submit_ms = models.FloatField()
    ack_ms = models.FloatField(null=True)
    stable_ms = models.FloatField(null=True)
    status = models.CharField(max_length=16, blank=True)

    class Meta:
        ordering = ['id']

    def __str__(self) -> str:
        return f'{self.kind} {self.op_id}'
