"""
Per-operation records, run aggregates and CSV export
"""
import csv
import logging
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

OPS_COLUMNS = [
    'run', 'op_id', 'origin', 'kind', 'mtype', 'submit_ms', 'ack_ms',
    'stable_ms', 'status',
]
AGGREGATE_COLUMNS = [
    'run', 'algorithm', 'conflict_rate', 'latency_preset', 'mean_resp_ms',
    'p99_resp_ms', 'mean_stab_ms', 'aborts', 'invariant_violations',
]

ABORTED = 'aborted'


@dataclass
class OpRecord:
    """Life of one client request at its origin replica"""
    run: int
    op_id: str
    origin: int
    kind: str
    submit_ms: float
    mtype: Optional[str] = None
    ack_ms: Optional[float] = None
    stable_ms: Optional[float] = None
    status: Optional[str] = None

    @property
    def response_ms(self) -> Optional[float]:
        if self.ack_ms is None:
            return None
        return self.ack_ms - self.submit_ms

    @property
    def stabilization_ms(self) -> Optional[float]:
        if self.ack_ms is None or self.stable_ms is None:
            return None
        return self.stable_ms - self.ack_ms

    def row(self) -> List:
        return [
            self.run, self.op_id, self.origin, self.kind, self.mtype or '',
            _fmt(self.submit_ms), _fmt(self.ack_ms), _fmt(self.stable_ms),
            self.status or '',
        ]


def _fmt(value: Optional[float]) -> str:
    return '' if value is None else f'{value:.3f}'


def _mean(values: Sequence[float]) -> float:
    return statistics.fmean(values) if values else 0.0


def _median(values: Sequence[float]) -> float:
    return statistics.median(values) if values else 0.0


def percentile(values: Sequence[float], q: float) -> float:
    """Nearest-rank percentile, 0 for no values"""
    if not values:
        return 0.0
    ordered = sorted(values)
    index = max(math.ceil(q / 100 * len(ordered)) - 1, 0)
    return ordered[index]


@dataclass
class Metrics:
    run: int
    algorithm: str
    conflict_rate: float
    latency_preset: str
    seed: int = 0
    records: List[OpRecord] = field(default_factory=list)
    aborts: int = 0
    invariant_violations: int = 0
    converged: bool = True
    bytes_per_op: float = 0.0
    replay_ms: float = 0.0

    def moves(self) -> List[OpRecord]:
        return [r for r in self.records if r.kind == 'move']

    def _responses(self) -> List[float]:
        return [r.response_ms for r in self.moves()
                if r.response_ms is not None]

    def _stabilizations(self, records=None) -> List[float]:
        records = self.records if records is None else records
        return [r.stabilization_ms for r in records
                if r.stabilization_ms is not None]

    @property
    def mean_resp_ms(self) -> float:
        """Mean move response time"""
        return _mean(self._responses())

    @property
    def median_resp_ms(self) -> float:
        return _median(self._responses())

    @property
    def p99_resp_ms(self) -> float:
        return percentile(self._responses(), 99)

    @property
    def mean_stab_ms(self) -> float:
        """Mean stabilization time over every acknowledged op"""
        return _mean(self._stabilizations())

    @property
    def median_stab_ms(self) -> float:
        return _median(self._stabilizations())

    def move_response_by_origin(self) -> Dict[int, float]:
        by_origin: Dict[int, List[float]] = {}
        for record in self.moves():
            if record.response_ms is not None:
                by_origin.setdefault(record.origin, []).append(
                    record.response_ms
                )
        return {
            origin: _mean(values)
            for origin, values in sorted(by_origin.items())
        }

    def down_move_stabilization(self) -> float:
        return _mean(self._stabilizations(
            [r for r in self.records if r.mtype == 'down']
        ))

    def aggregate_row(self) -> List:
        return [
            self.run, self.algorithm, f'{self.conflict_rate:g}',
            self.latency_preset, _fmt(self.mean_resp_ms),
            _fmt(self.p99_resp_ms), _fmt(self.mean_stab_ms), self.aborts,
            self.invariant_violations,
        ]


def export_metrics(runs: Iterable[Metrics],
                   out_dir) -> Tuple[Path, Path]:
    """Write ops.csv and aggregate.csv under out_dir"""
    runs = list(runs)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ops_path = out_dir / 'ops.csv'
    aggregate_path = out_dir / 'aggregate.csv'

    with open(ops_path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(OPS_COLUMNS)
        for metrics in runs:
            writer.writerows(record.row() for record in metrics.records)

    with open(aggregate_path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(AGGREGATE_COLUMNS)
        writer.writerows(metrics.aggregate_row() for metrics in runs)

    logger.info('wrote %d runs to %s', len(runs), out_dir)
    return ops_path, aggregate_path


def format_summary(runs: Sequence[Metrics], names=None) -> str:
    """Text table of the batch averages, one line per replica origin"""
    if not runs:
        return 'no runs'
    first = runs[0]
    rows = [
        ('mean move response', _mean([m.mean_resp_ms for m in runs]), 'ms'),
        ('p99 move response', _mean([m.p99_resp_ms for m in runs]), 'ms'),
        ('mean stabilization', _mean([m.mean_stab_ms for m in runs]), 'ms'),
        ('down-move stabilization',
         _mean([m.down_move_stabilization() for m in runs]), 'ms'),
        ('bytes per op', _mean([m.bytes_per_op for m in runs]), 'B'),
        ('log replay', _mean([m.replay_ms for m in runs]), 'ms'),
    ]
    lines = [
        f'{first.algorithm} | conflict rate {first.conflict_rate:g}% | '
        f'latency {first.latency_preset} | {len(runs)} run(s)'
    ]
    lines.extend(
        f'  {label:<24} {value:12.3f} {unit}' for label, value, unit in rows
    )
    lines.append(f'  {"aborts":<24} {sum(m.aborts for m in runs):12d}')
    lines.append(
        f'  {"invariant violations":<24} '
        f'{sum(m.invariant_violations for m in runs):12d}'
    )
    lines.append(
        f'  {"converged runs":<24} '
        f'{sum(m.converged for m in runs):12d}'
    )
    origins = sorted({o for m in runs for o in m.move_response_by_origin()})
    for origin in origins:
        values = [
            m.move_response_by_origin()[origin] for m in runs
            if origin in m.move_response_by_origin()
        ]
        label = names(origin) if names else f'replica {origin}'
        lines.append(f'  move response at {label}: {_mean(values):.3f} ms')
    return '\n'.join(lines)
