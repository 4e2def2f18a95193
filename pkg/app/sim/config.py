"""
Simulation configuration: latency matrices, workload specs and run config
"""
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple, Union

from django.conf import settings

logger = logging.getLogger(__name__)

REPLICA_NAMES = ('Paris', 'Bangalore', 'New York')

# Paris, Bangalore, New York
REAL_LATENCY = (
    (0.0, 144.0, 75.0),
    (144.0, 0.0, 215.0),
    (75.0, 215.0, 0.0),
)

PRESETS = ('zero', 'real', 'real_x10')


class ConfigError(ValueError):
    """Invalid simulation config, with the validation errors by field"""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or {}


class Algorithm(Enum):
    MARAM = 'maram'
    UDR = 'udr'
    GLOBAL_LOCK = 'global_lock'
    SUBTREE_LOCK = 'subtree_lock'
    NAIVE = 'naive'

    @property
    def uses_locks(self) -> bool:
        return self in (Algorithm.GLOBAL_LOCK, Algorithm.SUBTREE_LOCK)


@dataclass(frozen=True)
class LatencyMatrix:
    """One-way link latency in milliseconds between replica sites"""
    latency: Tuple[Tuple[float, ...], ...]
    preset: str = 'custom'

    def __post_init__(self):
        rows = tuple(tuple(float(v) for v in row) for row in self.latency)
        object.__setattr__(self, 'latency', rows)
        size = len(rows)
        if size == 0:
            raise ValueError('latency matrix is empty')
        for i, row in enumerate(rows):
            if len(row) != size:
                raise ValueError('latency matrix is not square')
            if row[i] != 0:
                raise ValueError('latency matrix diagonal must be zero')
            for j, value in enumerate(row):
                if value < 0:
                    raise ValueError('latencies must be non-negative')
                if value != rows[j][i]:
                    raise ValueError('latency matrix must be symmetric')

    @property
    def n_replicas(self) -> int:
        return len(self.latency)

    def between(self, i: int, j: int) -> float:
        return self.latency[i][j]

    @property
    def max_latency(self) -> float:
        return max(max(row) for row in self.latency)

    @classmethod
    def from_preset(cls, name: str, replicas: int = 3) -> 'LatencyMatrix':
        if name == 'zero':
            rows = tuple(
                tuple(0.0 for _ in range(replicas)) for _ in range(replicas)
            )
            return cls(rows, preset=name)
        if name not in PRESETS:
            raise ValueError(f'unknown latency preset {name!r}')
        if replicas != len(REAL_LATENCY):
            raise ValueError(
                f'preset {name!r} is defined for '
                f'{len(REAL_LATENCY)} replicas'
            )
        scale = 10 if name == 'real_x10' else 1
        rows = tuple(tuple(v * scale for v in row) for row in REAL_LATENCY)
        return cls(rows, preset=name)


@dataclass(frozen=True)
class Mix:
    """Percentage of each request kind"""
    add: float = 60
    remove: float = 12
    upmove: float = 14
    downmove: float = 14

    def __post_init__(self):
        if abs(self.add + self.remove + self.upmove + self.downmove
               - 100) > 1e-9:
            raise ValueError('mix must sum to 100')


@dataclass(frozen=True)
class WorkloadSpec:
    warmup_nodes: int = 997
    ops_per_replica: int = 250
    mix: Mix = field(default_factory=Mix)
    conflict_rate: float = 0.0
    mean_gap_ms: float = 10.0


@dataclass(frozen=True)
class SimConfig:
    algorithm: Algorithm
    latency: LatencyMatrix
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    seed: int = 42
    heartbeat_ms: float = 100.0
    runs: int = 1
    check_every_event: bool = False

    @property
    def replicas(self) -> int:
        return self.latency.n_replicas

    def as_data(self) -> dict:
        """JSON-ready form accepted back by the config serializer"""
        if self.latency.preset == 'custom':
            latency = {'matrix': [list(row) for row in self.latency.latency]}
        else:
            latency = {'preset': self.latency.preset}
        workload = asdict(self.workload)
        return {
            'algorithm': self.algorithm.value,
            'latency': latency,
            'replicas': self.replicas,
            **workload,
            'seed': self.seed,
            'heartbeat_ms': self.heartbeat_ms,
            'runs': self.runs,
            'check_every_event': self.check_every_event,
        }


def seed_override(flag: Optional[int] = None) -> Optional[int]:
    """The --seed flag, else the seed environment variable, else None"""
    if flag is not None:
        return flag
    raw = os.environ.get(settings.MARAM_SEED_ENV)
    if raw is None or raw == '':
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(
            f'{settings.MARAM_SEED_ENV} must be an integer, got {raw!r}'
        )


def parse_config(data, seed: Optional[int] = None) -> SimConfig:
    from sim.serializers import SimConfigSerializer

    override = seed_override(seed)
    if override is not None and isinstance(data, dict):
        data = {**data, 'seed': override}
    serializer = SimConfigSerializer(data=data)
    if not serializer.is_valid():
        raise ConfigError('invalid simulation config', serializer.errors)
    return serializer.to_config()


def load_config(path: Union[str, Path],
                seed: Optional[int] = None,
                algorithm: Optional[str] = None) -> SimConfig:
    """Read and validate a JSON config file"""
    try:
        with open(path, encoding='utf-8') as handle:
            data = json.load(handle)
    except OSError as err:
        raise ConfigError(f'cannot read config {path}: {err}')
    except json.JSONDecodeError as err:
        raise ConfigError(f'malformed JSON in {path}: {err}')
    if not isinstance(data, dict):
        raise ConfigError(f'config {path} must be a JSON object')
    if algorithm is not None:
        data['algorithm'] = algorithm
    config = parse_config(data, seed)
    logger.info('loaded %s config from %s', config.algorithm.value, path)
    return config


def replica_name(replica: int, latency: LatencyMatrix) -> str:
    if latency.preset in ('real', 'real_x10'):
        return REPLICA_NAMES[replica]
    return f'replica {replica}'
