"""
Vector clocks
"""
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Mapping, Tuple


class Ordering(Enum):
    LESS = 'less'
    GREATER = 'greater'
    EQUAL = 'equal'
    CONCURRENT = 'concurrent'


@dataclass(frozen=True)
class VectorClock:
    """Per-replica counters, absent entries count as zero"""
    counts: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        entries = {}
        for replica, count in self.counts:
            replica, count = int(replica), int(count)
            if count < 0:
                raise ValueError('vector clock entries are non-negative')
            if count:
                entries[replica] = count
        object.__setattr__(self, 'counts', tuple(sorted(entries.items())))
        object.__setattr__(self, '_entries', entries)

    @classmethod
    def of(cls, entries: Mapping[int, int]) -> 'VectorClock':
        return cls(tuple(entries.items()))

    @property
    def entries(self) -> Dict[int, int]:
        return dict(self._entries)

    def items(self):
        return self.counts

    def get(self, replica: int) -> int:
        return self._entries.get(replica, 0)

    def tick(self, replica: int) -> 'VectorClock':
        entries = dict(self._entries)
        entries[replica] = entries.get(replica, 0) + 1
        return VectorClock.of(entries)

    def merge(self, other: 'VectorClock') -> 'VectorClock':
        entries = dict(self._entries)
        for replica, count in other.counts:
            if count > entries.get(replica, 0):
                entries[replica] = count
        return VectorClock.of(entries)

    def dominates(self, other: 'VectorClock') -> bool:
        """True when every entry of other is covered by this clock"""
        return all(count <= self.get(r) for r, count in other.counts)

    def total(self) -> int:
        return sum(self._entries.values())

    def __str__(self):
        inner = ', '.join(f'{r}:{c}' for r, c in self.counts)
        return f'[{inner}]'


def vc_compare(a: VectorClock, b: VectorClock) -> Ordering:
    less = greater = False
    for replica in a._entries.keys() | b._entries.keys():
        x, y = a.get(replica), b.get(replica)
        if x < y:
            less = True
        elif x > y:
            greater = True
    if less and greater:
        return Ordering.CONCURRENT
    if less:
        return Ordering.LESS
    if greater:
        return Ordering.GREATER
    return Ordering.EQUAL
