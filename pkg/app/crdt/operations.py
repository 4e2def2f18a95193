"""
Operations shipped between replicas, client requests and op outcomes
"""
from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Optional

from crdt.clock import VectorClock
from tree.state import MoveType, NodeId


class OpKind(Enum):
    ADD = 'add'
    REMOVE = 'remove'
    MOVE = 'move'
    HEARTBEAT = 'hb'


class OpStatus(Enum):
    APPLIED = 'applied'
    SKIPPED = 'skipped'


@dataclass(frozen=True, order=True)
class OpId:
    origin: int
    seq: int

    def __str__(self):
        return f'{self.origin}:{self.seq}'


@dataclass(frozen=True, order=True)
class Priority:
    """Move priority, compared by number then origin"""
    num: int
    origin: int


def lamport_priority(vc: VectorClock, origin: int) -> Priority:
    """Sum of the generation clock, unique since the own entry grows"""
    return Priority(vc.total(), origin)


@dataclass(frozen=True)
class Operation:
    """Effector generated at an origin replica and applied everywhere.

    Moves generated by Maram replicas carry ``mtype``, ``crit_anc`` and
    ``prio`` computed against the origin state, never recomputed.
    """
    id: OpId
    kind: OpKind
    vc: VectorClock
    n: Optional[NodeId] = None
    p: Optional[NodeId] = None
    new_parent: Optional[NodeId] = None
    mtype: Optional[MoveType] = None
    crit_anc: FrozenSet[NodeId] = frozenset()
    prio: Optional[Priority] = None

    def __post_init__(self):
        object.__setattr__(self, 'crit_anc', frozenset(self.crit_anc))

    @property
    def origin(self) -> int:
        return self.id.origin

    @property
    def seq(self) -> int:
        return self.id.seq

    @property
    def is_move(self) -> bool:
        return self.kind is OpKind.MOVE

    @classmethod
    def heartbeat(cls, origin: int, clock: VectorClock) -> 'Operation':
        """No-effect message carrying the sender's clock"""
        return cls(OpId(origin, clock.get(origin)), OpKind.HEARTBEAT, clock)

    def __str__(self):
        if self.kind is OpKind.ADD:
            params = f'{self.n}, {self.p}'
        elif self.kind is OpKind.MOVE:
            params = f'{self.n}, {self.new_parent}'
        elif self.kind is OpKind.REMOVE:
            params = str(self.n)
        else:
            params = ''
        return f'{self.kind.value}({params})@{self.id}'


@dataclass(frozen=True)
class Request:
    """Client request submitted at an origin replica"""
    kind: OpKind
    n: Optional[NodeId] = None
    parent: Optional[NodeId] = None

    @classmethod
    def add(cls, parent: NodeId, n: Optional[NodeId] = None) -> 'Request':
        return cls(OpKind.ADD, n=n, parent=parent)

    @classmethod
    def remove(cls, n: NodeId) -> 'Request':
        return cls(OpKind.REMOVE, n=n)

    @classmethod
    def move(cls, n: NodeId, parent: NodeId) -> 'Request':
        return cls(OpKind.MOVE, n=n, parent=parent)


@dataclass(frozen=True)
class OpOutcome:
    op_id: OpId
    status: OpStatus
    stable: bool
    stable_time: Optional[float] = None
