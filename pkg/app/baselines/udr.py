"""
Undo-do-redo replica: every operation in one total order, late arrivals
roll back and replay the operations ordered after them.
"""
import bisect
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

from crdt.delivery import CausalReplica
from crdt.operations import Operation, OpKind, OpOutcome, OpStatus
from tree.exceptions import TreeError
from tree.state import NodeId, TreeState, check_move
from tree.working import WorkingTree

logger = logging.getLogger(__name__)

OrderKey = Tuple[int, int]


def order_key(op: Operation) -> OrderKey:
    """Lamport-style total order: clock sum, then origin"""
    return op.vc.total(), op.origin


@dataclass(frozen=True)
class UndoRecord:
    kind: OpKind
    n: NodeId
    applied: bool = True
    previous: Optional[NodeId] = None


def _do(tree: WorkingTree, op: Operation) -> UndoRecord:
    if op.kind is OpKind.ADD:
        tree.add(op.n, op.p)
        return UndoRecord(op.kind, op.n)
    if op.kind is OpKind.REMOVE:
        return UndoRecord(op.kind, op.n, applied=tree.tombstone(op.n))
    try:
        check_move(tree, op.n, op.new_parent)
    except TreeError as err:
        logger.debug('skipping %s: %s', op, err)
        return UndoRecord(op.kind, op.n, applied=False)
    return UndoRecord(
        op.kind,
        op.n,
        previous=tree.set_parent(op.n, op.new_parent)
    )


def _undo(tree: WorkingTree, record: UndoRecord):
    if not record.applied:
        return
    if record.kind is OpKind.ADD:
        tree.discard(record.n)
    elif record.kind is OpKind.REMOVE:
        tree.revive(record.n)
    else:
        tree.set_parent(record.n, record.previous)


def udr_apply_one(state: TreeState,
                  op: Operation) -> Tuple[TreeState, UndoRecord]:
    """Apply op at its position; a move whose guard fails is skipped"""
    tree = WorkingTree(state)
    record = _do(tree, op)
    return tree.snapshot(), record


def udr_undo(state: TreeState, record: UndoRecord) -> TreeState:
    tree = WorkingTree(state)
    _undo(tree, record)
    return tree.snapshot()


def udr_replay(ops: Iterable[Operation]) -> TreeState:
    """Apply ops in total order from the initial tree"""
    tree = WorkingTree()
    for op in sorted(ops, key=order_key):
        _do(tree, op)
    return tree.snapshot()


class UdrReplica(CausalReplica):
    """Replica keeping ``applied`` sorted by order key.

    Every operation stays transient until all replicas observed it: until
    then a concurrent arrival may sort before it and replay it.
    """
    name = 'udr'

    def __init__(self, replica_id: int, replicas: Iterable[int] = ()):
        super().__init__(replica_id, replicas)
        self.applied: List[Tuple[OrderKey, Operation, UndoRecord]] = []
        self.undone = 0

    def _apply(self, op: Operation, now: float) -> List[OpOutcome]:
        key = order_key(op)
        position = bisect.bisect(self.applied, (key,))
        tail = self.applied[position:]
        del self.applied[position:]
        for _, _, record in reversed(tail):
            _undo(self.tree, record)
        if tail:
            self.undone += len(tail)
            logger.debug(
                'replica %s rolls back %d ops for %s',
                self.id, len(tail), op
            )

        record = _do(self.tree, op)
        self.applied.append((key, op, record))
        changes = [self._record(op, self._status(record), True, now)]

        for later_key, later, _ in tail:
            redone = _do(self.tree, later)
            self.applied.append((later_key, later, redone))
            status = self._status(redone)
            if self.outcomes[later.id].status is not status:
                changes.append(self._restate(later.id, status))
        return changes

    @staticmethod
    def _status(record: UndoRecord) -> OpStatus:
        if record.kind is OpKind.MOVE and not record.applied:
            return OpStatus.SKIPPED
        return OpStatus.APPLIED
