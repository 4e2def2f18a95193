"""
Naive last-writer-wins tree without any cycle handling
"""
import logging
from typing import Dict, Iterable, List, Tuple

from baselines.udr import order_key
from crdt.delivery import CausalReplica
from crdt.operations import Operation, OpKind, OpOutcome, OpStatus
from tree.state import NodeId

logger = logging.getLogger(__name__)


class NaiveReplica(CausalReplica):
    """Parent of each node is set by its highest-tagged add or move.

    Converges, but concurrent moves can leave cycles detached from the root.
    """
    name = 'naive'

    def __init__(self, replica_id: int, replicas: Iterable[int] = ()):
        super().__init__(replica_id, replicas)
        self.tags: Dict[NodeId, Tuple[int, int]] = {}

    def _apply(self, op: Operation, now: float) -> List[OpOutcome]:
        tag = order_key(op)
        if op.kind is OpKind.ADD:
            self.tree.add(op.n, op.p)
            self.tags[op.n] = tag
            status = OpStatus.APPLIED
        elif op.kind is OpKind.REMOVE:
            self.tree.tombstone(op.n)
            status = OpStatus.APPLIED
        elif tag > self.tags[op.n]:
            self.tree.set_parent(op.n, op.new_parent)
            self.tags[op.n] = tag
            status = OpStatus.APPLIED
        else:
            logger.debug('replica %s: %s overwritten', self.id, op)
            status = OpStatus.SKIPPED
        return [self._record(op, status, False, now)]
