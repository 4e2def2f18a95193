"""
Causal delivery shared by every replica flavor
"""
import logging
from dataclasses import replace
from typing import Callable, Dict, Iterable, List, Set

from crdt.clock import VectorClock
from crdt.exceptions import CausalityError, OperationError
from crdt.operations import (
    Operation,
    OpId,
    OpKind,
    OpOutcome,
    OpStatus,
    Request,
)
from tree.exceptions import PreconditionViolated, TreeError
from tree.state import NodeId, TreeState, check_add, check_move, check_remove
from tree.working import WorkingTree

logger = logging.getLogger(__name__)

EMPTY_CLOCK = VectorClock()


class CausalReplica:
    """Single-threaded replica delivering operations in causal order.

    Out-of-order arrivals wait in ``buffer`` until their causal predecessors
    are delivered; duplicates are ignored. Subclasses apply delivered
    operations in ``_apply`` and may track transient ops in ``_pending``,
    which become stable once every replica has observed them.
    """
    name = 'causal'

    def __init__(self, replica_id: int, replicas: Iterable[int] = ()):
        self.id = replica_id
        self.replicas = tuple(sorted(set(replicas) | {replica_id}))
        self.tree = WorkingTree()
        self.clock = VectorClock()
        self.known: Dict[int, VectorClock] = {replica_id: self.clock}
        self.log: List[Operation] = []
        self.buffer: Dict[OpId, Operation] = {}
        self.outcomes: Dict[OpId, OpOutcome] = {}
        self._ops: Dict[OpId, Operation] = {}
        self._pending: Set[OpId] = set()

    def __repr__(self):
        return f'<{type(self).__name__} {self.id}>'

    @property
    def state(self) -> TreeState:
        return self.tree.snapshot()

    def validate(self, request: Request):
        """Raise PreconditionViolated unless the request holds locally"""
        try:
            if request.kind is OpKind.ADD:
                node = request.n if request.n is not None else self._fresh()
                check_add(self.tree, node, request.parent)
            elif request.kind is OpKind.REMOVE:
                check_remove(self.tree, request.n)
            elif request.kind is OpKind.MOVE:
                check_move(self.tree, request.n, request.parent)
            else:
                raise OperationError(
                    'not-a-request',
                    f'{request.kind.value} is not a client request'
                )
        except TreeError as err:
            raise PreconditionViolated(err) from err

    def generate(self, request: Request, now: float = 0.0) -> Operation:
        """Stamp a valid request, apply it locally and return the op"""
        self.validate(request)
        op = self._stamp(request)
        self.deliver(op, now)
        return op

    def _fresh(self) -> NodeId:
        return NodeId(self.id, self.clock.get(self.id) + 1)

    def _stamp(self, request: Request) -> Operation:
        vc = self.clock.tick(self.id)
        op_id = OpId(self.id, vc.get(self.id))
        if request.kind is OpKind.ADD:
            node = request.n if request.n is not None else self._fresh()
            return Operation(op_id, OpKind.ADD, vc, n=node, p=request.parent)
        if request.kind is OpKind.REMOVE:
            return Operation(op_id, OpKind.REMOVE, vc, n=request.n)
        return Operation(
            op_id,
            OpKind.MOVE,
            vc,
            n=request.n,
            new_parent=request.parent
        )

    def deliver(self, op: Operation, now: float = 0.0) -> List[OpOutcome]:
        """Deliver op, or buffer it until its causal predecessors arrive.

        Returns the outcome changes caused by this arrival, including those
        of buffered operations it released.
        """
        if op.kind is OpKind.HEARTBEAT:
            return self.observe(op, now)
        if self.is_delivered(op) or op.id in self.buffer:
            logger.debug('replica %s ignores duplicate %s', self.id, op.id)
            return []
        if not self._deliverable(op):
            logger.debug('replica %s buffers %s', self.id, op)
            self.buffer[op.id] = op
            return []
        changes = self._accept(op, now)
        changes.extend(self._drain(now))
        return changes

    def observe(self, heartbeat: Operation,
                now: float = 0.0) -> List[OpOutcome]:
        """Record a peer's clock without touching the tree.

        A heartbeat ahead of the sender's delivered ops is dropped: the
        ops it covers could still be concurrent arrivals.
        """
        origin = heartbeat.origin
        if heartbeat.vc.get(origin) > self.clock.get(origin):
            logger.debug('replica %s drops early heartbeat of %s',
                         self.id, origin)
            return []
        self._observe_clock(origin, heartbeat.vc)
        return self._refresh_stability(now)

    def heartbeat(self) -> Operation:
        return Operation.heartbeat(self.id, self.clock)

    def is_delivered(self, op: Operation) -> bool:
        return op.seq <= self.clock.get(op.origin)

    def is_stable(self, op: Operation) -> bool:
        if op.id not in self._ops:
            raise CausalityError(
                'undelivered-operation',
                f'{op.id} is not delivered at replica {self.id}'
            )
        return self.outcomes[op.id].stable

    def observed_everywhere(self, op: Operation) -> bool:
        """Every replica's latest known clock covers op"""
        return all(
            self.known.get(replica, EMPTY_CLOCK).get(op.origin) >= op.seq
            for replica in self.replicas
        )

    def operation(self, op_id: OpId) -> Operation:
        return self._ops[op_id]

    def _deliverable(self, op: Operation) -> bool:
        if op.seq != self.clock.get(op.origin) + 1:
            return False
        return all(
            count <= self.clock.get(replica)
            for replica, count in op.vc.items()
            if replica != op.origin
        )

    def _drain(self, now: float) -> List[OpOutcome]:
        changes = []
        progress = True
        while progress and self.buffer:
            progress = False
            for op_id in sorted(self.buffer):
                op = self.buffer[op_id]
                if self._deliverable(op):
                    del self.buffer[op_id]
                    changes.extend(self._accept(op, now))
                    progress = True
        return changes

    def _accept(self, op: Operation, now: float) -> List[OpOutcome]:
        self.log.append(op)
        self._ops[op.id] = op
        self.clock = self.clock.merge(op.vc)
        self.known[self.id] = self.clock
        self._observe_clock(op.origin, op.vc)
        changes = self._apply(op, now)
        changes.extend(self._refresh_stability(now))
        return changes

    def _observe_clock(self, origin: int, vc: VectorClock):
        self.known[origin] = self.known.get(origin, EMPTY_CLOCK).merge(vc)

    def _apply(self, op: Operation, now: float) -> List[OpOutcome]:
        raise NotImplementedError

    def _record(self, op: Operation, status: OpStatus, transient: bool,
                now: float) -> OpOutcome:
        """Record the first outcome of a newly delivered op"""
        if transient:
            self._pending.add(op.id)
            outcome = OpOutcome(op.id, status, stable=False)
        else:
            outcome = OpOutcome(op.id, status, stable=True, stable_time=now)
        self.outcomes[op.id] = outcome
        return outcome

    def _restate(self, op_id: OpId, status: OpStatus) -> OpOutcome:
        outcome = replace(self.outcomes[op_id], status=status)
        self.outcomes[op_id] = outcome
        return outcome

    def _stability_test(self) -> Callable[[Operation], bool]:
        return self.observed_everywhere

    def _refresh_stability(self, now: float) -> List[OpOutcome]:
        changes = []
        if not self._pending:
            return changes
        ready = self._stability_test()
        for op_id in sorted(self._pending):
            if ready(self._ops[op_id]):
                self._pending.discard(op_id)
                outcome = replace(
                    self.outcomes[op_id],
                    stable=True,
                    stable_time=now
                )
                self.outcomes[op_id] = outcome
                changes.append(outcome)
        return changes

    @property
    def pending(self) -> Set[OpId]:
        """Delivered ops whose outcome may still change"""
        return set(self._pending)
