"""
Maram replica and the canonical resolution of an operation log
"""
import logging
from collections import defaultdict
from dataclasses import replace
from typing import (
    Callable,
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Optional,
    Set,
    Tuple,
)

from crdt.clock import Ordering, VectorClock, vc_compare
from crdt.delivery import CausalReplica
from crdt.exceptions import CausalityError, OperationError
from crdt.operations import (
    Operation,
    OpId,
    OpKind,
    OpOutcome,
    OpStatus,
    Priority,
    Request,
    lamport_priority,
)
from tree.state import (
    ROOT,
    MoveType,
    NodeId,
    TreeState,
    classify_move,
    critical_ancestors,
)

logger = logging.getLogger(__name__)

PriorityPolicy = Callable[[VectorClock, int], Priority]


def _require_move(op: Operation):
    if not op.is_move:
        raise OperationError('not-a-move', f'{op} is not a move')
    if op.mtype is None or op.prio is None:
        raise OperationError(
            'missing-move-metadata',
            f'{op} carries no move type or priority'
        )


def crit_anc_overlap(op1: Operation, op2: Operation) -> bool:
    """Each move's node lies in the other's shipped critical ancestors"""
    _require_move(op1)
    _require_move(op2)
    return op1.n in op2.crit_anc and op2.n in op1.crit_anc


def _concurrent(a: Operation, b: Operation) -> bool:
    return vc_compare(a.vc, b.vc) is Ordering.CONCURRENT


def _outranks(a: Operation, b: Operation) -> bool:
    return a.prio > b.prio


def _wins_against(op: Operation, other: Operation) -> bool:
    """False when the concurrent move ``other`` suppresses ``op``"""
    if op.mtype is MoveType.UP:
        return not (
            other.mtype is MoveType.UP
            and other.n == op.n
            and _outranks(other, op)
        )
    if other.n != op.n and not crit_anc_overlap(op, other):
        return True
    if other.mtype is MoveType.UP:
        return False
    return not _outranks(other, op)


def wins(op: Operation, log: Iterable[Operation]) -> bool:
    """Win status of a move against every concurrent move of the log.

    Up-moves lose only to a concurrent up-move of the same node with a
    higher priority. Down-moves lose to any conflicting concurrent up-move
    and to conflicting concurrent down-moves with a higher priority.
    Losing opponents still suppress.
    """
    _require_move(op)
    return all(
        _wins_against(op, other)
        for other in log
        if other.is_move and other.id != op.id and _concurrent(other, op)
    )


def causal_key(op: Operation) -> Tuple[int, int]:
    """Linear extension of happens-before: clock total, then origin"""
    return op.vc.total(), op.origin


def _find_cycle(parent: Mapping[NodeId, NodeId],
                start: NodeId) -> Optional[List[NodeId]]:
    """The cycle reached by walking up from start, if there is one"""
    index: Dict[NodeId, int] = {}
    path: List[NodeId] = []
    current = start
    while current not in index:
        up = parent.get(current)
        if up is None or up == current:
            return None
        index[current] = len(path)
        path.append(current)
        current = up
    return path[index[current]:]


def _victim(move: Operation, effective: List[Operation]) -> Operation:
    """Move to demote from a cycle that applying ``move`` closed"""
    if move in effective and move.mtype is MoveType.DOWN:
        return move
    downs = [other for other in effective if other.mtype is MoveType.DOWN]
    concurrent = [other for other in downs if _concurrent(other, move)]
    if concurrent:
        return min(concurrent, key=lambda other: other.prio)
    logger.warning('cycle through %s has no concurrent down-move', move)
    if move in effective:
        return move
    return min(downs or effective, key=lambda other: other.prio)


def settle_parents(
    add_parent: Mapping[NodeId, NodeId],
    winners: Iterable[Operation],
) -> Tuple[Dict[NodeId, NodeId], FrozenSet[OpId]]:
    """Parents of the moved nodes after breaking cycles among winning moves.

    Winning moves are applied one by one in ``causal_key`` order, each on
    top of the parents left by the moves before it. A down-move that closes
    a cycle is demoted on the spot. An up-move that closes one demotes the
    lowest-priority concurrent down-move on the cycle instead. A demoted
    move's node falls back to its previous surviving move or its add
    parent. Decisions are never revisited by later moves.

    Returns the parents and the demoted ops.
    """
    parent = dict(add_parent)
    applied: Dict[NodeId, List[Operation]] = defaultdict(list)
    demoted = set()

    for move in sorted(winners, key=causal_key):
        applied[move.n].append(move)
        parent[move.n] = move.new_parent
        changed = [move.n]
        while changed:
            cycle = _find_cycle(parent, changed.pop())
            if cycle is None:
                continue
            effective = [applied[node][-1] for node in cycle if applied[node]]
            victim = _victim(move, effective)
            logger.debug('cycle %s: demoting %s', cycle, victim)
            demoted.add(victim.id)
            applied[victim.n].pop()
            stack = applied[victim.n]
            parent[victim.n] = (
                stack[-1].new_parent if stack else add_parent[victim.n]
            )
            changed.extend([move.n, victim.n])

    return {node: parent[node] for node in applied}, frozenset(demoted)


def _check_closed(ops: List[Operation]):
    seqs: Dict[int, List[int]] = defaultdict(list)
    for op in ops:
        seqs[op.origin].append(op.seq)
    counts = {}
    for origin, numbers in seqs.items():
        if sorted(numbers) != list(range(1, len(numbers) + 1)):
            raise CausalityError(
                'causally-unclosed-log',
                f'operations of replica {origin} are not contiguous'
            )
        counts[origin] = len(numbers)
    for op in ops:
        for replica, count in op.vc.items():
            if count > counts.get(replica, 0):
                raise CausalityError(
                    'causally-unclosed-log',
                    f'{op.id} depends on missing operations of {replica}'
                )


def _effective(op: Operation, won: bool, demoted) -> bool:
    # A losing same-node up-move is overwritten, not skipped: up-move
    # outcomes are final at delivery.
    if op.id in demoted:
        return False
    return won or op.mtype is MoveType.UP


def _resolution(log: Iterable[Operation]):
    unique: Dict[OpId, Operation] = {}
    for op in log:
        if op.kind is not OpKind.HEARTBEAT:
            unique.setdefault(op.id, op)
    ops = [unique[op_id] for op_id in sorted(unique)]
    _check_closed(ops)

    add_parent: Dict[NodeId, NodeId] = {}
    tombstones = set()
    by_node: Dict[NodeId, List[Operation]] = defaultdict(list)
    for op in ops:
        if op.kind is OpKind.ADD:
            add_parent[op.n] = op.p
        elif op.kind is OpKind.REMOVE:
            tombstones.add(op.n)
        else:
            _require_move(op)
            by_node[op.n].append(op)

    won = {}
    for moves in by_node.values():
        for op in moves:
            related = list(by_node[op.n])
            for node in op.crit_anc:
                related.extend(by_node.get(node, ()))
            won[op.id] = wins(op, related)

    winners = [
        op for moves in by_node.values() for op in moves if won[op.id]
    ]
    parents, demoted = settle_parents(add_parent, winners)
    state = TreeState(
        ROOT,
        {ROOT, *add_parent},
        {ROOT: ROOT, **add_parent, **parents},
        tombstones
    )
    statuses = {
        op_id: (
            OpStatus.APPLIED
            if _effective(op, won.get(op_id, True), demoted)
            else OpStatus.SKIPPED
        )
        for op_id, op in unique.items()
    }
    return state, statuses


def resolve(log: Iterable[Operation]) -> TreeState:
    """Canonical state of a causally closed log, independent of its order"""
    state, _ = _resolution(log)
    return state


def resolve_statuses(log: Iterable[Operation]) -> Dict[OpId, OpStatus]:
    """Applied/Skipped status of every operation of the log"""
    _, statuses = _resolution(log)
    return statuses


class MaramReplica(CausalReplica):
    """Coordination-free replica resolving concurrent moves by win rules.

    The tree is maintained incrementally and always equals ``resolve`` of
    the delivered log. Only down-moves are transient.
    """
    name = 'maram'

    def __init__(self, replica_id: int, replicas: Iterable[int] = (),
                 priority: PriorityPolicy = lamport_priority):
        super().__init__(replica_id, replicas)
        self.priority = priority
        self._add_parent: Dict[NodeId, NodeId] = {}
        self._moves_by_node: Dict[NodeId, List[Operation]] = defaultdict(list)
        self._wins: Dict[OpId, bool] = {}
        self._winning: Dict[OpId, Operation] = {}
        self._demoted: FrozenSet[OpId] = frozenset()
        self._last_key: Optional[Tuple[int, int]] = None
        self._up_moves: List[Operation] = []
        self._unobserved: Set[OpId] = set()

    def _stamp(self, request: Request) -> Operation:
        op = super()._stamp(request)
        if not op.is_move:
            return op
        return replace(
            op,
            mtype=classify_move(self.tree, op.n, op.new_parent),
            crit_anc=critical_ancestors(self.tree, op.n, op.new_parent),
            prio=self.priority(op.vc, op.origin)
        )

    def _apply(self, op: Operation, now: float) -> List[OpOutcome]:
        if op.kind is OpKind.ADD:
            self.tree.add(op.n, op.p)
            self._add_parent[op.n] = op.p
            return [self._record(op, OpStatus.APPLIED, False, now)]
        if op.kind is OpKind.REMOVE:
            self.tree.tombstone(op.n)
            return [self._record(op, OpStatus.APPLIED, False, now)]
        return self._apply_move(op, now)

    def _related(self, op: Operation) -> List[Operation]:
        related = list(self._moves_by_node.get(op.n, ()))
        for node in op.crit_anc:
            related.extend(self._moves_by_node.get(node, ()))
        return related

    def _applied(self, op_id: OpId) -> bool:
        return _effective(
            self._ops[op_id],
            self._wins[op_id],
            self._demoted
        )

    def _apply_move(self, op: Operation, now: float) -> List[OpOutcome]:
        _require_move(op)
        rivals = [
            other for other in self._related(op)
            if other.id != op.id and _concurrent(other, op)
        ]
        self._moves_by_node[op.n].append(op)
        self._unobserved.add(op.id)
        if op.mtype is MoveType.UP:
            self._up_moves.append(op)
        won = all(_wins_against(op, other) for other in rivals)
        self._wins[op.id] = won
        if won:
            self._winning[op.id] = op

        flipped = []
        for other in rivals:
            if self._wins[other.id] and not _wins_against(other, op):
                self._wins[other.id] = False
                del self._winning[other.id]
                flipped.append(other)

        key = causal_key(op)
        in_order = self._last_key is None or key > self._last_key
        if in_order:
            self._last_key = key

        revisit = {other.id for other in flipped} | self._demoted
        if flipped or (won and not in_order):
            self._settle()
        elif won:
            self.tree.set_parent(op.n, op.new_parent)
            if _find_cycle(self.tree.parent, op.n) is not None:
                self._settle()

        changes = [self._record(
            op,
            OpStatus.APPLIED if self._applied(op.id) else OpStatus.SKIPPED,
            transient=op.mtype is MoveType.DOWN,
            now=now
        )]
        for op_id in sorted(revisit | self._demoted):
            if op_id == op.id:
                continue
            status = (
                OpStatus.APPLIED if self._applied(op_id) else OpStatus.SKIPPED
            )
            if self.outcomes[op_id].status is not status:
                changes.append(self._restate(op_id, status))
        return changes

    def _settle(self):
        parents, self._demoted = settle_parents(
            self._add_parent,
            self._winning.values()
        )
        for node in self._moves_by_node:
            self.tree.set_parent(
                node,
                parents.get(node, self._add_parent[node])
            )

    def _horizon(self, op: Operation) -> Tuple[int, int]:
        """Latest key whose cycle decisions can still demote op"""
        return max(
            [causal_key(op)] + [
                causal_key(up) for up in self._up_moves
                if _concurrent(up, op)
            ]
        )

    def _stability_test(self) -> Callable[[Operation], bool]:
        # A down-move settles once every move ordered before its horizon
        # has been observed everywhere.
        self._unobserved = {
            op_id for op_id in self._unobserved
            if not self.observed_everywhere(self._ops[op_id])
        }
        if not self._unobserved:
            return self.observed_everywhere
        barrier = min(
            causal_key(self._ops[op_id]) for op_id in self._unobserved
        )

        def ready(op: Operation) -> bool:
            return (
                self.observed_everywhere(op)
                and self._horizon(op) < barrier
            )
        return ready

    def _record(self, op: Operation, status: OpStatus, transient: bool,
                now: float) -> OpOutcome:
        if status is OpStatus.SKIPPED:
            logger.debug('replica %s skips %s', self.id, op)
        return super()._record(op, status, transient, now)
