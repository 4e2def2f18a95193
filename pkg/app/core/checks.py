"""
Exhaustive property suites over small trees.

``seq`` checks that the guards are exactly the operation preconditions and
that every valid sequential step keeps the tree invariant. ``commute``
delivers every pair of concurrently generated operations in both orders.
``stability`` runs seeded fuzz schedules and checks unique adds, tombstone
monotonicity and that stable outcomes never change. ``upmoves`` resolves
random antichains of concurrent up-moves and ``codec`` round-trips random
operations through the op-log encoding.
"""
import copy
import itertools
import json
import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Tuple

from core.fuzz import run_fuzz
from crdt.clock import VectorClock
from crdt.codec import decode_op, encode_op
from crdt.exceptions import DecodeError
from crdt.operations import (
    Operation,
    OpId,
    OpKind,
    OpStatus,
    Priority,
    Request,
)
from crdt.replica import MaramReplica, resolve, resolve_statuses
from sim.config import Algorithm
from tree.exceptions import TreeError
from tree.state import (
    ROOT,
    MoveType,
    NodeId,
    TreeState,
    apply_add,
    apply_move,
    apply_remove,
    check_invariant,
    classify_move,
    rank,
    render_tree,
)

logger = logging.getLogger(__name__)

SCOPES = ('seq', 'commute', 'stability', 'upmoves', 'codec')


@dataclass
class CheckReport:
    name: str
    tested: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, message: str):
        logger.debug('%s: %s', self.name, message)
        self.failures.append(message)

    def __str__(self):
        verdict = 'ok' if self.ok else f'{len(self.failures)} failure(s)'
        return f'{self.name}: {self.tested} cases tested, {verdict}'


def tree_shapes(bound: int) -> Iterator[TreeState]:
    """Every tree with up to bound nodes, one labelling per shape.

    Node i hangs below a node with a smaller index, which reaches every
    rooted shape.
    """
    for size in range(1, bound + 1):
        nodes = [ROOT] + [NodeId(0, i) for i in range(1, size)]
        choices = [range(i) for i in range(1, size)]
        for parents in itertools.product(*choices):
            parent = {ROOT: ROOT}
            for i, index in enumerate(parents, start=1):
                parent[nodes[i]] = nodes[index]
            yield TreeState(ROOT, nodes, parent)


def _reference_ancestors(state: TreeState, n: NodeId) -> set:
    found = set()
    current = n
    while current != state.root:
        current = state.parent[current]
        found.add(current)
    return found


def _fresh(state: TreeState) -> NodeId:
    return NodeId(0, max(node.seq for node in state.nodes) + 1)


Step = Tuple[str, Callable, tuple, bool]


def _candidates(state: TreeState) -> Iterator[Step]:
    """Every operation on state, with whether its precondition holds"""
    nodes = sorted(state.nodes)
    fresh = _fresh(state)
    missing = NodeId(9, 9)
    for p in nodes:
        yield 'add', apply_add, (fresh, p), True
    yield 'add', apply_add, (nodes[-1], ROOT), False
    yield 'add', apply_add, (fresh, missing), False
    for n in nodes:
        yield 'remove', apply_remove, (n,), n != state.root
    yield 'remove', apply_remove, (missing,), False
    for n, p in itertools.product(nodes, nodes):
        valid = (
            n != state.root and n != p
            and n not in _reference_ancestors(state, p)
        )
        yield 'move', apply_move, (n, p), valid
    yield 'move', apply_move, (missing, ROOT), False


def _describe(name: str, args: tuple) -> str:
    return f'{name}({", ".join(str(a) for a in args)})'


def _path(came_from: Dict, state: TreeState) -> List[str]:
    steps = []
    while came_from.get(state) is not None:
        state, label = came_from[state]
        steps.append(label)
    return list(reversed(steps))


def check_seq(bound: int = 4, length: Optional[int] = None) -> CheckReport:
    """Sequential safety over every tree of at most bound nodes.

    Explores every operation sequence of at most ``length`` steps whose
    states stay within bound nodes.
    """
    length = bound if length is None else length
    report = CheckReport('seq')
    frontier = list(tree_shapes(bound))
    came_from: Dict[TreeState, Optional[tuple]] = {
        state: None for state in frontier
    }
    for _ in range(length):
        following = []
        for state in frontier:
            for name, effector, args, valid in _candidates(state):
                report.tested += 1
                label = _describe(name, args)
                try:
                    result = effector(state, *args)
                except TreeError as err:
                    if valid:
                        report.fail(
                            f'{label} rejected ({err.code}) after '
                            f'{_path(came_from, state)} on\n'
                            f'{render_tree(state)}'
                        )
                    continue
                if not valid:
                    report.fail(
                        f'{label} accepted after {_path(came_from, state)}'
                        f' on\n{render_tree(state)}'
                    )
                    continue
                invariant = check_invariant(result)
                if not invariant.ok:
                    report.fail(
                        f'{label} after {_path(came_from, state)}: '
                        f'{invariant}'
                    )
                    continue
                if len(result.nodes) <= bound and result not in came_from:
                    came_from[result] = (state, label)
                    following.append(result)
        frontier = following
    return report


def _requests(state) -> List[Request]:
    nodes = sorted(state.nodes)
    requests = [Request.add(p) for p in nodes]
    requests.extend(Request.remove(n) for n in nodes if n != state.root)
    for n, p in itertools.product(nodes, nodes):
        if n != state.root and n != p and \
                n not in _reference_ancestors(state, p):
            requests.append(Request.move(n, p))
    return requests


def _generated(replica: MaramReplica, requests: List[Request]):
    ops = []
    for request in requests:
        ops.append(copy.deepcopy(replica).generate(request))
    return ops


def check_commute(bound: int = 5) -> CheckReport:
    """Concurrent pairs delivered in both orders reach the same state"""
    report = CheckReport('commute')
    ids = (0, 1, 2)
    for shape in tree_shapes(bound):
        builder = MaramReplica(0, ids)
        for node in sorted(shape.nodes - {ROOT}):
            builder.generate(Request.add(shape.parent[node], n=node))
        origins = []
        for replica_id in (1, 2):
            origin = MaramReplica(replica_id, ids)
            for op in builder.log:
                origin.deliver(op)
            origins.append(origin)
        requests = _requests(shape)
        firsts = _generated(origins[0], requests)
        seconds = _generated(origins[1], requests)

        for a, b in itertools.product(firsts, seconds):
            report.tested += 1
            one = copy.deepcopy(builder)
            one.deliver(a)
            one.deliver(b)
            two = copy.deepcopy(builder)
            two.deliver(b)
            two.deliver(a)
            where = f'{a} || {b} on\n{render_tree(shape)}'
            if one.state != two.state:
                report.fail(
                    f'divergence: {where}\n'
                    f'-- delivered {a.id} first:\n{render_tree(one.state)}\n'
                    f'-- delivered {b.id} first:\n{render_tree(two.state)}'
                )
                continue
            statuses = [
                (one.outcomes[op.id].status, two.outcomes[op.id].status)
                for op in (a, b)
            ]
            if any(x is not y for x, y in statuses):
                report.fail(f'status divergence: {where}')
            elif not check_invariant(one.state).ok:
                report.fail(f'{check_invariant(one.state)}: {where}')
            elif one.state != resolve(one.log):
                report.fail(f'incremental state differs from resolve: {where}')
    return report


def check_stability(schedules: int = 50, seed: int = 0,
                    ops: int = 30) -> CheckReport:
    """Unique adds, monotone tombstones and permanent stable outcomes"""
    report = CheckReport('stability')
    for index in range(schedules):
        for algorithm in (Algorithm.MARAM, Algorithm.UDR):
            report.tested += 1
            result = run_fuzz(seed + index, 3, ops, algorithm)
            for failure in result.failures:
                report.fail(
                    f'{algorithm.value} seed {seed + index}: {failure}'
                )
            adds = [
                op.n for op in result.execution.replicas[0].log
                if op.kind is OpKind.ADD
            ]
            if len(adds) != len(set(adds)):
                report.fail(
                    f'{algorithm.value} seed {seed + index}: '
                    f'duplicate add identifiers'
                )
    return report


def random_operation(rng: random.Random) -> Operation:
    """Any well-formed operation over four replicas"""
    origin = rng.randrange(4)
    seq = rng.randrange(1, 50)
    entries = {r: rng.randrange(0, 60) for r in range(4)}
    entries[origin] = seq
    vc = VectorClock.of(entries)
    kind = rng.choice([OpKind.ADD, OpKind.REMOVE, OpKind.MOVE])

    def node():
        return NodeId(rng.randrange(4), rng.randrange(1, 100))

    if kind is OpKind.ADD:
        return Operation(OpId(origin, seq), kind, vc, n=node(), p=node())
    if kind is OpKind.REMOVE:
        return Operation(OpId(origin, seq), kind, vc, n=node())
    return Operation(
        OpId(origin, seq),
        kind,
        vc,
        n=node(),
        new_parent=rng.choice([ROOT, node()]),
        mtype=rng.choice(list(MoveType)),
        crit_anc=frozenset(node() for _ in range(rng.randrange(6))),
        prio=Priority(vc.total(), origin)
    )


def check_codec(trials: int = 10000, seed: int = 0) -> CheckReport:
    """Records decode to the encoded operation and re-encode byte for byte"""
    report = CheckReport('codec')
    rng = random.Random(seed)
    for _ in range(trials):
        report.tested += 1
        op = random_operation(rng)
        raw = encode_op(op)
        try:
            decoded = decode_op(raw)
        except DecodeError as err:
            report.fail(f'{op.id}: {err}')
            continue
        if decoded != op:
            report.fail(f'{op.id}: decoded to a different operation')
        elif encode_op(decoded) != raw:
            report.fail(f'{op.id}: re-encoding changed the bytes')
        elif op.kind is OpKind.MOVE:
            listed = json.loads(raw)['crit_anc']
            if listed != [str(n) for n in sorted(op.crit_anc)]:
                report.fail(f'{op.id}: crit_anc not in sorted order')
    return report


def _random_tree(replicas: List[MaramReplica], rng: random.Random,
                 size: int) -> List[NodeId]:
    builder = replicas[0]
    nodes = [ROOT]
    for _ in range(size):
        op = builder.generate(Request.add(rng.choice(nodes)))
        for replica in replicas[1:]:
            replica.deliver(op)
        nodes.append(op.n)
    return nodes


def check_upmoves(trials: int = 10000, seed: int = 0,
                  replicas: int = 4, size: int = 12) -> CheckReport:
    """Concurrent up-moves of distinct nodes all win and stay acyclic"""
    report = CheckReport('upmoves')
    rng = random.Random(seed)
    ids = range(replicas)
    while report.tested < trials:
        cluster = [MaramReplica(i, ids) for i in ids]
        nodes = _random_tree(cluster, rng, size)
        base = cluster[0].tree
        deep = [n for n in nodes if rank(base, n) >= 2]
        if len(deep) < 2:
            continue
        report.tested += 1
        picked = rng.sample(deep, min(replicas, len(deep)))
        moves = []
        for replica, n in zip(cluster, picked):
            targets = [p for p in nodes if rank(base, p) < rank(base, n) - 1]
            p = rng.choice(targets)
            if classify_move(base, n, p) is not MoveType.UP:
                report.fail(f'move({n}, {p}) not classified up')
            moves.append(replica.generate(Request.move(n, p)))
        log = cluster[0].log + moves[1:]
        state = resolve(log)
        where = ', '.join(str(op) for op in moves)
        if not check_invariant(state).ok:
            report.fail(f'{check_invariant(state)}: {where}')
            continue
        statuses = resolve_statuses(log)
        for op in moves:
            if statuses[op.id] is not OpStatus.APPLIED:
                report.fail(f'{op} lost against {where}')
            elif state.parent[op.n] != op.new_parent:
                report.fail(f'{op} not reflected in the tree')
    return report


def run_checks(scope: str, bound: Optional[int] = None) -> List[CheckReport]:
    scopes = SCOPES if scope == 'all' else (scope,)
    reports = []
    for name in scopes:
        if name == 'seq':
            reports.append(check_seq(bound or 4))
        elif name == 'commute':
            reports.append(check_commute(bound or 5))
        elif name == 'stability':
            reports.append(check_stability(bound or 50))
        elif name == 'upmoves':
            reports.append(check_upmoves(bound or 10000))
        else:
            reports.append(check_codec(bound or 10000))
    return reports
