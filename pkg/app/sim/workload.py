"""
Workload generation: a shared warm-up tree and per-replica request intents.

Intents fix what kind of request a replica issues and when. The concrete
nodes are picked against the origin's live tree at issue time, from a seed
carried by the intent, so the streams are reproducible.
"""
import logging
import math
import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence

from crdt.operations import Request
from tree.exceptions import TreeError
from tree.state import (
    NodeId,
    check_move,
    critical_descendants,
    is_strict_ancestor,
    path_to_root,
    rank,
)

logger = logging.getLogger(__name__)

# Offset of the second request of a conflicting pair
PAIR_OFFSET_MS = 0.001

ATTEMPTS = 64


class WorkloadError(ValueError):
    """Workload spec that cannot be generated"""


class IntentKind(Enum):
    ADD = 'add'
    REMOVE = 'remove'
    UPMOVE = 'upmove'
    DOWNMOVE = 'downmove'

    @property
    def is_move(self) -> bool:
        return self in (IntentKind.UPMOVE, IntentKind.DOWNMOVE)


@dataclass(frozen=True, order=True)
class Intent:
    time: float
    replica: int
    index: int
    kind: IntentKind
    salt: int
    pair: Optional[int] = None
    role: int = 0


@dataclass(frozen=True)
class Workload:
    """Warm-up parents by creation index, then one stream per replica.

    Warm-up node i (from 1) is added under the node created at index
    ``warmup_parents[i - 1]``; index 0 is the root.
    """
    warmup_parents: List[int]
    streams: Dict[int, List[Intent]]

    @property
    def intents(self) -> List[Intent]:
        return sorted(i for stream in self.streams.values() for i in stream)

    @property
    def pairs(self) -> int:
        return len({i.pair for i in self.intents if i.pair is not None})


def _counts(mix, total: int) -> Dict[IntentKind, int]:
    """Exact per-kind counts by largest remainder"""
    shares = {
        IntentKind.ADD: mix.add,
        IntentKind.REMOVE: mix.remove,
        IntentKind.UPMOVE: mix.upmove,
        IntentKind.DOWNMOVE: mix.downmove,
    }
    raw = {kind: share * total / 100 for kind, share in shares.items()}
    counts = {kind: math.floor(value) for kind, value in raw.items()}
    leftover = total - sum(counts.values())
    by_remainder = sorted(
        raw,
        key=lambda kind: (counts[kind] - raw[kind], list(shares).index(kind))
    )
    for kind in by_remainder[:leftover]:
        counts[kind] += 1
    return counts


def _pair_up(streams: Dict[int, List[Intent]], pairs: int,
             rng: random.Random) -> Dict[int, List[Intent]]:
    # Most unpaired moves first: any count up to half the moves fits.
    moves = {
        replica: [i for i, intent in enumerate(stream) if intent.kind.is_move]
        for replica, stream in streams.items()
    }
    for pair in range(pairs):
        order = sorted(moves)
        rng.shuffle(order)
        order.sort(key=lambda replica: -len(moves[replica]))
        first, second = order[:2]
        if not moves[second]:
            raise WorkloadError(
                f'cannot place {pairs} conflicting pairs on the move '
                f'requests of the workload'
            )
        i = moves[first].pop(rng.randrange(len(moves[first])))
        j = moves[second].pop(rng.randrange(len(moves[second])))
        leader = replace(streams[first][i], pair=pair, role=0)
        streams[first][i] = leader
        streams[second][j] = replace(
            streams[second][j],
            time=leader.time + PAIR_OFFSET_MS,
            salt=leader.salt,
            pair=pair,
            role=1,
        )
    return {replica: sorted(stream) for replica, stream in streams.items()}


def gen_workload(spec, replicas: int, seed: int) -> Workload:
    """Generate the warm-up and the concurrent request streams.

    A ``conflict_rate`` percent of the move requests are issued as members
    of conflicting pairs: two replicas moving two unrelated nodes under
    each other's subtrees almost simultaneously.
    """
    if replicas < 1:
        raise WorkloadError('at least one replica is needed')
    rng = random.Random(seed)
    total = spec.ops_per_replica
    counts = _counts(spec.mix, total)
    if counts[IntentKind.UPMOVE] + counts[IntentKind.DOWNMOVE] and \
            spec.warmup_nodes < 3:
        raise WorkloadError('moves need a warm-up of at least 3 nodes')

    warmup_parents = [
        rng.randrange(index) for index in range(1, spec.warmup_nodes)
    ]

    streams: Dict[int, List[Intent]] = {}
    for replica in range(replicas):
        kinds = [kind for kind, count in counts.items()
                 for _ in range(count)]
        rng.shuffle(kinds)
        now = 0.0
        stream = []
        for index, kind in enumerate(kinds):
            now += rng.expovariate(1 / spec.mean_gap_ms)
            stream.append(Intent(
                now,
                replica,
                index,
                kind,
                rng.getrandbits(63)
            ))
        streams[replica] = stream

    move_requests = (
        counts[IntentKind.UPMOVE] + counts[IntentKind.DOWNMOVE]
    ) * replicas
    pairs = math.floor(spec.conflict_rate / 100 * move_requests / 2)
    if pairs:
        if replicas < 2:
            raise WorkloadError('conflicting pairs need two replicas')
        streams = _pair_up(streams, pairs, rng)
    logger.debug(
        'workload: %d warm-up nodes, %d requests, %d pairs',
        spec.warmup_nodes, total * replicas, pairs
    )
    return Workload(warmup_parents, streams)


def _safe_rank(tree, n: NodeId) -> Optional[int]:
    try:
        return rank(tree, n)
    except TreeError:
        return None


def _up_move(tree, nodes, rng) -> Optional[Request]:
    for _ in range(ATTEMPTS):
        n = rng.choice(nodes)
        try:
            path = path_to_root(tree, n)
        except TreeError:
            continue
        if len(path) >= 3:
            return Request.move(n, rng.choice(path[2:]))
    return None


def _down_move(tree, nodes, rng) -> Optional[Request]:
    for _ in range(ATTEMPTS):
        n, p = rng.choice(nodes), rng.choice(nodes)
        n_rank, p_rank = _safe_rank(tree, n), _safe_rank(tree, p)
        if n_rank is None or p_rank is None or p_rank < n_rank:
            continue
        try:
            check_move(tree, n, p)
        except TreeError:
            continue
        return Request.move(n, p)
    return None


def _pair_move(tree, warm: Sequence[NodeId], intent: Intent):
    """Both members of a pair draw the same candidate sequence.

    The pair takes two unrelated nodes u and v and a node below each, du
    and dv. One member moves u under dv, the other v under du, so each
    moved node lies in the other move's critical ancestors.
    """
    rng = random.Random(intent.salt)
    for _ in range(ATTEMPTS):
        u, v = rng.sample(warm, 2)
        try:
            if is_strict_ancestor(tree, u, v) or \
                    is_strict_ancestor(tree, v, u):
                continue
            du = rng.choice(sorted(critical_descendants(tree, u)))
            dv = rng.choice(sorted(critical_descendants(tree, v)))
            n, p = (u, dv) if intent.role == 0 else (v, du)
            check_move(tree, n, p)
        except TreeError:
            continue
        return Request.move(n, p)
    return None


def concretize(intent: Intent, tree,
               warm: Sequence[NodeId]) -> Request:
    """Pick nodes for intent, valid against tree at issue time.

    A move with no valid candidate turns into a move of the other
    direction, and failing that into an add.
    """
    rng = random.Random(intent.salt ^ intent.role)
    nodes = sorted(tree.nodes)
    movable = [node for node in nodes if not node.is_root]
    if intent.kind is IntentKind.ADD:
        return Request.add(rng.choice(nodes))
    if intent.kind is IntentKind.REMOVE:
        if not movable:
            return Request.add(tree.root)
        return Request.remove(rng.choice(movable))

    request = None
    if intent.pair is not None and len(warm) >= 2:
        request = _pair_move(tree, warm, intent)
    if request is None and movable:
        first, second = _up_move, _down_move
        if intent.kind is IntentKind.DOWNMOVE:
            first, second = second, first
        request = first(tree, movable, rng) or second(tree, movable, rng)
    if request is None:
        logger.debug('no valid move for %s, issuing an add', intent)
        request = Request.add(rng.choice(nodes))
    return request
