"""
Lock-based moves: a central lock manager and replicas that move only
while holding the locks of the move.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

from crdt.clock import VectorClock
from crdt.delivery import CausalReplica
from crdt.operations import Operation, OpKind, OpOutcome, OpStatus, Request
from tree.exceptions import TreeError
from tree.state import NodeId, check_move, critical_ancestors

logger = logging.getLogger(__name__)

GLOBAL_LOCK = 'GLOBAL'


class LockType(Enum):
    SHARED = 'shared'
    EXCLUSIVE = 'exclusive'


class LockScope(Enum):
    GLOBAL = 'global'
    SUBTREE = 'subtree'


def compatible(held: LockType, wanted: LockType) -> bool:
    return held is LockType.SHARED and wanted is LockType.SHARED


@dataclass(frozen=True, order=True)
class RequestId:
    replica: int
    counter: int

    def __str__(self):
        return f'{self.replica}/{self.counter}'


@dataclass(frozen=True)
class LockRequest:
    """All-or-wait request for a canonically ordered set of locks"""
    id: RequestId
    locks: Tuple[Tuple[str, LockType], ...]
    n: NodeId
    new_parent: NodeId

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.locks)


@dataclass(frozen=True)
class LockGrant:
    request: LockRequest
    clock: VectorClock


@dataclass(frozen=True)
class LockRelease:
    request_id: RequestId
    clock: VectorClock


@dataclass
class _Holders:
    mode: LockType
    requests: Set[RequestId] = field(default_factory=set)


class LockManager:
    """Single-site lock table granting whole requests in FIFO order.

    A waiting request blocks later requests it conflicts with, so grants
    are FIFO per conflict group. Each grant carries the merged clock of the
    previous releases of its locks.
    """

    def __init__(self, site: int = 0):
        self.site = site
        self.held: Dict[str, _Holders] = {}
        self.queue: List[LockRequest] = []
        self.granted: Dict[RequestId, LockRequest] = {}
        self.release_clocks: Dict[str, VectorClock] = {}

    def request(self, request: LockRequest) -> List[LockGrant]:
        logger.debug('lock request %s for %s', request.id, request.names)
        self.queue.append(request)
        return self._grant_ready()

    def release(self, release: LockRelease) -> List[LockGrant]:
        request = self.granted.pop(release.request_id)
        for name, _ in request.locks:
            holders = self.held[name]
            holders.requests.discard(request.id)
            if not holders.requests:
                del self.held[name]
            previous = self.release_clocks.get(name, VectorClock())
            self.release_clocks[name] = previous.merge(release.clock)
        return self._grant_ready()

    def waiting(self) -> int:
        return len(self.queue)

    def _free(self, locks) -> bool:
        return all(
            name not in self.held or compatible(self.held[name].mode, mode)
            for name, mode in locks
        )

    def _grant_ready(self) -> List[LockGrant]:
        grants = []
        blocked: Dict[str, LockType] = {}
        for request in list(self.queue):
            clashes = any(
                name in blocked and not compatible(blocked[name], mode)
                for name, mode in request.locks
            )
            if clashes or not self._free(request.locks):
                for name, mode in request.locks:
                    if blocked.get(name) is not LockType.EXCLUSIVE:
                        blocked[name] = mode
                continue
            self.queue.remove(request)
            grants.append(self._grant(request))
        return grants

    def _grant(self, request: LockRequest) -> LockGrant:
        clock = VectorClock()
        for name, mode in request.locks:
            holders = self.held.setdefault(name, _Holders(mode))
            holders.requests.add(request.id)
            clock = clock.merge(self.release_clocks.get(name, VectorClock()))
        self.granted[request.id] = request
        logger.debug('lock grant %s', request.id)
        return LockGrant(request, clock)


@dataclass(frozen=True)
class LockResult:
    """Outcome of a granted request: the broadcast move, or an abort"""
    request: LockRequest
    op: Optional[Operation]
    release: LockRelease

    @property
    def aborted(self) -> bool:
        return self.op is None


class LockReplica(CausalReplica):
    """Replica applying moves only under locks granted by the manager.

    Adds and removes need no lock. A granted move waits until the replica
    has delivered everything the grant clock covers, is re-validated and
    then applied and broadcast, or aborted. Receivers apply a move only
    when its guard holds locally.
    """

    def __init__(self, replica_id: int, replicas: Iterable[int] = (),
                 scope: LockScope = LockScope.GLOBAL):
        super().__init__(replica_id, replicas)
        self.scope = scope
        self.name = f'{scope.value}_lock'
        self._counter = 0
        self._parked: List[LockGrant] = []

    def lock_move(self, n: NodeId, p_new: NodeId) -> LockRequest:
        """Build the lock request for move(n, p_new), valid at issue time"""
        self.validate(Request.move(n, p_new))
        self._counter += 1
        request_id = RequestId(self.id, self._counter)
        if self.scope is LockScope.GLOBAL:
            locks = ((GLOBAL_LOCK, LockType.EXCLUSIVE),)
        else:
            wanted = {
                str(a): LockType.SHARED
                for a in critical_ancestors(self.tree, n, p_new)
            }
            wanted[str(n)] = LockType.EXCLUSIVE
            locks = tuple(sorted(wanted.items()))
        return LockRequest(request_id, locks, n, p_new)

    def on_grant(self, grant: LockGrant,
                 now: float = 0.0) -> List[LockResult]:
        self._parked.append(grant)
        return self.resume(now)

    @property
    def parked(self) -> int:
        return len(self._parked)

    def resume(self, now: float = 0.0) -> List[LockResult]:
        """Run the parked grants whose clock the replica has caught up with"""
        results = []
        for grant in list(self._parked):
            if not self.clock.dominates(grant.clock):
                continue
            self._parked.remove(grant)
            results.append(self._run(grant.request, now))
        return results

    def _run(self, request: LockRequest, now: float) -> LockResult:
        op = None
        if self._still_valid(request):
            move = Request.move(request.n, request.new_parent)
            op = self.generate(move, now)
        else:
            logger.debug('replica %s aborts %s', self.id, request.id)
        return LockResult(request, op, LockRelease(request.id, self.clock))

    def _still_valid(self, request: LockRequest) -> bool:
        try:
            check_move(self.tree, request.n, request.new_parent)
        except TreeError:
            return False
        if self.scope is LockScope.SUBTREE:
            locked = set(request.names)
            needed = critical_ancestors(
                self.tree,
                request.n,
                request.new_parent
            )
            return all(str(a) in locked for a in needed)
        return True

    def _apply(self, op: Operation, now: float) -> List[OpOutcome]:
        status = OpStatus.APPLIED
        if op.kind is OpKind.ADD:
            self.tree.add(op.n, op.p)
        elif op.kind is OpKind.REMOVE:
            self.tree.tombstone(op.n)
        else:
            try:
                check_move(self.tree, op.n, op.new_parent)
            except TreeError as err:
                logger.debug('replica %s skips %s: %s', self.id, op, err)
                status = OpStatus.SKIPPED
            else:
                self.tree.set_parent(op.n, op.new_parent)
        return [self._record(op, status, False, now)]
