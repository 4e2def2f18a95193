"""
Discrete-event simulation of replicas on a FIFO mesh.

Replicas are passive state machines; one event loop over a priority queue
drives them. Events are ordered by (time, target, seq), so identical configs
produce identical traces and metrics.
"""
import heapq
import itertools
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

from baselines.locks import LockManager, LockReplica, LockScope, RequestId
from baselines.naive import NaiveReplica
from baselines.udr import UdrReplica, udr_replay
from crdt.codec import encode_op
from crdt.delivery import CausalReplica
from crdt.operations import Operation, OpId, OpKind, OpOutcome, Request
from crdt.replica import MaramReplica, resolve
from sim.config import Algorithm, SimConfig
from sim.metrics import ABORTED, Metrics, OpRecord
from sim.workload import Intent, concretize, gen_workload
from tree.exceptions import TreeError
from tree.state import ROOT, NodeId, check_invariant, classify_move

logger = logging.getLogger(__name__)

# Site hosting the lock manager
LOCK_SITE = 0

_FACTORIES = {
    Algorithm.MARAM: MaramReplica,
    Algorithm.UDR: UdrReplica,
    Algorithm.NAIVE: NaiveReplica,
    Algorithm.GLOBAL_LOCK: lambda i, ids: LockReplica(
        i, ids, scope=LockScope.GLOBAL
    ),
    Algorithm.SUBTREE_LOCK: lambda i, ids: LockReplica(
        i, ids, scope=LockScope.SUBTREE
    ),
}


def make_replica(algorithm: Algorithm, replica_id: int,
                 replicas: Iterable[int]) -> CausalReplica:
    return _FACTORIES[algorithm](replica_id, tuple(replicas))


def replay_log(algorithm: Algorithm, log: List[Operation]):
    """Rebuild the tree from a log the way the algorithm would"""
    if algorithm is Algorithm.MARAM:
        return resolve(log)
    if algorithm is Algorithm.UDR:
        return udr_replay(log)
    return None


def _is_heartbeat(payload) -> bool:
    # Heartbeats never hold a run open.
    return isinstance(payload, Operation) and payload.kind is OpKind.HEARTBEAT


def _label(payload) -> str:
    """Request id carried by a lock message"""
    for attr in ('request_id', 'id'):
        if hasattr(payload, attr):
            return str(getattr(payload, attr))
    return str(payload.request.id)


@dataclass(order=True)
class Event:
    time: float
    target: int
    seq: int
    kind: str = field(compare=False)
    source: int = field(compare=False, default=-1)
    payload: Any = field(compare=False, default=None)


class Simulation:
    """One run of a config: warm-up, concurrent phase, drain"""

    def __init__(self, config: SimConfig, run: int = 0, trace=None):
        self.config = config
        self.run_index = run
        self.seed = config.seed + run
        ids = range(config.replicas)
        self.replicas = [
            make_replica(config.algorithm, i, ids) for i in ids
        ]
        self.manager: Optional[LockManager] = None
        if config.algorithm.uses_locks:
            self.manager = LockManager(site=LOCK_SITE)
        self.manager_id = config.replicas
        self.trace = trace
        self.now = 0.0
        self.queue: List[Event] = []
        self.warm: List[NodeId] = []
        self.metrics = Metrics(
            run=run,
            algorithm=config.algorithm.value,
            conflict_rate=config.workload.conflict_rate,
            latency_preset=config.latency.preset,
            seed=self.seed,
        )
        self._seq = itertools.count()
        self._link_free: Dict[Tuple[int, int], float] = {}
        self._in_flight = 0
        self._submits_left = 0
        self._open_locks = 0
        self._warmup_ops = 0
        self._records: Dict[OpId, OpRecord] = {}
        self._lock_records: Dict[RequestId, OpRecord] = {}
        self._handlers = {
            'submit': self._on_submit,
            'tick': self._on_tick,
            'op': self._on_op,
            'lock_req': self._on_lock_request,
            'lock_grant': self._on_lock_grant,
            'lock_rel': self._on_lock_release,
        }

    def run(self) -> Metrics:
        config = self.config
        logger.info(
            'run %d: %s, %d replicas, seed %d',
            self.run_index, config.algorithm.value, config.replicas,
            self.seed
        )
        workload = gen_workload(config.workload, config.replicas, self.seed)
        self._warm_up(workload.warmup_parents)
        for intent in workload.intents:
            self._push(intent.time, intent.replica, 'submit', payload=intent)
            self._submits_left += 1
        for replica in self.replicas:
            self._push(config.heartbeat_ms, replica.id, 'tick')

        while self.queue:
            event = heapq.heappop(self.queue)
            self.now = event.time
            self._handlers[event.kind](event)

        self._finish()
        logger.info(
            'run %d finished at %.3f ms: %d ops, converged=%s',
            self.run_index, self.now, len(self.metrics.records),
            self.metrics.converged
        )
        return self.metrics

    def _push(self, at: float, target: int, kind: str, source: int = -1,
              payload=None):
        heapq.heappush(
            self.queue,
            Event(at, target, next(self._seq), kind, source, payload)
        )

    def _site(self, actor: int) -> int:
        return LOCK_SITE if actor == self.manager_id else actor

    def _send(self, source: int, target: int, kind: str, payload):
        delay = self.config.latency.between(
            self._site(source),
            self._site(target)
        )
        link = (source, target)
        at = max(self.now + delay, self._link_free.get(link, 0.0))
        self._link_free[link] = at
        if not _is_heartbeat(payload):
            self._in_flight += 1
        self._push(at, target, kind, source, payload)
        self._trace('send', kind, source, target, payload)

    def _broadcast(self, source: int, op: Operation):
        for replica in self.replicas:
            if replica.id != source:
                self._send(source, replica.id, 'op', op)

    def _trace(self, event: str, kind: str, source: int, target: int,
               payload):
        if self.trace is None:
            return
        entry = {
            't': round(self.now, 6),
            'event': event,
            'kind': kind,
            'src': source,
            'dst': target,
        }
        if isinstance(payload, Operation):
            entry['op'] = json.loads(encode_op(payload))
        elif payload is not None:
            entry['item'] = _label(payload)
        self.trace.write(json.dumps(entry, sort_keys=True) + '\n')

    def _warm_up(self, parents: List[int]):
        """Build the warm-up tree at replica 0 and hand it to every peer"""
        origin = self.replicas[0]
        created = [ROOT]
        for index in parents:
            op = origin.generate(Request.add(created[index]), self.now)
            created.append(op.n)
            for replica in self.replicas[1:]:
                replica.deliver(op, self.now)
        for replica in self.replicas:
            heartbeat = replica.heartbeat()
            for other in self.replicas:
                if other is not replica:
                    other.deliver(heartbeat, self.now)
        self.warm = created[1:]
        self._warmup_ops = len(parents)

    def _classify(self, replica, request: Request) -> Optional[str]:
        if request.kind is not OpKind.MOVE:
            return None
        try:
            return classify_move(replica.tree, request.n, request.parent).value
        except TreeError:
            return None

    def _on_submit(self, event: Event):
        intent: Intent = event.payload
        replica = self.replicas[event.target]
        self._submits_left -= 1
        request = concretize(intent, replica.tree, self.warm)
        mtype = self._classify(replica, request)

        if request.kind is OpKind.MOVE and self.manager is not None:
            lock_request = replica.lock_move(request.n, request.parent)
            record = OpRecord(
                self.run_index, f'lock:{lock_request.id}', replica.id,
                'move', self.now, mtype=mtype
            )
            self.metrics.records.append(record)
            self._lock_records[lock_request.id] = record
            self._open_locks += 1
            self._send(replica.id, self.manager_id, 'lock_req', lock_request)
            return

        op = replica.generate(request, self.now)
        if op.mtype is not None:
            mtype = op.mtype.value
        record = OpRecord(
            self.run_index, str(op.id), replica.id, op.kind.value, self.now,
            mtype=mtype, ack_ms=self.now
        )
        self.metrics.records.append(record)
        self._records[op.id] = record
        self._note(replica.id, [replica.outcomes[op.id]])
        self._broadcast(replica.id, op)

    def _note(self, replica_id: int, changes: List[OpOutcome]):
        """Copy outcome changes seen at an op's origin into its record"""
        for outcome in changes:
            if outcome.op_id.origin != replica_id:
                continue
            record = self._records.get(outcome.op_id)
            if record is None:
                continue
            record.status = outcome.status.value
            if outcome.stable and record.stable_ms is None:
                record.stable_ms = outcome.stable_time

    def _on_tick(self, event: Event):
        if self._done():
            return
        replica = self.replicas[event.target]
        self._broadcast(replica.id, replica.heartbeat())
        self._push(self.now + self.config.heartbeat_ms, replica.id, 'tick')

    def _on_op(self, event: Event):
        if not _is_heartbeat(event.payload):
            self._in_flight -= 1
        replica = self.replicas[event.target]
        self._trace('deliver', 'op', event.source, event.target,
                    event.payload)
        self._note(replica.id, replica.deliver(event.payload, self.now))
        if self.config.check_every_event:
            report = check_invariant(replica.tree)
            if not report.ok:
                self.metrics.invariant_violations += 1
                logger.debug('replica %s: %s', replica.id, report)
        if self.manager is not None:
            self._lock_results(replica, replica.resume(self.now))

    def _on_lock_request(self, event: Event):
        self._in_flight -= 1
        self._trace('deliver', 'lock_req', event.source, event.target,
                    event.payload)
        self._send_grants(self.manager.request(event.payload))

    def _on_lock_release(self, event: Event):
        self._in_flight -= 1
        self._trace('deliver', 'lock_rel', event.source, event.target,
                    event.payload)
        self._send_grants(self.manager.release(event.payload))

    def _send_grants(self, grants):
        for grant in grants:
            self._send(
                self.manager_id,
                grant.request.id.replica,
                'lock_grant',
                grant
            )

    def _on_lock_grant(self, event: Event):
        self._in_flight -= 1
        self._trace('deliver', 'lock_grant', event.source, event.target,
                    event.payload)
        replica = self.replicas[event.target]
        self._lock_results(replica, replica.on_grant(event.payload,
                                                     self.now))

    def _lock_results(self, replica: LockReplica, results):
        for result in results:
            record = self._lock_records.pop(result.request.id)
            self._open_locks -= 1
            record.ack_ms = self.now
            if result.aborted:
                record.status = ABORTED
                record.stable_ms = self.now
                self.metrics.aborts += 1
            else:
                op = result.op
                record.op_id = str(op.id)
                self._records[op.id] = record
                self._note(replica.id, [replica.outcomes[op.id]])
                self._broadcast(replica.id, op)
            self._send(replica.id, self.manager_id, 'lock_rel',
                       result.release)

    def _done(self) -> bool:
        if self._submits_left or self._in_flight or self._open_locks:
            return False
        return all(
            not replica.pending and not replica.buffer
            for replica in self.replicas
        )

    def _finish(self):
        metrics = self.metrics
        states = [replica.state for replica in self.replicas]
        metrics.converged = all(state == states[0] for state in states)
        delivered = {len(replica.log) for replica in self.replicas}
        if len(delivered) != 1:
            logger.warning('replicas delivered different op counts: %s',
                           sorted(delivered))
            metrics.converged = False
        for replica, state in zip(self.replicas, states):
            report = check_invariant(state)
            if not report.ok:
                metrics.invariant_violations += 1
                logger.info('replica %s final state: %s', replica.id, report)

        log = self.replicas[0].log
        concurrent = log[self._warmup_ops:]
        if concurrent:
            metrics.bytes_per_op = sum(
                len(encode_op(op)) for op in concurrent
            ) / len(concurrent)
        started = time.perf_counter()
        replay_log(self.config.algorithm, log)
        metrics.replay_ms = (time.perf_counter() - started) * 1000


def run_simulation(config: SimConfig, run: int = 0, trace=None) -> Metrics:
    return Simulation(config, run, trace).run()


def run_batch(config: SimConfig, trace=None) -> List[Metrics]:
    """Run ``config.runs`` simulations with consecutive seeds"""
    return [run_simulation(config, run, trace) for run in range(config.runs)]
