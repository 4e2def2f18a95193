"""
Randomized schedules over a replica set, with replay and shrinking.

A schedule is a list of steps: generate a request at a replica, deliver a
generated op to a replica, or pass one replica's heartbeat to another.
Delivery order is arbitrary, causal buffering restores causality. After
the last step every op is delivered everywhere and heartbeats are
exchanged, then convergence is checked.
"""
import logging
import random
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Set, Tuple, Union

from crdt.operations import (
    Operation,
    OpId,
    OpKind,
    OpOutcome,
    OpStatus,
    Request,
)
from sim.config import Algorithm, Mix
from sim.engine import make_replica, replay_log
from sim.workload import Intent, IntentKind, concretize
from tree.exceptions import PreconditionViolated
from tree.state import ROOT, NodeId, check_invariant

logger = logging.getLogger(__name__)

FUZZ_ALGORITHMS = (Algorithm.MARAM, Algorithm.UDR, Algorithm.NAIVE)
CONFLICT_RATES = (0, 2, 10, 20)
WARMUP_NODES = 6


@dataclass(frozen=True)
class Generate:
    replica: int
    request: Request


@dataclass(frozen=True)
class Deliver:
    replica: int
    op_id: OpId


@dataclass(frozen=True)
class Beat:
    source: int
    replica: int


Step = Union[Generate, Deliver, Beat]


class Execution:
    """Replica set driven step by step, checking properties as it goes"""

    def __init__(self, algorithm: Algorithm, replicas: int,
                 expect_unsafe: bool = False):
        self.algorithm = algorithm
        self.expect_unsafe = expect_unsafe
        ids = range(replicas)
        self.replicas = [make_replica(algorithm, i, ids) for i in ids]
        self.ops: Dict[OpId, Operation] = {}
        self.failures: List[str] = []
        self.failed_replica: Optional[int] = None
        self.violations = 0
        self._stable: Dict[Tuple[int, OpId], OpStatus] = {}
        self._seen: Dict[int, Tuple[Set[NodeId], Set[NodeId]]] = {
            replica.id: (set(), set()) for replica in self.replicas
        }

    def step(self, step: Step) -> Optional[Operation]:
        """Run one step; steps that no longer apply are no-ops"""
        replica = self.replicas[step.replica]
        if isinstance(step, Generate):
            try:
                op = replica.generate(step.request)
            except PreconditionViolated:
                return None
            self.ops[op.id] = op
            self._observe(replica, [replica.outcomes[op.id]])
        elif isinstance(step, Deliver):
            op = self.ops.get(step.op_id)
            if op is None or replica.is_delivered(op) or \
                    op.id in replica.buffer:
                return None
            self._observe(replica, replica.deliver(op))
        else:
            heartbeat = self.replicas[step.source].heartbeat()
            self._observe(replica, replica.deliver(heartbeat))
            return None
        self._check(replica)
        return op

    def _fail(self, replica, message: str):
        if self.failed_replica is None:
            self.failed_replica = replica.id
        self.failures.append(f'replica {replica.id}: {message}')

    def _observe(self, replica, changes: List[OpOutcome]):
        for outcome in changes:
            key = (replica.id, outcome.op_id)
            if key in self._stable and self._stable[key] is not outcome.status:
                self._fail(
                    replica,
                    f'stable op {outcome.op_id} changed to '
                    f'{outcome.status.value}'
                )
            if outcome.stable:
                self._stable.setdefault(key, outcome.status)

    def _check(self, replica):
        state = replica.state
        report = check_invariant(state)
        if not report.ok:
            self.violations += 1
            if not self.expect_unsafe:
                self._fail(replica, str(report))
        nodes, tombstones = self._seen[replica.id]
        if not nodes <= state.nodes or not tombstones <= state.tombstones:
            self._fail(replica, 'a node or tombstone disappeared')
        self._seen[replica.id] = (set(state.nodes), set(state.tombstones))
        rebuilt = replay_log(self.algorithm, replica.log)
        if rebuilt is not None and rebuilt != state:
            self._fail(replica, 'incremental state differs from replay')

    def finish(self):
        """Deliver everything everywhere, exchange clocks, compare"""
        for op_id in sorted(self.ops):
            for replica in self.replicas:
                self.step(Deliver(replica.id, op_id))
        for source in self.replicas:
            for replica in self.replicas:
                if replica is not source:
                    self.step(Beat(source.id, replica.id))
        first = self.replicas[0]
        for replica in self.replicas[1:]:
            if replica.state != first.state:
                self._fail(replica, f'diverges from replica {first.id}')
        for replica in self.replicas:
            if replica.buffer:
                self._fail(replica, 'undeliverable operations remain')
            if replica.pending:
                self._fail(replica, 'operations never stabilized')


@dataclass
class FuzzResult:
    seed: int
    algorithm: Algorithm
    conflict_rate: int
    steps: List[Step]
    execution: Execution
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def replay_steps(algorithm: Algorithm, replicas: int, steps: List[Step],
                 expect_unsafe: bool = False) -> Execution:
    execution = Execution(algorithm, replicas, expect_unsafe)
    for step in steps:
        execution.step(step)
    execution.finish()
    return execution


def _draw_kind(rng: random.Random, mix: Mix) -> IntentKind:
    kinds = list(IntentKind)
    weights = [mix.add, mix.remove, mix.upmove, mix.downmove]
    return rng.choices(kinds, weights)[0]


def _concrete(request: Request, op: Operation) -> Request:
    """Pin a generated add to its node id so replays reference it"""
    if op.kind is OpKind.ADD:
        return replace(request, n=op.n)
    return request


def run_fuzz(seed: int, replicas: int = 3, ops: int = 60,
             algorithm: Algorithm = Algorithm.MARAM,
             conflict_rate: Optional[int] = None,
             expect_unsafe: bool = False) -> FuzzResult:
    """One random schedule of ``ops`` requests per replica"""
    rng = random.Random(seed)
    if conflict_rate is None:
        conflict_rate = rng.choice(CONFLICT_RATES)
    mix = Mix()
    execution = Execution(algorithm, replicas, expect_unsafe)
    steps: List[Step] = []
    undelivered: List[Deliver] = []

    def issue(step: Generate):
        op = execution.step(step)
        if op is None:
            return None
        steps.append(replace(step, request=_concrete(step.request, op)))
        undelivered.extend(
            Deliver(replica, op.id) for replica in range(replicas)
            if replica != step.replica
        )
        return op

    warm: List[NodeId] = []
    for _ in range(WARMUP_NODES):
        parent = rng.choice([ROOT, *warm])
        warm.append(issue(Generate(0, Request.add(parent))).n)
    while undelivered:
        step = undelivered.pop(0)
        execution.step(step)
        steps.append(step)

    left = {replica: ops for replica in range(replicas)}
    pair = 0
    while any(left.values()) or undelivered:
        roll = rng.random()
        active = sorted(r for r, count in left.items() if count)
        if active and (not undelivered or roll < 0.35):
            origin = rng.choice(active)
            kind = _draw_kind(rng, mix)
            salt = rng.getrandbits(63)
            partners = [r for r in active if r != origin]
            if kind.is_move and partners and \
                    rng.random() * 100 < conflict_rate:
                other = rng.choice(partners)
                for role, replica in enumerate((origin, other)):
                    intent = Intent(0.0, replica, 0, kind, salt, pair, role)
                    request = concretize(
                        intent,
                        execution.replicas[replica].tree,
                        warm
                    )
                    issue(Generate(replica, request))
                    left[replica] -= 1
                pair += 1
            else:
                intent = Intent(0.0, origin, 0, kind, salt)
                request = concretize(
                    intent,
                    execution.replicas[origin].tree,
                    warm
                )
                issue(Generate(origin, request))
                left[origin] -= 1
        elif roll < 0.45 and replicas > 1:
            source, target = rng.sample(range(replicas), 2)
            step = Beat(source, target)
            execution.step(step)
            steps.append(step)
        elif undelivered:
            step = undelivered.pop(rng.randrange(len(undelivered)))
            execution.step(step)
            steps.append(step)

    execution.finish()
    return FuzzResult(
        seed, algorithm, conflict_rate, steps, execution,
        list(execution.failures)
    )


def shrink(algorithm: Algorithm, replicas: int, steps: List[Step],
           expect_unsafe: bool = False, budget: int = 400) -> List[Step]:
    """Drop generate steps, then deliveries, while the failure persists"""
    def fails(candidate):
        return bool(
            replay_steps(algorithm, replicas, candidate,
                         expect_unsafe).failures
        )

    current = list(steps)
    for kinds in ((Generate,), (Deliver, Beat)):
        index = len(current) - 1
        while index >= 0 and budget > 0:
            if isinstance(current[index], kinds):
                candidate = current[:index] + current[index + 1:]
                budget -= 1
                if fails(candidate):
                    current = candidate
            index -= 1
    logger.debug('shrunk %d steps to %d', len(steps), len(current))
    return current


def describe(steps: List[Step]) -> str:
    lines = []
    for step in steps:
        if isinstance(step, Generate):
            request = step.request
            target = request.parent if request.parent is not None else ''
            lines.append(
                f'r{step.replica} issues {request.kind.value} '
                f'{request.n or ""} {target}'.rstrip()
            )
        elif isinstance(step, Deliver):
            lines.append(f'r{step.replica} receives {step.op_id}')
        else:
            lines.append(f'r{step.replica} hears from r{step.source}')
    return '\n'.join(lines)
