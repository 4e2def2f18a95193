"""
Tests for the lock manager and lock-based replicas
"""
from django.test import SimpleTestCase

from baselines.locks import (
    GLOBAL_LOCK,
    LockManager,
    LockRelease,
    LockReplica,
    LockRequest,
    LockScope,
    LockType,
    RequestId,
)
from crdt.clock import VectorClock
from crdt.operations import OpStatus, Request
from tree.exceptions import PreconditionViolated
from tree.state import ROOT, NodeId, check_invariant


def request(replica, counter, *locks):
    return LockRequest(
        RequestId(replica, counter),
        tuple(sorted(locks)),
        NodeId(0, 1),
        ROOT
    )


def cluster(size, scope):
    return [LockReplica(i, range(size), scope=scope) for i in range(size)]


def warm_up(replicas, count):
    nodes = []
    for _ in range(count):
        op = replicas[0].generate(Request.add(ROOT))
        for replica in replicas[1:]:
            replica.deliver(op)
        nodes.append(op.n)
    return nodes


class LockManagerTests(SimpleTestCase):
    """Test grants, conflicts and FIFO order"""

    def setUp(self):
        self.manager = LockManager()

    def test_shared_locks_compatible(self):
        first = self.manager.request(request(0, 1, ('a', LockType.SHARED)))
        second = self.manager.request(request(1, 1, ('a', LockType.SHARED)))
        self.assertEqual(len(first), 1)
        self.assertEqual(len(second), 1)

    def test_exclusive_waits_for_release(self):
        held = request(
            0, 1, ('a', LockType.SHARED), ('b', LockType.EXCLUSIVE)
        )
        self.manager.request(held)
        waiting = request(1, 1, ('a', LockType.EXCLUSIVE))
        self.assertEqual(self.manager.request(waiting), [])
        self.assertEqual(self.manager.waiting(), 1)

        clock = VectorClock.of({0: 4})
        grants = self.manager.release(LockRelease(held.id, clock))
        self.assertEqual([g.request for g in grants], [waiting])
        self.assertEqual(grants[0].clock, clock)

    def test_fifo_per_conflict_group(self):
        self.manager.request(request(0, 1, ('a', LockType.SHARED)))
        writer = request(1, 1, ('a', LockType.EXCLUSIVE))
        reader = request(2, 1, ('a', LockType.SHARED))
        other = request(2, 2, ('b', LockType.EXCLUSIVE))
        self.assertEqual(self.manager.request(writer), [])
        self.assertEqual(self.manager.request(reader), [])
        self.assertEqual(len(self.manager.request(other)), 1)

    def test_all_or_wait(self):
        self.manager.request(request(0, 1, ('b', LockType.EXCLUSIVE)))
        both = request(1, 1, ('a', LockType.EXCLUSIVE),
                       ('b', LockType.EXCLUSIVE))
        self.assertEqual(self.manager.request(both), [])
        self.assertNotIn('a', self.manager.held)


class LockReplicaTests(SimpleTestCase):
    """Test lock requests and grant handling at replicas"""

    def test_global_request(self):
        replicas = cluster(2, LockScope.GLOBAL)
        a, b = warm_up(replicas, 2)
        req = replicas[1].lock_move(a, b)
        self.assertEqual(req.locks, ((GLOBAL_LOCK, LockType.EXCLUSIVE),))

    def test_subtree_request(self):
        replicas = cluster(2, LockScope.SUBTREE)
        a, b = warm_up(replicas, 2)
        c = replicas[0].generate(Request.add(b)).n
        req = replicas[0].lock_move(a, c)
        self.assertEqual(req.locks, (
            (str(a), LockType.EXCLUSIVE),
            (str(b), LockType.SHARED),
            (str(c), LockType.SHARED),
        ))

    def test_invalid_request_rejected(self):
        replicas = cluster(1, LockScope.GLOBAL)
        a, = warm_up(replicas, 1)
        with self.assertRaises(PreconditionViolated):
            replicas[0].lock_move(a, a)

    def test_conflicting_moves_second_aborts(self):
        replicas = cluster(2, LockScope.GLOBAL)
        r0, r1 = replicas
        a, b = warm_up(replicas, 2)
        manager = LockManager()
        first = r0.lock_move(a, b)
        second = r1.lock_move(b, a)
        [grant] = manager.request(first)
        self.assertEqual(manager.request(second), [])

        [result] = r0.on_grant(grant, now=10)
        self.assertFalse(result.aborted)
        [grant] = manager.release(result.release)
        self.assertEqual(r1.on_grant(grant, now=20), [])
        self.assertEqual(r1.parked, 1)

        r1.deliver(result.op, now=30)
        [late] = r1.resume(now=30)
        self.assertTrue(late.aborted)
        self.assertEqual(r0.state, r1.state)
        self.assertTrue(check_invariant(r1.state).ok)

    def test_disjoint_subtree_moves_do_not_queue(self):
        replicas = cluster(2, LockScope.SUBTREE)
        r0, r1 = replicas
        a, b, c, d = warm_up(replicas, 4)
        manager = LockManager()
        self.assertEqual(len(manager.request(r0.lock_move(a, b))), 1)
        self.assertEqual(len(manager.request(r1.lock_move(c, d))), 1)
        self.assertEqual(manager.waiting(), 0)

    def test_receiver_skips_invalid_move(self):
        replicas = cluster(3, LockScope.GLOBAL)
        r0, r1, r2 = replicas
        a, b = warm_up(replicas, 2)
        m0 = r0.generate(Request.move(a, b))
        m1 = r1.generate(Request.move(b, a))
        r2.deliver(m0)
        r2.deliver(m1)
        self.assertIs(r2.outcomes[m1.id].status, OpStatus.SKIPPED)
        self.assertTrue(check_invariant(r2.state).ok)
        self.assertTrue(r2.outcomes[m1.id].stable)

    def test_names_are_canonical(self):
        replica = cluster(1, LockScope.SUBTREE)[0]
        a, b = warm_up([replica], 2)
        first = replica.lock_move(a, b)
        second = replica.lock_move(a, b)
        self.assertEqual(first.locks, second.locks)
        self.assertNotEqual(first.id, second.id)
