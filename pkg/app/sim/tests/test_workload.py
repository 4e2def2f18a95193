"""
Tests for workload generation
"""
from collections import Counter

from django.test import SimpleTestCase

from crdt.operations import OpKind, Request
from crdt.replica import MaramReplica
from sim.config import Mix, WorkloadSpec
from sim.workload import (
    PAIR_OFFSET_MS,
    Intent,
    IntentKind,
    WorkloadError,
    concretize,
    gen_workload,
)
from tree.state import (
    ROOT,
    MoveType,
    check_move,
    check_remove,
    classify_move,
    critical_ancestors,
    critical_descendants,
    is_strict_ancestor,
)


def build_tree(parents):
    """Replica holding the warm-up tree described by parents"""
    replica = MaramReplica(0)
    created = [ROOT]
    for index in parents:
        op = replica.generate(Request.add(created[index]))
        created.append(op.n)
    return replica, created[1:]


class GenWorkloadTests(SimpleTestCase):

    def test_exact_counts(self):
        workload = gen_workload(WorkloadSpec(), replicas=3, seed=1)

        self.assertEqual(len(workload.warmup_parents), 996)
        for replica, stream in workload.streams.items():
            kinds = Counter(intent.kind for intent in stream)
            self.assertEqual(len(stream), 250)
            self.assertEqual(kinds[IntentKind.ADD], 150)
            self.assertEqual(kinds[IntentKind.REMOVE], 30)
            self.assertEqual(kinds[IntentKind.UPMOVE], 35)
            self.assertEqual(kinds[IntentKind.DOWNMOVE], 35)

    def test_counts_round_to_total(self):
        spec = WorkloadSpec(warmup_nodes=10, ops_per_replica=7)

        workload = gen_workload(spec, replicas=2, seed=4)

        for stream in workload.streams.values():
            self.assertEqual(len(stream), 7)

    def test_warmup_parents_precede_children(self):
        workload = gen_workload(WorkloadSpec(warmup_nodes=50), 3, seed=2)

        for index, parent in enumerate(workload.warmup_parents, start=1):
            self.assertLess(parent, index)

    def test_deterministic(self):
        spec = WorkloadSpec(conflict_rate=20)

        first = gen_workload(spec, 3, seed=8)
        second = gen_workload(spec, 3, seed=8)
        other = gen_workload(spec, 3, seed=9)

        self.assertEqual(first, second)
        self.assertNotEqual(first.intents, other.intents)

    def test_streams_ordered_in_time(self):
        workload = gen_workload(WorkloadSpec(), 3, seed=3)

        for stream in workload.streams.values():
            times = [intent.time for intent in stream]
            self.assertEqual(times, sorted(times))
            self.assertGreater(times[0], 0)

    def test_no_pairs_without_conflicts(self):
        workload = gen_workload(WorkloadSpec(), 3, seed=5)

        self.assertEqual(workload.pairs, 0)

    def test_pair_count(self):
        # 70 move requests per replica, 210 in all
        for rate, pairs in ((2, 2), (10, 10), (20, 21)):
            spec = WorkloadSpec(conflict_rate=rate)
            workload = gen_workload(spec, 3, seed=5)
            with self.subTest(rate=rate):
                self.assertEqual(workload.pairs, pairs)

    def test_pairs_span_two_replicas(self):
        workload = gen_workload(WorkloadSpec(conflict_rate=20), 3, seed=6)

        members = {}
        for intent in workload.intents:
            if intent.pair is not None:
                members.setdefault(intent.pair, []).append(intent)
        for pair, (leader, partner) in members.items():
            with self.subTest(pair=pair):
                self.assertNotEqual(leader.replica, partner.replica)
                self.assertTrue(leader.kind.is_move)
                self.assertTrue(partner.kind.is_move)
                self.assertEqual(leader.salt, partner.salt)
                self.assertEqual(leader.role, 0)
                self.assertEqual(partner.role, 1)
                self.assertAlmostEqual(
                    partner.time - leader.time, PAIR_OFFSET_MS
                )

    def test_every_move_paired(self):
        workload = gen_workload(WorkloadSpec(conflict_rate=100), 3, seed=1)

        self.assertEqual(workload.pairs, 105)
        for intent in workload.intents:
            self.assertEqual(intent.kind.is_move, intent.pair is not None)

    def test_pairs_need_two_replicas(self):
        spec = WorkloadSpec(conflict_rate=20)

        with self.assertRaises(WorkloadError):
            gen_workload(spec, 1, seed=1)

    def test_moves_need_warmup(self):
        spec = WorkloadSpec(warmup_nodes=2)

        with self.assertRaises(WorkloadError):
            gen_workload(spec, 3, seed=1)

    def test_adds_only_on_tiny_warmup(self):
        spec = WorkloadSpec(
            warmup_nodes=1,
            mix=Mix(add=100, remove=0, upmove=0, downmove=0)
        )

        workload = gen_workload(spec, 2, seed=1)

        self.assertEqual(workload.warmup_parents, [])


class ConcretizeTests(SimpleTestCase):
    """Requests picked at issue time are valid against the origin tree"""

    def setUp(self):
        workload = gen_workload(WorkloadSpec(warmup_nodes=60), 3, seed=11)
        self.replica, self.warm = build_tree(workload.warmup_parents)
        self.tree = self.replica.tree

    def intent(self, kind, salt, pair=None, role=0):
        return Intent(1.0, 0, 0, kind, salt, pair=pair, role=role)

    def test_requests_valid(self):
        for salt in range(40):
            for kind in IntentKind:
                request = concretize(
                    self.intent(kind, salt), self.tree, self.warm
                )
                with self.subTest(kind=kind, salt=salt):
                    if request.kind is OpKind.ADD:
                        self.assertIn(request.parent, self.tree.nodes)
                    elif request.kind is OpKind.REMOVE:
                        check_remove(self.tree, request.n)
                    else:
                        check_move(self.tree, request.n, request.parent)

    def test_move_directions(self):
        for salt in range(20):
            up = concretize(
                self.intent(IntentKind.UPMOVE, salt), self.tree, self.warm
            )
            down = concretize(
                self.intent(IntentKind.DOWNMOVE, salt), self.tree, self.warm
            )
            with self.subTest(salt=salt):
                self.assertIs(
                    classify_move(self.tree, up.n, up.parent), MoveType.UP
                )
                self.assertIs(
                    classify_move(self.tree, down.n, down.parent),
                    MoveType.DOWN
                )

    def test_deterministic(self):
        intent = self.intent(IntentKind.DOWNMOVE, 1234)

        self.assertEqual(
            concretize(intent, self.tree, self.warm),
            concretize(intent, self.tree, self.warm)
        )

    def test_pair_members_cross(self):
        for salt in range(20):
            leader = concretize(
                self.intent(IntentKind.UPMOVE, salt, pair=0),
                self.tree,
                self.warm
            )
            partner = concretize(
                self.intent(IntentKind.DOWNMOVE, salt, pair=0, role=1),
                self.tree,
                self.warm
            )
            with self.subTest(salt=salt):
                self.assertFalse(
                    is_strict_ancestor(self.tree, leader.n, partner.n)
                )
                self.assertFalse(
                    is_strict_ancestor(self.tree, partner.n, leader.n)
                )
                self.assertIn(
                    leader.parent,
                    critical_descendants(self.tree, partner.n)
                )
                self.assertIn(
                    partner.parent,
                    critical_descendants(self.tree, leader.n)
                )
                self.assertIn(
                    partner.n,
                    critical_ancestors(self.tree, leader.n, leader.parent)
                )
                self.assertIn(
                    leader.n,
                    critical_ancestors(self.tree, partner.n, partner.parent)
                )

    def test_move_falls_back_to_add(self):
        replica, warm = build_tree([0])

        request = concretize(
            self.intent(IntentKind.UPMOVE, 3), replica.tree, warm
        )

        self.assertIs(request.kind, OpKind.ADD)

    def test_remove_on_bare_root(self):
        request = concretize(
            self.intent(IntentKind.REMOVE, 3), MaramReplica(0).tree, []
        )

        self.assertIs(request.kind, OpKind.ADD)
        self.assertEqual(request.parent, ROOT)

