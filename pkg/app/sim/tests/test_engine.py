"""
Tests for the discrete-event simulator
"""
import io
import itertools
import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from crdt.clock import Ordering, vc_compare
from crdt.replica import crit_anc_overlap
from sim.config import Algorithm, LatencyMatrix, SimConfig, WorkloadSpec
from sim.engine import Simulation, make_replica, run_batch, run_simulation
from sim.metrics import ABORTED, export_metrics

BANGALORE = 1


def small_config(algorithm, preset='real', conflict_rate=0.0, seed=42,
                 **params):
    workload = WorkloadSpec(
        warmup_nodes=params.pop('warmup_nodes', 120),
        ops_per_replica=params.pop('ops_per_replica', 40),
        conflict_rate=conflict_rate,
    )
    return SimConfig(
        algorithm=algorithm,
        latency=LatencyMatrix.from_preset(preset),
        workload=workload,
        seed=seed,
        **params
    )


def overlapping_pairs(log):
    """Concurrent move pairs whose critical ancestors overlap"""
    moves = [op for op in log if op.is_move]
    return sum(
        1 for a, b in itertools.combinations(moves, 2)
        if vc_compare(a.vc, b.vc) is Ordering.CONCURRENT
        and crit_anc_overlap(a, b)
    )


class ZeroLatencyTests(SimpleTestCase):
    """Without latency every algorithm behaves sequentially"""

    def test_algorithms_agree(self):
        states = {}
        for algorithm in Algorithm:
            simulation = Simulation(small_config(algorithm, preset='zero'))
            metrics = simulation.run()
            with self.subTest(algorithm=algorithm):
                self.assertTrue(metrics.converged)
                self.assertEqual(metrics.invariant_violations, 0)
                self.assertEqual(metrics.aborts, 0)
            states[algorithm] = simulation.replicas[0].state

        reference = states[Algorithm.MARAM]
        for algorithm, state in states.items():
            with self.subTest(algorithm=algorithm):
                self.assertEqual(state, reference)

    def test_zero_response(self):
        for algorithm in Algorithm:
            metrics = run_simulation(small_config(algorithm, preset='zero'))
            with self.subTest(algorithm=algorithm):
                self.assertEqual(metrics.mean_resp_ms, 0)


class RealLatencyTests(SimpleTestCase):
    """Response and stabilization on the three-site mesh"""

    def test_run_ends_once_everything_is_stable(self):
        simulation = Simulation(
            small_config(Algorithm.MARAM, conflict_rate=20)
        )

        metrics = simulation.run()

        self.assertEqual(simulation.queue, [])
        for replica in simulation.replicas:
            self.assertFalse(replica.pending)
        last = max(record.stable_ms for record in metrics.records)
        self.assertLess(simulation.now, last + 2000)

    def test_targeted_pairs_overlap(self):
        overlaps = {}
        for rate in (0, 20):
            simulation = Simulation(
                small_config(Algorithm.MARAM, conflict_rate=rate)
            )
            simulation.run()
            overlaps[rate] = overlapping_pairs(simulation.replicas[0].log)

        self.assertGreater(overlaps[20], 0)
        self.assertLess(overlaps[0], overlaps[20])

    def test_maram_responds_locally(self):
        metrics = run_simulation(
            small_config(Algorithm.MARAM, conflict_rate=20)
        )

        self.assertTrue(metrics.converged)
        self.assertEqual(metrics.invariant_violations, 0)
        self.assertLess(metrics.mean_resp_ms, 1)
        self.assertLess(metrics.p99_resp_ms, 1)

    def test_maram_only_down_moves_transient(self):
        metrics = run_simulation(
            small_config(Algorithm.MARAM, conflict_rate=20)
        )

        for record in metrics.records:
            if record.mtype != 'down':
                with self.subTest(op=record.op_id):
                    self.assertEqual(record.stabilization_ms, 0)
        self.assertGreater(metrics.down_move_stabilization(), 0)

    def test_udr_stabilizes_every_op(self):
        metrics = run_simulation(small_config(Algorithm.UDR))

        self.assertTrue(metrics.converged)
        self.assertEqual(metrics.invariant_violations, 0)
        for record in metrics.records:
            with self.subTest(op=record.op_id):
                self.assertGreater(record.stabilization_ms, 0)

    def test_maram_stabilizes_faster_than_udr(self):
        maram = run_simulation(small_config(Algorithm.MARAM))
        udr = run_simulation(small_config(Algorithm.UDR))

        self.assertLess(maram.mean_stab_ms, udr.mean_stab_ms)

    def test_global_lock_round_trip_from_bangalore(self):
        metrics = run_simulation(small_config(Algorithm.GLOBAL_LOCK))

        self.assertTrue(metrics.converged)
        self.assertEqual(metrics.invariant_violations, 0)
        self.assertGreaterEqual(
            metrics.move_response_by_origin()[BANGALORE], 288
        )

    def test_subtree_lock_safe(self):
        metrics = run_simulation(
            small_config(Algorithm.SUBTREE_LOCK, conflict_rate=20,
                         check_every_event=True)
        )

        self.assertTrue(metrics.converged)
        self.assertEqual(metrics.invariant_violations, 0)

    def test_aborted_moves_recorded(self):
        metrics = run_simulation(
            small_config(Algorithm.GLOBAL_LOCK, conflict_rate=20)
        )

        aborted = [r for r in metrics.records if r.status == ABORTED]
        self.assertEqual(len(aborted), metrics.aborts)
        for record in aborted:
            self.assertTrue(record.op_id.startswith('lock:'))
            self.assertEqual(record.stable_ms, record.ack_ms)


class SafetyAcrossSeedsTests(SimpleTestCase):
    """Twenty seeds at a 20% conflict rate, checked after every event"""

    def violations(self, algorithm):
        return [
            run_simulation(small_config(
                algorithm,
                conflict_rate=20,
                seed=seed,
                check_every_event=True
            )).invariant_violations
            for seed in range(20)
        ]

    def test_naive_breaks_invariant(self):
        self.assertTrue(any(self.violations(Algorithm.NAIVE)))

    def test_safe_algorithms_keep_invariant(self):
        for algorithm in (Algorithm.MARAM, Algorithm.UDR,
                          Algorithm.GLOBAL_LOCK, Algorithm.SUBTREE_LOCK):
            with self.subTest(algorithm=algorithm):
                self.assertEqual(self.violations(algorithm), [0] * 20)


class EvaluationWorkloadTests(SimpleTestCase):
    """997-node warm-up, 250 requests per replica, 10% conflicts"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.metrics = {
            algorithm: run_simulation(SimConfig(
                algorithm=algorithm,
                latency=LatencyMatrix.from_preset('real'),
                workload=WorkloadSpec(conflict_rate=10),
            ))
            for algorithm in (Algorithm.MARAM, Algorithm.UDR,
                              Algorithm.GLOBAL_LOCK)
        }

    def test_all_converge(self):
        for algorithm, metrics in self.metrics.items():
            with self.subTest(algorithm=algorithm):
                self.assertTrue(metrics.converged)
                self.assertEqual(len(metrics.records), 750)

    def test_lock_response_against_maram(self):
        maram = self.metrics[Algorithm.MARAM]
        lock = self.metrics[Algorithm.GLOBAL_LOCK]

        self.assertLess(maram.mean_resp_ms, 1)
        self.assertGreaterEqual(lock.mean_resp_ms, 150)
        self.assertGreaterEqual(
            lock.move_response_by_origin()[BANGALORE],
            10 * max(maram.move_response_by_origin()[BANGALORE], 1)
        )

    def test_stabilization_against_udr(self):
        maram = self.metrics[Algorithm.MARAM]
        udr = self.metrics[Algorithm.UDR]

        for record in maram.records:
            if record.mtype != 'down':
                self.assertEqual(record.stabilization_ms, 0)
        self.assertGreaterEqual(udr.mean_stab_ms, 3 * maram.mean_stab_ms)


class AccountingTests(SimpleTestCase):
    """Every request yields one record, with its timings filled in"""

    def test_one_record_per_request(self):
        for algorithm in Algorithm:
            metrics = run_simulation(
                small_config(algorithm, conflict_rate=10)
            )
            with self.subTest(algorithm=algorithm):
                self.assertEqual(len(metrics.records), 120)
                ids = [record.op_id for record in metrics.records]
                self.assertEqual(len(ids), len(set(ids)))
                for record in metrics.records:
                    self.assertIsNotNone(record.ack_ms)
                    self.assertIsNotNone(record.stable_ms)
                    self.assertGreaterEqual(record.ack_ms, record.submit_ms)
                    self.assertGreaterEqual(record.stable_ms, record.ack_ms)

    def test_batch_uses_consecutive_seeds(self):
        runs = run_batch(small_config(Algorithm.MARAM, seed=7, runs=3))

        self.assertEqual([m.run for m in runs], [0, 1, 2])
        self.assertEqual([m.seed for m in runs], [7, 8, 9])

    def test_overhead_measured(self):
        metrics = run_simulation(small_config(Algorithm.MARAM))

        self.assertGreater(metrics.bytes_per_op, 0)
        self.assertGreaterEqual(metrics.replay_ms, 0)

    def test_make_replica(self):
        replica = make_replica(Algorithm.SUBTREE_LOCK, 1, range(3))

        self.assertEqual(replica.id, 1)
        self.assertEqual(replica.replicas, (0, 1, 2))
        self.assertEqual(replica.name, 'subtree_lock')


class DeterminismTests(SimpleTestCase):
    """Identical configs give identical traces and result files"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def export(self, name, config):
        trace = io.StringIO()
        runs = run_batch(config, trace)
        ops_path, aggregate_path = export_metrics(runs, self.dir / name)
        return (
            trace.getvalue(),
            ops_path.read_bytes(),
            aggregate_path.read_bytes(),
        )

    def test_identical_outputs(self):
        for algorithm in (Algorithm.MARAM, Algorithm.SUBTREE_LOCK):
            config = small_config(algorithm, conflict_rate=20, runs=2)
            with self.subTest(algorithm=algorithm):
                self.assertEqual(
                    self.export(f'{algorithm.value}-a', config),
                    self.export(f'{algorithm.value}-b', config)
                )

    def test_seed_changes_outputs(self):
        first = self.export('a', small_config(Algorithm.MARAM, seed=1))
        second = self.export('b', small_config(Algorithm.MARAM, seed=2))

        self.assertNotEqual(first[1], second[1])

    def test_trace_lines_are_json(self):
        trace, _, _ = self.export(
            'trace', small_config(Algorithm.GLOBAL_LOCK, ops_per_replica=5)
        )

        entries = [json.loads(line) for line in trace.splitlines()]
        self.assertTrue(entries)
        kinds = {entry['kind'] for entry in entries}
        self.assertIn('lock_req', kinds)
        self.assertIn('lock_grant', kinds)
        times = [entry['t'] for entry in entries]
        self.assertEqual(times, sorted(times))
