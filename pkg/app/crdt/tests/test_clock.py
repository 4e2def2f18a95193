"""
Tests for vector clocks
"""
from django.test import SimpleTestCase

from crdt.clock import Ordering, VectorClock, vc_compare


def vc(*counts):
    return VectorClock.of(dict(enumerate(counts)))


class VectorClockTests(SimpleTestCase):

    def test_compare(self):
        self.assertIs(
            vc_compare(vc(1, 0, 0), vc(0, 1, 0)),
            Ordering.CONCURRENT
        )
        self.assertIs(vc_compare(vc(1, 2, 0), vc(1, 3, 0)), Ordering.LESS)
        self.assertIs(vc_compare(vc(1, 3, 0), vc(1, 2, 0)), Ordering.GREATER)
        self.assertIs(vc_compare(VectorClock(), VectorClock()), Ordering.EQUAL)

    def test_zero_entries_are_absent(self):
        self.assertEqual(vc(0, 2, 0), VectorClock.of({1: 2}))
        self.assertEqual(vc(0, 0).entries, {})

    def test_tick_and_merge(self):
        clock = VectorClock().tick(0).tick(0).tick(2)
        self.assertEqual(clock.entries, {0: 2, 2: 1})
        merged = clock.merge(vc(1, 4))
        self.assertEqual(merged.entries, {0: 2, 1: 4, 2: 1})
        self.assertEqual(merged.total(), 7)
        self.assertTrue(merged.dominates(clock))
        self.assertFalse(clock.dominates(merged))

    def test_negative_entries_rejected(self):
        with self.assertRaises(ValueError):
            VectorClock.of({0: -1})

    def test_str(self):
        self.assertEqual(str(vc(1, 0, 3)), '[0:1, 2:3]')
