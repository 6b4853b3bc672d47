#  Licensed under the Apache License, Version 2.0 (the "License"); you may
#  not use this file except in compliance with the License. You may obtain
#  a copy of the License at
#
#       http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#  WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#  License for the specific language governing permissions and limitations
#  under the License.

import math
import unittest

import numpy as np
from mock import MagicMock

from ellipt.orbit import critical
from ellipt.orbit.critical import OrbitSolution
from ellipt.orbit.reduction import ActionSample

BASIS = np.array([1.0, -2.0])


class FakeReduction(object):
    """Action cos(2 pi (s - shift)) along the quotient direction (1, -2)
    of the winding vector (2, 1), with a static trajectory per phi0."""

    n = 2

    def __init__(self, shift=0.0, flat=False, points=5, shared=False):
        self.shift = shift
        self.flat = flat
        self.shared = shared
        self.t = np.linspace(0.0, 1.0, points)
        self.calls = 0

    def evaluate(self, phi0):
        self.calls += 1
        phi0 = np.asarray(phi0, dtype=float)
        s = float(phi0 @ BASIS) / (2 * math.pi * 5.0)
        if self.flat:
            value, gradient = 1.0, np.zeros(2)
        else:
            angle = 2 * math.pi * (s - self.shift)
            value = math.cos(angle)
            gradient = -math.sin(angle) * BASIS / 5.0
        orbit = MagicMock()
        orbit.jump = gradient
        orbit.boundary_residual = 0.0
        orbit.t = self.t
        orbit.I = np.zeros((self.t.size, 2))
        orbit.phi = np.tile(phi0, (self.t.size, 1))
        if self.shared:
            # one trajectory through every grid angle
            orbit.phi = orbit.phi + np.outer(
                np.arange(self.t.size) / 12.0, 2 * math.pi * BASIS)
        orbit.z = np.zeros((self.t.size, 0), dtype=complex)
        return ActionSample(phi0, value, gradient, 0.0, orbit)


def fake_setup(k_vec=(2, 1), T=10.0):
    setup = MagicMock()
    setup.k_vec = k_vec
    setup.T = T
    setup.to_dict.return_value = {"T": T, "k": list(k_vec)}
    return setup


class TestQuotientBasis(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestQuotientBasis, self).setUp()

    def test_basis(self):
        self.assertEqual(critical.quotient_lattice_basis((2, 1)),
                         [(1, -2)])
        with self.assertRaises(ValueError):
            critical.quotient_lattice_basis((0, 0))


class TestFindCriticalPoints(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestFindCriticalPoints, self).setUp()
        self.setup = fake_setup()

    def test_extrema_on_grid(self):
        search = critical.find_critical_points(FakeReduction(), self.setup)
        self.assertFalse(search.degenerate)
        self.assertEqual(sorted(s.kind for s in search.solutions),
                         ["max", "min"])
        by_kind = {s.kind: s for s in search.solutions}
        np.testing.assert_allclose(by_kind["max"].phi_star, [0.0, 0.0],
                                   atol=1e-12)
        np.testing.assert_allclose(by_kind["min"].phi_star,
                                   [math.pi, -2 * math.pi])
        self.assertAlmostEqual(by_kind["min"].action_value, -1.0)
        self.assertEqual(len(search.grid_values), 12)

    def test_refined_off_grid(self):
        search = critical.find_critical_points(
            FakeReduction(shift=0.03), self.setup, closure_tol=1e-9)
        by_kind = {s.kind: s for s in search.solutions}
        s_min = by_kind["min"].phi_star[0] / (2 * math.pi)
        s_max = by_kind["max"].phi_star[0] / (2 * math.pi)
        self.assertAlmostEqual(s_min, 0.53, places=6)
        self.assertAlmostEqual(s_max % 1.0, 0.03, places=6)
        self.assertLessEqual(by_kind["min"].closure_residual, 1e-9)
        self.assertGreater(by_kind["min"].iterations, 0)

    def test_threads_give_same_answer(self):
        serial = critical.find_critical_points(
            FakeReduction(shift=0.03), self.setup)
        pooled = critical.find_critical_points(
            FakeReduction(shift=0.03), self.setup, threads=4)
        np.testing.assert_allclose(
            sorted(s.action_value for s in serial.solutions),
            sorted(s.action_value for s in pooled.solutions))

    def test_flat_action(self):
        search = critical.find_critical_points(FakeReduction(flat=True),
                                               self.setup)
        self.assertTrue(search.degenerate)
        self.assertEqual(len(search.solutions), 2)
        self.assertTrue(all(s.degenerate for s in search.solutions))
        self.assertNotEqual(search.solutions[0].phi_star.tolist(),
                            search.solutions[1].phi_star.tolist())

    def test_flat_action_on_one_trajectory(self):
        with self.assertRaises(critical.CriticalPointSearchError) as ctx:
            critical.find_critical_points(
                FakeReduction(flat=True, points=13, shared=True),
                self.setup)
        self.assertEqual(len(ctx.exception.dropped), 1)

    def test_unconverged_refinement_dropped(self):
        with self.assertRaises(critical.CriticalPointSearchError) as ctx:
            critical.find_critical_points(
                FakeReduction(shift=0.03), self.setup, closure_tol=1e-30,
                max_iter=2)
        self.assertEqual(len(ctx.exception.dropped), 2)

    def test_single_angle(self):
        reduction = MagicMock()
        reduction.n = 1
        closed = FakeReduction(flat=True).evaluate(np.zeros(2))
        reduction.evaluate.return_value = closed
        search = critical.find_critical_points(reduction,
                                               fake_setup((3,)))
        self.assertEqual(len(search.solutions), 1)
        self.assertEqual(search.solutions[0].kind, "min")
        reduction.evaluate.return_value = FakeReduction(
            shift=0.1).evaluate(np.zeros(2))
        with self.assertRaises(critical.CriticalPointSearchError):
            critical.find_critical_points(reduction, fake_setup((3,)))


class TestMinimalPeriod(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestMinimalPeriod, self).setUp()

    def _solution(self, k_vec, T=10.0, N=400):
        t = np.linspace(0.0, T, N + 1)
        phi = np.outer(t, 2 * math.pi * np.asarray(k_vec) / T)
        return OrbitSolution(phi[0], fake_setup(k_vec, T), t,
                             np.zeros((N + 1, 2)), phi,
                             np.zeros((N + 1, 0), dtype=complex), 0.5,
                             1e-9, "min")

    def test_gcd_bound(self):
        solution = self._solution((4, 6))
        self.assertEqual(solution.min_period_lower_bound, 5.0)
        report = critical.minimal_period_bound(solution, (4, 6), 1e-3, 2.0)
        self.assertEqual(report.gcd, 2)
        self.assertEqual(report.bound, 5.0)
        self.assertAlmostEqual(report.asymptotic, 10.0 ** (1.0 / 3.0))
        self.assertTrue(report.self_check)

    def test_to_dict(self):
        doc = self._solution((1, 2)).to_dict()
        self.assertEqual(doc["k"], [1, 2])
        self.assertEqual(doc["kind"], "min")
        self.assertEqual(len(doc["trajectory"]["t"]), 401)
        self.assertNotIn("trajectory",
                         self._solution((1, 2)).to_dict(trajectory=False))
