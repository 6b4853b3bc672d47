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

from ellipt.apps.cli import exit_code_for
from ellipt.arith.resonance import FrequencyData
from ellipt.normal.twist import TwistSingularError
from ellipt.orbit import green
from ellipt.orbit.green import GreenOperator, PeriodSetup


class TestResonantAction(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestResonantAction, self).setUp()

    def test_one_dimensional(self):
        T = 20.5 * math.pi
        I0, k, omega_tilde = green.resonant_action(T, 0.1, [[1.0]], [1.0])
        self.assertEqual(k, (10,))
        self.assertAlmostEqual(float(I0[0]), -2.0 / 0.82, places=10)
        self.assertAlmostEqual(float(I0[0]), -2.4390, places=4)
        self.assertAlmostEqual(float(omega_tilde[0]), 20.0 / 20.5)
        self.assertAlmostEqual(1.0 + 0.01 * float(I0[0]),
                               float(omega_tilde[0]))

    def test_period_setup(self):
        freq = FrequencyData([1.0], [math.sqrt(2)])
        T = 20.5 * math.pi
        setup = PeriodSetup.build(T, 0.1, [[1.0]], [[0.2]], freq)
        self.assertEqual(setup.k_vec, (10,))
        self.assertAlmostEqual(float(setup.Omega_eta[0]),
                               math.sqrt(2) + 0.01 * 0.2 * float(
                                   setup.I0[0]))
        self.assertTrue(setup.monodromy.invertible)
        self.assertEqual(setup.minv_bound, setup.monodromy.minv_norm)
        self.assertEqual(setup.to_dict()["k"], [10])
        fixed = PeriodSetup.build(T, 0.1, [[1.0]], [[0.2]], freq,
                                  minv_bound=7.0)
        self.assertEqual(fixed.minv_bound, 7.0)


class TestMonodromy(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestMonodromy, self).setUp()

    def test_half_turn(self):
        report = green.monodromy_gap([1.0], math.pi)
        self.assertTrue(report.invertible)
        self.assertAlmostEqual(report.minv_norm, 0.5)
        self.assertAlmostEqual(report.min_distance, math.pi)
        self.assertAlmostEqual(report.stima_bound, 2.0 / math.pi)

    def test_full_turn(self):
        report = green.monodromy_gap([1.0], 2 * math.pi)
        self.assertFalse(report.invertible)
        with self.assertRaises(green.MonodromySingularError) as ctx:
            GreenOperator([[1.0]], [1.0], 2 * math.pi, 64)
        self.assertFalse(ctx.exception.report.invertible)

    def test_no_normal_frequencies(self):
        report = green.monodromy_gap([], 3.0)
        self.assertTrue(report.invertible)
        self.assertEqual(report.minv_norm, 0.0)


class TestGreenOperator(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestGreenOperator, self).setUp()
        self.T = 3.0
        self.Omega = 1.3
        self.op = GreenOperator([[2.0]], [self.Omega], self.T, 256)
        self.t = self.op.t

    def _zeros(self):
        P = self.t.size
        return (np.zeros((P, 1)), np.zeros((P, 1)),
                np.zeros((P, 1), dtype=complex))

    def test_zero_input(self):
        J, psi, z = self.op.apply(*self._zeros())
        self.assertEqual(float(np.abs(J).max()), 0.0)
        self.assertEqual(float(np.abs(psi).max()), 0.0)
        self.assertEqual(float(np.abs(z).max()), 0.0)

    def test_constant_action_forcing(self):
        Jhat, psihat, zhat = self._zeros()
        Jhat[:] = 0.7
        J, psi, _ = self.op.apply(Jhat, psihat, zhat)
        t, T, c, M = self.t, self.T, 0.7, 2.0
        # J' = c, psi' = M J, psi(0) = psi(T) = 0
        np.testing.assert_allclose(J[:, 0], c * (t - T / 2), atol=1e-12)
        np.testing.assert_allclose(psi[:, 0], M * c * (t ** 2 - T * t) / 2,
                                   atol=1e-12)

    def test_constant_angle_forcing(self):
        Jhat, psihat, zhat = self._zeros()
        psihat[:] = 0.4
        J, psi, _ = self.op.apply(Jhat, psihat, zhat)
        np.testing.assert_allclose(J[:, 0], -0.2, atol=1e-12)
        np.testing.assert_allclose(psi[:, 0], 0.0, atol=1e-12)

    def test_constant_normal_forcing(self):
        Jhat, psihat, zhat = self._zeros()
        zhat[:] = 0.5 - 0.1j
        _, _, z = self.op.apply(Jhat, psihat, zhat)
        # the periodic solution of z' = i Omega z + w is constant
        expected = 1j * (0.5 - 0.1j) / self.Omega
        np.testing.assert_allclose(z[:, 0], expected, atol=1e-8)
        self.assertLess(abs(z[-1, 0] - z[0, 0]), 1e-12)

    def test_green_apply_matches(self):
        Jhat, psihat, zhat = self._zeros()
        Jhat[:, 0] = np.sin(self.t)
        expected = self.op.apply(Jhat, psihat, zhat)
        got = green.green_apply(Jhat, psihat, zhat, [[2.0]], [self.Omega],
                                self.T)
        for a, b in zip(expected, got):
            np.testing.assert_allclose(a, b)

    def test_norm_bound(self):
        minv = green.monodromy_gap([self.Omega], self.T).minv_norm
        expected = 3.0 * (0.5 + 2.0 * 9.0 + 1.0 * 3.0 + minv * 3.0)
        self.assertAlmostEqual(self.op.norm_bound(), expected)
        self.assertAlmostEqual(
            green.green_norm_bound([[2.0]], [self.Omega], self.T), expected)

    def test_singular_matrix_refused(self):
        for M in ([[0.0]], [[1.0, 2.0], [2.0, 4.0]]):
            with self.assertRaises(TwistSingularError):
                GreenOperator(M, [self.Omega], self.T, 16)
            with self.assertRaises(TwistSingularError):
                green.green_norm_bound(M, [self.Omega], self.T)
        self.assertEqual(
            exit_code_for(TwistSingularError(np.zeros((1, 1)), 0.0)), 5)
