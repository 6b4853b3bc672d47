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
from mock import patch, MagicMock

from ellipt.series.tfseries import TFSeries, TermKey
from ellipt.normal.averaging import HamiltonianFormatError
from ellipt.orbit import continuation
from ellipt.orbit.continuation import ContinuationModel

SQ2 = math.sqrt(2)


def key(k, a, abar, ell):
    return TermKey.make(k, a, abar, ell)


def split_series():
    """h = (J1^2 + J2^2) / 2, Omega~ = sqrt2 + J1 / 10, g = z^2 zbar + c.c.,
    f = cos(psi1)."""
    zero = (0, 0)
    return TFSeries(2, 1, {
        key((2, 0), (0,), (0,), zero): 0.5,
        key((0, 2), (0,), (0,), zero): 0.5,
        key((0, 0), (1,), (1,), zero): SQ2,
        key((1, 0), (1,), (1,), zero): 0.1,
        key((0, 0), (2,), (1,), zero): 1.0,
        key((0, 0), (1,), (2,), zero): 1.0,
        key((0, 0), (0,), (0,), (1, 0)): 0.5,
        key((0, 0), (0,), (0,), (-1, 0)): 0.5,
    }, degree_cap=8, real=True)


class TestContinuationModel(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestContinuationModel, self).setUp()

    def test_split(self):
        model = ContinuationModel.from_series(split_series())
        self.assertEqual(len(model.h), 2)
        self.assertEqual(len(model.normal), 2)
        self.assertEqual(len(model.g), 2)
        self.assertEqual(len(model.f), 2)
        np.testing.assert_allclose(model.frequency([0.3, -0.4]),
                                   [0.3, -0.4])
        np.testing.assert_allclose(model.hessian([0.3, -0.4]), np.eye(2))
        np.testing.assert_allclose(model.normal_frequencies([2.0, 0.0]),
                                   [SQ2 + 0.2])

    def test_refused_terms(self):
        bad = TFSeries(1, 1, {key((1,), (1,), (0,), (0,)): 1.0})
        with self.assertRaises(HamiltonianFormatError):
            ContinuationModel.from_series(bad)
        squeeze = TFSeries(1, 1, {key((0,), (2,), (0,), (0,)): 1.0})
        with self.assertRaises(HamiltonianFormatError):
            ContinuationModel.from_series(squeeze)

    def test_dimension_mismatch(self):
        h = TFSeries(1, 1, {key((2,), (0,), (0,), (0,)): 0.5})
        with self.assertRaises(ValueError):
            ContinuationModel(h, TFSeries(2, 1))

    def test_hamiltonian_scaling(self):
        H = continuation.continuation_hamiltonian(split_series(), 0.1)
        self.assertAlmostEqual(H.coefficient((2, 0), (0,), (0,), (0, 0)),
                               0.5)
        self.assertAlmostEqual(H.coefficient((0, 0), (1,), (1,), (0, 0)),
                               0.1 * SQ2)
        self.assertAlmostEqual(H.coefficient((0, 0), (2,), (1,), (0, 0)),
                               0.1)
        self.assertAlmostEqual(H.coefficient((0, 0), (0,), (0,), (1, 0)),
                               0.5e-4)


class TestResonantTorusContinuation(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestResonantTorusContinuation, self).setUp()
        zero = (0, 0)
        self.model = ContinuationModel(
            TFSeries(2, 1, {key((2, 0), (0,), (0,), zero): 0.5,
                            key((0, 2), (0,), (0,), zero): 0.5},
                     degree_cap=6, real=True),
            TFSeries(2, 1, {key((0, 0), (1,), (1,), zero): SQ2},
                     degree_cap=6, real=True))
        self.T = 10.0
        self.J0 = 2 * math.pi * np.array([1.0, 1.0]) / self.T

    def test_unperturbed_torus(self):
        result = continuation.resonant_torus_continuation(
            self.model, self.J0, self.T, (1, 1), 0.05, grid_per_dim=6,
            min_samples=64)
        self.assertTrue(result.search.degenerate)
        self.assertEqual(len(result.solutions), 2)
        for corrections in result.corrections:
            np.testing.assert_allclose(corrections, 0.0, atol=1e-12)
        np.testing.assert_allclose(result.setup.I0, self.J0)
        np.testing.assert_allclose(result.setup.Omega_lin, [0.05 * SQ2])
        self.assertEqual(result.setup.to_dict()["k"], [1, 1])

    def test_window(self):
        with self.assertRaises(continuation.ContinuationWindowError):
            continuation.resonant_torus_continuation(
                self.model, self.J0, self.T, (1, 1), 0.2)

    def test_nonresonant_start(self):
        with self.assertRaises(continuation.ResonanceMismatchError):
            continuation.resonant_torus_continuation(
                self.model, self.J0 + 0.01, self.T, (1, 1), 0.05)

    @patch.object(continuation.optimize, "root")
    def test_failed_polish(self, root):
        root.return_value = MagicMock(success=False, x=self.J0 + 1e-3)
        with self.assertRaises(continuation.ResonanceMismatchError):
            continuation.resonant_torus_continuation(
                self.model, self.J0, self.T, (1, 1), 0.05)
        self.assertEqual(root.call_count, 1)


class TestPerturbedContinuation(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestPerturbedContinuation, self).setUp()
        zero = (0, 0)
        self.model = ContinuationModel(
            TFSeries(2, 1, {key((2, 0), (0,), (0,), zero): 0.5,
                            key((0, 2), (0,), (0,), zero): 0.5},
                     degree_cap=8, real=True),
            TFSeries(2, 1, {key((0, 0), (1,), (1,), zero): SQ2},
                     degree_cap=8, real=True),
            g=TFSeries(2, 1, {key((0, 0), (2,), (1,), zero): 1.0,
                              key((0, 0), (1,), (2,), zero): 1.0},
                       degree_cap=8, real=True),
            f=TFSeries(2, 1, {key((0, 0), (0,), (0,), (1, -1)): 0.5,
                              key((0, 0), (0,), (0,), (-1, 1)): 0.5,
                              key((0, 0), (0,), (0,), (1, 0)): 0.5,
                              key((0, 0), (0,), (0,), (-1, 0)): 0.5},
                       degree_cap=8, real=True))
        self.T = 10.0
        self.J0 = 2 * math.pi * np.array([1.0, 1.0]) / self.T

    def _run(self, eps):
        return continuation.resonant_torus_continuation(
            self.model, self.J0, self.T, (1, 1), eps, order=2,
            grid_per_dim=6, min_samples=64)

    def test_orbits_close(self):
        result = self._run(0.05)
        self.assertFalse(result.search.degenerate)
        self.assertGreaterEqual(len(result.solutions), 2)
        for solution in result.solutions:
            self.assertLessEqual(solution.closure_residual, 1e-7)
        for corrections in result.corrections:
            self.assertGreater(max(corrections), 0.0)
            self.assertAlmostEqual(corrections[2], 0.0, places=12)

    def test_corrections_scale_with_eps_squared(self):
        norms = [max(max(c) for c in self._run(eps).corrections)
                 for eps in (0.05, 0.025)]
        ratio = norms[0] / norms[1]
        self.assertGreaterEqual(ratio, 3.0)
        self.assertLessEqual(ratio, 5.0)
