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

from ellipt.series import codec
from ellipt.series.tfseries import TFSeries, TermKey
from ellipt.arith.resonance import FrequencyData
from ellipt.normal import averaging, twist
from ellipt.normal.averaging import ResonantClass

SQ2 = math.sqrt(2)


def key(k, a, abar, ell):
    return TermKey.make(k, a, abar, ell)


def integrable(quartic, coupling=0.2, cap=6):
    """I + sqrt2 z zbar plus action quartic terms and I z zbar."""
    n = len(next(iter(quartic)))
    zero = (0,) * n
    terms = {}
    for i in range(n):
        e = tuple(int(p == i) for p in range(n))
        terms[key(e, (0,), (0,), zero)] = 1.0 + i
        terms[key(e, (1,), (1,), zero)] = coupling
    terms[key(zero, (1,), (1,), zero)] = SQ2
    for k, c in quartic.items():
        terms[key(k, (0,), (0,), zero)] = c
    return TFSeries(n, 1, terms, degree_cap=cap, fourier_cap=4, real=True)


class TestResonantSet(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestResonantSet, self).setUp()

    def test_classes(self):
        cases = [
            (key((0,), (1,), (2,), (0,)), ResonantClass.S1),
            (key((1,), (1,), (0,), (0,)), ResonantClass.NONE),
            (key((0,), (2,), (2,), (1,)), ResonantClass.S2_0),
            (key((1,), (1,), (1,), (0,)), ResonantClass.S2_1),
            (key((1,), (1,), (1,), (1,)), ResonantClass.NONE),
            (key((2,), (0,), (0,), (0,)), ResonantClass.S2_2),
            (key((2,), (0,), (0,), (-1,)), ResonantClass.NONE),
            (key((1,), (2,), (1,), (3,)), ResonantClass.S3),
            (key((2,), (1,), (0,), (0,)), ResonantClass.NONE),
            (key((1,), (0,), (0,), (0,)), ResonantClass.OUT_OF_RANGE),
            (key((3,), (0,), (0,), (0,)), ResonantClass.OUT_OF_RANGE),
        ]
        for k, expected in cases:
            self.assertEqual(averaging.resonant_set_member(k), expected,
                             msg=str(k))
        self.assertTrue(ResonantClass.S3.resonant)
        self.assertFalse(ResonantClass.NONE.resonant)
        self.assertFalse(ResonantClass.OUT_OF_RANGE.resonant)


class TestHamiltonianForm(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestHamiltonianForm, self).setUp()

    def test_frequencies(self):
        H = integrable({(2,): 0.5})
        H = H + H.constant(3.0)
        freq = averaging.check_hamiltonian_form(H, gamma=0.01, tau=1.5)
        np.testing.assert_allclose(freq.omega, [1.0])
        np.testing.assert_allclose(freq.Omega, [SQ2])
        self.assertEqual(freq.gamma, 0.01)

    def test_refused_terms(self):
        linear = TFSeries(1, 1, {key((0,), (1,), (0,), (0,)): 1.0})
        with self.assertRaises(averaging.HamiltonianFormatError) as ctx:
            averaging.check_hamiltonian_form(linear)
        self.assertEqual(ctx.exception.key, key((0,), (1,), (0,), (0,)))
        angular = TFSeries(1, 0, {key((1,), (), (), (1,)): 1.0})
        with self.assertRaises(averaging.HamiltonianFormatError):
            averaging.check_hamiltonian_form(angular)
        complex_freq = TFSeries(1, 0, {key((1,), (), (), (0,)): 1.0 + 1j})
        with self.assertRaises(averaging.HamiltonianFormatError):
            averaging.check_hamiltonian_form(complex_freq)

    def test_rescale(self):
        H = integrable({(2,): 0.5})
        out = averaging.rescale(H, 0.1)
        self.assertAlmostEqual(out.series.coefficient((2,), (0,), (0,), (0,)),
                               0.5 * 0.01)
        self.assertAlmostEqual(out.series.coefficient((1,), (0,), (0,), (0,)),
                               1.0)
        self.assertEqual(out.exponents[key((1,), (1,), (1,), (0,))], 2)
        with self.assertRaises(ValueError):
            averaging.rescale(H, 0.0)


class TestGeneratingFunction(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestGeneratingFunction, self).setUp()
        self.freq = FrequencyData([1.0], [SQ2])

    def test_cubic_coefficient(self):
        source = TFSeries(1, 1, {key((1,), (1,), (0,), (0,)): 1.0,
                                 key((0,), (1,), (2,), (0,)): 1.0},
                          degree_cap=6)
        chi = averaging.build_generating_function(source, self.freq, 1)
        self.assertEqual(chi.keys(), [key((1,), (1,), (0,), (0,))])
        self.assertAlmostEqual(chi.coefficient((1,), (1,), (0,), (0,)),
                               -1j / SQ2)

    def test_small_divisor(self):
        freq = FrequencyData([1.0], [1.0])
        source = TFSeries(1, 1, {key((1,), (1,), (0,), (-1,)): 1.0})
        with self.assertRaises(twist.SmallDivisorError) as ctx:
            averaging.build_generating_function(source, freq, 1)
        self.assertEqual(ctx.exception.ell, (-1,))

    def test_cap_refused(self):
        H = integrable({(2,): 0.5}, cap=5)
        with self.assertRaises(averaging.LieTransformCapError) as ctx:
            averaging.averaged_normal_form(H, FrequencyData([1.0], [SQ2]))
        self.assertEqual(ctx.exception.required_cap, 6)
        with self.assertRaises(averaging.LieTransformCapError):
            averaging.lie_transform(H, TFSeries.zero_like(H), 3)


class TestAveragedNormalForm(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestAveragedNormalForm, self).setUp()

    def test_integrable_is_untouched(self):
        H = integrable({(2, 0): 0.5, (1, 1): 0.1, (0, 2): 0.6})
        freq = averaging.check_hamiltonian_form(H)
        nf = averaging.averaged_normal_form(H, freq)
        np.testing.assert_allclose(nf.R_twist, [[1.0, 0.1], [0.1, 1.2]])
        np.testing.assert_allclose(nf.Q_coupling, [[0.2, 0.2]])
        self.assertTrue(nf.remainder.is_zero())
        self.assertTrue(all(c.is_zero() for c in nf.chi))
        self.assertEqual(nf.diagnostics["orders_used"], 3)

    def test_vanishing_twist(self):
        doc = codec.load_model("intera")
        freq = averaging.check_hamiltonian_form(doc.series, doc.gamma,
                                                doc.tau)
        nf = averaging.averaged_normal_form(doc.series, freq)
        self.assertAlmostEqual(float(nf.R_twist[0, 0]), 0.0, places=10)
        self.assertAlmostEqual(nf.chi[0].coefficient((1,), (1,), (0,), (0,)),
                               -1j / SQ2)
        with self.assertRaises(twist.TwistSingularError):
            twist.require_invertible(nf.R_twist)

    def test_direct_matrices_agree(self):
        doc = codec.load_model("model_n2m2")
        freq = averaging.check_hamiltonian_form(doc.series, doc.gamma,
                                                doc.tau)
        nf = averaging.averaged_normal_form(doc.series, freq)
        direct = twist.compute_twist_matrix(doc.series, freq)
        np.testing.assert_allclose(nf.R_twist, direct.matrix, atol=1e-9)
        np.testing.assert_allclose(nf.R_twist, nf.R_twist.T)
        self.assertLess(nf.diagnostics["eliminated_residual"], 1e-9)
        twist.require_invertible(nf.R_twist)
        again = averaging.NormalFormResult.from_dict(nf.to_dict())
        np.testing.assert_allclose(again.R_twist, nf.R_twist)
        self.assertTrue(again.H_avg.allclose(nf.H_avg))

    def test_rescaled_hamiltonian(self):
        H = integrable({(2,): 0.5})
        nf = averaging.averaged_normal_form(
            H, averaging.check_hamiltonian_form(H), eta=0.5)
        out = nf.rescaled()
        self.assertAlmostEqual(out.coefficient((2,), (0,), (0,), (0,)),
                               0.5 * 0.25)
        self.assertAlmostEqual(out.coefficient((1,), (1,), (1,), (0,)),
                               0.2 * 0.25)


class TestTwistHelpers(unittest.TestCase):
    maxDiff = None

    def setUp(self):
        super(TestTwistHelpers, self).setUp()

    def test_require_invertible(self):
        R = np.eye(2)
        self.assertEqual(twist.require_invertible(R).shape, R.shape)
        with self.assertRaises(twist.TwistSingularError):
            twist.require_invertible([[1e-12]])
        with self.assertRaises(twist.TwistSingularError) as ctx:
            twist.require_invertible([[1.0, 1.0], [1.0, 1.0]])
        self.assertGreater(ctx.exception.cond, 1e12)

    def test_direct_twist_correction(self):
        H = TFSeries(1, 1, {key((1,), (0,), (0,), (0,)): 1.0,
                            key((0,), (1,), (1,), (0,)): SQ2,
                            key((1,), (1,), (0,), (1,)): 0.5,
                            key((1,), (0,), (1,), (-1,)): 0.5,
                            key((2,), (0,), (0,), (0,)): 1.0},
                     degree_cap=6, real=True)
        freq = FrequencyData([1.0], [SQ2])
        report = twist.compute_twist_matrix(H, freq)
        expected = 2.0 - 2 * 0.25 / (1.0 + SQ2)
        self.assertAlmostEqual(float(report.matrix[0, 0]), expected)
        self.assertEqual(report.imag_residual, 0.0)
