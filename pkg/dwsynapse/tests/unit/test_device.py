#    Licensed under the Apache License, Version 2.0 (the "License"); you may
#    not use this file except in compliance with the License. You may obtain
#    a copy of the License at
#
#         http://www.apache.org/licenses/LICENSE-2.0
#
#    Unless required by applicable law or agreed to in writing, software
#    distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#    WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#    License for the specific language governing permissions and limitations
#    under the License.

import os
import tempfile
import unittest
from unittest import mock

import numpy as np
from numpy import testing as npt
from scipy import stats

from dwsynapse import device
from dwsynapse import exception


class PassingProbabilityTestCase(unittest.TestCase):

    def setUp(self):
        super(PassingProbabilityTestCase, self).setUp()
        self.model = device.PassingProbabilityModel()

    def test_floor_and_centre(self):
        self.assertAlmostEqual(0.0219, float(device.passing_probability(
            self.model, -1000.0)), places=12)
        self.assertAlmostEqual((1 + 0.0219) / 2, float(
            device.passing_probability(self.model, 4.63)), places=12)
        self.assertAlmostEqual(1.0, float(device.passing_probability(
            self.model, 1000.0)), places=12)

    def test_range(self):
        h = np.linspace(-50, 50, 2001)
        f = device.passing_probability(self.model, h)
        self.assertTrue(np.all(f >= self.model.d))
        self.assertTrue(np.all(f <= 1.0))
        self.assertTrue(np.all(np.diff(f) >= 0))

    def test_non_finite_field(self):
        for bad in (np.nan, np.inf, -np.inf):
            self.assertRaises(exception.DomainError,
                              device.passing_probability, self.model, bad)
            self.assertRaises(exception.DomainError,
                              device.passing_probability_derivative,
                              self.model, [1.0, bad])

    def test_derivative_matches_central_difference(self):
        step = 1e-4
        for h in np.linspace(-5, 15, 41):
            numeric = (device.passing_probability(self.model, h + step)
                       - device.passing_probability(self.model, h - step)) \
                / (2 * step)
            analytic = device.passing_probability_derivative(self.model, h)
            npt.assert_allclose(analytic, numeric, rtol=1e-6)

    def test_inverse(self):
        for p in (0.03, 0.25, 0.5, 0.9, 0.999):
            h = device.field_for_probability(self.model, p)
            self.assertAlmostEqual(p, float(device.passing_probability(
                self.model, h)), places=10)
        h = device.field_for_probability(self.model, 0.5)
        self.assertAlmostEqual(0.5, float(device.passing_probability(
            self.model, h)), places=12)

    def test_inverse_out_of_range(self):
        for p in (0.0, self.model.d, 1.0, 1.5):
            self.assertRaises(exception.ProbabilityOutOfRange,
                              device.field_for_probability, self.model, p)

    def test_invalid_parameters(self):
        self.assertRaises(exception.InvalidArgument,
                          device.PassingProbabilityModel, d=0.5)
        self.assertRaises(exception.InvalidArgument,
                          device.PassingProbabilityModel, delta=0.0)
        self.assertRaises(exception.InvalidArgument,
                          device.PassingProbabilityModel, h0=np.nan)

    def test_calibration_file(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'calibration.json')
            model = device.PassingProbabilityModel(d=0.01, h0=5.0, delta=3.0)
            model.save(path)
            self.assertEqual(model, device.PassingProbabilityModel.load(path))

    def test_incomplete_calibration(self):
        self.assertRaises(exception.InvalidArgument,
                          device.PassingProbabilityModel.from_dict,
                          {'d': 0.01, 'h0_mT': 5.0})

    @mock.patch.object(device, 'LOG', autospec=True)
    def test_field_range_warning(self, mock_log):
        self.assertEqual(0, device.check_field_range([0.0, 5.0, 10.0]))
        self.assertFalse(mock_log.warning.called)

        self.assertEqual(2, device.check_field_range([-1.0, 5.0, 12.0]))
        self.assertTrue(mock_log.warning.called)


class SamplingTestCase(unittest.TestCase):

    def setUp(self):
        super(SamplingTestCase, self).setUp()
        self.model = device.PassingProbabilityModel()

    def test_zero_input_consumes_no_randomness(self):
        rng = np.random.default_rng(5)
        state = rng.bit_generator.state
        self.assertEqual(0, device.sample_synapse(self.model, 100.0, 0, rng))
        self.assertEqual(0.0, device.sample_mean_weight(
            self.model, 100.0, 0, 16, rng))
        npt.assert_array_equal(np.zeros(4), device.sample_bits(
            self.model, 100.0, 0, 4, rng))
        self.assertEqual(state, rng.bit_generator.state)

    def test_invalid_input(self):
        rng = np.random.default_rng(0)
        self.assertRaises(exception.InvalidArgument,
                          device.sample_synapse, self.model, 4.0, 2, rng)
        self.assertRaises(exception.InvalidArgument,
                          device.sample_mean_weight, self.model, 4.0, 1, 0,
                          rng)
        self.assertRaises(exception.InvalidArgument,
                          device.sample_mean_weight, self.model, 4.0, 1, 2,
                          rng, method='magic')

    def test_deterministic_with_seed(self):
        first = [device.sample_synapse(self.model, 4.0, 1,
                                       np.random.default_rng(9))
                 for _ in range(3)]
        self.assertEqual(1, len(set(first)))

    def test_bernoulli_frequency(self):
        rng = np.random.default_rng(1234)
        h = 5.0
        n = 10 ** 5
        p = float(device.passing_probability(self.model, h))
        hits = sum(device.sample_synapse(self.model, h, 1, rng)
                   for _ in range(n))
        result = stats.binomtest(hits, n, p)
        self.assertGreater(result.pvalue, 1e-3)

    def test_mean_weight_grid(self):
        rng = np.random.default_rng(2)
        for K in (1, 3, 8):
            for method in ('binomial', 'bernoulli'):
                w = device.sample_mean_weight(self.model, 4.0, 1, K, rng,
                                              method=method)
                self.assertTrue(0.0 <= w <= 1.0)
                self.assertAlmostEqual(w * K, round(w * K))

    def test_mean_weight_distribution(self):
        rng = np.random.default_rng(77)
        K = 4
        p = float(device.passing_probability(self.model, 4.0))
        draws = np.array([device.sample_mean_weight(self.model, 4.0, 1, K,
                                                    rng)
                          for _ in range(20000)])
        observed = np.bincount(np.round(draws * K).astype(int),
                               minlength=K + 1)
        expected = stats.binom.pmf(np.arange(K + 1), K, p) * draws.size
        _, pvalue = stats.chisquare(observed, expected)
        self.assertGreater(pvalue, 1e-3)

    def test_bits(self):
        rng = np.random.default_rng(3)
        bits = device.sample_bits(self.model, 100.0, 1, 16, rng)
        self.assertEqual(np.uint8, bits.dtype)
        npt.assert_array_equal(np.ones(16), bits)


class FitTestCase(unittest.TestCase):

    def test_recovers_parameters(self):
        truth = device.PassingProbabilityModel(d=0.03, h0=5.2, delta=2.1)
        fields = np.linspace(0, 10, 41)
        fractions = device.passing_probability(truth, fields)

        fitted = device.fit_passing_probability(fields, fractions)

        self.assertAlmostEqual(truth.d, fitted.d, places=4)
        self.assertAlmostEqual(truth.h0, fitted.h0, places=3)
        self.assertAlmostEqual(truth.delta, fitted.delta, places=3)

    def test_too_few_points(self):
        self.assertRaises(exception.InvalidArgument,
                          device.fit_passing_probability, [1.0, 2.0],
                          [0.1, 0.2])
