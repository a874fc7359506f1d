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

import csv
import os
import tempfile
import unittest

import numpy as np
from numpy import testing as npt
from scipy import stats

from dwsynapse import backend
from dwsynapse import device
from dwsynapse import exception
from dwsynapse import network
from dwsynapse import oracle


class PoissonBinomialTestCase(unittest.TestCase):

    def test_identical_events_are_binomial(self):
        pmf = oracle.poisson_binomial_pmf(np.full(12, 0.3))
        npt.assert_allclose(stats.binom.pmf(np.arange(13), 12, 0.3), pmf,
                            atol=1e-14)

    def test_sums_to_one(self):
        rng = np.random.default_rng(1)
        pmf = oracle.poisson_binomial_pmf(rng.random(300))
        self.assertAlmostEqual(1.0, pmf.sum(), places=12)
        self.assertTrue(np.all(pmf >= 0))

    def test_degenerate_events(self):
        npt.assert_array_equal([0.0, 0.0, 1.0, 0.0],
                               oracle.poisson_binomial_pmf([1.0, 1.0, 0.0]))
        npt.assert_array_equal([1.0], oracle.poisson_binomial_pmf([]))

    def test_invalid_probability(self):
        self.assertRaises(exception.InvalidArgument,
                          oracle.poisson_binomial_pmf, [0.5, 1.5])

    def test_capacity(self):
        self.assertRaises(exception.CapacityError,
                          oracle.poisson_binomial_pmf,
                          np.full(oracle.MAX_EVENTS + 1, 0.5))
        model = device.PassingProbabilityModel()
        self.assertRaises(exception.CapacityError,
                          oracle.exact_neuron_distribution, model,
                          np.full(200, 4.0), np.ones(200), 21)


class NeuronDistributionTestCase(unittest.TestCase):

    def test_moments(self):
        model = device.PassingProbabilityModel()
        fields = np.array([2.0, 4.0, 6.0, 8.0])
        x = np.array([1, 0, 1, 1])
        K = 3
        exact = oracle.exact_neuron_distribution(model, fields, x, K,
                                                 bias=0.25)
        p = device.passing_probability(model, fields)[x == 1]

        self.assertEqual(3 * K + 1, exact.support.size)
        self.assertAlmostEqual(0.25, exact.support[0])
        self.assertAlmostEqual(p.sum() + 0.25, exact.mean, places=12)
        self.assertAlmostEqual((p * (1 - p)).sum() / K, exact.variance,
                               places=12)

    def test_matches_sampled_outputs(self):
        model = device.PassingProbabilityModel()
        net = network.SynapseFieldNetwork(np.array([[3.0, 4.5, 6.0, 5.0]]),
                                          np.array([0.25]))
        x = np.array([1, 1, 0, 1])
        K = 2
        draws = 100000
        y = network.forward_sampled(net, model, np.tile(x, (draws, 1)), K,
                                    backend.InProcessBackend(),
                                    np.random.default_rng(5)).y[:, 0]
        exact = oracle.exact_neuron_distribution(model, net.fields[0], x, K,
                                                 bias=0.25)

        counts = np.rint((y - 0.25) * K).astype(int)
        observed = np.bincount(counts, minlength=exact.pmf.size)
        expected = exact.pmf * draws
        # pool the sparse tail bins into one
        dense = expected >= 5
        observed = np.append(observed[dense], observed[~dense].sum())
        expected = np.append(expected[dense], expected[~dense].sum())
        if expected[-1] == 0:
            observed, expected = observed[:-1], expected[:-1]
        _, p_value = stats.chisquare(observed, expected)
        self.assertGreater(p_value, 1e-3)

    def test_csv(self):
        model = device.PassingProbabilityModel()
        exact = oracle.exact_neuron_distribution(model, [4.0, 5.0], [1, 1],
                                                 2)
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'pmf.csv')
            exact.to_csv(path)
            with open(path) as f:
                rows = list(csv.reader(f))
        self.assertEqual(['y', 'probability'], rows[0])
        self.assertEqual(5, len(rows) - 1)


class FiniteDifferenceTestCase(unittest.TestCase):

    def test_quadratic(self):
        point = np.array([1.0, -2.0, 0.5])
        grad = oracle.finite_difference(lambda v: float(np.sum(v ** 2)),
                                        point)
        npt.assert_allclose(2 * point, grad, rtol=1e-6)
        npt.assert_array_equal([1.0, -2.0, 0.5], point)

    def test_non_finite(self):
        self.assertRaises(exception.NonFiniteEvaluation,
                          oracle.finite_difference,
                          lambda v: float(np.log(v[0])), np.array([0.0]))


class GaussianApproximationTestCase(unittest.TestCase):

    def test_many_inputs_single_sample(self):
        rng = np.random.default_rng(196)
        probs = rng.uniform(0.1, 0.9, 196)
        exact = oracle.ExactOutputDistribution(
            oracle.poisson_binomial_pmf(probs), 1)
        distance = oracle.gaussian_total_variation(
            exact, probs.sum(), (probs * (1 - probs)).sum())
        self.assertLess(distance, 0.05)

    def test_distance_shrinks_with_inputs(self):
        distances = []
        for n in (1, 196):
            probs = np.full(n, 0.5)
            exact = oracle.ExactOutputDistribution(
                oracle.poisson_binomial_pmf(probs), 1)
            distances.append(oracle.gaussian_total_variation(
                exact, probs.sum(), (probs * (1 - probs)).sum()))
        self.assertGreater(distances[0], 0.04)
        self.assertLess(distances[1], distances[0] / 4)

    def test_deterministic_output(self):
        exact = oracle.ExactOutputDistribution(np.array([1.0]), 4, bias=0.5)
        self.assertEqual(0.0, oracle.gaussian_total_variation(exact, 0.5,
                                                              0.0))
