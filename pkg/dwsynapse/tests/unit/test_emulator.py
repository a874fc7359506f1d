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

import unittest
from unittest import mock

import numpy as np

from dwsynapse import control
from dwsynapse import device
from dwsynapse import emulator


def request(**kwargs):
    document = {'v': 1, 'id': 1, 'field_mT': 4.63, 'input': 1,
                'samples': 4}
    document.update(kwargs)
    return document


class HandleRequestTestCase(unittest.TestCase):

    def setUp(self):
        super(HandleRequestTestCase, self).setUp()
        self.model = device.PassingProbabilityModel()
        self.synapse = emulator.EmulatedSynapse(self.model)
        self.connection = control.Connection(seed=0, number=1)

    def _handle(self, document):
        return emulator.handle_request(self.synapse, document,
                                       self.connection)

    def test_bits(self):
        response = self._handle(request(id=17, samples=8))
        self.assertEqual(1, response['v'])
        self.assertEqual(17, response['id'])
        self.assertEqual(8, len(response['bits']))
        self.assertTrue(set(response['bits']) <= {0, 1})

    def test_zero_input(self):
        state = self.connection.rng.bit_generator.state
        response = self._handle(request(input=0, field_mT=100.0))
        self.assertEqual([0, 0, 0, 0], response['bits'])
        self.assertEqual(state, self.connection.rng.bit_generator.state)

    def test_saturated_fields(self):
        self.assertEqual([1] * 4, self._handle(
            request(field_mT=100.0))['bits'])

    def test_errors_keep_id(self):
        cases = [
            request(id=5, input=2),
            request(id=5, samples=0),
            request(id=5, samples=emulator.MAX_SAMPLES + 1),
            request(id=5, samples=1.5),
            request(id=5, field_mT='high'),
            request(id=5, field_mT=float('nan')),
            request(id=5, field_mT=True),
            request(id=5, seed=-1),
            request(id=5, v=2),
        ]
        missing = request(id=5)
        del missing['samples']
        cases.append(missing)

        for document in cases:
            response = self._handle(document)
            self.assertIn('error', response, document)
            self.assertEqual(5, response['id'])
            self.assertNotIn('bits', response)

    def test_overflowing_numbers(self):
        response = self._handle(request(id=3, field_mT=10 ** 400))
        self.assertIn('error', response)
        response = self._handle(request(id=3, samples=float('inf')))
        self.assertIn('error', response)

    def test_non_object(self):
        for document in (3, 'text', None, [1]):
            response = self._handle(document)
            self.assertIsNone(response['id'])
            self.assertIn('error', response)

    def test_bad_id(self):
        self.assertIn('error', self._handle(request(id='seven')))
        self.assertIn('error', self._handle(request(id=None)))

    def test_seed_reseeds_connection(self):
        first = self._handle(request(seed=11, samples=64))['bits']
        other = control.Connection(seed=99, number=7)
        second = emulator.handle_request(
            self.synapse, request(seed=11, samples=64), other)['bits']
        self.assertEqual(first, second)
        expected = device.sample_bits(self.model, 4.63, 1, 64,
                                      np.random.default_rng(11)).tolist()
        self.assertEqual(expected, first)


class EmulatedSynapseTestCase(unittest.TestCase):

    def setUp(self):
        super(EmulatedSynapseTestCase, self).setUp()
        self.model = device.PassingProbabilityModel()

    def test_trace_mode(self):
        synapse = emulator.EmulatedSynapse(self.model, trace_mode=True)
        rng = np.random.default_rng(3)
        high, traces = synapse.measure(100.0, 1, 20, rng, keep_traces=True)
        self.assertEqual([1] * 20, high)
        self.assertEqual(20, len(traces))
        self.assertIn('signal', traces[0])

        low, traces = synapse.measure(-100.0, 1, 200, rng)
        self.assertLess(np.mean(low), 0.1)
        self.assertEqual([], traces)

    def test_trace_mode_frequency(self):
        synapse = emulator.EmulatedSynapse(self.model, trace_mode=True)
        bits, _ = synapse.measure(4.63, 1, 400, np.random.default_rng(8))
        self.assertAlmostEqual(0.51, np.mean(bits), delta=0.1)

    def test_field_jitter(self):
        synapse = emulator.EmulatedSynapse(self.model, field_jitter=5.0)
        bits, _ = synapse.measure(100.0, 1, 4, np.random.default_rng(1))
        self.assertEqual(4, len(bits))

    def test_latency(self):
        synapse = emulator.EmulatedSynapse(self.model, latency_fixed=20.0,
                                           latency_jitter=10.0)
        delay = synapse.latency(np.random.default_rng(0))
        self.assertTrue(0.020 <= delay <= 0.030)

    def test_no_latency_by_default(self):
        latency_rng = mock.Mock()
        synapse = emulator.EmulatedSynapse(self.model)
        self.assertEqual(0.0, synapse.latency(latency_rng))
        self.assertFalse(latency_rng.uniform.called)
