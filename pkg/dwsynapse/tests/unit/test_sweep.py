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
from unittest import mock

import numpy as np

from dwsynapse import data
from dwsynapse import device
from dwsynapse import exception
from dwsynapse import learning
from dwsynapse import network
from dwsynapse import sweep

PATTERNS = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=np.uint8)

TRAIN_OPTIONS = {'learning_rate': 0.05, 'batch_size': 5, 'patience': 2,
                 'max_epochs': 2}


class SweepTestCase(unittest.TestCase):

    def setUp(self):
        super(SweepTestCase, self).setUp()
        labels = np.tile([0, 1], 20)
        self.dataset = data.BinarizedDataset.from_arrays(
            PATTERNS[labels], labels, PATTERNS, np.array([0, 1]),
            validation_size=10, seed=0, classes=2)
        self.model = device.PassingProbabilityModel()
        self.tmpdir = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmpdir.cleanup)
        self.cache_dir = os.path.join(self.tmpdir.name, 'checkpoints')

    def _sweep(self, policy=sweep.REUSE, **kwargs):
        return sweep.sweep([1, 2], [1, 4], [0, 1], self.dataset, self.model,
                           self.cache_dir, cache_policy=policy,
                           train_options=TRAIN_OPTIONS, **kwargs)

    def test_rows_cover_grid_in_order(self):
        rows = self._sweep()
        self.assertEqual(8, len(rows))
        keys = [(row.K_train, row.K_test, row.seed) for row in rows]
        self.assertEqual(sorted(keys), keys)
        self.assertEqual({(1, 1, 0), (2, 4, 1)} - set(keys), set())
        for row in rows:
            self.assertTrue(0.0 <= row.accuracy <= 1.0)

        for K_train in (1, 2):
            for seed in (0, 1):
                path = sweep.checkpoint_path(self.cache_dir,
                                             learning.STOCHASTIC, K_train,
                                             seed)
                self.assertTrue(os.path.exists(path))
                self.assertTrue(os.path.exists(
                    path[:-len('.json')] + '-history.csv'))

    def test_reuse_skips_training(self):
        first = self._sweep()
        with mock.patch.object(learning, 'train') as mock_train:
            second = self._sweep()
        self.assertFalse(mock_train.called)
        self.assertEqual(first, second)

    def test_retrain(self):
        self._sweep()
        with mock.patch.object(learning, 'train',
                               wraps=learning.train) as mock_train:
            self._sweep(policy=sweep.RETRAIN)
        self.assertEqual(4, mock_train.call_count)

    def test_require_missing_checkpoint(self):
        self.assertRaises(exception.CacheMiss, self._sweep,
                          policy=sweep.REQUIRE)

    def test_require_cached(self):
        self._sweep()
        self.assertEqual(8, len(self._sweep(policy=sweep.REQUIRE)))

    def test_reuse_retrains_changed_settings(self):
        self._sweep()
        options = dict(TRAIN_OPTIONS, max_epochs=3, learning_rate=0.2)
        with mock.patch.object(learning, 'train',
                               wraps=learning.train) as mock_train:
            sweep.sweep([1], [1], [0], self.dataset, self.model,
                        self.cache_dir, train_options=options)
        self.assertEqual(1, mock_train.call_count)

        net, _ = network.load_checkpoint(sweep.checkpoint_path(
            self.cache_dir, learning.STOCHASTIC, 1, 0))
        self.assertEqual(3, net.metadata['config']['max_epochs'])
        self.assertEqual(0.2, net.metadata['config']['learning_rate'])

    def test_require_rejects_changed_settings(self):
        self._sweep()
        options = dict(TRAIN_OPTIONS, max_epochs=3)
        self.assertRaises(exception.StaleCheckpoint, sweep.sweep, [1], [1],
                          [0], self.dataset, self.model, self.cache_dir,
                          cache_policy=sweep.REQUIRE, train_options=options)

    def test_dataset_seed_is_part_of_the_key(self):
        self._sweep()
        labels = np.tile([0, 1], 20)
        reshuffled = data.BinarizedDataset.from_arrays(
            PATTERNS[labels], labels, PATTERNS, np.array([0, 1]),
            validation_size=10, seed=5, classes=2)
        self.assertRaises(exception.StaleCheckpoint, sweep.sweep, [1], [1],
                          [0], reshuffled, self.model, self.cache_dir,
                          cache_policy=sweep.REQUIRE,
                          train_options=TRAIN_OPTIONS)

    def test_invalid_arguments(self):
        self.assertRaises(exception.InvalidArgument, sweep.sweep, [], [1],
                          [0], self.dataset, self.model, self.cache_dir)
        self.assertRaises(exception.InvalidArgument, self._sweep,
                          policy='sometimes')


class GridTestCase(unittest.TestCase):

    def test_mean_and_spread_over_seeds(self):
        rows = [sweep.SweepRow(1, 1, 0, 0.8, 0.0, 0.0),
                sweep.SweepRow(1, 1, 1, 0.6, 0.0, 0.0),
                sweep.SweepRow(1, 2, 0, 0.9, 0.0, 0.0)]
        table = sweep.grid(rows)
        self.assertEqual(2, len(table))
        K_train, K_test, seeds, accuracy, std = table[0]
        self.assertEqual((1, 1, 2), (K_train, K_test, seeds))
        self.assertAlmostEqual(0.7, accuracy)
        self.assertAlmostEqual(np.std([0.8, 0.6], ddof=1), std)
        self.assertEqual((1, 2, 1, 0.9, 0.0), table[1])

    def test_write_csv(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'sweep.csv')
            sweep.write_csv(path, sweep.SWEEP_HEADER,
                            [sweep.SweepRow(1, 2, 3, 0.5, 0.1, 0.01)])
            with open(path) as f:
                rows = list(csv.reader(f))
        self.assertEqual(list(sweep.SWEEP_HEADER), rows[0])
        self.assertEqual(['1', '2', '3', '0.5', '0.1', '0.01'], rows[1])
