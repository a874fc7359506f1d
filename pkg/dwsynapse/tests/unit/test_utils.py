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

import logging
import os
import tempfile
import unittest

from dwsynapse import log
from dwsynapse import utils


class UtilsTestCase(unittest.TestCase):

    def test_str2bool(self):
        self.assertTrue(utils.str2bool('True'))
        self.assertFalse(utils.str2bool('false'))
        self.assertRaises(ValueError, utils.str2bool, 'yes')

    def test_derived_streams(self):
        first = utils.make_rng(7, 'epoch', 3).integers(0, 2 ** 32, 4)
        again = utils.make_rng(7, 'epoch', 3).integers(0, 2 ** 32, 4)
        other = utils.make_rng(7, 'validation').integers(0, 2 ** 32, 4)
        seed = utils.make_rng(8, 'epoch', 3).integers(0, 2 ** 32, 4)
        self.assertEqual(first.tolist(), again.tolist())
        self.assertNotEqual(first.tolist(), other.tolist())
        self.assertNotEqual(first.tolist(), seed.tolist())

    def test_write_json(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'nested', 'doc.json')
            utils.write_json(path, {'b': 1, 'a': [1, 2]})
            self.assertEqual({'a': [1, 2], 'b': 1}, utils.read_json(path))
            self.assertEqual(['doc.json'],
                             os.listdir(os.path.dirname(path)))

    def test_file_checksum(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'empty')
            open(path, 'w').close()
            self.assertEqual(
                'e3b0c44298fc1c149afbf4c8996fb924'
                '27ae41e4649b934ca495991b7852b855',
                utils.file_checksum(path))

    def test_is_pid_running(self):
        self.assertTrue(utils.is_pid_running(os.getpid()))


class LoggerTestCase(unittest.TestCase):

    def test_file_handler(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            logfile = os.path.join(tmpdir, 'synapse.log')
            logger = log.SynapseLogger(debug=True, logfile=logfile)
            self.addCleanup(logger.handler.close)
            self.assertEqual(logging.DEBUG, logger.level)
            logger.info('served %(count)d requests', {'count': 3})
            logger.handler.flush()
            with open(logfile) as f:
                self.assertIn('INFO DWSynapse [-] served 3 requests',
                              f.read())

    def test_stream_handler(self):
        logger = log.SynapseLogger()
        self.assertEqual(logging.INFO, logger.level)
        self.assertIsInstance(logger.handler, logging.StreamHandler)
