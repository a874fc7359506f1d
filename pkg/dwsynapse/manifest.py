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

import datetime
import os
import time

import dwsynapse
from dwsynapse import config as synapse_config
from dwsynapse import exception
from dwsynapse import log
from dwsynapse import utils

CONF = synapse_config.get_config()

LOG = log.get_logger()

MANIFEST_VERSION = 1
SUFFIX = '.manifest.json'


class RunManifest(object):
    """Record of one command run: enough to repeat it exactly."""

    def __init__(self, command, argv, seeds=None):
        self.command = command
        self.argv = list(argv)
        self.seeds = dict(seeds or {})
        self.config = CONF.snapshot()
        self.version = dwsynapse.__version__
        self.inputs = {}
        self.outputs = {}
        self.cwd = os.getcwd()
        self.started = datetime.datetime.utcnow().isoformat() + 'Z'
        self.elapsed = None
        self._clock = time.monotonic()

    def add_input(self, path):
        if path and os.path.isfile(path):
            self.inputs[os.path.abspath(path)] = utils.file_checksum(path)

    def add_output(self, path):
        if path and os.path.isfile(path):
            self.outputs[os.path.abspath(path)] = utils.file_checksum(path)

    def to_dict(self):
        return {
            'version': MANIFEST_VERSION,
            'command': self.command,
            'argv': self.argv,
            'cwd': self.cwd,
            'seeds': self.seeds,
            'config': self.config,
            'code_version': self.version,
            'inputs': self.inputs,
            'outputs': self.outputs,
            'started': self.started,
            'elapsed_seconds': self.elapsed,
        }

    def write(self, path):
        self.elapsed = time.monotonic() - self._clock
        utils.write_json(path, self.to_dict())
        LOG.info('Wrote run manifest %(path)s', {'path': path})
        return path


def manifest_path(output):
    """Manifest written next to the main output of a command."""
    return output + SUFFIX


def load(path):
    try:
        document = utils.read_json(path)
        argv = document['argv']
        document['command']
    except (OSError, ValueError, KeyError) as ex:
        raise exception.InvalidArgument(
            reason='cannot read run manifest %s: %s' % (path, ex))
    if not isinstance(argv, list):
        raise exception.InvalidArgument(
            reason='run manifest %s has no argument list' % path)
    return document


def changed_outputs(document):
    """Outputs whose current checksum differs from the recorded one."""
    changed = []
    for path, checksum in sorted(document.get('outputs', {}).items()):
        if not os.path.isfile(path) or utils.file_checksum(path) != checksum:
            changed.append(path)
    return changed
