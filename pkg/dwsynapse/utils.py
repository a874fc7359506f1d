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

import hashlib
import json
import os
import sys
import tempfile

import numpy as np

from dwsynapse import exception


def is_pid_running(pid):
    try:
        os.kill(pid, 0)
        return True
    except OSError:
        return False


def str2bool(string):
    lower = string.lower()
    if lower not in ('true', 'false'):
        raise ValueError('Value "%s" can not be interpreted as '
                         'boolean' % string)
    return lower == 'true'


def derive_seed(seed, *labels):
    """Split a master seed into an independent stream by purpose label.

    The labels are hashed so that ``derive_seed(7, 'epoch', 3)`` and
    ``derive_seed(7, 'validation')`` give unrelated streams, and the
    result is identical on every platform.
    """
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for label in labels:
        digest = hashlib.sha256(str(label).encode('utf-8')).digest()
        words.extend(int.from_bytes(digest[i:i + 4], 'big')
                     for i in range(0, 16, 4))
    return np.random.SeedSequence(words)


def make_rng(seed, *labels):
    return np.random.default_rng(derive_seed(seed, *labels))


def file_checksum(path, algorithm='sha256'):
    digest = hashlib.new(algorithm)
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def write_json(path, document):
    """Write a JSON document atomically next to its final location."""
    dir_name = os.path.dirname(os.path.abspath(path))
    if not os.path.exists(dir_name):
        os.makedirs(dir_name)

    with tempfile.NamedTemporaryFile(mode='w+t', dir=dir_name,
                                     delete=False) as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write('\n')
    os.rename(f.name, path)


def read_json(path):
    with open(path) as f:
        return json.load(f)


class detach_process(object):
    """Detach the process from its parent and session."""

    def _fork(self, parent_exits):
        try:
            pid = os.fork()
            if pid > 0 and parent_exits:
                os._exit(0)

            return pid

        except OSError as e:
            raise exception.SynapseError(
                'Error when forking (detaching) the synapse server from '
                'its parent and session. Error: %s' % e)

    def _change_root_directory(self):
        """Change to root directory.

        Ensure that our process doesn't keep any directory in use.
        """
        try:
            os.chdir('/')
        except Exception as e:
            raise exception.SynapseError(
                'Failed to change root directory. Error: %s' % e)

    def _change_file_creation_mask(self):
        try:
            os.umask(0)
        except Exception as e:
            raise exception.SynapseError(
                'Failed to change file creation mask. Error: %s' % e)

    def __enter__(self):
        pid = self._fork(parent_exits=False)
        if pid > 0:
            return pid

        os.setsid()

        self._fork(parent_exits=True)

        self._change_root_directory()
        self._change_file_creation_mask()

        sys.stdout.flush()
        sys.stderr.flush()

        si = open(os.devnull, 'r')
        so = open(os.devnull, 'a+')
        se = open(os.devnull, 'a+')

        os.dup2(si.fileno(), sys.stdin.fileno())
        os.dup2(so.fileno(), sys.stdout.fileno())
        os.dup2(se.fileno(), sys.stderr.fileno())

        return pid

    def __exit__(self, type, value, traceback):
        pass
