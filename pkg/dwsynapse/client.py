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

import json

import numpy as np
import zmq

from dwsynapse import backend
from dwsynapse import config as synapse_config
from dwsynapse import emulator
from dwsynapse import exception
from dwsynapse import log

CONF = synapse_config.get_config()

LOG = log.get_logger()


class RemoteBackend(backend.SynapseBackend):
    """Client part of the hardware-in-the-loop setup.

    The perceptron stays here; every active synapse of an image becomes
    one request, and the requests of an image travel as one JSON array
    line. With ``plumb_seed`` each image draws a seed from the caller's
    stream and asks the server to reseed before sampling, which makes the
    answers bit-identical to ``BernoulliBackend``.

    One instance holds one connection and serves one evaluation worker.
    """

    def __init__(self, address=None, port=None, timeout=None, retries=None,
                 plumb_seed=False):
        server = CONF['server']
        self.address = address or server['address']
        self.port = port or server['port']
        self.timeout = server['response_timeout'] if timeout is None \
            else timeout
        self.retries = server['retries'] if retries is None else retries
        self.plumb_seed = plumb_seed

        self._context = None
        self._socket = None
        self._identity = None
        self._buffer = b''
        self._next_id = 0

    @property
    def endpoint(self):
        return '%s:%s' % (self.address, self.port)

    def _fail(self, reason):
        return exception.TransportError(address=self.endpoint, reason=reason)

    def _connect(self):
        self._context = zmq.Context()
        self._socket = self._context.socket(zmq.STREAM)
        self._socket.setsockopt(zmq.LINGER, 0)
        self._socket.connect('tcp://%s' % self.endpoint)

        poller = zmq.Poller()
        poller.register(self._socket, zmq.POLLIN)
        if not dict(poller.poll(timeout=self.timeout)):
            raise self._fail('connection timed out')

        identity, payload = self._socket.recv_multipart()
        if payload:
            raise self._fail('unexpected data before connection')
        self._identity = identity
        self._buffer = b''
        LOG.debug('Connected to synapse server %(endpoint)s',
                  {'endpoint': self.endpoint})

    def close(self):
        if self._socket is not None:
            self._socket.close()
        if self._context is not None:
            self._context.destroy()
        self._socket = self._context = self._identity = None

    def _exchange(self, line):
        self._socket.send_multipart([self._identity, line])

        poller = zmq.Poller()
        poller.register(self._socket, zmq.POLLIN)
        while b'\n' not in self._buffer:
            if not dict(poller.poll(timeout=self.timeout)):
                raise self._fail('server response timed out')
            identity, payload = self._socket.recv_multipart()
            if identity != self._identity:
                continue
            if not payload:
                raise self._fail('connection closed by server')
            self._buffer += payload

        data_in, self._buffer = self._buffer.split(b'\n', 1)
        try:
            return json.loads(data_in.decode('utf-8'))
        except ValueError as ex:
            raise self._fail('response parsing error %s' % ex)

    def communicate(self, requests):
        """Send one request line and return the decoded response line."""
        line = json.dumps(requests).encode('utf-8') + b'\n'

        error = None
        for attempt in range(self.retries + 1):
            try:
                if self._socket is None:
                    self._connect()
                return self._exchange(line)

            except (exception.TransportError, zmq.ZMQError) as ex:
                error = ex if isinstance(ex, exception.TransportError) \
                    else self._fail(ex)
                LOG.warning('Attempt %(attempt)d to reach %(endpoint)s '
                            'failed: %(error)s',
                            {'attempt': attempt + 1,
                             'endpoint': self.endpoint, 'error': error})
                self.close()

        raise error

    def _check(self, requests, responses):
        if not isinstance(responses, list) or \
                len(responses) != len(requests):
            if isinstance(responses, dict) and 'error' in responses:
                raise exception.DeviceError(error=responses['error'])
            raise exception.DeviceError(
                error='expected %d responses' % len(requests))

        for request, response in zip(requests, responses):
            if not isinstance(response, dict) or \
                    response.get('id') != request['id']:
                raise exception.DeviceError(
                    error='response out of order for request %d'
                          % request['id'])
            if 'error' in response:
                raise exception.DeviceError(error=response['error'])
            bits = response.get('bits')
            if not isinstance(bits, list) or \
                    len(bits) != request['samples']:
                raise exception.DeviceError(
                    error='request %d answered with malformed bits'
                          % request['id'])

    def sample_counts(self, model, fields, X, K, rng):
        B = X.shape[0]
        C, N = fields.shape
        counts = np.zeros((B, C, N), dtype=np.int64)

        for b in range(B):
            seed = int(rng.integers(0, backend.SEED_BOUND)) \
                if self.plumb_seed else None

            requests = []
            cells = []
            for i, j, h in backend.synapse_requests(fields, X[b]):
                requests.append({'v': emulator.PROTOCOL_VERSION,
                                 'id': self._next_id, 'field_mT': h,
                                 'input': 1, 'samples': int(K)})
                cells.append((i, j))
                self._next_id += 1
            if not requests:
                continue
            if seed is not None:
                requests[0]['seed'] = seed

            responses = self.communicate(requests)
            self._check(requests, responses)
            for (i, j), response in zip(cells, responses):
                counts[b, i, j] = sum(response['bits'])

        return counts
