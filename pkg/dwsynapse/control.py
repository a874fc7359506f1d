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

import heapq
import itertools
import json
import signal
import threading
import time

import numpy as np
import zmq

from dwsynapse import config as synapse_config
from dwsynapse import emulator
from dwsynapse import exception
from dwsynapse import log
from dwsynapse import utils

CONF = synapse_config.get_config()

LOG = log.get_logger()

TIMER_PERIOD = 500  # milliseconds

# Connections buffering more than this without a newline are reset
MAX_LINE = 16 * 1024 * 1024


class Connection(object):
    """Per-connection state: partial input line and random streams."""

    def __init__(self, seed, number):
        self.number = number
        self.buffer = b''
        self.rng = utils.make_rng(seed, 'connection', number)
        self.latency_rng = utils.make_rng(seed, 'latency', number)
        # monotonic time at which the emulated setup is next free
        self.ready_at = 0.0

    def reseed(self, seed):
        self.rng = np.random.default_rng(seed)


def _refuses(request):
    return (isinstance(request, dict) and 'v' in request
            and request['v'] != emulator.PROTOCOL_VERSION)


class SynapseServer(object):
    """Newline-delimited JSON synapse service over raw TCP.

    A ZMQ ``STREAM`` socket accepts plain TCP peers; every message is
    framed with the peer identity, so each connection keeps its own line
    buffer and random stream and its requests are answered in order.
    Each request line is one JSON object, or a JSON array of objects
    answered by an array of the same length.

    Emulated measurement latency delays the replies of its own connection
    only; they wait in a queue drained by the poll loop.
    """

    def __init__(self, synapse, seed=0, address='127.0.0.1', port=0):
        self.synapse = synapse
        self.seed = seed
        self.address = address
        self.port = port
        self.connections = {}
        self._closed = set()
        self._pending = []
        self._sequence = itertools.count()
        self._counter = 0
        self._stop = threading.Event()
        self._ready = threading.Event()
        self._thread = None
        self._error = None

    @property
    def endpoint(self):
        return '%s:%s' % (self.address, self.port)

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None

    def start(self):
        """Serve from a background thread; returns once bound."""
        self._thread = threading.Thread(target=self.serve_forever,
                                        name='synapse-server', daemon=True)
        self._thread.start()
        self._ready.wait()
        if self._error is not None:
            raise self._error
        return self

    def _open(self, identity):
        self._counter += 1
        self.connections[identity] = Connection(self.seed, self._counter)
        LOG.debug('Connection %(number)d opened',
                  {'number': self._counter})
        return self.connections[identity]

    def _dispatch(self, line, connection):
        try:
            data_in = json.loads(line.decode('utf-8'))

        except (ValueError, RecursionError) as ex:
            LOG.warning('Request deserialization error: %(error)s',
                        {'error': ex})
            return {'v': emulator.PROTOCOL_VERSION, 'id': None,
                    'error': 'malformed request: %s' % ex}, False

        LOG.debug('Request on connection %(number)d: %(request).200s',
                  {'number': connection.number, 'request': data_in})

        if isinstance(data_in, list):
            if not data_in:
                return {'v': emulator.PROTOCOL_VERSION, 'id': None,
                        'error': 'empty batch'}, False
            return ([emulator.handle_request(self.synapse, request,
                                             connection)
                     for request in data_in],
                    any(_refuses(request) for request in data_in))

        return (emulator.handle_request(self.synapse, data_in, connection),
                _refuses(data_in))

    def _send(self, identity, connection, message, delay=0.0):
        now = time.monotonic()
        due = max(now, connection.ready_at) + delay
        connection.ready_at = due
        if due <= now:
            self.socket.send_multipart([identity, message])
        else:
            heapq.heappush(self._pending,
                           (due, next(self._sequence), identity, message))

    def _flush(self):
        now = time.monotonic()
        while self._pending and self._pending[0][0] <= now:
            _, _, identity, message = heapq.heappop(self._pending)
            self.socket.send_multipart([identity, message])

    def _poll_timeout(self):
        if not self._pending:
            return TIMER_PERIOD
        wait = (self._pending[0][0] - time.monotonic()) * 1000.0
        return int(min(TIMER_PERIOD, max(0.0, wait)) + 1)

    def _latency(self, data_out, connection):
        responses = data_out if isinstance(data_out, list) else [data_out]
        return sum(self.synapse.latency(connection.latency_rng)
                   for response in responses if 'bits' in response)

    def _close(self, identity, connection):
        self._send(identity, connection, b'')
        self.connections.pop(identity, None)
        self._closed.add(identity)

    def _receive(self, identity, payload):
        if not payload:
            if identity in self._closed:
                self._closed.discard(identity)
            elif identity in self.connections:
                connection = self.connections.pop(identity)
                LOG.debug('Connection %(number)d closed',
                          {'number': connection.number})
            else:
                self._open(identity)
            return

        if identity in self._closed:
            # refused peer, its disconnect is still in flight
            return

        connection = self.connections.get(identity) or self._open(identity)
        connection.buffer += payload

        while b'\n' in connection.buffer:
            line, connection.buffer = connection.buffer.split(b'\n', 1)
            if not line.strip():
                continue

            data_out, refuse = self._dispatch(line.strip(), connection)
            message = json.dumps(data_out).encode('utf-8') + b'\n'
            self._send(identity, connection, message,
                       self._latency(data_out, connection))

            if refuse:
                LOG.warning('Refusing connection %(number)d: protocol '
                            'version mismatch',
                            {'number': connection.number})
                self._close(identity, connection)
                return

        if len(connection.buffer) > MAX_LINE:
            LOG.warning('Connection %(number)d sent an oversized line',
                        {'number': connection.number})
            connection.buffer = b''
            message = json.dumps({'v': emulator.PROTOCOL_VERSION,
                                  'id': None, 'error': 'line too long'})
            self._send(identity, connection,
                       message.encode('utf-8') + b'\n')

    def serve_forever(self):
        context = self.socket = None

        try:
            context = zmq.Context()
            self.socket = context.socket(zmq.STREAM)
            self.socket.setsockopt(zmq.LINGER, 5)
            if self.port:
                self.socket.bind('tcp://%s:%s' % (self.address, self.port))
            else:
                self.port = self.socket.bind_to_random_port(
                    'tcp://%s' % self.address)

            poller = zmq.Poller()
            poller.register(self.socket, zmq.POLLIN)

            LOG.info('Started synapse server on %(endpoint)s (trace mode '
                     '%(trace)s)', {'endpoint': self.endpoint,
                                    'trace': self.synapse.trace_mode})
            self._ready.set()

            while not self._stop.is_set():
                socks = dict(poller.poll(timeout=self._poll_timeout()))
                self._flush()
                if self.socket not in socks or socks[self.socket] != \
                        zmq.POLLIN:
                    continue

                identity, payload = self.socket.recv_multipart()
                self._receive(identity, payload)

        except zmq.ZMQError as ex:
            self._error = exception.TransportError(address=self.endpoint,
                                                   reason=ex)
            if not self._ready.is_set():
                self._ready.set()
                return
            raise self._error

        finally:
            if self.socket:
                self.socket.close()
            if context:
                context.destroy()
            LOG.info('Synapse server on %(endpoint)s stopped',
                     {'endpoint': self.endpoint})


def serve(calibration, address='127.0.0.1', port=0, seed=0,
          trace_mode=False, latency_fixed=0.0, latency_jitter=0.0,
          field_jitter=0.0, background=False):
    """Build the emulated synapse and serve it.

    With ``background`` the server runs in a thread and is returned once
    bound; otherwise this blocks until SIGTERM or SIGINT.
    """
    synapse = emulator.EmulatedSynapse(
        calibration, trace_mode=trace_mode, latency_fixed=latency_fixed,
        latency_jitter=latency_jitter, field_jitter=field_jitter)
    server = SynapseServer(synapse, seed=seed, address=address, port=port)

    if background:
        return server.start()

    def request_stop(*args):
        LOG.info('Got signal %(signal)s, stopping', {'signal': args[0]})
        server._stop.set()

    signal.signal(signal.SIGTERM, request_stop)
    signal.signal(signal.SIGINT, request_stop)

    server.serve_forever()
    if server._error is not None:
        raise server._error
    return server
