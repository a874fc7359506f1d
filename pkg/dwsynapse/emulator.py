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

import numpy as np

from dwsynapse import device
from dwsynapse import exception
from dwsynapse import kerr
from dwsynapse import log

LOG = log.get_logger()

PROTOCOL_VERSION = 1

# Largest sample count one request may ask for
MAX_SAMPLES = 1 << 20

# Trace-mode geometry: where the notch sits on the sweep and how far
# above it a pinned wall depins
TRACE_NOTCH_RANGE = (0.0, 10.0)  # mT
TRACE_DEPIN_OFFSET = (1.0, 3.0)  # mT
TRACE_NOISE = 0.02


class EmulatedSynapse(object):
    """A single notched nanowire answering measurement requests.

    Bits are drawn from the calibrated passing probability, or in trace
    mode by synthesizing a Kerr trace per sample and classifying it.
    """

    def __init__(self, calibration, trace_mode=False, latency_fixed=0.0,
                 latency_jitter=0.0, field_jitter=0.0,
                 trace_noise=TRACE_NOISE):
        self.calibration = calibration
        self.trace_mode = trace_mode
        self.latency_fixed = latency_fixed
        self.latency_jitter = latency_jitter
        self.field_jitter = field_jitter
        self.trace_noise = trace_noise

    def latency(self, latency_rng):
        """Seconds one measurement occupies the emulated setup."""
        delay = self.latency_fixed
        if self.latency_jitter > 0:
            delay += latency_rng.uniform(0.0, self.latency_jitter)
        return delay / 1000.0

    def _traced_bits(self, field, samples, rng, keep_traces):
        probability = device.passing_probability(self.calibration, field)
        notch = float(np.clip(field, *TRACE_NOTCH_RANGE))
        bits = np.zeros(samples, dtype=np.uint8)
        traces = []
        for k in range(samples):
            passed = rng.random() < probability
            depin = notch + rng.uniform(*TRACE_DEPIN_OFFSET)
            trace = kerr.synthesize_kerr_trace(
                passed, depin, notch, self.trace_noise, rng)
            bits[k] = kerr.detect_pinning(trace)
            if keep_traces:
                traces.append(trace.to_dict())
        return bits, traces

    def measure(self, field, x, samples, rng, keep_traces=False):
        """Return ``(bits, traces)`` for one synapse request."""
        if x not in (0, 1):
            raise exception.ProtocolError(reason='input must be 0 or 1')
        if samples < 1 or samples > MAX_SAMPLES:
            raise exception.ProtocolError(
                reason='samples must lie in [1, %d]' % MAX_SAMPLES)
        field = float(field)
        if not np.isfinite(field):
            raise exception.ProtocolError(reason='field_mT must be finite')

        if x == 0:
            return [0] * samples, []

        if self.field_jitter > 0:
            field += rng.normal(0.0, self.field_jitter)

        if self.trace_mode:
            bits, traces = self._traced_bits(field, samples, rng,
                                             keep_traces)
        else:
            bits = device.sample_bits(self.calibration, field, 1, samples,
                                      rng)
            traces = []
        return bits.tolist(), traces


def handle_request(synapse, request, connection):
    """Serve one decoded request object, returning the response object.

    ``connection`` carries the per-connection random streams.
    """
    request_id = request.get('id') if isinstance(request, dict) else None

    def error(reason):
        return {'v': PROTOCOL_VERSION, 'id': request_id, 'error': reason}

    if not isinstance(request, dict):
        return error('request must be a JSON object')

    try:
        if request.get('v') != PROTOCOL_VERSION:
            raise exception.ProtocolError(
                reason='unsupported protocol version %r'
                       % (request.get('v'),))
        if not isinstance(request_id, int) or isinstance(request_id, bool):
            raise exception.ProtocolError(reason='id must be an integer')

        field = request['field_mT']
        x = request['input']
        samples = request['samples']
        for name, value in (('field_mT', field), ('input', x),
                            ('samples', samples)):
            if isinstance(value, bool) or not isinstance(
                    value, (int, float)):
                raise exception.ProtocolError(
                    reason='%s must be a number' % name)
        if int(samples) != samples or int(x) != x:
            raise exception.ProtocolError(
                reason='input and samples must be integers')

        if 'seed' in request:
            seed = request['seed']
            if isinstance(seed, bool) or not isinstance(seed, int) \
                    or seed < 0:
                raise exception.ProtocolError(
                    reason='seed must be a non-negative integer')
            connection.reseed(seed)

        bits, traces = synapse.measure(
            field, int(x), int(samples), connection.rng,
            keep_traces=bool(request.get('traces')))

    except KeyError as ex:
        return error('missing field %s' % ex)
    except (OverflowError, ValueError) as ex:
        return error('invalid number: %s' % ex)
    except (exception.ProtocolError, exception.DetectionError) as ex:
        return error(ex.message)

    response = {'v': PROTOCOL_VERSION, 'id': request_id, 'bits': bits}
    if traces:
        response['traces'] = traces
    return response
