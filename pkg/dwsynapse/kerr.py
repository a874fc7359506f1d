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

"""Synthetic Kerr hysteresis traces and the pinned/passed classifier.

A wall that passes the notch reverses the wire in one step. A pinned wall
gives two steps, one when it reaches the notch and one when it depins.
"""

import numpy as np
from scipy import ndimage
from scipy import signal as scipy_signal
from scipy import special

from dwsynapse import exception

POINTS = 512
STEP_WIDTH = 0.1  # mT
# Margin of the field axis around the outermost step
AXIS_MARGIN = 3.0  # mT

# Gaussian smoothing before differentiation, in samples
SMOOTHING = 8.0
# Peaks closer than this many samples are one transition
PEAK_DISTANCE = 48
# Peaks below this fraction of the tallest derivative peak are ignored
PEAK_PROMINENCE = 0.3
# Both steps must exceed this fraction of the total signal change
STEP_FRACTION = 0.24
# Fraction of the trace at either end used for the saturated levels
EDGE_FRACTION = 0.05

MIN_POINTS = 16


class KerrTrace(object):

    def __init__(self, field_axis, signal):
        self.field_axis = np.asarray(field_axis, dtype=float)
        self.signal = np.asarray(signal, dtype=float)

    def to_dict(self):
        return {'field_mT': self.field_axis.tolist(),
                'signal': self.signal.tolist()}


def _step(field_axis, centre, width):
    return special.expit((field_axis - centre) / width)


def synthesize_kerr_trace(passed, depin_field, notch_field, noise_amplitude,
                          rng, points=POINTS, step_width=STEP_WIDTH,
                          pin_fraction=None):
    """Normalized Kerr signal of one field sweep.

    ``pin_fraction`` is the share of the total change in the first step of
    a pinned wall; it is drawn from [0.4, 0.6] when not given.
    """
    if not passed and not notch_field < depin_field:
        raise exception.InvalidArgument(
            reason='a pinned wall needs notch_field < depin_field')

    top = notch_field if passed else depin_field
    field_axis = np.linspace(notch_field - AXIS_MARGIN, top + AXIS_MARGIN,
                             points)

    if passed:
        clean = _step(field_axis, notch_field, step_width)
    else:
        if pin_fraction is None:
            pin_fraction = rng.uniform(0.4, 0.6)
        clean = (pin_fraction * _step(field_axis, notch_field, step_width)
                 + (1.0 - pin_fraction) * _step(field_axis, depin_field,
                                                step_width))

    clean = (clean - clean[0]) / (clean[-1] - clean[0])
    noise = rng.normal(0.0, noise_amplitude, points) \
        if noise_amplitude > 0 else 0.0
    return KerrTrace(field_axis, clean + noise)


def _level(raw, start, stop):
    start = max(start, 0)
    stop = min(stop, raw.size)
    if stop <= start:
        return float(raw[min(max(start, 0), raw.size - 1)])
    return float(np.median(raw[start:stop]))


def detect_pinning(trace):
    """Classify a trace: 1 when the wall passed, 0 when it was pinned.

    The smoothed signal is differentiated and its peaks located. Two peaks
    whose raw-signal steps each exceed 24% of the total change mean the
    wall was pinned; anything else counts as a pass.
    """
    raw = trace.signal
    if raw.size < MIN_POINTS:
        raise exception.InvalidArgument(
            reason='trace needs at least %d samples' % MIN_POINTS)

    smoothed = ndimage.gaussian_filter1d(raw, SMOOTHING, mode='nearest')
    if np.ptp(smoothed) == 0:
        raise exception.DetectionError(reason='signal is flat')

    edge = max(int(raw.size * EDGE_FRACTION), 1)
    total = _level(raw, raw.size - edge, raw.size) - _level(raw, 0, edge)
    sign = 1.0 if total >= 0 else -1.0
    total = abs(total)
    if total == 0:
        raise exception.DetectionError(reason='no total signal change')

    derivative = sign * np.gradient(smoothed)
    peaks, properties = scipy_signal.find_peaks(
        derivative, distance=PEAK_DISTANCE,
        prominence=PEAK_PROMINENCE * max(derivative.max(), 0.0))
    if peaks.size == 0:
        raise exception.DetectionError(reason='no step found')
    if peaks.size == 1:
        return 1

    strongest = np.sort(
        peaks[np.argsort(properties['prominences'])[-2:]])
    first, second = int(strongest[0]), int(strongest[1])
    margin = PEAK_DISTANCE // 2

    before = _level(raw, 0, first - margin)
    between = _level(raw, first + margin, second - margin)
    after = _level(raw, second + margin, raw.size)

    steps = (sign * (between - before), sign * (after - between))
    if all(step > STEP_FRACTION * total for step in steps):
        return 0
    return 1
