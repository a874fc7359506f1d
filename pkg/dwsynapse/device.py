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

"""Model of a single notched-nanowire domain-wall synapse.

A domain wall injected into the wire (input 1) passes the notch with a
probability set by the propagation field ``h``; the passing probability is
the floored sigmoid ``f(h) = d + (1 - d) / (1 + exp(-delta (h - h0)))``.
Fields are in mT everywhere.
"""

import json

import numpy as np
from scipy import optimize
from scipy import special

from dwsynapse import config as synapse_config
from dwsynapse import exception
from dwsynapse import log

LOG = log.get_logger()

CONF = synapse_config.get_config()


class PassingProbabilityModel(object):
    """Calibration of the synapse: floor ``d``, centre ``h0``, steepness."""

    def __init__(self, d=0.0219, h0=4.63, delta=2.73):
        if not 0 <= d < 0.5:
            raise exception.InvalidArgument(
                reason='floor probability d=%s must lie in [0, 0.5)' % d)
        if not delta > 0:
            raise exception.InvalidArgument(
                reason='steepness delta=%s must be positive' % delta)
        if not np.isfinite(h0):
            raise exception.InvalidArgument(
                reason='field centre h0=%s must be finite' % h0)
        self.d = float(d)
        self.h0 = float(h0)
        self.delta = float(delta)

    @classmethod
    def from_config(cls):
        device = CONF['device']
        return cls(d=device['d'], h0=device['h0'], delta=device['delta'])

    def to_dict(self):
        return {'d': self.d, 'h0_mT': self.h0, 'delta_per_mT': self.delta}

    @classmethod
    def from_dict(cls, document):
        try:
            return cls(d=float(document['d']),
                       h0=float(document['h0_mT']),
                       delta=float(document['delta_per_mT']))
        except (KeyError, TypeError, ValueError) as ex:
            raise exception.InvalidArgument(
                reason='calibration document is incomplete: %s' % ex)

    def save(self, path):
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write('\n')

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def __eq__(self, other):
        return (isinstance(other, PassingProbabilityModel)
                and self.to_dict() == other.to_dict())

    def __repr__(self):
        return ('PassingProbabilityModel(d=%(d)r, h0=%(h0_mT)r, '
                'delta=%(delta_per_mT)r)' % self.to_dict())


def _checked_field(h):
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)):
        bad = h[~np.isfinite(h)].flat[0]
        raise exception.DomainError(field=bad)
    return h


def _logistic(model, h):
    return special.expit(model.delta * (h - model.h0))


def passing_probability(model, h):
    """Probability that an injected domain wall passes the notch."""
    h = _checked_field(h)
    return model.d + (1.0 - model.d) * _logistic(model, h)


def passing_probability_derivative(model, h):
    """Derivative ``f'(h)`` of the passing probability, in 1/mT."""
    h = _checked_field(h)
    s = _logistic(model, h)
    return (1.0 - model.d) * model.delta * s * (1.0 - s)


def field_for_probability(model, p):
    """Invert the passing probability; ``p`` must lie strictly in (d, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any(~(p > model.d)) or np.any(~(p < 1.0)):
        raise exception.ProbabilityOutOfRange(p=p, low=model.d)
    return model.h0 + np.log((p - model.d) / (1.0 - p)) / model.delta


def check_field_range(fields, field_min=None, field_max=None):
    """Warn about fields outside the physical window; never clamps."""
    device = CONF['device']
    field_min = device['field_min'] if field_min is None else field_min
    field_max = device['field_max'] if field_max is None else field_max

    fields = np.asarray(fields)
    outside = int(np.count_nonzero((fields < field_min)
                                   | (fields > field_max)))
    if outside:
        LOG.warning('%(count)d of %(total)d propagation fields lie outside '
                    'the physical range [%(low)s, %(high)s] mT',
                    {'count': outside, 'total': fields.size,
                     'low': field_min, 'high': field_max})
    return outside


def _checked_input(x):
    if x not in (0, 1):
        raise exception.InvalidArgument(
            reason='synapse input must be 0 or 1, got %r' % (x,))
    return int(x)


def _checked_samples(K):
    if int(K) != K or K < 1:
        raise exception.InvalidArgument(
            reason='sample count K must be a positive integer, got %r'
                   % (K,))
    return int(K)


def sample_synapse(model, h, x, rng):
    """Draw one binary synapse output.

    A zero input never injects a domain wall, so the output is 0 and no
    randomness is consumed.
    """
    if _checked_input(x) == 0:
        return 0
    return int(rng.random() < passing_probability(model, h))


def sample_bits(model, h, x, K, rng):
    """Draw ``K`` explicit synapse outputs, one uniform variate per bit."""
    K = _checked_samples(K)
    if _checked_input(x) == 0:
        return np.zeros(K, dtype=np.uint8)
    p = passing_probability(model, h)
    return (rng.random(K) < p).astype(np.uint8)


def sample_mean_weight(model, h, x, K, rng, method='binomial'):
    """Mean of ``K`` synapse samples, a value on the grid {0, 1/K, ..., 1}.

    ``method='binomial'`` draws a single binomial count; ``'bernoulli'``
    draws the K bits explicitly. Both have the same distribution.
    """
    K = _checked_samples(K)
    if _checked_input(x) == 0:
        return 0.0
    if method == 'binomial':
        count = rng.binomial(K, float(passing_probability(model, h)))
    elif method == 'bernoulli':
        count = int(sample_bits(model, h, x, K, rng).sum())
    else:
        raise exception.InvalidArgument(
            reason='unknown sampling method %r' % (method,))
    return count / K


def fit_passing_probability(fields, fractions, initial=None):
    """Least-squares fit of the passing sigmoid to measured fractions."""
    fields = np.asarray(fields, dtype=float)
    fractions = np.asarray(fractions, dtype=float)
    if fields.shape != fractions.shape or fields.size < 3:
        raise exception.InvalidArgument(
            reason='need at least three (field, fraction) pairs of equal '
                   'length')

    if initial is None:
        initial = PassingProbabilityModel()

    def curve(h, d, h0, delta):
        return d + (1.0 - d) * special.expit(delta * (h - h0))

    try:
        params, _ = optimize.curve_fit(
            curve, fields, fractions,
            p0=(initial.d, initial.h0, initial.delta),
            bounds=((0.0, -np.inf, 1e-6), (0.4999, np.inf, np.inf)))
    except (RuntimeError, ValueError) as ex:
        raise exception.InvalidArgument(
            reason='passing-probability fit failed: %s' % ex)

    d, h0, delta = params
    LOG.info('Fitted calibration d=%(d).4f h0=%(h0).3f mT '
             'delta=%(delta).3f 1/mT', {'d': d, 'h0': h0, 'delta': delta})
    return PassingProbabilityModel(d=d, h0=h0, delta=delta)
