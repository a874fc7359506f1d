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

"""Single-layer perceptron of binary stochastic synapses.

Neuron ``i`` sums the K-sample mean weights of its active inputs and adds a
noiseless bias. Its output is Poisson-Binomial with mean ``mu`` and variance
``sigma2``; training uses the Gaussian reparameterization
``y = mu + sigma * xi``.

Every forward accepts a single input vector (N,) or a batch (B, N) and
returns arrays of matching rank.
"""

import collections
import copy

import numpy as np
from scipy import special

from dwsynapse import device
from dwsynapse import exception
from dwsynapse import log
from dwsynapse import utils

LOG = log.get_logger()

# Below this standard deviation a neuron is treated as deterministic
SIGMA_FLOOR = 1e-12

DEFAULT_CLASSES = 10
DEFAULT_INPUTS = 196

CHECKPOINT_VERSION = 1

OutputStats = collections.namedtuple('OutputStats', ['mu', 'sigma2', 'xi'])

ForwardResult = collections.namedtuple('ForwardResult', ['y', 'stats', 'K'])


class SynapseFieldNetwork(object):
    """Propagation fields ``h_ij`` (C x N, mT) plus per-class biases."""

    def __init__(self, fields, biases=None, metadata=None):
        fields = np.array(fields, dtype=float)
        if fields.ndim != 2 or 0 in fields.shape:
            raise exception.InvalidArgument(
                reason='fields must be a non-empty (classes, inputs) '
                       'matrix, got shape %s' % (fields.shape,))
        if biases is None:
            biases = np.zeros(fields.shape[0])
        biases = np.array(biases, dtype=float)
        if biases.shape != (fields.shape[0],):
            raise exception.InvalidArgument(
                reason='expected %d biases, got shape %s'
                       % (fields.shape[0], biases.shape))
        if not (np.all(np.isfinite(fields)) and np.all(np.isfinite(biases))):
            raise exception.InvalidArgument(
                reason='network parameters must be finite')

        self.fields = fields
        self.biases = biases
        self.metadata = dict(metadata or {})

    @classmethod
    def initialized(cls, model, classes=DEFAULT_CLASSES,
                    inputs=DEFAULT_INPUTS, probability=0.5):
        """Every synapse at the field whose passing probability is 0.5."""
        h = float(device.field_for_probability(model, probability))
        return cls(np.full((classes, inputs), h), np.zeros(classes))

    @property
    def classes(self):
        return self.fields.shape[0]

    @property
    def inputs(self):
        return self.fields.shape[1]

    def copy(self):
        return SynapseFieldNetwork(self.fields.copy(), self.biases.copy(),
                                   copy.deepcopy(self.metadata))

    def to_dict(self, model):
        return {
            'version': CHECKPOINT_VERSION,
            'calibration': model.to_dict(),
            'fields_mT': self.fields.tolist(),
            'biases': self.biases.tolist(),
            'metadata': self.metadata,
        }

    def save(self, path, model):
        utils.write_json(path, self.to_dict(model))
        LOG.debug('Saved checkpoint %(path)s', {'path': path})


def load_checkpoint(path):
    """Return ``(network, calibration)`` stored in a checkpoint file."""
    try:
        document = utils.read_json(path)
        model = device.PassingProbabilityModel.from_dict(
            document['calibration'])
        net = SynapseFieldNetwork(document['fields_mT'], document['biases'],
                                  document.get('metadata'))
    except (OSError, ValueError, KeyError) as ex:
        raise exception.InvalidArgument(
            reason='cannot read checkpoint %s: %s' % (path, ex))

    device.check_field_range(net.fields)
    return net, model


def _as_batch(net, x):
    x = np.asarray(x)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.ndim != 2 or X.shape[1] != net.inputs:
        raise exception.InvalidArgument(
            reason='input shape %s does not match %d network inputs'
                   % (x.shape, net.inputs))
    if not np.all((X == 0) | (X == 1)):
        raise exception.InvalidArgument(reason='inputs must be binary')
    return X.astype(float), single


def _checked_samples(K):
    if int(K) != K or K < 1:
        raise exception.InvalidArgument(
            reason='sample count K must be a positive integer, got %r'
                   % (K,))
    return int(K)


def _unbatch(single, *arrays):
    if single:
        arrays = tuple(a[0] for a in arrays)
    return arrays if len(arrays) > 1 else arrays[0]


def _moments(net, model, X, K):
    probs = device.passing_probability(model, net.fields)
    mu = X @ probs.T + net.biases
    # x is binary, so f x (1 - f x) = x f (1 - f)
    sigma2 = (X @ (probs * (1.0 - probs)).T) / K
    return mu, np.maximum(sigma2, 0.0)


def standardized_noise(y, mu, sigma2):
    """``xi = (y - mu) / sigma``, zero where the neuron is deterministic."""
    sigma = np.sqrt(sigma2)
    xi = np.zeros_like(mu)
    live = sigma >= SIGMA_FLOOR
    xi[live] = (y[live] - mu[live]) / sigma[live]
    return xi


def forward_stats(net, model, x, K):
    """Analytic output mean and variance for K samples per synapse."""
    K = _checked_samples(K)
    X, single = _as_batch(net, x)
    mu, sigma2 = _moments(net, model, X, K)
    mu, sigma2 = _unbatch(single, mu, sigma2)
    return OutputStats(mu=mu, sigma2=sigma2, xi=None)


def forward_mean_field(net, model, x):
    """Deterministic continuous-weight forward, ``y = mu``."""
    X, single = _as_batch(net, x)
    probs = device.passing_probability(model, net.fields)
    return _unbatch(single, X @ probs.T + net.biases)


def forward_sampled(net, model, x, K, backend, rng):
    """Sampled forward: each synapse reports the mean of K binary samples.

    Transport failures of a remote backend propagate unchanged.
    """
    K = _checked_samples(K)
    X, single = _as_batch(net, x)
    counts = backend.sample_counts(model, net.fields, X, K, rng)
    y = counts.sum(axis=2) / K + net.biases
    mu, sigma2 = _moments(net, model, X, K)
    xi = standardized_noise(y, mu, sigma2)
    y, mu, sigma2, xi = _unbatch(single, y, mu, sigma2, xi)
    return ForwardResult(y=y, stats=OutputStats(mu, sigma2, xi), K=K)


def softmax_cross_entropy(y, label):
    """Cross-entropy of the softmax of ``y`` against ``label``.

    For a batch (B, C) with labels (B,) the loss is the batch mean and the
    gradient is that of the mean.
    """
    y = np.asarray(y, dtype=float)
    Y = np.atleast_2d(y)
    labels = np.atleast_1d(np.asarray(label, dtype=int))
    if labels.shape != (Y.shape[0],) or np.any(labels < 0) \
            or np.any(labels >= Y.shape[1]):
        raise exception.InvalidArgument(
            reason='labels %s do not index %d classes'
                   % (labels, Y.shape[1]))

    rows = np.arange(Y.shape[0])
    log_probs = special.log_softmax(Y, axis=1)
    losses = -log_probs[rows, labels]
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0

    if y.ndim == 1:
        return float(losses[0]), grad[0]
    return float(losses.mean()), grad / Y.shape[0]


def predict(y):
    """Class with the largest output; ties go to the lowest index."""
    return np.argmax(y, axis=-1)
