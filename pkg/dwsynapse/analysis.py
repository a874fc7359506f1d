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

"""Figure data of trained networks, exported as plain tables.

Each function returns ``(header, rows)`` ready for ``sweep.write_csv``.
"""

import numpy as np

from dwsynapse import backend as synapse_backend
from dwsynapse import device
from dwsynapse import exception
from dwsynapse import learning
from dwsynapse import log
from dwsynapse import network
from dwsynapse import oracle

LOG = log.get_logger()

FIELD_BINS = 50
PRESENTATIONS = 10000
MEAN_WEIGHT_SAMPLES = (1, 4, 128)


def _active_fields(networks, active=None):
    if not networks:
        raise exception.InvalidArgument(reason='no networks to analyze')
    columns = slice(None) if active is None else np.asarray(active, bool)
    return np.concatenate([net.fields[:, columns].ravel()
                           for net in networks])


def field_histogram(networks, model, active=None, bins=FIELD_BINS):
    """Density histogram of the fields pooled over several networks.

    Only the inputs flagged in ``active`` count. Identical fields, as in
    an untrained network, collapse into a single bin.
    """
    fields = _active_fields(networks, active)
    if fields.size == 0:
        raise exception.InvalidArgument(reason='no active inputs')
    if np.ptp(fields) == 0:
        bins = 1
    density, edges = np.histogram(fields, bins=bins, density=True)
    centres = 0.5 * (edges[:-1] + edges[1:])
    probability = device.passing_probability(model, centres)

    header = ('field_low_mT', 'field_high_mT', 'density',
              'passing_probability')
    rows = list(zip(edges[:-1].tolist(), edges[1:].tolist(),
                    density.tolist(), probability.tolist()))
    return header, rows


def bimodality(networks, model, active=None):
    """Median of ``|f(h) - 0.5|`` over the active synapses.

    Near 0.5 the weights sit at the deterministic ends of the sigmoid,
    near 0 they stay in its central region.
    """
    fields = _active_fields(networks, active)
    return float(np.median(np.abs(
        device.passing_probability(model, fields) - 0.5)))


def neuron_distribution(net, model, image, label, K,
                        presentations=PRESENTATIONS, rng=None,
                        backend=None):
    """Frequency of each output value when one image is shown repeatedly.

    Rows are grouped into the neuron of ``label`` (``correct``) and the
    other neurons pooled together (``incorrect``).
    """
    backend = backend or synapse_backend.InProcessBackend()
    rng = rng if rng is not None else np.random.default_rng()
    image = np.asarray(image)

    outputs = []
    for start in range(0, presentations, learning.EVAL_CHUNK):
        count = min(learning.EVAL_CHUNK, presentations - start)
        X = np.broadcast_to(image, (count, image.size))
        outputs.append(network.forward_sampled(net, model, X, K, backend,
                                               rng).y)
    outputs = np.concatenate(outputs)

    correct = outputs[:, label]
    incorrect = np.delete(outputs, label, axis=1).ravel()

    rows = []
    for group, values in (('correct', correct), ('incorrect', incorrect)):
        support, counts = np.unique(np.round(values, 12),
                                    return_counts=True)
        for y, n in zip(support.tolist(), counts.tolist()):
            rows.append((group, K, y, n, n / values.size))
    return ('neuron', 'K_test', 'y', 'count', 'frequency'), rows


def mean_output_std(net, model, X, K):
    """Output standard deviation averaged over images and neurons."""
    stats = network.forward_stats(net, model, X, K)
    return float(np.mean(np.sqrt(stats.sigma2)))


def output_std_vs_k(networks, model, X):
    """Mean output std of each network at K_test = 1 and K_test = K_train.

    ``networks`` are checkpoints whose metadata records ``K_train``.
    """
    rows = []
    for net in networks:
        K_train = int(net.metadata.get('K_train', 1))
        rows.append((K_train, net.metadata.get('seed'),
                     mean_output_std(net, model, X, 1),
                     mean_output_std(net, model, X, K_train)))
    rows.sort(key=lambda row: (row[0], row[1] is None, row[1]))
    return ('K_train', 'seed', 'std_K_test_1', 'std_K_test_K_train'), rows


def mean_weight_demo(model, fields, K_values=MEAN_WEIGHT_SAMPLES,
                     rng=None):
    """One K-sample mean weight per field, for each K."""
    rng = rng if rng is not None else np.random.default_rng()
    fields = np.asarray(fields, dtype=float)
    probability = device.passing_probability(model, fields)

    rows = []
    for K in K_values:
        for h, p in zip(fields.tolist(), probability.tolist()):
            rows.append((K, h, p,
                         device.sample_mean_weight(model, h, 1, K, rng)))
    return ('K', 'field_mT', 'passing_probability', 'mean_weight'), rows


def passing_curve(model, fields):
    fields = np.asarray(fields, dtype=float)
    rows = zip(fields.tolist(),
               device.passing_probability(model, fields).tolist(),
               device.passing_probability_derivative(model,
                                                     fields).tolist())
    return ('field_mT', 'passing_probability', 'derivative_per_mT'), \
        list(rows)


def gaussian_report(net, model, image, K):
    """Distance between the exact neuron law and its Gaussian stand-in."""
    image = np.asarray(image)
    stats = network.forward_stats(net, model, image, K)

    rows = []
    for i in range(net.classes):
        exact = oracle.exact_neuron_distribution(
            model, net.fields[i], image, K, bias=net.biases[i])
        distance = oracle.gaussian_total_variation(
            exact, stats.mu[i], stats.sigma2[i])
        rows.append((i, float(stats.mu[i]), float(stats.sigma2[i]),
                     exact.mean, exact.variance, distance))
        LOG.debug('Neuron %(neuron)d: total variation %(tv).4f',
                  {'neuron': i, 'tv': distance})
    return ('neuron', 'mu', 'sigma2', 'exact_mean', 'exact_variance',
            'total_variation'), rows
