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

"""Exact and brute-force references for checking the network numerics.

Nothing in the training or serving path imports this module; it is used by
the tests and by ``synapse analyze --mode gaussian``.
"""

import csv

import numpy as np
from scipy import stats

from dwsynapse import device
from dwsynapse import exception

# Largest number of Bernoulli events convolved exactly
MAX_EVENTS = 4096


class ExactOutputDistribution(object):
    """Law of one neuron output: ``support[m] = m / K + bias``."""

    def __init__(self, pmf, K, bias=0.0):
        self.pmf = pmf
        self.K = K
        self.bias = bias
        self.support = np.arange(len(pmf)) / K + bias

    @property
    def mean(self):
        return float(np.dot(self.support, self.pmf))

    @property
    def variance(self):
        return float(np.dot((self.support - self.mean) ** 2, self.pmf))

    def to_csv(self, path):
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['y', 'probability'])
            writer.writerows(zip(self.support.tolist(), self.pmf.tolist()))


def poisson_binomial_pmf(probs):
    """Exact pmf over 0..n successes of independent Bernoulli events."""
    probs = np.asarray(probs, dtype=float).ravel()
    if np.any(~((probs >= 0) & (probs <= 1))):
        raise exception.InvalidArgument(
            reason='event probabilities must lie in [0, 1]')
    if probs.size > MAX_EVENTS:
        raise exception.CapacityError(events=probs.size, limit=MAX_EVENTS)

    pmf = np.zeros(probs.size + 1)
    pmf[0] = 1.0
    for n, p in enumerate(probs, start=1):
        pmf[1:n + 1] = pmf[1:n + 1] * (1.0 - p) + pmf[:n] * p
        pmf[0] *= 1.0 - p

    pmf[(pmf < 0) & (pmf > -1e-15)] = 0.0
    return pmf


def exact_neuron_distribution(model, fields_row, x, K, bias=0.0):
    """Exact law of ``y = count / K + bias`` for one neuron."""
    x = np.asarray(x)
    probs = device.passing_probability(model, np.asarray(fields_row))
    active = probs[x == 1]
    events = active.size * K
    if events > MAX_EVENTS:
        raise exception.CapacityError(events=events, limit=MAX_EVENTS)
    pmf = poisson_binomial_pmf(np.repeat(active, K))
    return ExactOutputDistribution(pmf, K, bias)


def finite_difference(fn, point, step=1e-6):
    """Central-difference gradient of a scalar function of a vector."""
    point = np.array(point, dtype=float)
    grad = np.zeros_like(point)
    flat = point.ravel()
    grad_flat = grad.ravel()
    for index in range(flat.size):
        saved = flat[index]
        flat[index] = saved + step
        upper = fn(point)
        flat[index] = saved - step
        lower = fn(point)
        flat[index] = saved
        if not (np.isfinite(upper) and np.isfinite(lower)):
            raise exception.NonFiniteEvaluation(index=index)
        grad_flat[index] = (upper - lower) / (2.0 * step)
    return grad


def gaussian_total_variation(distribution, mu, sigma2):
    """Total-variation distance to Normal(mu, sigma2) on the output grid.

    The Gaussian mass is integrated over bins of width 1/K centred on the
    support points; mass outside the support counts as disagreement.
    """
    half = 0.5 / distribution.K
    sigma = np.sqrt(sigma2)
    if sigma == 0:
        gauss = (np.abs(distribution.support - mu) < half).astype(float)
    else:
        upper = stats.norm.cdf(distribution.support + half, mu, sigma)
        lower = stats.norm.cdf(distribution.support - half, mu, sigma)
        gauss = upper - lower
    outside = max(0.0, 1.0 - gauss.sum())
    return 0.5 * (np.abs(distribution.pmf - gauss).sum() + outside)
