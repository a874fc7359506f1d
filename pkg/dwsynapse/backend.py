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

"""Synapse backends: who answers "given (h, x, K), which K bits?"."""

import abc

import numpy as np

from dwsynapse import device

# Upper bound (exclusive) of the per-image seeds drawn in seed-plumbing mode
SEED_BOUND = 2 ** 63


def synapse_requests(fields, x):
    """Yield ``(i, j, field)`` for every active synapse of one image.

    The order (class-major, then ascending input index) is the order in
    which remote and in-process literal backends consume randomness.
    """
    active = np.flatnonzero(x)
    for i in range(fields.shape[0]):
        for j in active:
            yield i, int(j), float(fields[i, j])


class SynapseBackend(abc.ABC):
    """Source of synapse samples for a batch of binary inputs."""

    @abc.abstractmethod
    def sample_counts(self, model, fields, X, K, rng):
        """Return the number of passing samples per synapse and image.

        :param model: calibration used by in-process backends.
        :param fields: (C, N) propagation fields in mT.
        :param X: (B, N) binary inputs.
        :param K: samples per synapse.
        :param rng: numpy Generator owned by the caller.
        :returns: (B, C, N) integer counts in [0, K], zero where x = 0.
        """

    def close(self):
        pass


class InProcessBackend(SynapseBackend):
    """Binomial-count shortcut: one variate per active synapse."""

    def sample_counts(self, model, fields, X, K, rng):
        probs = device.passing_probability(model, fields)
        B = X.shape[0]
        C, N = fields.shape
        counts = np.zeros((B, C, N), dtype=np.int64)
        active = np.broadcast_to(X[:, None, :] == 1, (B, C, N))
        counts[active] = rng.binomial(
            K, np.broadcast_to(probs[None, :, :], (B, C, N))[active])
        return counts


class BernoulliBackend(SynapseBackend):
    """Literal K-bit sampling in remote-request order.

    Each image draws one seed from the caller's stream and samples its
    synapses from a fresh generator built on that seed, which is what a
    seed-plumbed remote backend asks the server to do.
    """

    def sample_counts(self, model, fields, X, K, rng):
        B = X.shape[0]
        C, N = fields.shape
        counts = np.zeros((B, C, N), dtype=np.int64)
        for b in range(B):
            stream = np.random.default_rng(
                int(rng.integers(0, SEED_BOUND)))
            for i, j, h in synapse_requests(fields, X[b]):
                counts[b, i, j] = int(
                    device.sample_bits(model, h, 1, K, stream).sum())
        return counts


def measure_passing_curve(synapse_backend, model, fields, samples, rng):
    """Fraction of passing walls at each field, ``samples`` shots each."""
    fields = np.asarray(fields, dtype=float).reshape(-1, 1)
    counts = synapse_backend.sample_counts(
        model, fields, np.ones((1, 1), dtype=np.uint8), samples, rng)
    return counts[0, :, 0] / samples
