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

"""Stochastic and mean-field learning rules, Adam, training and testing."""

import collections
import csv

import numpy as np

from dwsynapse import backend as synapse_backend
from dwsynapse import config as synapse_config
from dwsynapse import device
from dwsynapse import exception
from dwsynapse import log
from dwsynapse import network
from dwsynapse import utils

LOG = log.get_logger()

CONF = synapse_config.get_config()

# Learning rules
STOCHASTIC = 'stochastic'
MEAN_FIELD = 'mean_field'
RULES = (STOCHASTIC, MEAN_FIELD)

# Images per forward when validating or testing whole splits
EVAL_CHUNK = 500

EvaluationReport = collections.namedtuple(
    'EvaluationReport',
    ['accuracy', 'std', 'stderr', 'accuracies', 'predictions'])


class TrainConfig(object):

    def __init__(self, K_train=1, learning_rate=None, batch_size=None,
                 patience=None, max_epochs=None, seed=0, rule=STOCHASTIC):
        training = CONF['training']

        if rule not in RULES:
            raise exception.InvalidArgument(
                reason='unknown learning rule %r' % (rule,))
        if int(K_train) != K_train or K_train < 1:
            raise exception.InvalidArgument(
                reason='K_train must be a positive integer')

        self.K_train = int(K_train)
        if learning_rate is None:
            learning_rate = 0.01 if self.K_train == 1 else 0.001
        self.learning_rate = float(learning_rate)
        self.batch_size = int(batch_size or training['batch_size'])
        self.patience = int(training['patience'] if patience is None
                            else patience)
        self.max_epochs = int(max_epochs or training['max_epochs'])
        self.seed = int(seed)
        self.rule = rule
        self.beta1 = training['beta1']
        self.beta2 = training['beta2']
        self.epsilon = training['epsilon']

    def to_dict(self):
        return {
            'K_train': self.K_train,
            'learning_rate': self.learning_rate,
            'batch_size': self.batch_size,
            'patience': self.patience,
            'max_epochs': self.max_epochs,
            'seed': self.seed,
            'rule': self.rule,
            'adam': {'beta1': self.beta1, 'beta2': self.beta2,
                     'epsilon': self.epsilon},
        }


class AdamState(object):
    """Bias-corrected Adam moments, one slot per parameter array."""

    def __init__(self, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step = 0
        self.first = {}
        self.second = {}


class TrainHistory(object):

    def __init__(self):
        self.train_loss = []
        self.val_loss = []
        self.val_acc = []
        self.best_epoch = None

    def record(self, train_loss, val_loss, val_acc):
        self.train_loss.append(train_loss)
        self.val_loss.append(val_loss)
        self.val_acc.append(val_acc)
        if self.best_epoch is None or val_loss < self.val_loss[
                self.best_epoch]:
            self.best_epoch = len(self.val_loss) - 1

    @property
    def epochs(self):
        return len(self.val_loss)

    def to_csv(self, path):
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['epoch', 'train_loss', 'val_loss', 'val_acc'])
            for epoch in range(self.epochs):
                writer.writerow([epoch, repr(self.train_loss[epoch]),
                                 repr(self.val_loss[epoch]),
                                 repr(self.val_acc[epoch])])


def _batch_arrays(net, x, grad_y):
    X, _ = network._as_batch(net, x)
    GY = np.atleast_2d(np.asarray(grad_y, dtype=float))
    if GY.shape != (X.shape[0], net.classes):
        raise exception.InvalidArgument(
            reason='output gradient shape %s does not match %d images '
                   'and %d classes' % (np.shape(grad_y), X.shape[0],
                                       net.classes))
    return X, GY


def mean_field_gradient(grad_y, x, net, model):
    """Gradient of the mean output only: ``dE/dy_i f'(h_ij) x_j``."""
    X, GY = _batch_arrays(net, x, grad_y)
    dprobs = device.passing_probability_derivative(model, net.fields)
    return dprobs * (GY.T @ X), GY.sum(axis=0)


def stochastic_gradient(forward, grad_y, x, net, model):
    """Reparameterized gradient through ``y = mu + sigma xi``.

    Per synapse the mean-field term is scaled by
    ``1 + (1 - 2 f x) xi / (2 sigma K)``, the exact derivative of the
    K-sample standard deviation. Neurons with ``sigma`` below the floor
    keep the mean-field term alone.
    """
    X, GY = _batch_arrays(net, x, grad_y)
    xi = np.atleast_2d(forward.stats.xi)
    sigma = np.sqrt(np.atleast_2d(forward.stats.sigma2))

    probs = device.passing_probability(model, net.fields)
    dprobs = device.passing_probability_derivative(model, net.fields)

    live = sigma >= network.SIGMA_FLOOR
    spread = np.zeros_like(GY)
    spread[live] = GY[live] * xi[live] / (2.0 * sigma[live] * forward.K)

    fields_grad = dprobs * (GY.T @ X) + dprobs * (1.0 - 2.0 * probs) * (
        spread.T @ X)
    return fields_grad, GY.sum(axis=0)


def adam_step(state, params, gradients, learning_rate):
    """Apply one Adam update in place to every array in ``params``."""
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step

    for name, value in params.items():
        grad = gradients[name]
        if np.shape(grad) != value.shape:
            raise exception.InvalidArgument(
                reason='gradient for %s has shape %s, expected %s'
                       % (name, np.shape(grad), value.shape))
        first = state.first.setdefault(name, np.zeros_like(value))
        second = state.second.setdefault(name, np.zeros_like(value))
        first *= state.beta1
        first += (1.0 - state.beta1) * grad
        second *= state.beta2
        second += (1.0 - state.beta2) * np.square(grad)
        value -= learning_rate * (first / correction1) / (
            np.sqrt(second / correction2) + state.epsilon)

    return params


def _split_loss(net, model, X, labels, K, rng, backend):
    total = 0.0
    correct = 0
    for start in range(0, X.shape[0], EVAL_CHUNK):
        chunk = slice(start, start + EVAL_CHUNK)
        if K is None:
            y = network.forward_mean_field(net, model, X[chunk])
        else:
            y = network.forward_sampled(net, model, X[chunk], K, backend,
                                        rng).y
        loss, _ = network.softmax_cross_entropy(y, labels[chunk])
        total += loss * y.shape[0]
        correct += int(np.count_nonzero(network.predict(y) == labels[chunk]))
    return total / X.shape[0], correct / X.shape[0]


def train(config, data, model, backend=None):
    """Train a network, returning the best-validation snapshot.

    Stops once the validation loss has not reached a new minimum for
    ``config.patience`` epochs.
    """
    backend = backend or synapse_backend.InProcessBackend()
    X_train, y_train = data.arrays('train')
    X_val, y_val = data.arrays('validation')
    if X_train.shape[0] == 0 or X_val.shape[0] == 0:
        raise exception.InvalidArgument(
            reason='training needs non-empty train and validation splits')

    net = network.SynapseFieldNetwork.initialized(
        model, classes=data.classes, inputs=X_train.shape[1])
    X_train = X_train.astype(float)
    X_val = X_val.astype(float)

    state = AdamState(config.beta1, config.beta2, config.epsilon)
    params = {'fields': net.fields, 'biases': net.biases}
    history = TrainHistory()
    best = net.copy()
    n = X_train.shape[0]

    LOG.info('Training %(rule)s rule, K_train=%(K)d, learning rate '
             '%(lr)s, %(n)d images, seed %(seed)d',
             {'rule': config.rule, 'K': config.K_train,
              'lr': config.learning_rate, 'n': n, 'seed': config.seed})

    for epoch in range(config.max_epochs):
        order = utils.make_rng(config.seed, 'epoch', epoch).permutation(n)
        sample_rng = utils.make_rng(config.seed, 'samples', epoch)
        epoch_loss = 0.0

        for batch, start in enumerate(range(0, n, config.batch_size)):
            index = order[start:start + config.batch_size]
            X, labels = X_train[index], y_train[index]

            if config.rule == STOCHASTIC:
                forward = network.forward_sampled(
                    net, model, X, config.K_train, backend, sample_rng)
                loss, grad_y = network.softmax_cross_entropy(
                    forward.y, labels)
                fields_grad, bias_grad = stochastic_gradient(
                    forward, grad_y, X, net, model)
            else:
                y = network.forward_mean_field(net, model, X)
                loss, grad_y = network.softmax_cross_entropy(y, labels)
                fields_grad, bias_grad = mean_field_gradient(
                    grad_y, X, net, model)

            if not np.isfinite(loss):
                raise exception.TrainingDiverged(epoch=epoch, batch=batch,
                                                 loss=loss)

            adam_step(state, params,
                      {'fields': fields_grad, 'biases': bias_grad},
                      config.learning_rate)
            epoch_loss += loss * len(index)

        val_loss, val_acc = _split_loss(
            net, model, X_val, y_val, config.K_train,
            utils.make_rng(config.seed, 'validation'), backend)
        history.record(epoch_loss / n, val_loss, val_acc)

        LOG.debug('Epoch %(epoch)d: train loss %(train).5f, validation '
                  'loss %(val).5f, validation accuracy %(acc).4f',
                  {'epoch': epoch, 'train': epoch_loss / n,
                   'val': val_loss, 'acc': val_acc})

        if history.best_epoch == epoch:
            best = net.copy()
        elif epoch - history.best_epoch >= config.patience:
            LOG.info('Validation loss flat for %(patience)d epochs, '
                     'stopping at epoch %(epoch)d',
                     {'patience': config.patience, 'epoch': epoch})
            break

    best.metadata = {
        'K_train': config.K_train,
        'seed': config.seed,
        'epoch': history.best_epoch,
        'rule': config.rule,
        'best_val_loss': history.val_loss[history.best_epoch],
        'best_val_acc': history.val_acc[history.best_epoch],
        'config': config.to_dict(),
        'data_seed': int(data.seed),
    }
    device.check_field_range(best.fields)

    LOG.info('Best epoch %(epoch)d: validation loss %(loss).5f, accuracy '
             '%(acc).4f', {'epoch': history.best_epoch,
                           'loss': best.metadata['best_val_loss'],
                           'acc': best.metadata['best_val_acc']})
    return best, history


def evaluate(net, model, split, K_test, repeats=5, seed=0, backend=None,
             batch_size=50):
    """Classification accuracy over ``repeats`` independent passes.

    ``K_test=None`` uses the deterministic mean-field forward. ``stderr``
    is the standard error of the per-mini-batch accuracies within a pass,
    averaged over the passes.
    """
    backend = backend or synapse_backend.InProcessBackend()
    X, labels = split
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    if X.shape[0] == 0 or repeats < 1:
        raise exception.InvalidArgument(
            reason='evaluation needs images and at least one repeat')

    accuracies = []
    stderrs = []
    predictions = []
    for repeat in range(repeats):
        rng = utils.make_rng(seed, 'evaluate', repeat)
        batch_accuracy = []
        predicted = np.empty(X.shape[0], dtype=int)
        for start in range(0, X.shape[0], batch_size):
            chunk = slice(start, start + batch_size)
            if K_test is None:
                y = network.forward_mean_field(net, model, X[chunk])
            else:
                y = network.forward_sampled(net, model, X[chunk], K_test,
                                            backend, rng).y
            predicted[chunk] = network.predict(y)
            batch_accuracy.append(np.mean(predicted[chunk] == labels[chunk]))

        accuracies.append(float(np.mean(predicted == labels)))
        predictions.append(predicted)
        if len(batch_accuracy) > 1:
            stderrs.append(float(np.std(batch_accuracy, ddof=1)
                                 / np.sqrt(len(batch_accuracy))))
        else:
            stderrs.append(0.0)

    std = float(np.std(accuracies, ddof=1)) if repeats > 1 else 0.0
    return EvaluationReport(accuracy=float(np.mean(accuracies)), std=std,
                            stderr=float(np.mean(stderrs)),
                            accuracies=accuracies, predictions=predictions)


def select_best(checkpoints):
    """Pick the checkpoint with the lowest best-epoch validation loss."""
    if not checkpoints:
        raise exception.InvalidArgument(reason='no checkpoints to select')

    ranked = []
    for path in checkpoints:
        net, model = network.load_checkpoint(path)
        loss = net.metadata.get('best_val_loss')
        if loss is None:
            raise exception.InvalidArgument(
                reason='checkpoint %s records no validation loss' % path)
        ranked.append((loss, path, net, model))

    loss, path, net, model = min(ranked, key=lambda item: item[0])
    LOG.info('Selected %(path)s with validation loss %(loss).5f',
             {'path': path, 'loss': loss})
    return path, net, model
