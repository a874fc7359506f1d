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

import collections
import csv
import multiprocessing
import os
import signal

import numpy as np

from dwsynapse import exception
from dwsynapse import learning
from dwsynapse import log
from dwsynapse import network

LOG = log.get_logger()

# Checkpoint cache policies
REUSE = 'reuse'
RETRAIN = 'retrain'
REQUIRE = 'require'
CACHE_POLICIES = (REUSE, RETRAIN, REQUIRE)

SWEEP_HEADER = ('K_train', 'K_test', 'seed', 'accuracy', 'std', 'stderr')
GRID_HEADER = ('K_train', 'K_test', 'seeds', 'accuracy', 'std')

SweepRow = collections.namedtuple('SweepRow', SWEEP_HEADER)

# Dataset and model shared with pool workers by the initializer
_WORKER = {}


def checkpoint_path(cache_dir, rule, K_train, seed):
    return os.path.join(cache_dir, '%s-ktrain%d-seed%d.json'
                        % (rule, K_train, seed))


def _init_worker(data, model, pooled=True):
    if pooled:
        # The parent handles SIGINT and tears the pool down
        signal.signal(signal.SIGINT, signal.SIG_IGN)
    _WORKER['data'] = data
    _WORKER['model'] = model


def stale_reason(net, config, data):
    """Why a cached network does not answer ``config``, or None."""
    wanted = config.to_dict()
    recorded = net.metadata.get('config') or {}
    changed = sorted(key for key in wanted
                     if recorded.get(key) != wanted[key])
    if changed:
        return 'training settings differ in %s' % ', '.join(changed)
    if net.metadata.get('data_seed') != int(data.seed):
        return 'dataset seed %s, requested %s' % (
            net.metadata.get('data_seed'), data.seed)
    return None


def run_cell(cell):
    """Train (or load) one (K_train, seed) model and test every K_test."""
    (K_train, seed, K_tests, rule, split, repeats, cache_dir, policy,
     train_options) = cell
    data = _WORKER['data']
    model = _WORKER['model']
    config = learning.TrainConfig(K_train=K_train, seed=seed, rule=rule,
                                  **train_options)

    path = checkpoint_path(cache_dir, rule, K_train, seed)
    net = None
    if policy != RETRAIN and os.path.exists(path):
        cached, cached_model = network.load_checkpoint(path)
        reason = stale_reason(cached, config, data)
        if reason is None:
            LOG.info('Reusing checkpoint %(path)s', {'path': path})
            net, model = cached, cached_model
        elif policy == REQUIRE:
            raise exception.StaleCheckpoint(path=path, reason=reason)
        else:
            LOG.warning('Retraining stale checkpoint %(path)s: %(reason)s',
                        {'path': path, 'reason': reason})
    elif policy == REQUIRE:
        raise exception.CacheMiss(path=path)

    if net is None:
        net, history = learning.train(config, data, model)
        if not os.path.exists(cache_dir):
            os.makedirs(cache_dir)
        net.save(path, model)
        history.to_csv(path[:-len('.json')] + '-history.csv')

    rows = []
    for K_test in K_tests:
        report = learning.evaluate(net, model, data.arrays(split), K_test,
                                   repeats=repeats, seed=seed)
        rows.append(SweepRow(K_train, K_test, seed, report.accuracy,
                             report.std, report.stderr))
        LOG.info('K_train=%(train)d K_test=%(test)d seed=%(seed)d: '
                 'accuracy %(acc).4f', {'train': K_train, 'test': K_test,
                                        'seed': seed,
                                        'acc': report.accuracy})
    return rows


def sweep(K_train_list, K_test_list, seeds, data, model, cache_dir,
          rule=learning.STOCHASTIC, split='test', repeats=1, jobs=1,
          cache_policy=REUSE, train_options=None):
    """Accuracy for every (K_train, K_test, seed) combination.

    Cells run in up to ``jobs`` worker processes; rows come back sorted by
    (K_train, K_test, seed) whatever order the workers finish in.
    """
    if not (K_train_list and K_test_list and seeds):
        raise exception.InvalidArgument(
            reason='sweep needs K_train values, K_test values and seeds')
    if cache_policy not in CACHE_POLICIES:
        raise exception.InvalidArgument(
            reason='unknown cache policy %r' % (cache_policy,))

    cells = [(K_train, seed, list(K_test_list), rule, split, repeats,
              cache_dir, cache_policy, dict(train_options or {}))
             for K_train in K_train_list for seed in seeds]

    LOG.info('Sweeping %(cells)d training cells with %(jobs)d jobs',
             {'cells': len(cells), 'jobs': jobs})

    if jobs <= 1:
        _init_worker(data, model, pooled=False)
        results = [run_cell(cell) for cell in cells]
    else:
        pool = multiprocessing.Pool(jobs, initializer=_init_worker,
                                    initargs=(data, model))
        try:
            results = pool.map(run_cell, cells, chunksize=1)
            pool.close()
        except BaseException:
            pool.terminate()
            raise
        finally:
            pool.join()

    rows = [row for cell_rows in results for row in cell_rows]
    return sorted(rows, key=lambda row: (row.K_train, row.K_test, row.seed))


def grid(rows):
    """Mean accuracy and spread over seeds for each (K_train, K_test)."""
    cells = collections.OrderedDict()
    for row in rows:
        cells.setdefault((row.K_train, row.K_test), []).append(row.accuracy)

    table = []
    for (K_train, K_test), accuracies in sorted(cells.items()):
        std = float(np.std(accuracies, ddof=1)) if len(accuracies) > 1 \
            else 0.0
        table.append((K_train, K_test, len(accuracies),
                      float(np.mean(accuracies)), std))
    return table


def write_csv(path, header, rows):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
