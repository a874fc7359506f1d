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

import os
import sys
import tempfile

from cliff.app import App
from cliff.command import Command
from cliff.commandmanager import CommandManager
from cliff.lister import Lister
import numpy as np

import dwsynapse
from dwsynapse import analysis
from dwsynapse import backend as synapse_backend
from dwsynapse import client
from dwsynapse import config as synapse_config
from dwsynapse import control
from dwsynapse import data
from dwsynapse import device
from dwsynapse import exception
from dwsynapse.exception import SynapseError
from dwsynapse import learning
from dwsynapse import log
from dwsynapse import manifest
from dwsynapse import network
from dwsynapse import sweep
from dwsynapse import utils

CONF = synapse_config.get_config()

LOG = log.get_logger()

BACKENDS = ('in-process', 'bernoulli', 'remote')
ANALYZE_MODES = ('fields', 'neurons', 'std', 'mean-weight', 'passing',
                 'gaussian')
CURVE_POINTS = 201


def _output(path, default_name):
    path = path or os.path.join(CONF['default']['output_dir'], default_name)
    dir_name = os.path.dirname(os.path.abspath(path))
    if not os.path.exists(dir_name):
        os.makedirs(dir_name)
    return path


def _calibration(path):
    if path:
        return device.PassingProbabilityModel.load(path)
    return device.PassingProbabilityModel.from_config()


def _endpoint(address):
    host, _, port = address.rpartition(':')
    if not host or not port.isdigit():
        raise exception.InvalidArgument(
            reason='server address must look like HOST:PORT, got %r'
                   % (address,))
    return host, int(port)


def _make_backend(args):
    if args.backend == 'in-process':
        return synapse_backend.InProcessBackend()
    if args.backend == 'bernoulli':
        return synapse_backend.BernoulliBackend()
    address = port = None
    if args.address:
        address, port = _endpoint(args.address)
    return client.RemoteBackend(address=address, port=port,
                                plumb_seed=getattr(args, 'plumb_seed',
                                                   False))


def _add_backend_arguments(parser):
    parser.add_argument('--backend',
                        choices=BACKENDS,
                        default='in-process',
                        help='Where synapse samples come from; defaults to '
                             'in-process')
    parser.add_argument('--address',
                        dest='address',
                        help='HOST:PORT of the synapse server for the remote '
                             'backend; defaults to the configured server')


def _positive_ints(values):
    if any(value < 1 for value in values):
        raise exception.InvalidArgument(
            reason='sample counts must be positive, got %s' % (values,))
    return values


class DataCommand(Lister):
    """Prepare the binarized MNIST dataset and its cache"""

    def get_parser(self, prog_name):
        parser = super(DataCommand, self).get_parser(prog_name)

        parser.add_argument('--fetch',
                            action='store_true',
                            help='Download missing MNIST archives')
        return parser

    def take_action(self, args):
        run = self.app.start_manifest('data')
        dataset, hit = self.app.load_dataset(run, fetch=args.fetch)
        run.add_output(self.app.cache_path())
        run.write(manifest.manifest_path(self.app.cache_path()))

        rows = [(name, dataset.arrays(name)[0].shape[0])
                for name in data.BinarizedDataset.SPLITS]
        rows.append(('cache', 'hit' if hit else 'written'))
        return ('Item', 'Value'), rows


class TrainCommand(Lister):
    """Train a stochastic synapse network and keep its best epoch"""

    def get_parser(self, prog_name):
        parser = super(TrainCommand, self).get_parser(prog_name)

        parser.add_argument('--rule',
                            choices=learning.RULES,
                            default=learning.STOCHASTIC,
                            help='Learning rule; defaults to stochastic')
        parser.add_argument('--k-train',
                            dest='K_train',
                            type=int,
                            default=1,
                            help='Synapse samples per forward pass; '
                                 'defaults to 1')
        parser.add_argument('--learning-rate',
                            dest='learning_rate',
                            type=float,
                            help='Adam step size; defaults to 0.01 for '
                                 'K=1 and 0.001 otherwise')
        parser.add_argument('--batch-size', dest='batch_size', type=int,
                            help='Mini-batch size')
        parser.add_argument('--patience', type=int,
                            help='Epochs without a new validation minimum '
                                 'before stopping')
        parser.add_argument('--max-epochs', dest='max_epochs', type=int,
                            help='Upper bound on training epochs')
        parser.add_argument('--calibration',
                            help='Calibration JSON file; defaults to the '
                                 'configured device parameters')
        parser.add_argument('--output',
                            help='Checkpoint path')
        return parser

    def take_action(self, args):
        seed = self.app.seed
        run = self.app.start_manifest('train')
        run.add_input(args.calibration)
        model = _calibration(args.calibration)
        dataset, _ = self.app.load_dataset(run)

        config = learning.TrainConfig(
            K_train=args.K_train, learning_rate=args.learning_rate,
            batch_size=args.batch_size, patience=args.patience,
            max_epochs=args.max_epochs, seed=seed, rule=args.rule)
        net, history = learning.train(config, dataset, model)

        path = _output(args.output, os.path.basename(sweep.checkpoint_path(
            '', args.rule, args.K_train, seed)))
        history_path = os.path.splitext(path)[0] + '-history.csv'
        net.save(path, model)
        history.to_csv(history_path)

        run.add_output(path)
        run.add_output(history_path)
        run.write(manifest.manifest_path(path))

        metadata = net.metadata
        return ('Property', 'Value'), [
            ('checkpoint', path),
            ('history', history_path),
            ('epoch', metadata['epoch']),
            ('validation loss', metadata['best_val_loss']),
            ('validation accuracy', metadata['best_val_acc']),
        ]


class EvalCommand(Lister):
    """Measure the accuracy of a checkpoint"""

    def get_parser(self, prog_name):
        parser = super(EvalCommand, self).get_parser(prog_name)

        parser.add_argument('checkpoints',
                            metavar='checkpoint',
                            nargs='+',
                            help='Checkpoint written by "synapse train"; '
                                 'with several, the one with the lowest '
                                 'validation loss is evaluated')
        parser.add_argument('--k-test',
                            dest='K_test',
                            type=int,
                            nargs='+',
                            default=[1],
                            help='Synapse samples per forward pass; several '
                                 'values give one row each')
        parser.add_argument('--mean-field',
                            dest='mean_field',
                            action='store_true',
                            help='Use the deterministic mean-field forward '
                                 'instead of sampling')
        parser.add_argument('--repeats',
                            type=int,
                            default=5,
                            help='Independent evaluation passes; defaults '
                                 'to 5')
        parser.add_argument('--split',
                            choices=data.BinarizedDataset.SPLITS,
                            default='test',
                            help='Images to evaluate; defaults to test')
        parser.add_argument('--subset',
                            action='store_true',
                            help='Only the first 600 test images, as in '
                                 'hardware verification')
        _add_backend_arguments(parser)
        parser.add_argument('--plumb-seed',
                            dest='plumb_seed',
                            action='store_true',
                            help='Send per-image seeds to the server so its '
                                 'answers match the bernoulli backend')
        parser.add_argument('--report',
                            help='Report CSV path')
        return parser

    def take_action(self, args):
        seed = self.app.seed
        run = self.app.start_manifest('eval')
        for path in args.checkpoints:
            run.add_input(path)
        if len(args.checkpoints) > 1:
            checkpoint, net, model = learning.select_best(args.checkpoints)
        else:
            checkpoint = args.checkpoints[0]
            net, model = network.load_checkpoint(checkpoint)
        dataset, _ = self.app.load_dataset(run)
        split = dataset.arrays('hardware' if args.subset else args.split)

        K_values = [None] if args.mean_field else _positive_ints(args.K_test)
        sampler = _make_backend(args)
        rows = []
        try:
            for K_test in K_values:
                report = learning.evaluate(net, model, split, K_test,
                                           repeats=args.repeats, seed=seed,
                                           backend=sampler)
                rows.append(('mean-field' if K_test is None else K_test,
                             report.accuracy, report.std, report.stderr,
                             args.repeats))
                LOG.info('K_test=%(K)s accuracy %(acc).4f +- %(std).4f',
                         {'K': rows[-1][0], 'acc': report.accuracy,
                          'std': report.std})
        finally:
            sampler.close()

        header = ('K_test', 'accuracy', 'std', 'stderr', 'repeats')
        path = _output(args.report, os.path.splitext(
            os.path.basename(checkpoint))[0] + '-eval.csv')
        sweep.write_csv(path, header, rows)
        run.add_output(path)
        run.write(manifest.manifest_path(path))
        return header, rows


class SweepCommand(Lister):
    """Accuracy over a K_train x K_test grid and several seeds"""

    def get_parser(self, prog_name):
        parser = super(SweepCommand, self).get_parser(prog_name)

        parser.add_argument('--k-train', dest='K_train', type=int,
                            nargs='+', default=[1, 2, 4, 8, 16, 32, 64, 128],
                            help='Training sample counts')
        parser.add_argument('--k-test', dest='K_test', type=int,
                            nargs='+', default=[1, 2, 4, 8, 16, 32, 64, 128],
                            help='Test sample counts')
        parser.add_argument('--seeds', type=int, nargs='+',
                            default=[0, 1, 2, 3, 4],
                            help='Seeds of the independent models')
        parser.add_argument('--rule',
                            choices=learning.RULES,
                            default=learning.STOCHASTIC)
        parser.add_argument('--split',
                            choices=data.BinarizedDataset.SPLITS,
                            default='test')
        parser.add_argument('--repeats', type=int, default=1,
                            help='Evaluation passes per cell; defaults to 1')
        parser.add_argument('--jobs', type=int, default=1,
                            help='Worker processes; defaults to 1')
        parser.add_argument('--cache-policy',
                            dest='cache_policy',
                            choices=sweep.CACHE_POLICIES,
                            default=sweep.REUSE,
                            help='What to do with cached checkpoints; '
                                 'defaults to reuse')
        parser.add_argument('--max-epochs', dest='max_epochs', type=int)
        parser.add_argument('--calibration')
        parser.add_argument('--output',
                            help='Per-seed CSV path; the grid goes next to '
                                 'it with a -grid suffix')
        return parser

    def take_action(self, args):
        run = self.app.start_manifest(
            'sweep', seeds={'master': self.app.seed, 'models': args.seeds})
        run.add_input(args.calibration)
        model = _calibration(args.calibration)
        dataset, _ = self.app.load_dataset(run)

        train_options = {}
        if args.max_epochs:
            train_options['max_epochs'] = args.max_epochs
        cache_dir = os.path.join(CONF['default']['cache_dir'], 'checkpoints')

        rows = sweep.sweep(
            _positive_ints(args.K_train), _positive_ints(args.K_test),
            args.seeds, dataset, model, cache_dir, rule=args.rule,
            split=args.split, repeats=args.repeats, jobs=args.jobs,
            cache_policy=args.cache_policy, train_options=train_options)
        table = sweep.grid(rows)

        path = _output(args.output, 'sweep-%s.csv' % args.rule)
        grid_path = os.path.splitext(path)[0] + '-grid.csv'
        sweep.write_csv(path, sweep.SWEEP_HEADER, rows)
        sweep.write_csv(grid_path, sweep.GRID_HEADER, table)

        run.add_output(path)
        run.add_output(grid_path)
        run.write(manifest.manifest_path(path))
        return sweep.GRID_HEADER, table


class AnalyzeCommand(Lister):
    """Export figure data of trained checkpoints as CSV"""

    def get_parser(self, prog_name):
        parser = super(AnalyzeCommand, self).get_parser(prog_name)

        parser.add_argument('checkpoints', nargs='*',
                            help='Checkpoints to analyze; none means an '
                                 'untrained network')
        parser.add_argument('--mode',
                            choices=ANALYZE_MODES,
                            default='fields',
                            help='Which table to export; defaults to fields')
        parser.add_argument('--k-test', dest='K_test', type=int, nargs='+',
                            default=[1, 128],
                            help='Sample counts for the neurons mode, the '
                                 'first one for the gaussian mode')
        parser.add_argument('--digit', type=int, default=0,
                            help='Label of the test image shown to the '
                                 'network; defaults to 0')
        parser.add_argument('--presentations', type=int,
                            default=analysis.PRESENTATIONS,
                            help='Times the image is shown in neurons mode')
        parser.add_argument('--all-inputs',
                            dest='all_inputs',
                            action='store_true',
                            help='Count every input in the fields mode, not '
                                 'only pixels active in the training set')
        parser.add_argument('--calibration',
                            help='Calibration used without checkpoints')
        parser.add_argument('--output',
                            help='CSV path')
        return parser

    def _networks(self, args, run, model, inputs):
        if not args.checkpoints:
            return [network.SynapseFieldNetwork.initialized(
                model, inputs=inputs)], model
        networks = []
        for path in args.checkpoints:
            run.add_input(path)
            net, model = network.load_checkpoint(path)
            networks.append(net)
        return networks, model

    def _image(self, dataset, digit):
        images, labels = dataset.arrays('test')
        matches = np.flatnonzero(labels == digit)
        if not matches.size:
            raise exception.InvalidArgument(
                reason='no test image with label %d' % digit)
        return images[matches[0]]

    def take_action(self, args):
        run = self.app.start_manifest('analyze')
        run.add_input(args.calibration)
        model = _calibration(args.calibration)
        rng = utils.make_rng(self.app.seed, 'analyze', args.mode)
        summary = []

        if args.mode in ('mean-weight', 'passing'):
            device_conf = CONF['device']
            fields = np.linspace(device_conf['field_min'],
                                 device_conf['field_max'], CURVE_POINTS)
            if args.checkpoints:
                run.add_input(args.checkpoints[0])
                _, model = network.load_checkpoint(args.checkpoints[0])
            if args.mode == 'passing':
                header, rows = analysis.passing_curve(model, fields)
            else:
                header, rows = analysis.mean_weight_demo(model, fields,
                                                         rng=rng)
        else:
            dataset, _ = self.app.load_dataset(run)
            networks, model = self._networks(args, run, model,
                                             dataset.pixels)

            if args.mode == 'fields':
                active = None if args.all_inputs \
                    else data.active_inputs(dataset)
                header, rows = analysis.field_histogram(networks, model,
                                                        active)
                summary.append(('median |f - 0.5|', analysis.bimodality(
                    networks, model, active)))
            elif args.mode == 'std':
                header, rows = analysis.output_std_vs_k(
                    networks, model, dataset.arrays('test')[0])
            elif args.mode == 'neurons':
                image = self._image(dataset, args.digit)
                header, rows = None, []
                for K in _positive_ints(args.K_test):
                    header, part = analysis.neuron_distribution(
                        networks[0], model, image, args.digit, K,
                        presentations=args.presentations, rng=rng)
                    rows.extend(part)
            else:
                header, rows = analysis.gaussian_report(
                    networks[0], model, self._image(dataset, args.digit),
                    _positive_ints(args.K_test)[0])

        path = _output(args.output, 'analyze-%s.csv' % args.mode)
        sweep.write_csv(path, header, rows)
        run.add_output(path)
        run.write(manifest.manifest_path(path))

        summary[:0] = [('mode', args.mode), ('output', path),
                       ('rows', len(rows))]
        return ('Property', 'Value'), summary


class CalibrateCommand(Lister):
    """Measure a passing curve and fit a calibration file"""

    def get_parser(self, prog_name):
        parser = super(CalibrateCommand, self).get_parser(prog_name)

        _add_backend_arguments(parser)
        parser.add_argument('--field-min', dest='field_min', type=float)
        parser.add_argument('--field-max', dest='field_max', type=float)
        parser.add_argument('--points', type=int, default=41,
                            help='Fields in the sweep; defaults to 41')
        parser.add_argument('--samples', type=int, default=1000,
                            help='Shots per field; defaults to 1000')
        parser.add_argument('--calibration',
                            help='Device parameters of the in-process '
                                 'backends')
        parser.add_argument('--output',
                            help='Calibration JSON path')
        return parser

    def take_action(self, args):
        run = self.app.start_manifest('calibrate')
        run.add_input(args.calibration)
        model = _calibration(args.calibration)
        device_conf = CONF['device']
        fields = np.linspace(
            device_conf['field_min'] if args.field_min is None
            else args.field_min,
            device_conf['field_max'] if args.field_max is None
            else args.field_max,
            args.points)

        sampler = _make_backend(args)
        try:
            fractions = synapse_backend.measure_passing_curve(
                sampler, model, fields, args.samples,
                utils.make_rng(self.app.seed, 'calibrate'))
        finally:
            sampler.close()

        fitted = device.fit_passing_probability(fields, fractions)
        path = _output(args.output, 'calibration.json')
        fitted.save(path)
        run.add_output(path)
        run.write(manifest.manifest_path(path))

        return ('Parameter', 'Value'), sorted(fitted.to_dict().items())


class ServeCommand(Command):
    """Serve the emulated synapse device over TCP"""

    def get_parser(self, prog_name):
        parser = super(ServeCommand, self).get_parser(prog_name)

        server = CONF['server']
        parser.add_argument('--address',
                            dest='address',
                            default=server['address'],
                            help='The address to bind to; defaults to %s'
                                 % server['address'])
        parser.add_argument('--port',
                            dest='port',
                            type=int,
                            default=server['port'],
                            help='Port to listen on; defaults to %d'
                                 % server['port'])
        parser.add_argument('--calibration',
                            help='Calibration JSON file; defaults to the '
                                 'configured device parameters')
        parser.add_argument('--trace-mode',
                            dest='trace_mode',
                            action='store_true',
                            default=server['trace_mode'],
                            help='Classify synthesized Kerr traces instead '
                                 'of sampling bits directly')
        parser.add_argument('--latency-fixed', dest='latency_fixed',
                            type=float, default=server['latency_fixed'],
                            help='Fixed delay per request in milliseconds')
        parser.add_argument('--latency-jitter', dest='latency_jitter',
                            type=float, default=server['latency_jitter'],
                            help='Uniform extra delay per request in '
                                 'milliseconds')
        parser.add_argument('--field-jitter', dest='field_jitter',
                            type=float, default=server['field_jitter'],
                            help='Standard deviation in mT of the applied '
                                 'field around the requested one')
        parser.add_argument('--detach',
                            action='store_true',
                            help='Run the server in the background')
        parser.add_argument('--pid-file',
                            dest='pid_file',
                            default=server['pid_file'],
                            help='Where a detached server records its pid')
        return parser

    def take_action(self, args):
        calibration = _calibration(args.calibration)
        pid_file = args.pid_file

        try:
            with open(pid_file) as f:
                pid = int(f.read())

        except (OSError, ValueError):
            pass

        else:
            if utils.is_pid_running(pid):
                LOG.error('server PID #%(pid)d still running', {'pid': pid})
                return 1

        def application():
            control.serve(calibration, address=args.address, port=args.port,
                          seed=self.app.seed, trace_mode=args.trace_mode,
                          latency_fixed=args.latency_fixed,
                          latency_jitter=args.latency_jitter,
                          field_jitter=args.field_jitter)

        def wrap_with_pidfile(func, pid):
            dir_name = os.path.dirname(os.path.abspath(pid_file))

            if not os.path.exists(dir_name):
                os.makedirs(dir_name, mode=0o700)

            try:
                with tempfile.NamedTemporaryFile(mode='w+t', dir=dir_name,
                                                 delete=False) as f:
                    f.write(str(pid))
                    os.rename(f.name, pid_file)

                func()

            finally:
                try:
                    os.unlink(pid_file)

                except OSError:
                    pass

        if not args.detach:
            return wrap_with_pidfile(application, os.getpid())

        with utils.detach_process() as pid:
            if pid > 0:
                return 0

            return wrap_with_pidfile(application, os.getpid())


class ReplayCommand(Lister):
    """Re-run a command from its manifest and compare the outputs"""

    def get_parser(self, prog_name):
        parser = super(ReplayCommand, self).get_parser(prog_name)

        parser.add_argument('manifest',
                            help='Manifest written next to a command output')
        return parser

    def take_action(self, args):
        document = manifest.load(args.manifest)
        LOG.info('Replaying "%(command)s" recorded with dwsynapse '
                 '%(version)s', {'command': document['command'],
                                 'version': document.get('code_version')})

        CONF.restore(document.get('config', {}))
        os.chdir(document.get('cwd') or os.getcwd())
        rc = SynapseApp().run(document['argv'])
        if rc:
            raise exception.InvalidArgument(
                reason='replayed command exited with %d' % rc)

        changed = manifest.changed_outputs(document)
        if changed:
            raise exception.InvalidArgument(
                reason='replay produced different outputs: %s'
                       % ', '.join(changed))

        return ('Output', 'Status'), [
            (path, 'identical')
            for path in sorted(document.get('outputs', {}))]


class SynapseApp(App):

    def __init__(self):
        super(SynapseApp, self).__init__(
            description='Binary stochastic synapse networks backed by '
                        'domain-wall devices',
            version=dwsynapse.__version__,
            command_manager=CommandManager('dwsynapse.cli'),
            deferred_help=True,
        )
        self.argv = []
        self._error = None

    def build_option_parser(self, description, version, argparse_kwargs=None):
        parser = super(SynapseApp, self).build_option_parser(
            description, version, argparse_kwargs
        )

        parser.add_argument('--seed',
                            type=int,
                            default=CONF['default']['seed'],
                            help='Master seed every random stream is derived '
                                 'from; defaults to %d'
                                 % CONF['default']['seed'])
        parser.add_argument('--data-dir',
                            dest='data_dir',
                            default=CONF['default']['data_dir'],
                            help='Directory of the MNIST files')

        return parser

    @property
    def seed(self):
        return self.options.seed

    def run(self, argv):
        self.argv = list(argv)
        return super(SynapseApp, self).run(argv)

    def run_subcommand(self, argv):
        self._error = None
        result = super(SynapseApp, self).run_subcommand(argv)
        if isinstance(self._error, SynapseError):
            return self._error.rc
        return 1 if result else 0

    def start_manifest(self, command, seeds=None):
        return manifest.RunManifest(command, self.argv,
                                    seeds=seeds or {'master': self.seed})

    def cache_path(self):
        return os.path.join(CONF['default']['cache_dir'],
                            'mnist-seed%d.bin' % self.seed)

    def load_dataset(self, run, fetch=False):
        """Binarized dataset from the cache, rebuilt on a miss.

        Returns ``(dataset, cache_hit)`` and records the files read in
        ``run``.
        """
        data_dir = self.options.data_dir
        cache = self.cache_path()

        if fetch:
            data.fetch(data_dir)

        if os.path.exists(cache):
            LOG.debug('Dataset cache hit %(path)s', {'path': cache})
            run.add_input(cache)
            return data.load_cache(cache), True

        for path in data.mnist_paths(data_dir).values():
            run.add_input(path)
        dataset = data.load_mnist(data_dir, seed=self.seed)

        dir_name = os.path.dirname(cache)
        if not os.path.exists(dir_name):
            os.makedirs(dir_name)
        data.save_cache(dataset, cache)
        LOG.info('Wrote dataset cache %(path)s', {'path': cache})
        return dataset, False

    def clean_up(self, cmd, result, err):
        self.LOG.debug('clean_up %(name)s', {'name': cmd.__class__.__name__})
        if err:
            self._error = err
            self.LOG.debug('got an error: %(error)s', {'error': err})


def main(argv=sys.argv[1:]):
    synapse_app = SynapseApp()
    try:
        return synapse_app.run(argv)
    except SystemExit as ex:
        # argparse reports usage errors with status 2
        return 1 if ex.code else 0


if __name__ == '__main__':
    sys.exit(main())
