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

import configparser
import copy
import os

from dwsynapse import utils

__all__ = ['get_config']

_CONFIG_FILE_PATHS = (
    os.environ.get('DWSYNAPSE_CONFIG', ''),
    os.path.join(os.path.expanduser('~'), '.dwsynapse', 'dwsynapse.conf'),
    '/etc/dwsynapse/dwsynapse.conf')

CONFIG_FILE = next((x for x in _CONFIG_FILE_PATHS if os.path.exists(x)), '')

CONFIG = None


class SynapseConfig(object):

    DEFAULTS = {
        'default': {
            'data_dir': os.path.join(
                os.path.expanduser('~'), '.dwsynapse', 'data'
            ),
            'cache_dir': os.path.join(
                os.path.expanduser('~'), '.dwsynapse', 'cache'
            ),
            'output_dir': '.',
            'seed': 0,
        },
        'log': {
            'logfile': None,
            'debug': 'false'
        },
        'device': {
            # Calibrated sigmoid of the notched nanowire
            'd': 0.0219,
            'h0': 4.63,  # mT
            'delta': 2.73,  # 1/mT
            # Fields outside this window only produce a warning
            'field_min': 0.0,  # mT
            'field_max': 10.0,  # mT
        },
        'training': {
            'batch_size': 50,
            'patience': 20,
            'max_epochs': 1000,
            'beta1': 0.9,
            'beta2': 0.999,
            'epsilon': 1e-8,
        },
        'server': {
            'address': '127.0.0.1',
            'port': 50893,
            'response_timeout': 5000,  # milliseconds
            'retries': 2,
            'latency_fixed': 0.0,  # milliseconds
            'latency_jitter': 0.0,  # milliseconds
            'trace_mode': 'false',
            'field_jitter': 0.0,  # mT
            'pid_file': os.path.join(
                os.path.expanduser('~'), '.dwsynapse', 'synapse-server.pid'
            ),
        },
    }

    def initialize(self, config_file=CONFIG_FILE):
        config = configparser.ConfigParser()
        config.read(config_file)
        self._conf_dict = self._as_dict(config)
        self._validate()

    def _as_dict(self, config):
        conf_dict = copy.deepcopy(self.DEFAULTS)
        for section in config.sections():
            if section not in conf_dict:
                conf_dict[section] = {}
            for key, val in config.items(section):
                conf_dict[section][key] = val

        return conf_dict

    def _validate(self):
        default = self._conf_dict['default']
        default['data_dir'] = os.environ.get(
            'DWSYNAPSE_DATA_DIR', default['data_dir'])
        default['seed'] = int(default['seed'])

        self._conf_dict['log']['debug'] = utils.str2bool(
            str(self._conf_dict['log']['debug']))

        for key in ('d', 'h0', 'delta', 'field_min', 'field_max'):
            self._conf_dict['device'][key] = float(
                self._conf_dict['device'][key])

        training = self._conf_dict['training']
        for key in ('batch_size', 'patience', 'max_epochs'):
            training[key] = int(training[key])
        for key in ('beta1', 'beta2', 'epsilon'):
            training[key] = float(training[key])

        server = self._conf_dict['server']
        for key in ('port', 'response_timeout', 'retries'):
            server[key] = int(server[key])
        for key in ('latency_fixed', 'latency_jitter', 'field_jitter'):
            server[key] = float(server[key])
        server['trace_mode'] = utils.str2bool(str(server['trace_mode']))

    def snapshot(self):
        return copy.deepcopy(self._conf_dict)

    def restore(self, snapshot):
        """Replace the settings with a recorded snapshot."""
        conf_dict = copy.deepcopy(self.DEFAULTS)
        for section, values in snapshot.items():
            conf_dict.setdefault(section, {}).update(values)
        self._conf_dict = conf_dict

    def __getitem__(self, key):
        return self._conf_dict[key]


def get_config():
    global CONFIG
    if CONFIG is None:
        CONFIG = SynapseConfig()
        CONFIG.initialize()

    return CONFIG
