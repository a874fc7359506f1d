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

import errno
import logging

from dwsynapse import config

__all__ = ['get_logger']

LOG_FORMAT = ('%(asctime)s %(process)d %(levelname)s '
              '%(name)s [-] %(message)s')
LOGGER_NAME = 'DWSynapse'
LOGGER = None


def _make_handler(logfile):
    if logfile:
        return logging.FileHandler(logfile)
    return logging.StreamHandler()


class SynapseLogger(logging.Logger):
    """Process-wide logger writing to stderr or the configured file."""

    def __init__(self, debug=False, logfile=None):
        level = logging.DEBUG if debug else logging.INFO
        super(SynapseLogger, self).__init__(LOGGER_NAME, level)
        try:
            self.handler = _make_handler(logfile)
        except IOError as e:
            # An unwritable log file falls back to stderr
            if e.errno != errno.EACCES:
                raise
            self.handler = logging.StreamHandler()
        self.handler.setFormatter(logging.Formatter(LOG_FORMAT))
        self.addHandler(self.handler)


def get_logger():
    global LOGGER
    if LOGGER is None:
        section = config.get_config()['log']
        LOGGER = SynapseLogger(debug=section['debug'],
                               logfile=section['logfile'])
    return LOGGER
