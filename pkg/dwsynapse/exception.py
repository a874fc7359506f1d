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

# Process exit codes
RC_USAGE = 1
RC_DATA = 2
RC_TRANSPORT = 3


class SynapseError(Exception):
    message = None
    rc = RC_USAGE

    def __init__(self, message=None, **kwargs):
        if self.message and kwargs:
            self.message = self.message % kwargs
        else:
            self.message = message

        super(SynapseError, self).__init__(self.message)


class InvalidArgument(SynapseError):
    message = 'Invalid argument: %(reason)s'


class DomainError(SynapseError):
    message = 'Field %(field)s mT is not a finite number'


class ProbabilityOutOfRange(SynapseError):
    message = ('Passing probability %(p)s is unreachable, it must lie in '
               '(%(low)s, 1)')


class CapacityError(SynapseError):
    message = ('Exact distribution over %(events)d events exceeds the '
               'limit of %(limit)d')


class NonFiniteEvaluation(SynapseError):
    message = 'Function evaluation at coordinate %(index)d is not finite'


class TrainingDiverged(SynapseError):
    message = ('Training aborted at epoch %(epoch)d, batch %(batch)d: '
               'loss is %(loss)s')


class DetectionError(SynapseError):
    message = 'Kerr trace has no transition: %(reason)s'


class CacheMiss(SynapseError):
    message = 'No cached checkpoint at %(path)s'


class StaleCheckpoint(CacheMiss):
    message = ('Cached checkpoint %(path)s does not match the requested '
               'training: %(reason)s')


class DataError(SynapseError):
    rc = RC_DATA


class IdxFormatError(DataError):
    message = 'Malformed IDX file %(path)s: %(reason)s'


class LabelRangeError(DataError):
    message = 'Label file %(path)s holds label %(label)d outside 0-9'


class DataMissing(DataError):
    message = ('Dataset files missing from %(data_dir)s: %(files)s. Place '
               'them there or run "synapse data --fetch"')


class ChecksumMismatch(DataError):
    message = 'Checksum mismatch for %(path)s: expected %(expected)s'


class CacheFormatError(DataError):
    message = 'Dataset cache %(path)s is unreadable: %(reason)s'


class TransportError(SynapseError):
    rc = RC_TRANSPORT
    message = 'Synapse server %(address)s unreachable: %(reason)s'


class DeviceError(SynapseError):
    rc = RC_TRANSPORT
    message = 'Synapse server reported an error: %(error)s'


class ProtocolError(SynapseError):
    message = '%(reason)s'
