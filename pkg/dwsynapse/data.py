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

"""MNIST ingestion: IDX parsing, 2x2 max-pooling, binarization, splits."""

import gzip
import os
import shutil
import struct
import urllib.request

import numpy as np

from dwsynapse import exception
from dwsynapse import log
from dwsynapse import utils

LOG = log.get_logger()

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

# Refuse headers describing more than this many payload bytes
MAX_PAYLOAD = 1 << 31

TRAIN_SIZE = 50000
VALIDATION_SIZE = 10000
# Images of the test file used for the hardware comparison
HARDWARE_SUBSET = 600

THRESHOLD = 0.5

MIRROR = 'https://ossci-datasets.s3.amazonaws.com/mnist/'

# name -> (archive, md5 of the archive)
MNIST_FILES = {
    'train_images': ('train-images-idx3-ubyte.gz',
                     'f68b3c2dcbeaaa9fbdd348bbdeb94873'),
    'train_labels': ('train-labels-idx1-ubyte.gz',
                     'd53e105ee54ea40749a09fcbcd1e9432'),
    'test_images': ('t10k-images-idx3-ubyte.gz',
                    '9fb629c4189551a2d022fa330f9573f3'),
    'test_labels': ('t10k-labels-idx1-ubyte.gz',
                    'ec29112dd5afa0611ce80d1b7f02629c'),
}

CACHE_MAGIC = b'DWSB'
CACHE_VERSION = 1
# magic, version, seed, pool images, test images, train images, pixels
CACHE_HEADER = struct.Struct('>4sHQIIII')


def _read_raw(path):
    with open(path, 'rb') as f:
        payload = f.read()
    if payload[:2] == b'\x1f\x8b':
        try:
            payload = gzip.decompress(payload)
        except (OSError, EOFError) as ex:
            raise exception.IdxFormatError(path=path, reason=ex)
    return payload


def load_idx(path):
    """Parse an IDX image or label file into a uint8 array.

    Image files give shape (count, rows, cols); label files give (count,)
    and every label must be a digit.
    """
    payload = _read_raw(path)
    if len(payload) < 8:
        raise exception.IdxFormatError(path=path, reason='header truncated')

    magic, = struct.unpack('>I', payload[:4])
    if magic == IMAGES_MAGIC:
        ndim = 3
    elif magic == LABELS_MAGIC:
        ndim = 1
    else:
        raise exception.IdxFormatError(
            path=path, reason='bad magic number 0x%08x' % magic)

    header = 4 + 4 * ndim
    if len(payload) < header:
        raise exception.IdxFormatError(path=path, reason='header truncated')
    shape = struct.unpack('>%dI' % ndim, payload[4:header])

    size = 1
    for dim in shape:
        size *= dim
        if size > MAX_PAYLOAD:
            raise exception.IdxFormatError(
                path=path, reason='dimensions %s overflow' % (shape,))

    if len(payload) - header != size:
        raise exception.IdxFormatError(
            path=path, reason='payload holds %d bytes, header declares %d'
                              % (len(payload) - header, size))

    array = np.frombuffer(payload, dtype=np.uint8, offset=header)
    array = array.reshape(shape).copy()

    if magic == LABELS_MAGIC and array.size and array.max() > 9:
        raise exception.LabelRangeError(path=path, label=int(array.max()))

    return array


def maxpool_2x2(image):
    """Max over non-overlapping 2x2 blocks: (..., 28, 28) -> (..., 14, 14)."""
    image = np.asarray(image)
    if image.shape[-2:] != (28, 28):
        raise exception.InvalidArgument(
            reason='expected 28x28 images, got shape %s' % (image.shape,))
    lead = image.shape[:-2]
    blocks = image.reshape(lead + (14, 2, 14, 2))
    return blocks.max(axis=(-3, -1))


def binarize(image):
    """Pixels strictly brighter than 0.5 become 1; flattened row-major."""
    image = np.asarray(image, dtype=float)
    bits = (image > THRESHOLD).astype(np.uint8)
    if bits.ndim <= 2:
        return bits.reshape(-1)
    return bits.reshape(bits.shape[0], -1)


def preprocess(raw_images):
    """u8 28x28 images -> binary 196-pixel vectors."""
    return binarize(maxpool_2x2(np.asarray(raw_images) / 255.0))


def split(seed, size=TRAIN_SIZE + VALIDATION_SIZE, train_size=TRAIN_SIZE):
    """Seeded train/validation partition of the training-file indices."""
    order = utils.make_rng(seed, 'split').permutation(size)
    return np.sort(order[:train_size]), np.sort(order[train_size:])


class BinarizedDataset(object):
    """Binary images with a seeded train/validation split and a test set."""

    SPLITS = ('train', 'validation', 'test', 'hardware')

    def __init__(self, pool_images, pool_labels, test_images, test_labels,
                 train_index, validation_index, seed=0, classes=10):
        self.pool_images = np.asarray(pool_images, dtype=np.uint8)
        self.pool_labels = np.asarray(pool_labels, dtype=np.int64)
        self.test_images = np.asarray(test_images, dtype=np.uint8)
        self.test_labels = np.asarray(test_labels, dtype=np.int64)
        self.train_index = np.asarray(train_index, dtype=np.int64)
        self.validation_index = np.asarray(validation_index, dtype=np.int64)
        self.seed = seed
        self.classes = classes

        if np.intersect1d(self.train_index, self.validation_index).size:
            raise exception.InvalidArgument(
                reason='train and validation splits overlap')

    @classmethod
    def from_arrays(cls, images, labels, test_images, test_labels,
                    validation_size, seed=0, classes=None):
        """Build a dataset from binary arrays with a seeded split."""
        images = np.asarray(images)
        labels = np.asarray(labels)
        if classes is None:
            classes = int(max(labels.max(), np.max(test_labels))) + 1
        train_index, validation_index = split(
            seed, size=images.shape[0],
            train_size=images.shape[0] - validation_size)
        return cls(images, labels, test_images, test_labels, train_index,
                   validation_index, seed=seed, classes=classes)

    @property
    def pixels(self):
        return self.pool_images.shape[1]

    def arrays(self, name):
        """Return ``(images, labels)`` of a split.

        ``hardware`` is the first 600 test images in file order.
        """
        if name == 'train':
            return (self.pool_images[self.train_index],
                    self.pool_labels[self.train_index])
        if name == 'validation':
            return (self.pool_images[self.validation_index],
                    self.pool_labels[self.validation_index])
        if name == 'test':
            return self.test_images, self.test_labels
        if name == 'hardware':
            return (self.test_images[:HARDWARE_SUBSET],
                    self.test_labels[:HARDWARE_SUBSET])
        raise exception.InvalidArgument(
            reason='unknown split %r, expected one of %s'
                   % (name, ', '.join(self.SPLITS)))


def active_inputs(dataset):
    """Pixels that are 1 in at least one training image."""
    images, _ = dataset.arrays('train')
    return images.any(axis=0)


def _locate(data_dir, archive):
    for name in (archive, archive[:-len('.gz')]):
        path = os.path.join(data_dir, name)
        if os.path.exists(path):
            return path
    return None


def mnist_paths(data_dir):
    """Map each canonical file to its gzip or raw copy in ``data_dir``."""
    paths = {}
    missing = []
    for key, (archive, _) in sorted(MNIST_FILES.items()):
        path = _locate(data_dir, archive)
        if path is None:
            missing.append(archive)
        paths[key] = path
    if missing:
        raise exception.DataMissing(data_dir=data_dir,
                                    files=', '.join(missing))
    return paths


def fetch(data_dir, mirror=MIRROR):
    """Download missing canonical archives and verify their md5 sums."""
    if not os.path.exists(data_dir):
        os.makedirs(data_dir)

    for archive, md5 in MNIST_FILES.values():
        path = os.path.join(data_dir, archive)
        if not os.path.exists(path):
            LOG.info('Downloading %(url)s', {'url': mirror + archive})
            partial = path + '.part'
            try:
                with urllib.request.urlopen(mirror + archive) as response, \
                        open(partial, 'wb') as f:
                    shutil.copyfileobj(response, f)
            except OSError as ex:
                raise exception.DataMissing(
                    data_dir=data_dir,
                    files='%s (download failed: %s)' % (archive, ex))
            os.rename(partial, path)

        if utils.file_checksum(path, 'md5') != md5:
            raise exception.ChecksumMismatch(path=path, expected=md5)

    return mnist_paths(data_dir)


def load_mnist(data_dir, seed=0):
    """Read the four MNIST files and build the binarized dataset."""
    paths = mnist_paths(data_dir)
    pool_images = preprocess(load_idx(paths['train_images']))
    pool_labels = load_idx(paths['train_labels'])
    test_images = preprocess(load_idx(paths['test_images']))
    test_labels = load_idx(paths['test_labels'])

    if pool_images.shape[0] != pool_labels.shape[0] or \
            test_images.shape[0] != test_labels.shape[0]:
        raise exception.IdxFormatError(
            path=data_dir, reason='image and label counts differ')

    train_index, validation_index = split(
        seed, size=pool_images.shape[0],
        train_size=pool_images.shape[0] - VALIDATION_SIZE)
    LOG.info('Loaded %(pool)d training-file and %(test)d test images from '
             '%(dir)s', {'pool': pool_images.shape[0],
                         'test': test_images.shape[0], 'dir': data_dir})
    return BinarizedDataset(pool_images, pool_labels, test_images,
                            test_labels, train_index, validation_index,
                            seed=seed)


def save_cache(dataset, path):
    """Write the dataset as a big-endian, bit-packed binary file."""
    header = CACHE_HEADER.pack(
        CACHE_MAGIC, CACHE_VERSION, dataset.seed,
        dataset.pool_images.shape[0], dataset.test_images.shape[0],
        dataset.train_index.size, dataset.pixels)
    with open(path + '.tmp', 'wb') as f:
        f.write(header)
        f.write(dataset.pool_labels.astype(np.uint8).tobytes())
        f.write(dataset.test_labels.astype(np.uint8).tobytes())
        f.write(dataset.train_index.astype('>u4').tobytes())
        f.write(dataset.validation_index.astype('>u4').tobytes())
        f.write(np.packbits(dataset.pool_images, axis=1).tobytes())
        f.write(np.packbits(dataset.test_images, axis=1).tobytes())
    os.rename(path + '.tmp', path)


def load_cache(path):
    with open(path, 'rb') as f:
        payload = f.read()

    try:
        magic, version, seed, n_pool, n_test, n_train, pixels = \
            CACHE_HEADER.unpack_from(payload)
    except struct.error as ex:
        raise exception.CacheFormatError(path=path, reason=ex)
    if magic != CACHE_MAGIC or version != CACHE_VERSION:
        raise exception.CacheFormatError(
            path=path, reason='unknown header %r v%d' % (magic, version))

    packed = (pixels + 7) // 8
    sizes = [('pool_labels', n_pool, np.uint8),
             ('test_labels', n_test, np.uint8),
             ('train_index', n_train, '>u4'),
             ('validation_index', n_pool - n_train, '>u4'),
             ('pool_images', n_pool * packed, np.uint8),
             ('test_images', n_test * packed, np.uint8)]

    fields = {}
    offset = CACHE_HEADER.size
    for name, count, dtype in sizes:
        dtype = np.dtype(dtype)
        end = offset + count * dtype.itemsize
        if end > len(payload):
            raise exception.CacheFormatError(path=path, reason='truncated')
        fields[name] = np.frombuffer(payload, dtype=dtype, count=count,
                                     offset=offset)
        offset = end

    def unpack(name, rows):
        bits = fields[name].reshape(rows, packed)
        return np.unpackbits(bits, axis=1, count=pixels)

    return BinarizedDataset(
        unpack('pool_images', n_pool), fields['pool_labels'],
        unpack('test_images', n_test), fields['test_labels'],
        fields['train_index'].astype(np.int64),
        fields['validation_index'].astype(np.int64), seed=seed)
