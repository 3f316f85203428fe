# -*- coding: utf-8 -*-
"""
Grayscale image loading, patch extraction and augmentation.

This file is part of unigap, distributed under the GNU LGPLv3.
"""
import json
import logging
import os
from collections import namedtuple

import numpy as np

__all__ = (
    'ImageDataset',
    'PatchSet',
    'AugmentFlags',
    'NonGrayscaleImageError',
    'decode_augmentation',
    'augment_patch',
    'default_image_loader',
    'load_images',
    'sample_anchors',
    'extract_patches',
    'moments',
    'save_patches',
    'load_patches')

logger = logging.getLogger(__name__)

# augmentation bits, one dihedral element per value 0..7
AUG_FLIPX = 1
AUG_FLIPY = 2
AUG_TRANSPOSE = 4
N_AUGMENTATIONS = 8

DEFAULT_PATCH_SIZE = 40
IMAGE_EXTENSIONS = ('.pgm', '.png')
PATCH_DTYPE = '<f4'
PATCH_FORMAT = 'unigap-patches'

flag_names = (
    'flipped_horizontally',
    'flipped_vertically',
    'flipped_diagonally')

AugmentFlags = namedtuple('AugmentFlags', flag_names)


class NonGrayscaleImageError(ValueError):
    """ A PNG that is not 8-bit grayscale; never skipped silently """


def decode_augmentation(code):
    """ Decode an augmentation code 0..7 into flip flags

    :param code: integer in [0, 8)
    :rtype: AugmentFlags
    """
    return AugmentFlags(
        code & AUG_FLIPX == AUG_FLIPX,
        code & AUG_FLIPY == AUG_FLIPY,
        code & AUG_TRANSPOSE == AUG_TRANSPOSE)


def augment_patch(patch, code):
    flags = decode_augmentation(code)
    if flags.flipped_diagonally:
        patch = patch.T
    if flags.flipped_horizontally:
        patch = patch[:, ::-1]
    if flags.flipped_vertically:
        patch = patch[::-1, :]
    return patch


class ImageDataset(object):
    """ Grayscale images scaled to [0, 1], in deterministic file order """

    def __init__(self, images, paths=None, seed=0):
        images = [np.asarray(image, dtype=float) for image in images]
        if not images:
            raise ValueError('dataset needs at least one image')
        for i, image in enumerate(images):
            if image.ndim != 2:
                raise ValueError('image {0} is not two-dimensional'.format(i))
            if image.size and (image.min() < 0 or image.max() > 1):
                raise ValueError('image {0} has pixels outside [0, 1]'.format(i))
        self.images = images
        self.paths = list(paths) if paths is not None else [None] * len(images)
        self.seed = seed

    def __len__(self):
        return len(self.images)

    def __iter__(self):
        return iter(self.images)

    def __getitem__(self, index):
        return self.images[index]

    @property
    def shapes(self):
        return [image.shape for image in self.images]

    def __repr__(self):
        return '<{0}: {1} images>'.format(self.__class__.__name__, len(self.images))


class PatchSet(object):
    """ Fixed-size square patches stored as one (count, p, p) array """

    def __init__(self, patches, augment=False):
        patches = np.asarray(patches, dtype=np.float32)
        if patches.ndim != 3 or patches.shape[1] != patches.shape[2]:
            raise ValueError('patches must have shape (count, p, p), got {0}'.format(patches.shape))
        self.patches = patches
        self.augment = augment

    @property
    def patch_size(self):
        return self.patches.shape[1]

    def __len__(self):
        return len(self.patches)

    def __iter__(self):
        return iter(self.patches)

    def __getitem__(self, index):
        return self.patches[index]

    def __repr__(self):
        return '<{0}: {1} patches of {2}x{2}>'.format(self.__class__.__name__, len(self), self.patch_size)


def default_image_loader(filename):
    """ Load an 8-bit grayscale image as uint8 array

    Both PGM and PNG are decoded by Pillow, imported on first use.
    """
    from .util_pil import pil_image_loader
    return pil_image_loader(filename)


def load_images(directory, image_loader=default_image_loader, seed=0):
    """ Load every PGM and PNG in a directory

    Files are read in lexicographic order and mapped to [0, 1] by v/255.
    Unreadable files are skipped with a warning.

    :param directory: path to a directory of images
    :param image_loader: callable filename -> uint8 array
    :param seed: master seed stored on the dataset
    :raises NonGrayscaleImageError: a PNG is not 8-bit grayscale
    :raises ValueError: no image could be decoded
    :rtype: ImageDataset
    """
    if not os.path.isdir(directory):
        raise ValueError('image directory {0} does not exist'.format(directory))

    images = []
    paths = []
    for name in sorted(os.listdir(directory)):
        if not name.lower().endswith(IMAGE_EXTENSIONS):
            continue
        path = os.path.join(directory, name)
        try:
            pixels = image_loader(path)
        except NonGrayscaleImageError:
            logger.error('not an 8-bit grayscale image: %s', path)
            raise
        except (OSError, ValueError, ImportError) as e:
            logger.warning('skipping unreadable image %s: %s', path, e)
            continue
        images.append(np.asarray(pixels, dtype=np.uint8) / 255.0)
        paths.append(path)

    if not images:
        msg = 'no decodable images in {0}'.format(directory)
        logger.error(msg)
        raise ValueError(msg)
    logger.info('loaded %d images from %s', len(images), directory)
    return ImageDataset(images, paths, seed)


def sample_anchors(shapes, patch_size, count, rng, augment=True):
    """ Draw patch anchors uniformly over every valid position

    Each position of every image is equally likely; images therefore
    contribute in proportion to their number of anchors.

    :param shapes: list of (height, width)
    :return: int64 array of shape (count, 4): image, row, col, augmentation
    """
    if count < 1:
        raise ValueError('patch count must be >= 1, got {0}'.format(count))
    rows = []
    cols = []
    for i, (height, width) in enumerate(shapes):
        if height < patch_size or width < patch_size:
            raise ValueError('image {0} ({1}x{2}) is smaller than the patch size {3}'.format(
                i, height, width, patch_size))
        rows.append(height - patch_size + 1)
        cols.append(width - patch_size + 1)
    rows = np.array(rows, dtype=np.int64)
    cols = np.array(cols, dtype=np.int64)
    ends = np.cumsum(rows * cols)

    flat = rng.integers(0, ends[-1], size=count, dtype=np.int64)
    image = np.searchsorted(ends, flat, side='right')
    offset = flat - np.concatenate(([0], ends[:-1]))[image]
    row, col = np.divmod(offset, cols[image])
    if augment:
        code = rng.integers(0, N_AUGMENTATIONS, size=count, dtype=np.int64)
    else:
        code = np.zeros(count, dtype=np.int64)
    return np.stack([image, row, col, code], axis=1)


def extract_patches(ds, patch_size=DEFAULT_PATCH_SIZE, count=1, augment=True, rng=None):
    """ Randomly crop (and optionally flip/rotate) square patches

    :param ds: ImageDataset
    :param patch_size: side length in pixels
    :param count: number of patches
    :param augment: apply one of the 8 dihedral transforms per patch
    :param rng: numpy Generator
    :rtype: PatchSet
    """
    if rng is None:
        from .noise import make_rng
        rng = make_rng(ds.seed, 'patches')
    anchors = sample_anchors(ds.shapes, patch_size, count, rng, augment)
    patches = np.empty((count, patch_size, patch_size), dtype=np.float32)
    for n, (i, r, c, code) in enumerate(anchors):
        patches[n] = augment_patch(ds.images[i][r:r + patch_size, c:c + patch_size], code)
    logger.debug('extracted %d patches of %dx%d', count, patch_size, patch_size)
    return PatchSet(patches, augment)


def moments(source):
    """ Mean pixel m1 and mean squared pixel S2 over every pixel

    :param source: ImageDataset, PatchSet or array
    :rtype: (m1, S2)
    """
    if isinstance(source, ImageDataset):
        arrays = source.images
    elif isinstance(source, PatchSet):
        arrays = [source.patches]
    else:
        arrays = [np.asarray(source)]
    total = 0
    first = 0.0
    second = 0.0
    for array in arrays:
        array = np.asarray(array, dtype=float)
        total += array.size
        first += float(np.sum(array))
        second += float(np.sum(array * array))
    if total == 0:
        raise ValueError('cannot take moments of an empty source')
    return first / total, second / total


def save_patches(path, patchset, **extra):
    """ Cache patches: one JSON header line then raw little-endian float32 """
    header = {
        'format': PATCH_FORMAT,
        'count': len(patchset),
        'patch_size': patchset.patch_size,
        'dtype': PATCH_DTYPE,
        'augment': patchset.augment,
    }
    header.update(extra)
    with open(path, 'wb') as fh:
        fh.write(json.dumps(header, sort_keys=True).encode('utf-8') + b'\n')
        fh.write(patchset.patches.astype(PATCH_DTYPE).tobytes())


def load_patches(path):
    """ Read a patch cache written by save_patches

    :rtype: (PatchSet, header dict)
    """
    with open(path, 'rb') as fh:
        try:
            header = json.loads(fh.readline().decode('utf-8'))
        except ValueError as e:
            raise ValueError('{0}: bad patch cache header: {1}'.format(path, e)) from e
        data = fh.read()
    if header.get('format') != PATCH_FORMAT or header.get('dtype') != PATCH_DTYPE:
        raise ValueError('{0} is not a patch cache'.format(path))
    count = header['count']
    size = header['patch_size']
    expected = count * size * size * np.dtype(PATCH_DTYPE).itemsize
    if len(data) != expected:
        raise ValueError('{0}: expected {1} bytes of patch data, got {2}'.format(path, expected, len(data)))
    patches = np.frombuffer(data, dtype=PATCH_DTYPE).reshape(count, size, size)
    return PatchSet(patches, header.get('augment', False)), header
