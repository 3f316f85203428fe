# -*- coding: utf-8 -*-
"""
PGM and PNG decoding through Pillow.

This file is part of unigap, distributed under the GNU LGPLv3.
"""
import logging

import numpy as np

from .data import NonGrayscaleImageError

logger = logging.getLogger(__name__)

try:
    from PIL import Image
except ImportError:
    logger.error('cannot import PIL (is Pillow installed?)')
    raise

__all__ = ['pil_image_loader']


def pil_image_loader(filename):
    """ Load an 8-bit grayscale PGM or PNG

    :raises NonGrayscaleImageError: image mode is not 'L'
    :rtype: uint8 array of shape (height, width)
    """
    with Image.open(filename) as image:
        if image.mode != 'L':
            msg = '{0}: expected 8-bit grayscale, got mode {1}'.format(filename, image.mode)
            raise NonGrayscaleImageError(msg)
        return np.array(image, dtype=np.uint8)
