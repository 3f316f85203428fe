# -*- coding: utf-8 -*-
"""
unigap: adaptive training distributions for denoisers that must work
across a whole space of noise specifications.

This file is part of unigap, distributed under the GNU LGPLv3.
"""
import logging

from .noise import *
from .landscape import *
from .scheduler import *
from .learners import *
from .data import *

logger = logging.getLogger(__name__)

try:
    from unigap.util_pil import pil_image_loader
except ImportError:
    logger.debug('cannot import Pillow tools')

__version__ = (0, 1, 0)
__author__ = 'unigap developers'
__description__ = 'Uniform-gap training schedules over noise specification spaces'
