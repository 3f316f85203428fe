# -*- coding: utf-8 -*-
"""
Noise specifications and the joint Poisson-Gaussian-Speckle forward model.

This file is part of unigap, distributed under the GNU LGPLv3.
"""
import logging
import math
from collections import namedtuple

import numpy as np

__all__ = (
    'Specification',
    'SpeckleConfig',
    'DIMENSION_NAMES',
    'NO_NOISE',
    'make_rng',
    'sample_speckle_field',
    'sample_poisson',
    'corrupt',
    'noise_variance',
    'expected_noise_power',
    'mse',
    'psnr',
    'loss_from_psnr',
    'psnr_from_loss')

logger = logging.getLogger(__name__)

DIMENSION_NAMES = ('sigma', 'alpha', 'beta')

# value each dimension holds when it is switched off
NO_NOISE = {'sigma': 0.0, 'alpha': 0.0, 'beta': 1.0}

# above this rate the Poisson stage is drawn from N(mu, mu)
POISSON_NORMAL_RATE = 1e3

DEFAULT_B = 1024


class SpeckleConfig(namedtuple('SpeckleConfig', ['B'])):
    """ Upper bound B on the speckle parameter beta

    The speckle field is Gamma(B/beta, rate=B/beta), so beta=1 is the
    mildest speckle and beta=B is fully developed (exponential) speckle.
    """
    __slots__ = ()

    def __new__(cls, B=DEFAULT_B):
        B = float(B)
        if not (math.isfinite(B) and B >= 1):
            raise ValueError('speckle bound B must be finite and >= 1, got {0}'.format(B))
        return super(SpeckleConfig, cls).__new__(cls, B)


class Specification(object):
    """ One point theta = (sigma, alpha, beta) of the noise-parameter space

    Dimensions passed as None are inactive and report their no-noise
    value.  Inactive alpha means the Poisson stage is skipped entirely,
    inactive beta means no speckle field is applied.
    """
    __slots__ = ('_values', '_active')

    def __init__(self, sigma=None, alpha=None, beta=None):
        values = []
        active = []
        for name, value in zip(DIMENSION_NAMES, (sigma, alpha, beta)):
            if value is None:
                values.append(NO_NOISE[name])
                active.append(False)
                continue
            value = float(value)
            if not math.isfinite(value):
                raise ValueError('{0} must be finite, got {1}'.format(name, value))
            values.append(value)
            active.append(True)

        if values[0] < 0:
            raise ValueError('sigma must be >= 0, got {0}'.format(values[0]))
        if active[1] and values[1] <= 0:
            raise ValueError('alpha must be > 0, got {0}'.format(values[1]))
        if active[2] and values[2] < 1:
            raise ValueError('beta must be >= 1, got {0}'.format(values[2]))

        self._values = tuple(values)
        self._active = tuple(active)

    @classmethod
    def from_mapping(cls, mapping):
        """ Build from a dict holding some of sigma/alpha/beta

        :param mapping: dict-like, missing keys are inactive
        :rtype: Specification
        """
        return cls(**{k: mapping.get(k) for k in DIMENSION_NAMES})

    @property
    def sigma(self):
        return self._values[0]

    @property
    def alpha(self):
        return self._values[1]

    @property
    def beta(self):
        return self._values[2]

    @property
    def active(self):
        """ Tuple of three booleans, one per dimension """
        return self._active

    @property
    def values(self):
        """ (sigma, alpha, beta) with no-noise values for inactive dims """
        return self._values

    @property
    def active_names(self):
        return tuple(n for n, a in zip(DIMENSION_NAMES, self._active) if a)

    def get(self, name):
        return self._values[DIMENSION_NAMES.index(name)]

    def is_active(self, name):
        return self._active[DIMENSION_NAMES.index(name)]

    def coordinates(self, names):
        """ Values of the named dimensions, in the order given

        :param names: sequence of dimension names
        :rtype: tuple of floats
        """
        for name in names:
            if not self.is_active(name):
                raise ValueError('dimension "{0}" is not active in {1!r}'.format(name, self))
        return tuple(self.get(n) for n in names)

    def is_noiseless(self):
        return self.sigma == 0.0 and not self._active[1] and not self._active[2]

    def __eq__(self, other):
        if not isinstance(other, Specification):
            return NotImplemented
        return self._values == other._values and self._active == other._active

    def __ne__(self, other):
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    def __hash__(self):
        return hash((self._values, self._active))

    def __repr__(self):
        parts = ['{0}={1!r}'.format(n, v) for n, v, a in
                 zip(DIMENSION_NAMES, self._values, self._active) if a]
        return '<Specification: {0}>'.format(', '.join(parts) or 'noiseless')


def make_rng(seed, *keys):
    """ Derive an independent random stream from a master seed and keys

    Keys may be ints or strings; strings are folded to ints so that
    streams such as ('design',) and ('eval', 3, 17) never collide.

    :param seed: master seed (int)
    :param keys: purpose tags and indices
    :rtype: numpy.random.Generator
    """
    entropy = [int(seed)]
    for key in keys:
        if isinstance(key, str):
            # every byte of the tag counts, SeedSequence takes ints of any size
            entropy.append(int.from_bytes(key.encode('utf-8'), 'little'))
        else:
            entropy.append(int(key))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _check_beta(beta, cfg):
    beta = float(beta)
    if not math.isfinite(beta):
        raise ValueError('beta must be finite, got {0}'.format(beta))
    if not 1.0 <= beta <= cfg.B:
        raise ValueError('beta must lie in [1, {0}], got {1}'.format(cfg.B, beta))
    return beta


def sample_speckle_field(shape, beta, cfg, rng):
    """ Draw a multiplicative speckle field

    Entries are i.i.d. Gamma with shape and rate both B/beta, so the
    mean is 1 and the variance beta/B.  numpy's gamma sampler uses the
    Marsaglia-Tsang squeeze method, valid since B/beta >= 1.

    :param shape: output shape
    :param beta: speckle parameter in [1, B]
    :param cfg: SpeckleConfig
    :param rng: numpy Generator
    :rtype: numpy array of positive floats
    """
    beta = _check_beta(beta, cfg)
    k = cfg.B / beta
    field = rng.gamma(k, 1.0 / k, size=shape)
    # gamma draws underflow to exactly 0 only with vanishing probability
    np.maximum(field, np.finfo(float).tiny, out=field)
    return field


def sample_poisson(rate, rng):
    """ Poisson draws with a normal approximation for large rates

    :param rate: array of nonnegative rates
    :param rng: numpy Generator
    :rtype: float array, same shape as rate
    """
    rate = np.asarray(rate, dtype=float)
    if not np.all(np.isfinite(rate)):
        raise ValueError('Poisson rate is not finite')
    if np.any(rate < 0):
        raise ValueError('Poisson rate must be nonnegative')

    large = rate > POISSON_NORMAL_RATE
    if not np.any(large):
        return rng.poisson(rate).astype(float)

    logger.debug('normal approximation for %d of %d Poisson draws', int(large.sum()), rate.size)
    out = np.empty_like(rate)
    out[~large] = rng.poisson(rate[~large])
    mu = rate[large]
    out[large] = rng.normal(mu, np.sqrt(mu))
    return out


def corrupt(x, theta, cfg, rng):
    """ Synthesize a noisy observation of a clean patch

    y = alpha * Poisson(x * w / alpha) + n, with w the speckle field and
    n ~ N(0, sigma^2).  Each stage is skipped when its dimension is
    inactive, so E[y | x] = x and Var[y | x] = sigma^2 + alpha*x + x^2*beta/B.

    :param x: clean patch, 2-D array in [0, 1]
    :param theta: Specification
    :param cfg: SpeckleConfig
    :param rng: numpy Generator
    :rtype: numpy array
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        msg = 'clean patch contains non-finite pixels'
        logger.error(msg)
        raise ValueError(msg)

    y = x.copy()
    if theta.is_active('beta'):
        y *= sample_speckle_field(x.shape, theta.beta, cfg, rng)
    if theta.is_active('alpha'):
        y = theta.alpha * sample_poisson(y / theta.alpha, rng)
    if theta.is_active('sigma') and theta.sigma > 0:
        y += rng.normal(0.0, theta.sigma, size=x.shape)

    if not np.all(np.isfinite(y)):
        msg = 'corrupted patch contains non-finite pixels for {0!r}'.format(theta)
        logger.error(msg)
        raise ValueError(msg)
    return y


def noise_variance(x, theta, cfg):
    """ Per-pixel conditional variance Var[y | x] of the forward model

    :param x: clean patch (array or scalar)
    :param theta: Specification
    :param cfg: SpeckleConfig
    """
    x = np.asarray(x, dtype=float)
    var = np.full_like(x, theta.sigma ** 2)
    if theta.is_active('alpha'):
        var += theta.alpha * x
    if theta.is_active('beta'):
        var += x * x * theta.beta / cfg.B
    return var


def expected_noise_power(theta, m1, m2, cfg):
    """ Mean noise variance over the data, sigma^2 + alpha*m1 + m2*beta/B

    :param theta: Specification
    :param m1: mean pixel value
    :param m2: mean squared pixel value
    :param cfg: SpeckleConfig
    :rtype: float
    """
    power = theta.sigma ** 2
    if theta.is_active('alpha'):
        power += theta.alpha * m1
    if theta.is_active('beta'):
        power += m2 * theta.beta / cfg.B
    return power


def mse(estimate, reference):
    estimate = np.asarray(estimate, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if estimate.shape != reference.shape:
        raise ValueError('shape mismatch: {0} vs {1}'.format(estimate.shape, reference.shape))
    diff = estimate - reference
    return float(np.mean(diff * diff))


def psnr(estimate, reference, clip=False):
    """ Peak signal-to-noise ratio in dB with peak 1.0

    :param estimate: array
    :param reference: array of the same shape
    :param clip: clip the estimate to [0, 1] first
    :return: PSNR in dB, +inf when the estimate is exact
    """
    if clip:
        estimate = np.clip(estimate, 0.0, 1.0)
    error = mse(estimate, reference)
    return psnr_from_loss(error)


def psnr_from_loss(loss):
    """ 10*log10(1/loss), +inf for a zero loss """
    loss = float(loss)
    if loss < 0 or math.isnan(loss):
        raise ValueError('loss must be nonnegative, got {0}'.format(loss))
    if loss == 0.0:
        return math.inf
    return -10.0 * math.log10(loss)


def loss_from_psnr(psnr_db):
    """ Map a PSNR in dB back to a [0, 1]-scaled mean squared error

    :param psnr_db: finite PSNR
    :rtype: float, strictly positive
    """
    psnr_db = float(psnr_db)
    if not math.isfinite(psnr_db):
        raise ValueError('PSNR must be finite, got {0}'.format(psnr_db))
    return 10.0 ** (-psnr_db / 10.0)
