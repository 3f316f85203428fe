# -*- coding: utf-8 -*-
"""
Discretized specification spaces and quadratic landscape models.

A landscape maps each specification theta to the PSNR (or loss) a
denoiser achieves there.  Ideal landscapes are expensive to sample, so
they are sampled sparsely and approximated by a ridge-regularized
polynomial of low degree on normalized coordinates.

This file is part of unigap, distributed under the GNU LGPLv3.
"""
import csv
import json
import logging
import math
from collections import namedtuple
from itertools import combinations_with_replacement, product

import numpy as np

from .noise import DIMENSION_NAMES, NO_NOISE, Specification, loss_from_psnr, psnr_from_loss

__all__ = (
    'Dimension',
    'SpecificationSpace',
    'Normalizer',
    'LandscapeSample',
    'QuadraticModel',
    'Prediction',
    'DegenerateDesignError',
    'PRESETS',
    'DEFAULT_BOUNDS',
    'RIDGE_SWEEP',
    'DEFAULT_RIDGE',
    'min_samples',
    'n_coefficients',
    'sparse_design',
    'dense_design',
    'fit_polynomial',
    'fit_quadratic',
    'leave_one_out',
    'cross_validation_scores',
    'cross_validate',
    'predict',
    'write_samples',
    'read_samples',
    'save_model',
    'load_model')

logger = logging.getLogger(__name__)

SPACINGS = ('linear', 'geometric')
NORMALIZER_KINDS = ('linear', 'log', 'square')
SOURCES = ('ideal', 'current-model', 'external')
SAMPLE_COLUMNS = ('sigma', 'alpha', 'beta', 'psnr_db', 'n_eval', 'seed', 'source')

# designs with a worse relative condition number are rejected at ridge 0
MAX_CONDITION = 1e12

# cross-validation scores this close to the best count as ties
CV_TIE_RTOL = 1e-9

RIDGE_SWEEP = (0.1, 0.01, 0.001, 0.0001, 0.00001)
DEFAULT_RIDGE = 0.00001

DEFAULT_BOUNDS = {
    'sigma': (0.02, 0.66),
    'alpha': (0.1, 41.0),
    'beta': (1.0, 1024.0)}

PRESETS = {
    'poisson-gaussian': ('sigma', 'alpha'),
    'speckle-gaussian': ('sigma', 'beta'),
    'speckle-poisson': ('alpha', 'beta'),
    'speckle-poisson-gaussian': ('sigma', 'alpha', 'beta')}

hash_comment_fmt = '# config_hash={0}'


class DegenerateDesignError(ValueError):
    """ Too few samples, or samples that cannot determine the polynomial """


class Dimension(namedtuple('Dimension', ['name', 'lower', 'upper', 'bins', 'spacing'])):
    """ One bounded, discretized noise parameter """
    __slots__ = ()

    def __new__(cls, name, lower, upper, bins=10, spacing='geometric'):
        if name not in DIMENSION_NAMES:
            raise ValueError('unknown dimension "{0}", expected one of {1}'.format(name, DIMENSION_NAMES))
        lower, upper, bins = float(lower), float(upper), int(bins)
        if not lower < upper:
            raise ValueError('dimension "{0}" needs lower < upper, got [{1}, {2}]'.format(name, lower, upper))
        if bins < 2:
            raise ValueError('dimension "{0}" needs at least 2 bins, got {1}'.format(name, bins))
        if spacing not in SPACINGS:
            raise ValueError('dimension "{0}" has unknown spacing "{1}"'.format(name, spacing))
        if spacing == 'geometric' and lower <= 0:
            raise ValueError('geometric dimension "{0}" needs lower > 0'.format(name))
        return super(Dimension, cls).__new__(cls, name, lower, upper, bins, spacing)

    def points(self):
        """ Grid values along this dimension, endpoints included """
        if self.spacing == 'geometric':
            return np.geomspace(self.lower, self.upper, self.bins)
        return np.linspace(self.lower, self.upper, self.bins)

    def to_dict(self):
        return dict(self._asdict())


class SpecificationSpace(object):
    """ Cartesian product of bounded noise parameters, discretized to a grid

    Grid points are ordered with the last dimension varying fastest.
    Dimensions not named in the space are inactive in every grid point.
    """

    def __init__(self, dims):
        dims = tuple(d if isinstance(d, Dimension) else Dimension(**d) for d in dims)
        if not dims:
            raise ValueError('a specification space needs at least one dimension')
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            raise ValueError('duplicate dimensions in {0}'.format(names))

        self.dims = dims
        self.names = tuple(names)
        self.axes = tuple(d.points() for d in dims)
        self.grid = tuple(
            Specification(**dict(zip(self.names, (float(v) for v in values))))
            for values in product(*self.axes))
        self._index = {theta: i for i, theta in enumerate(self.grid)}

    @classmethod
    def from_preset(cls, preset, bins=10, spacing='geometric', bounds=None):
        """ One of the four mixed-noise families over the default box

        :param preset: key of PRESETS
        :param bins: bins per dimension
        :param spacing: 'linear' or 'geometric'
        :param bounds: optional dict overriding DEFAULT_BOUNDS
        :rtype: SpecificationSpace
        """
        try:
            names = PRESETS[preset]
        except KeyError:
            raise ValueError('unknown preset "{0}", expected one of {1}'.format(preset, sorted(PRESETS)))
        bounds = dict(DEFAULT_BOUNDS, **(bounds or {}))
        return cls(Dimension(n, bounds[n][0], bounds[n][1], bins, spacing) for n in names)

    @classmethod
    def from_dict(cls, data):
        return cls(Dimension(**d) for d in data['dims'])

    def to_dict(self):
        return {'dims': [d.to_dict() for d in self.dims]}

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def shape(self):
        return tuple(d.bins for d in self.dims)

    def __len__(self):
        return len(self.grid)

    def __iter__(self):
        return iter(self.grid)

    def __getitem__(self, index):
        return self.grid[index]

    def __eq__(self, other):
        if not isinstance(other, SpecificationSpace):
            return NotImplemented
        return self.dims == other.dims

    def __ne__(self, other):
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    def __repr__(self):
        return '<{0}: {1} {2}>'.format(self.__class__.__name__,
                                      'x'.join(str(b) for b in self.shape), '/'.join(self.names))

    def index(self, theta):
        """ Grid index of a specification

        :param theta: Specification on the grid
        :rtype: int
        """
        try:
            return self._index[theta]
        except KeyError:
            msg = '{0!r} is not a grid point of {1!r}'
            logger.debug(msg.format(theta, self))
            raise ValueError(msg.format(theta, self))

    def coordinates(self):
        """ (|grid|, ndim) array of raw grid coordinates """
        return np.array([theta.coordinates(self.names) for theta in self.grid])

    def corner_indices(self):
        strides = np.cumprod((1,) + self.shape[::-1])[:-1][::-1]
        corners = []
        for ends in product(*((0, b - 1) for b in self.shape)):
            corners.append(int(np.dot(ends, strides)))
        return corners

    def corners(self):
        """ The 2^n corner points of the box, which are always grid points """
        return [self.grid[i] for i in self.corner_indices()]

    def contains(self, theta):
        """ True if theta lies inside the box of this space """
        try:
            coords = theta.coordinates(self.names)
        except ValueError:
            return False
        return all(d.lower <= v <= d.upper for d, v in zip(self.dims, coords))

    def normalizer(self, kinds=None):
        """ Normalizer matching this space's spacing

        Linear dimensions map affinely to [0, 1], geometric ones through
        a log first.

        :param kinds: optional dict of per-dimension overrides
        :rtype: Normalizer
        """
        kinds = kinds or {}
        return Normalizer(
            self.names,
            [kinds.get(d.name, 'log' if d.spacing == 'geometric' else 'linear') for d in self.dims],
            [d.lower for d in self.dims],
            [d.upper for d in self.dims])


class Normalizer(object):
    """ Per-dimension affine map to [0, 1], after an optional log or square """

    def __init__(self, names, kinds, lower, upper):
        self.names = tuple(names)
        self.kinds = tuple(kinds)
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if not len(self.names) == len(self.kinds) == len(self.lower) == len(self.upper):
            raise ValueError('normalizer fields have inconsistent lengths')
        for kind in self.kinds:
            if kind not in NORMALIZER_KINDS:
                raise ValueError('unknown normalizer kind "{0}"'.format(kind))
        lo = self._warp(self.lower)
        hi = self._warp(self.upper)
        if np.any(hi <= lo) or not np.all(np.isfinite(lo)):
            raise ValueError('normalizer bounds are degenerate')
        self._offset = lo
        self._scale = hi - lo

    def _warp(self, values):
        values = np.array(values, dtype=float)
        for i, kind in enumerate(self.kinds):
            if kind == 'log':
                values[..., i] = np.log(values[..., i])
            elif kind == 'square':
                values[..., i] = values[..., i] ** 2
        return values

    def transform(self, coords):
        """ Map raw coordinates, shape (..., n), to normalized ones """
        coords = np.asarray(coords, dtype=float)
        if coords.shape[-1] != len(self.names):
            raise ValueError('expected {0} coordinates, got {1}'.format(len(self.names), coords.shape[-1]))
        return (self._warp(coords) - self._offset) / self._scale

    def to_dict(self):
        return {'names': list(self.names),
                'kinds': list(self.kinds),
                'lower': self.lower.tolist(),
                'upper': self.upper.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data['names'], data['kinds'], data['lower'], data['upper'])

    def __eq__(self, other):
        if not isinstance(other, Normalizer):
            return NotImplemented
        return (self.names == other.names and self.kinds == other.kinds and
                np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper))

    def __ne__(self, other):
        result = self.__eq__(other)
        return result if result is NotImplemented else not result


class LandscapeSample(namedtuple('LandscapeSample', ['theta', 'psnr_db', 'n_eval', 'seed', 'source'])):
    """ One measured point of a specification-loss landscape """
    __slots__ = ()

    def __new__(cls, theta, psnr_db, n_eval=1, seed=0, source='ideal'):
        psnr_db = float(psnr_db)
        if not math.isfinite(psnr_db):
            raise ValueError('landscape sample at {0!r} has non-finite PSNR'.format(theta))
        n_eval = int(n_eval)
        if n_eval < 1:
            raise ValueError('n_eval must be >= 1, got {0}'.format(n_eval))
        if source not in SOURCES:
            raise ValueError('unknown sample source "{0}"'.format(source))
        return super(LandscapeSample, cls).__new__(cls, theta, psnr_db, n_eval, int(seed), source)


Prediction = namedtuple('Prediction', ['value', 'extrapolated'])


def n_coefficients(n, degree):
    """ Number of monomials of total degree <= degree in n variables """
    return math.comb(n + degree, degree)


def min_samples(n):
    """ Samples needed to pin down a quadratic in n variables, plus one

    :param n: number of dimensions, >= 1
    :rtype: int
    """
    if n < 1:
        raise ValueError('dimension count must be >= 1, got {0}'.format(n))
    return (n + 1) * (n + 2) // 2 + 1


def _monomials(n, degree):
    terms = []
    for k in range(degree + 1):
        terms.extend(combinations_with_replacement(range(n), k))
    return terms


def _features(points, monomials):
    points = np.atleast_2d(points)
    columns = np.ones((points.shape[0], len(monomials)))
    for j, term in enumerate(monomials):
        for i in term:
            columns[:, j] *= points[:, i]
    return columns


class _PolynomialFit(object):
    """ Raw coefficients over a monomial basis, any degree """

    def __init__(self, monomials, coefficients, degree, ridge):
        self.monomials = monomials
        self.coefficients = coefficients
        self.degree = degree
        self.ridge = ridge

    def __call__(self, points):
        return _features(points, self.monomials).dot(self.coefficients)


def fit_polynomial(points, values, degree=2, ridge=DEFAULT_RIDGE):
    """ Ridge least squares fit of a polynomial on already-normalized points

    The constant term is not penalized.  Rows are sorted before solving
    so that the result does not depend on sample order.

    :param points: (m, n) array
    :param values: (m,) array
    :param degree: total degree
    :param ridge: penalty weight, >= 0
    :rtype: _PolynomialFit
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.asarray(values, dtype=float)
    if ridge < 0:
        raise ValueError('ridge must be >= 0, got {0}'.format(ridge))
    m, n = points.shape
    if values.shape != (m,):
        raise ValueError('expected {0} values, got shape {1}'.format(m, values.shape))

    monomials = _monomials(n, degree)
    p = len(monomials)
    if m < p:
        raise DegenerateDesignError('a degree-{0} fit in {1} dimensions needs {2} samples, got {3}'.format(
            degree, n, p, m))

    # primary key is the first coordinate, values break exact ties
    order = np.lexsort((values,) + tuple(points.T[::-1]))
    points = points[order]
    values = values[order]

    design = _features(points, monomials)
    if ridge == 0:
        condition = np.linalg.cond(design)
        if not condition < MAX_CONDITION:
            msg = 'design matrix is rank deficient or ill-conditioned (condition {0:.3g})'
            logger.error(msg.format(condition))
            raise DegenerateDesignError(msg.format(condition))
        coefficients = np.linalg.lstsq(design, values, rcond=None)[0]
    else:
        penalty = np.sqrt(ridge) * np.eye(p)[1:]
        coefficients = np.linalg.lstsq(
            np.vstack((design, penalty)), np.concatenate((values, np.zeros(p - 1))), rcond=None)[0]
    return _PolynomialFit(monomials, coefficients, degree, ridge)


class QuadraticModel(object):
    """ P(s) = s^T A s + b^T s + c on normalized coordinates s

    The model approximates a landscape either in PSNR (dB) or in loss
    (MSE) units, as recorded by `target`.
    """

    def __init__(self, A, b, c, normalizer, ridge=DEFAULT_RIDGE, degree=2, target='psnr', config_hash=None):
        A = np.array(A, dtype=float)
        b = np.array(b, dtype=float)
        n = len(normalizer.names)
        if A.shape != (n, n) or b.shape != (n,):
            raise ValueError('coefficient shapes {0}, {1} do not match {2} dimensions'.format(A.shape, b.shape, n))
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise ValueError('A must be symmetric')
        if target not in ('psnr', 'loss'):
            raise ValueError('unknown landscape target "{0}"'.format(target))
        self.A = (A + A.T) / 2
        self.b = b
        self.c = float(c)
        self.normalizer = normalizer
        self.ridge = float(ridge)
        self.degree = int(degree)
        self.target = target
        self.config_hash = config_hash

    @classmethod
    def from_fit(cls, fit, normalizer, target='psnr'):
        if fit.degree > 2:
            raise ValueError('a degree-{0} polynomial is not quadratic'.format(fit.degree))
        n = len(normalizer.names)
        A = np.zeros((n, n))
        b = np.zeros(n)
        c = 0.0
        for term, coefficient in zip(fit.monomials, fit.coefficients):
            if len(term) == 0:
                c = coefficient
            elif len(term) == 1:
                b[term[0]] = coefficient
            elif term[0] == term[1]:
                A[term[0], term[0]] = coefficient
            else:
                A[term[0], term[1]] = A[term[1], term[0]] = coefficient / 2
        return cls(A, b, c, normalizer, fit.ridge, fit.degree, target)

    @property
    def names(self):
        return self.normalizer.names

    def evaluate(self, s):
        """ Evaluate on normalized coordinates, shape (n,) or (m, n) """
        s = np.asarray(s, dtype=float)
        if s.ndim == 1:
            return float(s.dot(self.A).dot(s) + self.b.dot(s) + self.c)
        return np.einsum('ij,jk,ik->i', s, self.A, s) + s.dot(self.b) + self.c

    def predict(self, theta):
        """ Value in target units plus an extrapolation flag

        :param theta: Specification with this model's dimensions active
        :rtype: Prediction
        """
        try:
            coords = theta.coordinates(self.names)
        except ValueError:
            msg = 'model over {0} cannot evaluate {1!r}'
            logger.debug(msg.format(self.names, theta))
            raise ValueError(msg.format(self.names, theta))
        s = self.normalizer.transform(coords)
        extrapolated = bool(np.any(s < -1e-12) or np.any(s > 1 + 1e-12))
        if extrapolated:
            logger.debug('extrapolating landscape model at %r', theta)
        return Prediction(self.evaluate(s), extrapolated)

    def predict_psnr(self, theta):
        value = self.predict(theta).value
        if self.target == 'psnr':
            return value
        return psnr_from_loss(_positive_loss(value, theta))

    def predict_loss(self, theta):
        value = self.predict(theta).value
        if self.target == 'loss':
            return _positive_loss(value, theta)
        return loss_from_psnr(value)

    def predict_grid(self, space):
        """ Predicted PSNR at every grid point of a space, in grid order """
        return np.array([self.predict_psnr(theta) for theta in space])

    def coefficient_norm(self):
        """ Norm of all coefficients except the constant term """
        upper = self.A[np.triu_indices(len(self.b))]
        return float(np.sqrt(np.sum(upper ** 2) + np.sum(self.b ** 2)))

    def to_dict(self):
        return {'dims': list(self.names),
                'normalizer': self.normalizer.to_dict(),
                'A': self.A.tolist(),
                'b': self.b.tolist(),
                'c': self.c,
                'ridge': self.ridge,
                'degree': self.degree,
                'target': self.target,
                'config_hash': self.config_hash}

    @classmethod
    def from_dict(cls, data):
        normalizer = Normalizer.from_dict(data['normalizer'])
        if list(normalizer.names) != list(data['dims']):
            raise ValueError('model dims {0} disagree with its normalizer'.format(data['dims']))
        return cls(data['A'], data['b'], data['c'], normalizer,
                   data.get('ridge', DEFAULT_RIDGE), data.get('degree', 2),
                   data.get('target', 'psnr'), data.get('config_hash'))

    def __repr__(self):
        return '<{0}: {1} degree={2} ridge={3:g}>'.format(
            self.__class__.__name__, '/'.join(self.names), self.degree, self.ridge)


def _positive_loss(value, theta):
    if not value > 0:
        msg = 'landscape model predicts non-positive loss {0} at {1!r}'
        logger.error(msg.format(value, theta))
        raise ValueError(msg.format(value, theta))
    return value


def predict(model, theta):
    """ Evaluate a fitted model at theta

    :param model: QuadraticModel
    :param theta: Specification
    :rtype: Prediction (value, extrapolated)
    """
    return model.predict(theta)


def sparse_design(space, n_random=10, rng=None):
    """ Corners of the space plus random distinct grid points

    :param space: SpecificationSpace
    :param n_random: number of non-corner grid points to add
    :param rng: numpy Generator
    :rtype: list of Specification
    """
    n_random = int(n_random)
    if n_random < 0:
        raise ValueError('n_random must be >= 0, got {0}'.format(n_random))
    corners = space.corner_indices()
    needed = min_samples(space.ndim)
    if len(corners) + n_random < needed:
        msg = '{0} corners + {1} random points is below the {2} samples a quadratic in {3} dimensions needs'
        logger.error(msg.format(len(corners), n_random, needed, space.ndim))
        raise DegenerateDesignError(msg.format(len(corners), n_random, needed, space.ndim))

    taken = set(corners)
    remaining = [i for i in range(len(space)) if i not in taken]
    if n_random > len(remaining):
        raise ValueError('cannot draw {0} random points from {1} non-corner grid points'.format(
            n_random, len(remaining)))
    if rng is None:
        rng = np.random.default_rng(0)
    picks = rng.choice(len(remaining), size=n_random, replace=False) if n_random else []
    return [space[i] for i in corners] + [space[remaining[int(j)]] for j in picks]


def dense_design(space):
    """ Every grid point of the space """
    return list(space)


def _sample_arrays(samples, normalizer, target):
    if not samples:
        raise DegenerateDesignError('no landscape samples')
    coords = np.array([s.theta.coordinates(normalizer.names) for s in samples])
    if target == 'psnr':
        values = np.array([s.psnr_db for s in samples])
    elif target == 'loss':
        values = np.array([loss_from_psnr(s.psnr_db) for s in samples])
    else:
        raise ValueError('unknown landscape target "{0}"'.format(target))
    return normalizer.transform(coords), values


def _resolve_normalizer(samples, space, normalizer):
    if normalizer is not None:
        return normalizer
    if space is not None:
        return space.normalizer()
    if not samples:
        raise DegenerateDesignError('no landscape samples')
    names = samples[0].theta.active_names
    coords = np.array([s.theta.coordinates(names) for s in samples])
    return Normalizer(names, ['linear'] * len(names), coords.min(axis=0), coords.max(axis=0))


def fit_quadratic(samples, ridge=DEFAULT_RIDGE, space=None, degree=2, normalizer=None, target='psnr'):
    """ Fit a quadratic (or linear) landscape model to samples

    :param samples: list of LandscapeSample
    :param ridge: ridge penalty, >= 0
    :param space: SpecificationSpace providing the normalizer
    :param degree: 1 or 2
    :param normalizer: explicit Normalizer, overrides space
    :param target: 'psnr' or 'loss'
    :rtype: QuadraticModel
    """
    if degree not in (1, 2):
        raise ValueError('quadratic models have degree 1 or 2, got {0}'.format(degree))
    normalizer = _resolve_normalizer(samples, space, normalizer)
    needed = n_coefficients(len(normalizer.names), degree) + 1
    if len(samples) < needed:
        msg = 'need >= {0} landscape samples for a degree-{1} fit in {2} dimensions, got {3}'
        logger.error(msg.format(needed, degree, len(normalizer.names), len(samples)))
        raise DegenerateDesignError(msg.format(needed, degree, len(normalizer.names), len(samples)))
    points, values = _sample_arrays(samples, normalizer, target)
    fit = fit_polynomial(points, values, degree, ridge)
    model = QuadraticModel.from_fit(fit, normalizer, target)
    logger.debug('fit %r on %d samples', model, len(samples))
    return model


def leave_one_out(samples, degree=2, ridge=DEFAULT_RIDGE, space=None, normalizer=None, target='psnr'):
    """ Held-out residuals, one per sample, in sample order

    :rtype: numpy array
    """
    normalizer = _resolve_normalizer(samples, space, normalizer)
    points, values = _sample_arrays(samples, normalizer, target)
    residuals = np.empty(len(values))
    keep = np.ones(len(values), dtype=bool)
    for i in range(len(values)):
        keep[i] = False
        fit = fit_polynomial(points[keep], values[keep], degree, ridge)
        residuals[i] = fit(points[i])[0] - values[i]
        keep[i] = True
    return residuals


def cross_validation_scores(samples, degrees=(1, 2, 3), ridges=RIDGE_SWEEP, space=None, normalizer=None,
                            target='psnr'):
    """ Mean held-out squared error for every (degree, ridge) pair

    Pairs whose folds cannot be fit score +inf.

    :rtype: dict mapping (degree, ridge) to float
    """
    normalizer = _resolve_normalizer(samples, space, normalizer)
    n = len(normalizer.names)
    largest = max(degrees)
    if len(samples) - 1 < n_coefficients(n, largest):
        msg = 'leave-one-out at degree {0} in {1} dimensions needs {2} samples, got {3}'
        logger.error(msg.format(largest, n, n_coefficients(n, largest) + 1, len(samples)))
        raise DegenerateDesignError(msg.format(largest, n, n_coefficients(n, largest) + 1, len(samples)))

    scores = {}
    for degree in degrees:
        for ridge in ridges:
            try:
                residuals = leave_one_out(samples, degree, ridge, normalizer=normalizer, target=target)
            except DegenerateDesignError:
                logger.debug('degree %d ridge %g: degenerate fold', degree, ridge)
                scores[(degree, ridge)] = math.inf
                continue
            scores[(degree, ridge)] = float(np.mean(residuals ** 2))
    return scores


def cross_validate(samples, degrees=(1, 2, 3), ridges=RIDGE_SWEEP, space=None, normalizer=None, target='psnr'):
    """ Pick the polynomial degree and ridge penalty by leave-one-out

    Ties go to the lower degree, then to the larger ridge.

    :rtype: (degree, ridge)
    """
    normalizer = _resolve_normalizer(samples, space, normalizer)
    scores = cross_validation_scores(samples, degrees, ridges, normalizer=normalizer, target=target)
    best = min(scores.values())
    if not math.isfinite(best):
        raise DegenerateDesignError('no (degree, ridge) pair could be fit')
    _, values = _sample_arrays(samples, normalizer, target)
    tolerance = CV_TIE_RTOL * float(np.mean(values ** 2))
    for degree, ridge in sorted(scores, key=lambda k: (k[0], -k[1])):
        if scores[(degree, ridge)] <= best + tolerance:
            logger.info('cross-validation picked degree %d, ridge %g (score %.3g)', degree, ridge, best)
            return degree, ridge


def write_samples(path, samples, config_hash=None):
    """ Write landscape samples as CSV

    Inactive dimensions are written with their no-noise value.
    """
    with open(path, 'w', newline='') as fh:
        if config_hash:
            fh.write(hash_comment_fmt.format(config_hash) + '\n')
        writer = csv.writer(fh)
        writer.writerow(SAMPLE_COLUMNS)
        for s in samples:
            sigma, alpha, beta = s.theta.values
            writer.writerow(['{0:.17g}'.format(sigma), '{0:.17g}'.format(alpha), '{0:.17g}'.format(beta),
                             '{0:.17g}'.format(s.psnr_db), s.n_eval, s.seed, s.source])


def read_comment_hash(fh):
    """ Consume an optional leading hash comment, returning the hash """
    position = fh.tell()
    first = fh.readline()
    if first.startswith('# config_hash='):
        return first.strip().split('=', 1)[1]
    fh.seek(position)
    return None


def read_samples(path):
    """ Read landscape samples from CSV

    A dimension column holding its no-noise value on every row is
    treated as inactive.

    :rtype: (list of LandscapeSample, config hash or None)
    """
    with open(path, newline='') as fh:
        config_hash = read_comment_hash(fh)
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SAMPLE_COLUMNS:
            raise ValueError('{0}: expected columns {1}, got {2}'.format(path, SAMPLE_COLUMNS, reader.fieldnames))
        rows = list(reader)

    try:
        values = [{n: float(row[n]) for n in DIMENSION_NAMES} for row in rows]
        active = [n for n in DIMENSION_NAMES if any(v[n] != NO_NOISE[n] for v in values)]
        samples = [LandscapeSample(Specification(**{n: v[n] for n in active}),
                                   row['psnr_db'], row['n_eval'], row['seed'], row['source'])
                   for v, row in zip(values, rows)]
    except (TypeError, ValueError) as e:
        msg = '{0}: malformed landscape row: {1}'
        logger.error(msg.format(path, e))
        raise ValueError(msg.format(path, e)) from e
    return samples, config_hash


def save_model(path, model, report=None):
    data = model.to_dict()
    if report is not None:
        data['report'] = report
    with open(path, 'w') as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write('\n')


def load_model(path):
    """ Load a fitted model JSON

    :rtype: QuadraticModel
    """
    with open(path) as fh:
        data = json.load(fh)
    try:
        return QuadraticModel.from_dict(data)
    except (KeyError, TypeError) as e:
        raise ValueError('{0}: malformed model file: {1}'.format(path, e)) from e
