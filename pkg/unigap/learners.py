# -*- coding: utf-8 -*-
"""
Learners that the scheduler can train under a sampling distribution.

Three analytic testbeds have exact landscapes and fit instantly: a
scalar shrinkage estimator, an oracle that always reproduces the ideal
landscape, and a fixed subspace projector.  An external learner hands
lambda to an out-of-process trainer through a directory of CSV files.

This file is part of unigap, distributed under the GNU LGPLv3.
"""
import csv
import logging
import math
import os
import time
from collections import namedtuple

import numpy as np

from .noise import (SpeckleConfig, corrupt, expected_noise_power, make_rng, mse, psnr_from_loss,
                    sample_poisson)

__all__ = (
    'Model',
    'Learner',
    'IdentityModel',
    'TableModel',
    'OracleLearner',
    'ShrinkageModel',
    'ShrinkageLearner',
    'shrinkage_ideal',
    'shrinkage_fit',
    'SubspaceProjector',
    'SubspaceModel',
    'SubspaceLearner',
    'subspace_loss_closed_form',
    'monte_carlo_subspace_loss',
    'MonteCarloEstimate',
    'MonteCarloEvaluator',
    'monte_carlo_psnr',
    'ProtocolError',
    'ProtocolTimeout',
    'GridMismatchError',
    'MalformedTableError',
    'write_lambda_table',
    'read_lambda_table',
    'write_loss_table',
    'read_loss_table',
    'external_learner_roundtrip',
    'ExternalLearner',
    'ExternalResponder',
    'shrinkage_responder')

logger = logging.getLogger(__name__)

MonteCarloEstimate = namedtuple('MonteCarloEstimate', ['psnr_db', 'mse', 'stderr', 'n'])

# subspace membership and orthonormality tolerance
SUBSPACE_TOLERANCE = 1e-8

LAMBDA_COLUMNS = ('index', 'sigma', 'alpha', 'beta', 'weight')
LOSS_COLUMNS = ('index', 'sigma', 'alpha', 'beta', 'psnr_db')

lambda_fmt = 'lambda_{0}.csv'
request_fmt = 'request_{0}.ready'
loss_fmt = 'loss_{0}.csv'
response_fmt = 'response_{0}.ready'


def _weights(lam):
    return np.asarray(getattr(lam, 'weights', lam), dtype=float)


class Model(object):
    """ A fitted denoiser

    Subclasses implement denoise and, when they can, closed_form_psnr.
    """

    def denoise(self, y, blind=True, theta=None):
        """ Estimate the clean patch from a noisy one

        :param y: noisy patch
        :param blind: when False the model may use theta
        :param theta: Specification of the corruption
        """
        raise NotImplementedError

    def closed_form_psnr(self, theta):
        raise NotImplementedError('{0} has no closed-form landscape'.format(self.__class__.__name__))

    def evaluate_psnr(self, theta, patches=None, rng=None, n_draws=1, cfg=None):
        """ PSNR at theta: closed form without patches, Monte Carlo with them

        :rtype: float
        """
        if patches is None:
            return self.closed_form_psnr(theta)
        rng = rng if rng is not None else make_rng(0, 'eval')
        return monte_carlo_psnr(self, theta, patches, n_draws, rng, cfg).psnr_db


class Learner(object):
    """ Trains a model under a sampling distribution """

    def fit(self, lam, data=None, budget=1, warm_start=None):
        """ Train under lam

        :param lam: SamplingDistribution over the learner's space
        :param data: training data, learner specific
        :param budget: inner optimization budget
        :param warm_start: previous model, or None
        :rtype: Model
        """
        raise NotImplementedError

    def ideal_psnr(self, theta):
        """ PSNR of the best model trained for theta alone """
        raise NotImplementedError('{0} has no closed-form ideal'.format(self.__class__.__name__))


class IdentityModel(Model):
    """ Returns the noisy input unchanged """

    def denoise(self, y, blind=True, theta=None):
        return np.asarray(y, dtype=float)


class TableModel(Model):
    """ A model known only by its per-grid-point PSNR """

    def __init__(self, space, psnr_db):
        psnr_db = np.asarray(psnr_db, dtype=float)
        if psnr_db.shape != (len(space),):
            raise ValueError('table has shape {0}, expected ({1},)'.format(psnr_db.shape, len(space)))
        self.space = space
        self.psnr_db = psnr_db

    def closed_form_psnr(self, theta):
        return float(self.psnr_db[self.space.index(theta)])


class OracleLearner(Learner):
    """ Always returns the ideal landscape, so every gap is zero """

    def __init__(self, space, ideal_psnr):
        self.space = space
        self.table = TableModel(space, ideal_psnr)

    def fit(self, lam, data=None, budget=1, warm_start=None):
        return self.table

    def ideal_psnr(self, theta):
        return self.table.closed_form_psnr(theta)


def _check_moments(S2, m1):
    S2 = float(S2)
    m1 = float(m1)
    if not (math.isfinite(S2) and S2 > 0):
        raise ValueError('signal power S2 must be positive, got {0}'.format(S2))
    if not (math.isfinite(m1) and m1 >= 0):
        raise ValueError('mean intensity m1 must be nonnegative, got {0}'.format(m1))
    return S2, m1


def shrinkage_ideal(theta, S2, m1, cfg=None):
    """ Best gain and its loss for a single specification

    :rtype: (gain c*, loss S2*V/(S2+V))
    """
    S2, m1 = _check_moments(S2, m1)
    power = expected_noise_power(theta, m1, S2, cfg or SpeckleConfig())
    return S2 / (S2 + power), S2 * power / (S2 + power)


class ShrinkageModel(Model):
    """ Scalar shrinkage x_hat = c * y """

    def __init__(self, c, S2, m1, cfg=None):
        c = float(c)
        if not 0.0 <= c <= 1.0:
            raise ValueError('gain must lie in [0, 1], got {0}'.format(c))
        self.c = c
        self.S2, self.m1 = _check_moments(S2, m1)
        self.cfg = cfg or SpeckleConfig()

    def denoise(self, y, blind=True, theta=None):
        return self.c * np.asarray(y, dtype=float)

    def loss(self, theta):
        """ (1-c)^2 S2 + c^2 V(theta) """
        power = expected_noise_power(theta, self.m1, self.S2, self.cfg)
        return (1.0 - self.c) ** 2 * self.S2 + self.c ** 2 * power

    def closed_form_psnr(self, theta):
        return psnr_from_loss(self.loss(theta))

    def __repr__(self):
        return '<{0}: c={1:.6g}>'.format(self.__class__.__name__, self.c)


def shrinkage_fit(lam, space, S2, m1, cfg=None):
    """ Gain minimizing the lambda-weighted loss, S2 / (S2 + E_lambda[V])

    :param lam: SamplingDistribution or weight vector over space
    :param space: SpecificationSpace
    :rtype: ShrinkageModel
    """
    S2, m1 = _check_moments(S2, m1)
    cfg = cfg or SpeckleConfig()
    weights = _weights(lam)
    if weights.shape != (len(space),):
        raise ValueError('{0} weights for a grid of {1}'.format(weights.size, len(space)))
    powers = np.array([expected_noise_power(theta, m1, S2, cfg) for theta in space])
    mean_power = float(np.dot(weights, powers))
    return ShrinkageModel(S2 / (S2 + mean_power), S2, m1, cfg)


class ShrinkageLearner(Learner):
    """ Exact learner for the scalar shrinkage family

    The fit is closed form, so data, budget and warm_start are ignored.
    """

    def __init__(self, space, S2, m1, cfg=None):
        self.space = space
        self.S2, self.m1 = _check_moments(S2, m1)
        self.cfg = cfg or SpeckleConfig()

    @classmethod
    def from_patches(cls, space, patches, cfg=None):
        from .data import moments
        m1, S2 = moments(patches)
        return cls(space, S2, m1, cfg)

    def fit(self, lam, data=None, budget=1, warm_start=None):
        model = shrinkage_fit(lam, self.space, self.S2, self.m1, self.cfg)
        logger.debug('shrinkage fit: c=%.6g', model.c)
        return model

    def ideal_psnr(self, theta):
        return psnr_from_loss(shrinkage_ideal(theta, self.S2, self.m1, self.cfg)[1])


class SubspaceProjector(object):
    """ Orthogonal projection onto a k-dimensional subspace of R^n

    Stored as an n x k matrix with orthonormal columns.
    """

    def __init__(self, basis):
        basis = np.array(basis, dtype=float)
        if basis.ndim != 2 or basis.shape[1] == 0 or basis.shape[1] > basis.shape[0]:
            raise ValueError('basis must be n x k with 0 < k <= n, got {0}'.format(basis.shape))
        gram = basis.T @ basis
        if not np.allclose(gram, np.eye(basis.shape[1]), rtol=0, atol=SUBSPACE_TOLERANCE):
            raise ValueError('basis columns are not orthonormal')
        self.basis = basis

    @classmethod
    def from_vectors(cls, vectors):
        """ Orthonormalize spanning vectors (columns) by QR """
        q, r = np.linalg.qr(np.asarray(vectors, dtype=float))
        rank = int(np.sum(np.abs(np.diag(r)) > SUBSPACE_TOLERANCE))
        if rank < q.shape[1]:
            raise ValueError('spanning vectors have rank {0} < {1}'.format(rank, q.shape[1]))
        return cls(q)

    @classmethod
    def random(cls, n, k, rng, containing=None):
        """ Random k-dimensional subspace, optionally containing a vector """
        vectors = rng.standard_normal((n, k))
        if containing is not None:
            vectors[:, 0] = np.asarray(containing, dtype=float).ravel()
        return cls.from_vectors(vectors)

    @property
    def n(self):
        return self.basis.shape[0]

    @property
    def rank(self):
        return self.basis.shape[1]

    @property
    def matrix(self):
        return self.basis @ self.basis.T

    def apply(self, y):
        """ Project vectors along the last axis """
        return (np.asarray(y, dtype=float) @ self.basis) @ self.basis.T

    def contains(self, x, tol=SUBSPACE_TOLERANCE):
        x = np.asarray(x, dtype=float).ravel()
        return float(np.linalg.norm(self.apply(x) - x)) <= tol * max(1.0, float(np.linalg.norm(x)))


def _check_subspace_signal(projector, x):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != projector.n:
        raise ValueError('signal has {0} entries, projector acts on {1}'.format(x.size, projector.n))
    if not projector.contains(x):
        msg = 'signal does not lie in the projection subspace'
        logger.error(msg)
        raise ValueError(msg)
    return x


def subspace_loss_closed_form(projector, x, sigma, alpha):
    """ E||P y - x||^2 for y = alpha * Poisson(x / alpha) + N(0, sigma^2 I)

    Equals k*sigma^2 + alpha*tr(P diag(x) P^T) for x in the subspace.

    :rtype: float, total (not per-pixel) squared error
    """
    x = _check_subspace_signal(projector, x)
    P = projector.matrix
    return projector.rank * sigma ** 2 + alpha * float(np.trace(P @ np.diag(x) @ P.T))


def monte_carlo_subspace_loss(projector, x, sigma, alpha, n_draws, rng, chunk=100000):
    """ Sampled E||P y - x||^2 with its standard error

    :rtype: (mean, stderr)
    """
    x = _check_subspace_signal(projector, x)
    n_draws = int(n_draws)
    if n_draws < 2:
        raise ValueError('need at least 2 draws, got {0}'.format(n_draws))

    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_draws:
        size = min(chunk, n_draws - done)
        rate = np.broadcast_to(x, (size, x.size))
        if alpha > 0:
            y = alpha * sample_poisson(rate / alpha, rng)
        else:
            y = np.array(rate)
        if sigma > 0:
            y += rng.normal(0.0, sigma, size=y.shape)
        err = projector.apply(y) - x
        sq = np.einsum('ij,ij->i', err, err)
        total += float(sq.sum())
        total_sq += float(np.dot(sq, sq))
        done += size

    mean = total / n_draws
    var = max(total_sq - n_draws * mean * mean, 0.0) / (n_draws - 1)
    return mean, math.sqrt(var / n_draws)


class SubspaceModel(Model):
    """ Denoises a flattened patch by projecting it """

    def __init__(self, projector, signal=None):
        self.projector = projector
        self.signal = None if signal is None else _check_subspace_signal(projector, signal)

    def denoise(self, y, blind=True, theta=None):
        y = np.asarray(y, dtype=float)
        if y.size != self.projector.n:
            raise ValueError('patch has {0} pixels, projector acts on {1}'.format(y.size, self.projector.n))
        return self.projector.apply(y.ravel()).reshape(y.shape)

    def closed_form_psnr(self, theta):
        if self.signal is None:
            raise ValueError('closed form needs the reference signal')
        if theta.is_active('beta'):
            raise ValueError('the projector landscape has no speckle dimension')
        loss = subspace_loss_closed_form(self.projector, self.signal, theta.sigma, theta.alpha)
        return psnr_from_loss(loss / self.projector.n)


class SubspaceLearner(Learner):
    """ A fixed projector: training does not change the model """

    def __init__(self, projector, signal):
        self.model = SubspaceModel(projector, signal)

    def fit(self, lam, data=None, budget=1, warm_start=None):
        return self.model

    def ideal_psnr(self, theta):
        return self.model.closed_form_psnr(theta)


def monte_carlo_psnr(model, theta, patches, n_draws, rng, cfg=None, blind=True):
    """ PSNR of a model from sampled corruptions of clean patches

    The mean squared error is averaged over every (draw, patch) pair and
    converted to PSNR once.

    :param model: Model
    :param theta: Specification
    :param patches: array of shape (count, p, p) or a single patch
    :param n_draws: corruption draws per patch
    :param rng: numpy Generator
    :rtype: MonteCarloEstimate
    """
    patches = np.asarray(patches, dtype=float)
    if patches.ndim == 2:
        patches = patches[np.newaxis]
    if len(patches) == 0 or n_draws < 1:
        raise ValueError('need at least one patch and one draw')
    cfg = cfg or SpeckleConfig()

    errors = np.empty((int(n_draws), len(patches)))
    for d in range(int(n_draws)):
        for i, x in enumerate(patches):
            y = corrupt(x, theta, cfg, rng)
            errors[d, i] = mse(model.denoise(y, blind=blind, theta=theta), x)

    errors = errors.ravel()
    mean = float(errors.mean())
    stderr = float(errors.std(ddof=1) / math.sqrt(errors.size)) if errors.size > 1 else math.nan
    return MonteCarloEstimate(psnr_from_loss(mean), mean, stderr, errors.size)


class MonteCarloEvaluator(object):
    """ Per-grid-point evaluator with a deterministic stream per (t, index)

    Draws depend only on the seed, the iteration and the grid index, so
    the result does not depend on the worker count.
    """

    def __init__(self, patches, n_draws=1, seed=0, cfg=None, blind=True):
        self.patches = patches
        self.n_draws = n_draws
        self.seed = seed
        self.cfg = cfg or SpeckleConfig()
        self.blind = blind

    def __call__(self, model, theta, index, t):
        rng = make_rng(self.seed, 'eval', t, index)
        return monte_carlo_psnr(model, theta, self.patches, self.n_draws, rng, self.cfg, self.blind).psnr_db


class ProtocolError(RuntimeError):
    """ Base class for external learner exchange failures """


class ProtocolTimeout(ProtocolError):
    pass


class GridMismatchError(ProtocolError):
    pass


class MalformedTableError(ProtocolError):
    pass


def _fmt(value):
    return '{0:.17g}'.format(value)


def _write_table(path, space, columns, values):
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for i, theta in enumerate(space):
            sigma, alpha, beta = theta.values
            writer.writerow([i, _fmt(sigma), _fmt(alpha), _fmt(beta), _fmt(values[i])])


def _read_table(path, space, columns):
    """ Parse a per-grid-point table and check it against the space

    :return: numpy array of the last column, in grid order
    """
    try:
        with open(path, newline='') as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise MalformedTableError('{0}: cannot read table: {1}'.format(path, e)) from e

    if not rows or tuple(rows[0]) != columns:
        msg = '{0}: expected header {1}, got {2}'
        raise MalformedTableError(msg.format(path, columns, rows[0] if rows else None))
    rows = rows[1:]
    try:
        indices = [int(r[0]) for r in rows]
        coords = np.array([[float(v) for v in r[1:4]] for r in rows]).reshape(-1, 3)
        values = np.array([float(r[4]) for r in rows])
    except (ValueError, IndexError) as e:
        raise MalformedTableError('{0}: malformed row: {1}'.format(path, e)) from e

    if len(rows) != len(space) or indices != list(range(len(space))):
        msg = '{0}: {1} rows do not enumerate the {2} grid points in order'
        raise GridMismatchError(msg.format(path, len(rows), len(space)))
    expected = np.array([theta.values for theta in space])
    if not np.allclose(coords, expected, rtol=1e-12, atol=0):
        bad = np.flatnonzero(~np.all(np.isclose(coords, expected, rtol=1e-12, atol=0), axis=1)).tolist()
        raise GridMismatchError('{0}: coordinates differ from the grid at rows {1}'.format(path, bad))
    return values


def write_lambda_table(path, space, lam):
    _write_table(path, space, LAMBDA_COLUMNS, _weights(lam))


def read_lambda_table(path, space):
    weights = _read_table(path, space, LAMBDA_COLUMNS)
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise MalformedTableError('{0}: weights must be finite and nonnegative'.format(path))
    return weights


def write_loss_table(path, space, psnr_db):
    _write_table(path, space, LOSS_COLUMNS, np.asarray(psnr_db, dtype=float))


def read_loss_table(path, space):
    psnr_db = _read_table(path, space, LOSS_COLUMNS)
    if not np.all(np.isfinite(psnr_db)):
        raise MalformedTableError('{0}: PSNR values must be finite'.format(path))
    return psnr_db


def _touch(path):
    with open(path, 'w'):
        pass


def _wait_for(path, timeout, poll_interval):
    deadline = time.monotonic() + timeout
    while not os.path.exists(path):
        if time.monotonic() >= deadline:
            return False
        time.sleep(poll_interval)
    return True


def external_learner_roundtrip(workdir, lam, space, t, timeout=600.0, poll_interval=0.5):
    """ Hand lambda to an external trainer and wait for its PSNR table

    Writes lambda_<t>.csv then request_<t>.ready, and waits for
    response_<t>.ready before reading loss_<t>.csv.  Files left at step t
    by an earlier session in the same workdir are removed first.

    :raises ProtocolTimeout: no response within timeout seconds
    :raises GridMismatchError: the response does not cover the grid
    :raises MalformedTableError: the response cannot be parsed
    :rtype: numpy array of per-grid-point PSNR
    """
    for fmt in (request_fmt, response_fmt, loss_fmt):
        stale = os.path.join(workdir, fmt.format(t))
        if os.path.exists(stale):
            logger.debug('removing stale %s', stale)
            os.remove(stale)
    write_lambda_table(os.path.join(workdir, lambda_fmt.format(t)), space, lam)
    _touch(os.path.join(workdir, request_fmt.format(t)))
    logger.debug('request %d written to %s', t, workdir)

    if not _wait_for(os.path.join(workdir, response_fmt.format(t)), timeout, poll_interval):
        msg = 'no response to request {0} in {1} after {2}s'
        logger.error(msg.format(t, workdir, timeout))
        raise ProtocolTimeout(msg.format(t, workdir, timeout))
    return read_loss_table(os.path.join(workdir, loss_fmt.format(t)), space)


class ExternalLearner(Learner):
    """ Learner backed by an out-of-process trainer

    Each fit is one request/response exchange; the returned model only
    knows its per-grid-point PSNR.
    """

    def __init__(self, workdir, space, timeout=600.0, poll_interval=0.5):
        if not os.path.isdir(workdir):
            raise ValueError('external learner directory {0} does not exist'.format(workdir))
        self.workdir = workdir
        self.space = space
        self.timeout = float(timeout)
        self.poll_interval = float(poll_interval)
        self.t = 0

    def fit(self, lam, data=None, budget=1, warm_start=None):
        psnr_db = external_learner_roundtrip(self.workdir, lam, self.space, self.t, self.timeout,
                                             self.poll_interval)
        self.t += 1
        return TableModel(self.space, psnr_db)


class ExternalResponder(object):
    """ The trainer side of the exchange

    respond is called with the weight vector of each request and must
    return the per-grid-point PSNR of the model it trained.
    """

    def __init__(self, workdir, space, respond, poll_interval=0.05, timeout=600.0):
        self.workdir = workdir
        self.space = space
        self.respond = respond
        self.poll_interval = poll_interval
        self.timeout = timeout

    def serve_one(self, t):
        request = os.path.join(self.workdir, request_fmt.format(t))
        if not _wait_for(request, self.timeout, self.poll_interval):
            raise ProtocolTimeout('no request {0} in {1}'.format(t, self.workdir))
        weights = read_lambda_table(os.path.join(self.workdir, lambda_fmt.format(t)), self.space)
        psnr_db = self.respond(weights)
        write_loss_table(os.path.join(self.workdir, loss_fmt.format(t)), self.space, psnr_db)
        _touch(os.path.join(self.workdir, response_fmt.format(t)))
        logger.debug('response %d written to %s', t, self.workdir)

    def serve(self, count, start=0):
        for t in range(start, start + count):
            self.serve_one(t)


def shrinkage_responder(space, S2, m1, cfg=None):
    """ respond callable that trains the shrinkage family exactly """

    def respond(weights):
        model = shrinkage_fit(weights, space, S2, m1, cfg)
        return [model.closed_form_psnr(theta) for theta in space]

    return respond
