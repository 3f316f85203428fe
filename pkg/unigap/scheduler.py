# -*- coding: utf-8 -*-
"""
Dual ascent on the uniform gap problem.

The scheduler alternates between fitting a learner under the current
sampling distribution lambda over the specification grid and moving
lambda toward the specifications where the fitted model falls furthest
behind the ideal landscape.

This file is part of unigap, distributed under the GNU LGPLv3.
"""
import csv
import json
import logging
import math
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .landscape import (DEFAULT_RIDGE, LandscapeSample, QuadraticModel, fit_quadratic, hash_comment_fmt,
                        read_comment_hash)
from .noise import DIMENSION_NAMES, loss_from_psnr

__all__ = (
    'SamplingDistribution',
    'AscentState',
    'AscentRecord',
    'GapReport',
    'DivergentStepError',
    'LearnerError',
    'DEFAULT_GAMMA',
    'constant_schedule',
    'inverse_sqrt_schedule',
    'make_schedule',
    'dual_step',
    'ideal_landscape',
    'evaluate_landscape',
    'run_adaptive',
    'uniform_baseline',
    'gap_report',
    'write_trajectory',
    'write_summary',
    'write_landscape_table',
    'read_landscape_table')

logger = logging.getLogger(__name__)

SUM_TOLERANCE = 1e-12
DEFAULT_GAMMA = 0.1
STEP_MODES = ('ratio', 'difference')
TRAJECTORY_COLUMNS = ('iteration', 'index', 'sigma', 'alpha', 'beta', 'weight', 'model_psnr_db',
                      'ideal_psnr_db')
TABLE_COLUMNS = ('index', 'sigma', 'alpha', 'beta', 'model_psnr_db', 'ideal_psnr_db', 'gap_db')

AscentRecord = namedtuple('AscentRecord', ['t', 'weights', 'gamma', 'model_psnr', 'ideal_psnr', 'max_gap'])
GapReport = namedtuple('GapReport', ['gaps', 'max_gap', 'mean_gap', 'std_gap'])


class DivergentStepError(RuntimeError):
    """ Every weight was clamped to zero; the step size is too large """


class LearnerError(RuntimeError):
    """ The learner or its evaluation failed inside the ascent loop """


class SamplingDistribution(object):
    """ Probability weights over the grid points of a specification space """

    def __init__(self, weights):
        weights = np.array(weights, dtype=float)
        if weights.ndim != 1 or weights.size == 0:
            raise ValueError('weights must be a nonempty vector')
        if not np.all(np.isfinite(weights)):
            raise ValueError('weights must be finite')
        if np.any(weights < 0):
            raise ValueError('weights must be nonnegative')
        total = math.fsum(weights)
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ValueError('weights must sum to 1, got {0!r}'.format(total))
        weights.flags.writeable = False
        self.weights = weights

    @classmethod
    def uniform(cls, n):
        return cls(np.full(int(n), 1.0 / int(n)))

    @classmethod
    def point_mass(cls, n, index):
        weights = np.zeros(int(n))
        weights[index] = 1.0
        return cls(weights)

    def __len__(self):
        return len(self.weights)

    def __getitem__(self, index):
        return self.weights[index]

    def __iter__(self):
        return iter(self.weights)

    def expectation(self, values):
        """ Sum over the grid of weight * value """
        values = np.asarray(values, dtype=float)
        if values.shape != self.weights.shape:
            raise ValueError('expected {0} values, got {1}'.format(len(self.weights), values.shape))
        return float(np.dot(self.weights, values))

    def __repr__(self):
        return '<{0}: {1} points, max weight {2:.4g}>'.format(
            self.__class__.__name__, len(self.weights), self.weights.max())


def constant_schedule(gamma=DEFAULT_GAMMA):
    """ Step size gamma at every iteration """
    gamma = _check_gamma(gamma)

    def schedule(t):
        return gamma

    return schedule


def inverse_sqrt_schedule(gamma=DEFAULT_GAMMA):
    """ Step size gamma / sqrt(t + 1) """
    gamma = _check_gamma(gamma)

    def schedule(t):
        return gamma / math.sqrt(t + 1)

    return schedule


schedules = {
    'constant': constant_schedule,
    'inverse-sqrt': inverse_sqrt_schedule,
}


def make_schedule(name, gamma=DEFAULT_GAMMA):
    try:
        return schedules[name](gamma)
    except KeyError:
        raise ValueError('unknown step size schedule "{0}", expected one of {1}'.format(name, sorted(schedules)))


def _check_gamma(gamma):
    gamma = float(gamma)
    if not (math.isfinite(gamma) and gamma > 0):
        raise ValueError('step size must be positive and finite, got {0}'.format(gamma))
    return gamma


def dual_step(lam, loss_model, loss_ideal, gamma, mode='ratio'):
    """ One multiplier update followed by clamping and renormalization

    In 'ratio' mode the increment is gamma * (L_f / L_ideal - 1), which
    equalizes PSNR gaps; 'difference' mode uses gamma * (L_f - L_ideal).

    :param lam: SamplingDistribution
    :param loss_model: per-grid-point MSE of the current model
    :param loss_ideal: per-grid-point MSE of the ideal landscape
    :param gamma: step size
    :param mode: 'ratio' or 'difference'
    :rtype: SamplingDistribution
    """
    gamma = _check_gamma(gamma)
    loss_model = np.asarray(loss_model, dtype=float)
    loss_ideal = np.asarray(loss_ideal, dtype=float)
    if not loss_model.shape == loss_ideal.shape == lam.weights.shape:
        raise ValueError('loss vectors {0}, {1} do not match {2} weights'.format(
            loss_model.shape, loss_ideal.shape, len(lam)))
    if np.any(~np.isfinite(loss_ideal) | (loss_ideal <= 0)):
        msg = 'ideal loss must be positive and finite, violated at grid points {0}'
        bad = np.flatnonzero(~np.isfinite(loss_ideal) | (loss_ideal <= 0)).tolist()
        logger.error(msg.format(bad))
        raise ValueError(msg.format(bad))
    if np.any(~np.isfinite(loss_model) | (loss_model < 0)):
        raise ValueError('model loss must be nonnegative and finite')

    if mode == 'ratio':
        increment = gamma * (loss_model / loss_ideal - 1.0)
    elif mode == 'difference':
        increment = gamma * (loss_model - loss_ideal)
    else:
        raise ValueError('unknown step mode "{0}", expected one of {1}'.format(mode, STEP_MODES))

    # model matches the ideal everywhere
    if not np.any(increment):
        return lam

    weights = np.maximum(lam.weights + increment, 0.0)
    total = weights.sum()
    if not total > 0:
        msg = 'all weights clamped to zero (gamma={0}); the step size diverges'
        logger.error(msg.format(gamma))
        raise DivergentStepError(msg.format(gamma))
    return SamplingDistribution(weights / total)


def _losses(psnr_db):
    return np.array([loss_from_psnr(p) for p in psnr_db])


def ideal_landscape(space, ideal):
    """ Ideal PSNR at every grid point

    :param space: SpecificationSpace
    :param ideal: QuadraticModel, per-grid-point sequence, or callable theta -> PSNR
    :rtype: numpy array in grid order
    """
    if isinstance(ideal, QuadraticModel):
        values = ideal.predict_grid(space)
    elif callable(ideal):
        values = np.array([float(ideal(theta)) for theta in space])
    else:
        values = np.array(ideal, dtype=float)
        if values.shape != (len(space),):
            raise ValueError('ideal table has shape {0}, expected ({1},)'.format(values.shape, len(space)))
    if not np.all(np.isfinite(values)):
        raise ValueError('ideal landscape is not finite at grid points {0}'.format(
            np.flatnonzero(~np.isfinite(values)).tolist()))
    return values


def _closed_form(model, theta, index, t):
    return model.evaluate_psnr(theta)


def evaluate_landscape(model, space, evaluator=None, t=0, workers=1, indices=None):
    """ PSNR of a model at grid points, reduced in fixed grid order

    :param model: fitted model
    :param space: SpecificationSpace
    :param evaluator: callable (model, theta, index, t) -> PSNR
    :param t: iteration index passed to the evaluator
    :param workers: thread count for the fan-out
    :param indices: grid indices to evaluate, default all
    :rtype: numpy array
    """
    evaluator = evaluator or _closed_form
    indices = range(len(space)) if indices is None else indices

    def task(i):
        return float(evaluator(model, space[i], i, t))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.array(list(pool.map(task, indices)))
    return np.array([task(i) for i in indices])


class AscentState(object):
    """ Iteration counter, current lambda, last step size and history """

    def __init__(self, lam):
        self.t = 0
        self.lam = lam
        self.gamma = None
        self.history = list()

    def advance(self, lam, gamma, model_psnr, ideal_psnr):
        gaps = ideal_psnr - model_psnr
        record = AscentRecord(self.t, self.lam.weights, gamma, model_psnr, ideal_psnr, float(gaps.max()))
        self.history.append(record)
        self.lam = lam
        self.gamma = gamma
        self.t += 1
        return record

    @property
    def model_psnr(self):
        """ Per-grid-point PSNR of the most recently fitted model """
        if not self.history:
            raise ValueError('no model has been fit yet')
        return self.history[-1].model_psnr

    def __repr__(self):
        return '<{0}: t={1}>'.format(self.__class__.__name__, self.t)


def _model_landscape(model, space, evaluator, t, workers, model_design, ridge, degree):
    if model_design is None:
        return evaluate_landscape(model, space, evaluator, t, workers)

    indices = [space.index(theta) for theta in model_design]
    values = evaluate_landscape(model, space, evaluator, t, workers, indices)
    samples = [LandscapeSample(space[i], v, source='current-model') for i, v in zip(indices, values)]
    approximation = fit_quadratic(samples, ridge, space, degree)
    return approximation.predict_grid(space)


def run_adaptive(space, learner, ideal, iterations, gamma_schedule=None, inner_budget=10, data=None,
                 evaluator=None, step='ratio', warm_start=True, model_design=None, ridge=DEFAULT_RIDGE,
                 degree=2, workers=1, callback=None):
    """ Solve the uniform gap problem by dual ascent

    Each iteration fits the learner under the current lambda, evaluates
    the model over the grid, converts model and ideal PSNR to losses and
    takes one dual step.

    :param space: SpecificationSpace
    :param learner: object with fit(lam, data, budget, warm_start) -> model
    :param ideal: ideal landscape (see ideal_landscape)
    :param iterations: number of iterations T
    :param gamma_schedule: callable t -> step size, default constant 0.1
    :param inner_budget: budget handed to every learner.fit call
    :param data: training data handed to the learner
    :param evaluator: per-point evaluator, default the model's closed form
    :param step: 'ratio' or 'difference'
    :param warm_start: pass the previous model to the next fit
    :param model_design: grid points at which to sample the model; when
        given, a quadratic fit of those samples replaces the full evaluation
    :param callback: called with the state after every iteration
    :rtype: AscentState
    """
    iterations = int(iterations)
    if iterations < 0:
        raise ValueError('iteration count must be >= 0, got {0}'.format(iterations))
    if step not in STEP_MODES:
        raise ValueError('unknown step mode "{0}", expected one of {1}'.format(step, STEP_MODES))
    schedule = gamma_schedule or constant_schedule()
    ideal_psnr = ideal_landscape(space, ideal)
    ideal_loss = _losses(ideal_psnr)

    state = AscentState(SamplingDistribution.uniform(len(space)))
    model = None
    for t in range(iterations):
        gamma = schedule(t)
        try:
            model = learner.fit(state.lam, data, inner_budget, warm_start=model if warm_start else None)
            model_psnr = _model_landscape(model, space, evaluator, t, workers, model_design, ridge, degree)
        except Exception as e:
            msg = 'iteration {0}: learner failed: {1}'
            logger.error(msg.format(t, e))
            raise LearnerError(msg.format(t, e)) from e

        if not np.all(np.isfinite(model_psnr)):
            msg = 'iteration {0}: non-finite model PSNR at grid points {1}'
            bad = np.flatnonzero(~np.isfinite(model_psnr)).tolist()
            logger.error(msg.format(t, bad))
            raise LearnerError(msg.format(t, bad))

        lam = dual_step(state.lam, _losses(model_psnr), ideal_loss, gamma, mode=step)
        record = state.advance(lam, gamma, model_psnr, ideal_psnr)
        logger.info('iteration %d: gamma=%.4g, max gap %.4f dB', t, gamma, record.max_gap)
        if callback is not None:
            callback(state)
    return state


def uniform_baseline(space, learner, inner_budget=10, data=None, evaluator=None, workers=1):
    """ Fit once under uniform lambda and evaluate everywhere

    :rtype: numpy array of per-grid-point PSNR
    """
    lam = SamplingDistribution.uniform(len(space))
    model = learner.fit(lam, data, inner_budget, warm_start=None)
    psnr = evaluate_landscape(model, space, evaluator, 0, workers)
    if not np.all(np.isfinite(psnr)):
        msg = 'non-finite baseline PSNR at grid points {0}'
        raise LearnerError(msg.format(np.flatnonzero(~np.isfinite(psnr)).tolist()))
    return psnr


def gap_report(achieved, ideal, space=None):
    """ Per-grid-point gap (ideal - achieved PSNR) and its statistics

    :param achieved: AscentState or per-grid-point PSNR
    :param ideal: per-grid-point ideal PSNR, or anything ideal_landscape
        accepts when space is given
    :rtype: GapReport
    """
    if isinstance(achieved, AscentState):
        achieved = achieved.model_psnr
    achieved = np.asarray(achieved, dtype=float)
    if space is not None:
        ideal = ideal_landscape(space, ideal)
    ideal = np.asarray(ideal, dtype=float)
    if achieved.shape != ideal.shape:
        raise ValueError('achieved {0} and ideal {1} grids differ'.format(achieved.shape, ideal.shape))
    gaps = ideal - achieved
    return GapReport(gaps, float(gaps.max()), float(gaps.mean()), float(gaps.std()))


def _fmt(value):
    return '{0:.17g}'.format(value)


def write_trajectory(path, state, space, config_hash=None):
    """ One row per iteration and grid point: lambda and both landscapes """
    with open(path, 'w', newline='') as fh:
        if config_hash:
            fh.write(hash_comment_fmt.format(config_hash) + '\n')
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for record in state.history:
            for i, theta in enumerate(space):
                sigma, alpha, beta = theta.values
                writer.writerow([record.t, i, _fmt(sigma), _fmt(alpha), _fmt(beta), _fmt(record.weights[i]),
                                 _fmt(record.model_psnr[i]), _fmt(record.ideal_psnr[i])])


def _report_dict(report):
    return {'max_gap': report.max_gap, 'mean_gap': report.mean_gap, 'std_gap': report.std_gap}


def write_summary(path, state, config_hash=None, extra=None):
    """ Gap statistics for every iteration plus the final lambda """
    per_iteration = []
    for record in state.history:
        row = {'t': record.t, 'gamma': record.gamma}
        row.update(_report_dict(gap_report(record.model_psnr, record.ideal_psnr)))
        per_iteration.append(row)
    data = {
        'config_hash': config_hash,
        'iterations': state.t,
        'per_iteration': per_iteration,
        'final': per_iteration[-1] if per_iteration else None,
        'final_weights': state.lam.weights.tolist(),
    }
    data.update(extra or {})
    with open(path, 'w') as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write('\n')


def write_landscape_table(path, space, model_psnr, ideal_psnr, config_hash=None):
    """ Per-grid-point model and ideal PSNR with their gap """
    with open(path, 'w', newline='') as fh:
        if config_hash:
            fh.write(hash_comment_fmt.format(config_hash) + '\n')
        writer = csv.writer(fh)
        writer.writerow(TABLE_COLUMNS)
        for i, theta in enumerate(space):
            sigma, alpha, beta = theta.values
            writer.writerow([i, _fmt(sigma), _fmt(alpha), _fmt(beta), _fmt(model_psnr[i]), _fmt(ideal_psnr[i]),
                             _fmt(ideal_psnr[i] - model_psnr[i])])


def read_landscape_table(path):
    """ Read a table written by write_landscape_table

    :rtype: (model_psnr array, ideal_psnr array, config hash or None)
    """
    with open(path, newline='') as fh:
        config_hash = read_comment_hash(fh)
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TABLE_COLUMNS:
            raise ValueError('{0}: expected columns {1}, got {2}'.format(path, TABLE_COLUMNS, reader.fieldnames))
        rows = list(reader)
    try:
        model_psnr = np.array([float(r['model_psnr_db']) for r in rows])
        ideal_psnr = np.array([float(r['ideal_psnr_db']) for r in rows])
    except ValueError as e:
        raise ValueError('{0}: malformed landscape table: {1}'.format(path, e)) from e
    return model_psnr, ideal_psnr, config_hash
