# -*- coding: utf-8 -*-
"""
Command line front end: landscape sampling, fitting, adaptive runs,
uniform baselines and reports, all driven by one JSON config.

This file is part of unigap, distributed under the GNU LGPLv3.
"""
import argparse
import copy
import hashlib
import json
import logging
import math
import os
import sys
from collections import defaultdict

import numpy as np

from .landscape import (DEFAULT_RIDGE, PRESETS, RIDGE_SWEEP, DegenerateDesignError, LandscapeSample,
                        SpecificationSpace, cross_validate, dense_design, fit_quadratic, leave_one_out, load_model,
                        min_samples, n_coefficients, read_samples, save_model, sparse_design, write_samples)
from .learners import (ExternalLearner, MonteCarloEvaluator, OracleLearner, ProtocolError, ShrinkageLearner,
                       SubspaceLearner, SubspaceProjector)
from .noise import SpeckleConfig, loss_from_psnr, make_rng
from .scheduler import (STEP_MODES, SamplingDistribution, evaluate_landscape, gap_report, make_schedule,
                        read_landscape_table, run_adaptive, schedules, uniform_baseline, write_landscape_table,
                        write_summary, write_trajectory)

__all__ = (
    'RunConfig',
    'ConfigError',
    'convert_to_bool',
    'cmd_landscape',
    'cmd_fit',
    'cmd_adapt',
    'cmd_baseline',
    'cmd_report',
    'main')

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

LEARNER_KINDS = ('shrinkage', 'oracle', 'subspace', 'external')
DESIGN_MODES = ('sparse', 'dense')
TARGETS = ('psnr', 'loss')

LANDSCAPE_FILE = 'landscape.csv'
MODEL_FILE = 'model.json'
TRAJECTORY_FILE = 'trajectory.csv'
SUMMARY_FILE = 'summary.json'
BASELINE_FILE = 'baseline.csv'
REPORT_FILE = 'report.json'

DEFAULTS = {
    'seed': 0,
    'space': {'preset': 'poisson-gaussian', 'bins': 10, 'spacing': 'geometric', 'dims': None},
    'speckle': {'B': 1024.0},
    'learner': {'kind': 'shrinkage', 'S2': 0.25, 'm1': 0.5, 'dim': 16, 'rank': 4,
                'workdir': None, 'timeout': 600.0, 'poll_interval': 0.5},
    'data': {'dir': None, 'patch_size': 40, 'patch_count': 384000, 'augment': True, 'cache': None},
    'design': {'n_random': 10, 'mode': 'sparse'},
    'fit': {'ridge': DEFAULT_RIDGE, 'degree': 2, 'ridges': list(RIDGE_SWEEP), 'target': 'psnr'},
    'ascent': {'iterations': 50, 'gamma': 0.1, 'schedule': 'constant', 'inner_budget': 10, 'step': 'ratio',
               'warm_start': True, 'approximate_model': False},
    'eval': {'patch_count': 64, 'n_draws': 1, 'workers': 1, 'monte_carlo': False},
    'output_dir': 'runs',
}


def convert_to_bool(value):
    """ Convert a few common variations of "true" and "false" to boolean

    :param Any value: string to test
    :rtype: boolean
    :raises: ValueError
    """
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    value = str(value).strip().lower()
    if value in ('1', 'y', 'yes', 't', 'true'):
        return True
    if value in ('0', 'n', 'no', 'f', 'false'):
        return False
    raise ValueError('cannot parse "{}" as bool'.format(value))


def _json_value(value):
    return json.loads(value)


# casts for command line overrides, keyed by dotted path
types = defaultdict(lambda: _json_value)

for _section, _fields in DEFAULTS.items():
    if not isinstance(_fields, dict):
        _fields = {None: _fields}
    for _key, _default in _fields.items():
        _path = _section if _key is None else '{0}.{1}'.format(_section, _key)
        if isinstance(_default, bool):
            types[_path] = convert_to_bool
        elif isinstance(_default, int):
            types[_path] = int
        elif isinstance(_default, float):
            types[_path] = float
        elif isinstance(_default, str):
            types[_path] = str

types.update({
    'learner.workdir': str,
    'data.dir': str,
    'data.cache': str,
})


class ConfigError(ValueError):
    """ Every problem found in a run configuration """

    def __init__(self, errors):
        self.errors = list(errors)
        super(ConfigError, self).__init__('invalid configuration:\n  ' + '\n  '.join(self.errors))


def _merge(defaults, data, prefix, unknown):
    merged = copy.deepcopy(defaults)
    for key, value in data.items():
        path = key if not prefix else '{0}.{1}'.format(prefix, key)
        if key not in defaults:
            unknown.append(path)
        elif isinstance(defaults[key], dict) and isinstance(value, dict):
            merged[key] = _merge(defaults[key], value, path, unknown)
        else:
            merged[key] = value
    return merged


class RunConfig(object):
    """ One JSON document describing a complete run

    Missing fields take their defaults; unknown fields are reported by
    validate.
    """

    def __init__(self, data=None):
        self.unknown = []
        self.data = _merge(DEFAULTS, data or {}, '', self.unknown)

    @classmethod
    def from_file(cls, filename):
        with open(filename) as fh:
            try:
                data = json.load(fh)
            except ValueError as e:
                raise ConfigError(['{0}: not valid JSON: {1}'.format(filename, e)])
        if not isinstance(data, dict):
            raise ConfigError(['{0}: top level must be an object'.format(filename)])
        return cls(data)

    def __getitem__(self, section):
        return self.data[section]

    def override(self, assignment):
        """ Apply one "section.key=value" assignment, cast by the default's type """
        path, sep, raw = assignment.partition('=')
        path = path.strip()
        if not sep or not path:
            raise ConfigError(['override "{0}" is not of the form section.key=value'.format(assignment)])
        section, _, key = path.partition('.')
        target = self.data
        if key:
            if not isinstance(self.data.get(section), dict) or key not in self.data[section]:
                raise ConfigError(['unknown config field "{0}"'.format(path)])
            target = self.data[section]
        elif section not in self.data:
            raise ConfigError(['unknown config field "{0}"'.format(path)])
        else:
            key = section
        try:
            target[key] = types[path](raw.strip())
        except ValueError as e:
            raise ConfigError(['{0}: {1}'.format(path, e)])

    def config_hash(self):
        """ First 16 hex digits of the SHA-256 of the canonical JSON

        The output directory is excluded; it names where a run goes, not
        what it computes.
        """
        data = {k: v for k, v in self.data.items() if k != 'output_dir'}
        canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]

    def speckle(self):
        return SpeckleConfig(self.data['speckle']['B'])

    def space(self):
        section = self.data['space']
        if section.get('dims'):
            return SpecificationSpace.from_dict({'dims': section['dims']})
        return SpecificationSpace.from_preset(section['preset'], section['bins'], section['spacing'])

    def output_path(self, name):
        return os.path.join(self.data['output_dir'], name)

    def validate(self):
        """ Check every field and cross-field constraint

        :raises ConfigError: listing every violation found
        """
        errors = ['unknown config field "{0}"'.format(p) for p in self.unknown]

        def check(condition, msg, *args):
            if not condition:
                errors.append(msg.format(*args))

        def number(path, value, kind=float):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or \
                    (kind is int and not float(value).is_integer()):
                errors.append('{0} must be {1}, got {2!r}'.format(path, 'an integer' if kind is int else 'a number',
                                                                  value))
                return False
            if not math.isfinite(value):
                errors.append('{0} must be finite, got {1!r}'.format(path, value))
                return False
            return True

        d = self.data
        number('seed', d['seed'], int)

        speckle = d['speckle']
        if number('speckle.B', speckle['B']):
            check(speckle['B'] >= 1, 'speckle.B must be >= 1, got {0}', speckle['B'])

        space = None
        if not d['space'].get('dims'):
            check(d['space']['preset'] in PRESETS, 'space.preset must be one of {0}, got {1!r}',
                  sorted(PRESETS), d['space']['preset'])
        try:
            space = self.space()
        except (ValueError, TypeError, KeyError) as e:
            errors.append('space: {0}'.format(e))
        if space is not None and 'beta' in space.names and number('speckle.B', speckle['B']):
            upper = space.dims[space.names.index('beta')].upper
            check(upper <= speckle['B'], 'space beta upper bound {0} exceeds speckle.B {1}', upper, speckle['B'])

        learner = d['learner']
        kind = learner['kind']
        check(kind in LEARNER_KINDS, 'learner.kind must be one of {0}, got {1!r}', LEARNER_KINDS, kind)
        if kind in ('shrinkage', 'oracle') and not d['data']['dir']:
            if number('learner.S2', learner['S2']):
                check(learner['S2'] > 0, 'learner.S2 must be > 0, got {0}', learner['S2'])
            if number('learner.m1', learner['m1']):
                check(learner['m1'] >= 0, 'learner.m1 must be >= 0, got {0}', learner['m1'])
        if kind == 'subspace':
            if number('learner.dim', learner['dim'], int) and number('learner.rank', learner['rank'], int):
                check(1 <= learner['rank'] <= learner['dim'], 'learner.rank must lie in [1, learner.dim={0}], got {1}',
                      learner['dim'], learner['rank'])
            check(space is None or 'beta' not in space.names, 'the subspace learner has no speckle dimension')
            check(not d['eval']['monte_carlo'], 'the subspace learner is evaluated in closed form only')
        if kind == 'external':
            workdir = learner['workdir']
            check(bool(workdir) and os.path.isdir(str(workdir)), 'learner.workdir {0!r} is not a directory', workdir)
            if number('learner.timeout', learner['timeout']):
                check(learner['timeout'] > 0, 'learner.timeout must be > 0, got {0}', learner['timeout'])
            if number('learner.poll_interval', learner['poll_interval']):
                check(learner['poll_interval'] > 0, 'learner.poll_interval must be > 0, got {0}',
                      learner['poll_interval'])

        data = d['data']
        if data['dir']:
            check(os.path.isdir(str(data['dir'])), 'data.dir {0!r} is not a directory', data['dir'])
        if number('data.patch_size', data['patch_size'], int):
            check(data['patch_size'] >= 1, 'data.patch_size must be >= 1, got {0}', data['patch_size'])
        if number('data.patch_count', data['patch_count'], int):
            check(data['patch_count'] >= 1, 'data.patch_count must be >= 1, got {0}', data['patch_count'])
        check(isinstance(data['augment'], bool), 'data.augment must be true or false')
        check(not d['eval']['monte_carlo'] or bool(data['dir']), 'eval.monte_carlo needs data.dir')

        design = d['design']
        check(design['mode'] in DESIGN_MODES, 'design.mode must be one of {0}, got {1!r}', DESIGN_MODES,
              design['mode'])
        if number('design.n_random', design['n_random'], int) and space is not None and design['mode'] == 'sparse':
            corners = len(space.corner_indices())
            needed = min_samples(space.ndim)
            check(corners + design['n_random'] >= needed,
                  'design: {0} corners + design.n_random={1} is below the {2} samples needed', corners,
                  design['n_random'], needed)
            check(0 <= design['n_random'] <= len(space) - corners,
                  'design.n_random must lie in [0, {0}], got {1}', len(space) - corners, design['n_random'])

        fit = d['fit']
        if number('fit.ridge', fit['ridge']):
            check(fit['ridge'] >= 0, 'fit.ridge must be >= 0, got {0}', fit['ridge'])
        check(fit['degree'] in (1, 2), 'fit.degree must be 1 or 2, got {0!r}', fit['degree'])
        check(fit['target'] in TARGETS, 'fit.target must be one of {0}, got {1!r}', TARGETS, fit['target'])
        ridges = fit['ridges']
        check(isinstance(ridges, list) and len(ridges) > 0 and
              all(not isinstance(r, bool) and isinstance(r, (int, float)) and r >= 0 for r in ridges),
              'fit.ridges must be a nonempty list of numbers >= 0, got {0!r}', ridges)

        ascent = d['ascent']
        if number('ascent.iterations', ascent['iterations'], int):
            check(ascent['iterations'] >= 0, 'ascent.iterations must be >= 0, got {0}', ascent['iterations'])
        if number('ascent.gamma', ascent['gamma']):
            check(ascent['gamma'] > 0, 'ascent.gamma must be > 0, got {0}', ascent['gamma'])
        check(ascent['schedule'] in schedules, 'ascent.schedule must be one of {0}, got {1!r}', sorted(schedules),
              ascent['schedule'])
        if number('ascent.inner_budget', ascent['inner_budget'], int):
            check(ascent['inner_budget'] >= 1, 'ascent.inner_budget must be >= 1, got {0}', ascent['inner_budget'])
        check(ascent['step'] in STEP_MODES, 'ascent.step must be one of {0}, got {1!r}', STEP_MODES, ascent['step'])
        check(isinstance(ascent['warm_start'], bool), 'ascent.warm_start must be true or false')
        check(isinstance(ascent['approximate_model'], bool), 'ascent.approximate_model must be true or false')

        ev = d['eval']
        for key in ('patch_count', 'n_draws', 'workers'):
            if number('eval.' + key, ev[key], int):
                check(ev[key] >= 1, 'eval.{0} must be >= 1, got {1}', key, ev[key])
        check(isinstance(ev['monte_carlo'], bool), 'eval.monte_carlo must be true or false')

        check(isinstance(d['output_dir'], str) and bool(d['output_dir']), 'output_dir must be a nonempty string')

        if errors:
            for error in errors:
                logger.error(error)
            raise ConfigError(errors)
        return self


class Run(object):
    """ Objects built from a validated config, created on first use """

    def __init__(self, config):
        self.config = config
        self.space = config.space()
        self.cfg = config.speckle()
        self.seed = int(config['seed'])
        self.config_hash = config.config_hash()
        self._dataset = None
        self._patches = None
        self._learner = None

    def dataset(self):
        if self._dataset is None:
            from .data import load_images
            self._dataset = load_images(self.config['data']['dir'], seed=self.seed)
        return self._dataset

    def training_patches(self):
        """ Training patch set, read from or written to the cache when one is configured """
        from .data import extract_patches, load_patches, save_patches
        if self._patches is not None:
            return self._patches
        data = self.config['data']
        cache = data['cache']
        if cache and os.path.exists(cache):
            patches, header = load_patches(cache)
            if header.get('config_hash') == self.config_hash:
                logger.info('read %d patches from %s', len(patches), cache)
                self._patches = patches
                return patches
            logger.info('patch cache %s belongs to another config, rebuilding', cache)
        patches = extract_patches(self.dataset(), data['patch_size'], data['patch_count'], data['augment'],
                                  make_rng(self.seed, 'patches'))
        if cache:
            save_patches(cache, patches, config_hash=self.config_hash)
            logger.info('wrote %d patches to %s', len(patches), cache)
        self._patches = patches
        return patches

    def eval_patches(self):
        from .data import extract_patches
        data = self.config['data']
        return extract_patches(self.dataset(), data['patch_size'], self.config['eval']['patch_count'],
                               data['augment'], make_rng(self.seed, 'eval-patches'))

    def moments(self):
        if self.config['data']['dir']:
            from .data import moments
            return moments(self.training_patches())
        learner = self.config['learner']
        return learner['m1'], learner['S2']

    def evaluator(self):
        ev = self.config['eval']
        if not ev['monte_carlo']:
            return None
        return MonteCarloEvaluator(self.eval_patches().patches, ev['n_draws'], self.seed, self.cfg)

    def subspace_learner(self):
        params = self.config['learner']
        rng = make_rng(self.seed, 'subspace')
        signal = rng.uniform(0.1, 0.9, size=params['dim'])
        projector = SubspaceProjector.random(params['dim'], params['rank'], rng, containing=signal)
        return SubspaceLearner(projector, signal)

    def analytic_ideal(self):
        """ Exact ideal landscape for learners that have one """
        kind = self.config['learner']['kind']
        if kind in ('shrinkage', 'oracle'):
            m1, S2 = self.moments()
            reference = ShrinkageLearner(self.space, S2, m1, self.cfg)
        elif kind == 'subspace':
            reference = self.learner()
        else:
            return None
        return np.array([reference.ideal_psnr(theta) for theta in self.space])

    def learner(self, ideal_psnr=None):
        if self._learner is not None:
            return self._learner
        params = self.config['learner']
        kind = params['kind']
        if kind == 'shrinkage':
            m1, S2 = self.moments()
            learner = ShrinkageLearner(self.space, S2, m1, self.cfg)
        elif kind == 'oracle':
            learner = OracleLearner(self.space, self.analytic_ideal() if ideal_psnr is None else ideal_psnr)
        elif kind == 'subspace':
            learner = self.subspace_learner()
        else:
            learner = ExternalLearner(params['workdir'], self.space, params['timeout'], params['poll_interval'])
        self._learner = learner
        return learner

    def design(self):
        if self.config['design']['mode'] == 'dense':
            return dense_design(self.space)
        return sparse_design(self.space, self.config['design']['n_random'], make_rng(self.seed, 'design'))

    def ideal(self, ideal_path=None):
        """ Ideal landscape over the grid: from a fitted model, else exact """
        if ideal_path:
            model = load_model(ideal_path)
            if tuple(model.names) != tuple(self.space.names):
                raise ConfigError(['{0} models dimensions {1}, the config space has {2}'.format(
                    ideal_path, list(model.names), list(self.space.names))])
            if model.config_hash and model.config_hash != self.config_hash:
                logger.info('%s was fit to landscape %s, this config is %s',
                            ideal_path, model.config_hash, self.config_hash)
            logger.info('ideal landscape from %s', ideal_path)
            return model.predict_grid(self.space)
        ideal = self.analytic_ideal()
        if ideal is None:
            raise ConfigError(['learner "{0}" has no exact ideal landscape; pass --ideal'.format(
                self.config['learner']['kind'])])
        return ideal


def _prepare_output(config):
    os.makedirs(config['output_dir'], exist_ok=True)


def _ideal_sample(run, theta, evaluator):
    """ Ideal PSNR at one specification and how it was obtained """
    kind = run.config['learner']['kind']
    if evaluator is None and kind != 'external':
        return run.learner().ideal_psnr(theta), 1, 'ideal'

    # fit to this specification alone, then evaluate there
    index = run.space.index(theta)
    learner = run.learner()
    model = learner.fit(SamplingDistribution.point_mass(len(run.space), index), None,
                        run.config['ascent']['inner_budget'])
    psnr_db = evaluate_landscape(model, run.space, evaluator, indices=[index])[0]
    ev = run.config['eval']
    n_eval = ev['patch_count'] * ev['n_draws'] if evaluator is not None else 1
    return psnr_db, n_eval, 'external' if kind == 'external' else 'ideal'


def cmd_landscape(config):
    """ Sample the ideal landscape at every design point

    Rows already present in the output CSV are kept and not recomputed.

    :rtype: path of the landscape CSV
    """
    run = Run(config)
    _prepare_output(config)
    path = config.output_path(LANDSCAPE_FILE)

    samples = []
    if os.path.exists(path):
        samples, found_hash = read_samples(path)
        if found_hash != run.config_hash:
            raise ConfigError(['{0} was written by config {1}, this config is {2}'.format(
                path, found_hash, run.config_hash)])
    done = {s.theta for s in samples}
    pending = [theta for theta in run.design() if theta not in done]
    if not pending:
        logger.info('%s already holds all %d samples', path, len(samples))
        return path

    evaluator = run.evaluator()
    for theta in pending:
        psnr_db, n_eval, source = _ideal_sample(run, theta, evaluator)
        samples.append(LandscapeSample(theta, psnr_db, n_eval, run.seed, source))
        logger.debug('%r: ideal %.4f dB', theta, psnr_db)
    write_samples(path, samples, run.config_hash)
    logger.info('wrote %d samples (%d new) to %s', len(samples), len(pending), path)
    return path


def cmd_fit(config, samples_path=None):
    """ Fit the landscape model and report its held-out error

    :rtype: path of the model JSON
    """
    run = Run(config)
    _prepare_output(config)
    samples_path = samples_path or config.output_path(LANDSCAPE_FILE)
    samples, found_hash = read_samples(samples_path)
    fit = config['fit']

    model = fit_quadratic(samples, fit['ridge'], run.space, fit['degree'], target=fit['target'])
    model.config_hash = found_hash
    fitted = np.array([model.predict(s.theta).value for s in samples])
    if fit['target'] == 'loss':
        observed = np.array([loss_from_psnr(s.psnr_db) for s in samples])
    else:
        observed = np.array([s.psnr_db for s in samples])
    scale = max(float(np.max(np.abs(observed))), np.finfo(float).tiny)
    report = {
        'samples': len(samples),
        'max_abs_residual': float(np.max(np.abs(fitted - observed))),
        'max_rel_residual': float(np.max(np.abs(fitted - observed)) / scale),
    }
    if len(samples) >= n_coefficients(run.space.ndim, fit['degree']) + 1:
        residuals = leave_one_out(samples, fit['degree'], fit['ridge'], run.space, target=fit['target'])
        report['loo_rmse'] = float(np.sqrt(np.mean(residuals ** 2)))
        report['loo_max_abs'] = float(np.max(np.abs(residuals)))
    degrees = [k for k in (1, 2, 3) if len(samples) - 1 >= n_coefficients(run.space.ndim, k)]
    if degrees:
        try:
            degree, ridge = cross_validate(samples, degrees, fit['ridges'], run.space, target=fit['target'])
            report['cross_validation'] = {'degree': degree, 'ridge': ridge}
        except DegenerateDesignError as e:
            logger.warning('cross-validation skipped: %s', e)

    path = config.output_path(MODEL_FILE)
    save_model(path, model, report)
    logger.info('wrote model to %s (max residual %.3g)', path, report['max_abs_residual'])
    return path


def _model_design(run):
    if not run.config['ascent']['approximate_model']:
        return None
    return sparse_design(run.space, run.config['design']['n_random'], make_rng(run.seed, 'model-design'))


def cmd_adapt(config, ideal_path=None):
    """ Run dual ascent and write the trajectory and summary

    :rtype: AscentState
    """
    run = Run(config)
    _prepare_output(config)
    ideal = run.ideal(ideal_path)
    ascent = config['ascent']
    fit = config['fit']

    state = run_adaptive(run.space, run.learner(ideal), ideal, ascent['iterations'],
                         make_schedule(ascent['schedule'], ascent['gamma']), ascent['inner_budget'],
                         evaluator=run.evaluator(), step=ascent['step'], warm_start=ascent['warm_start'],
                         model_design=_model_design(run), ridge=fit['ridge'], degree=fit['degree'],
                         workers=config['eval']['workers'])

    write_trajectory(config.output_path(TRAJECTORY_FILE), state, run.space, run.config_hash)
    write_summary(config.output_path(SUMMARY_FILE), state, run.config_hash)
    logger.info('wrote %s and %s', TRAJECTORY_FILE, SUMMARY_FILE)
    return state


def cmd_baseline(config, ideal_path=None):
    """ Train once under uniform lambda and write per-grid-point PSNR

    :rtype: GapReport
    """
    run = Run(config)
    _prepare_output(config)
    ideal = run.ideal(ideal_path)
    psnr_db = uniform_baseline(run.space, run.learner(ideal), config['ascent']['inner_budget'],
                               evaluator=run.evaluator(), workers=config['eval']['workers'])
    write_landscape_table(config.output_path(BASELINE_FILE), run.space, psnr_db, ideal, run.config_hash)
    report = gap_report(psnr_db, ideal)
    logger.info('baseline max gap %.4f dB, std %.4f dB', report.max_gap, report.std_gap)
    return report


def cmd_report(config, baseline_path=None, summary_path=None):
    """ Compare baseline and adaptive gaps and state the sample economy

    :rtype: dict written to report.json
    """
    run = Run(config)
    baseline_path = baseline_path or config.output_path(BASELINE_FILE)
    summary_path = summary_path or config.output_path(SUMMARY_FILE)
    model_psnr, ideal_psnr, baseline_hash = read_landscape_table(baseline_path)
    with open(summary_path) as fh:
        summary = json.load(fh)

    if baseline_hash != summary.get('config_hash'):
        raise ConfigError(['{0} (config {1}) and {2} (config {3}) come from different configs'.format(
            baseline_path, baseline_hash, summary_path, summary.get('config_hash'))])
    if summary.get('final') is None:
        raise ConfigError(['{0} records no iterations'.format(summary_path)])

    baseline = gap_report(model_psnr, ideal_psnr)
    adapt = summary['final']
    design_points = len(run.design())
    report = {
        'config_hash': baseline_hash,
        'baseline': {'max_gap': baseline.max_gap, 'mean_gap': baseline.mean_gap, 'std_gap': baseline.std_gap},
        'adapt': {k: adapt[k] for k in ('max_gap', 'mean_gap', 'std_gap')},
        'std_ratio': adapt['std_gap'] / baseline.std_gap if baseline.std_gap > 0 else None,
        'max_gap_reduction': baseline.max_gap - adapt['max_gap'],
        'sample_economy': {
            'design_points': design_points,
            'grid_points': len(run.space),
            'ratio': design_points / len(run.space),
        },
    }
    _prepare_output(config)
    path = config.output_path(REPORT_FILE)
    with open(path, 'w') as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write('\n')
    logger.info('wrote %s: %d ideal samples for %d grid points', path, design_points, len(run.space))
    return report


def build_parser():
    parser = argparse.ArgumentParser(
        prog='unigap',
        description='Adaptive training distributions that equalize the gap to specialized denoisers.')
    parser.add_argument('-v', '--verbose', action='store_true', help='log debug messages')
    parser.add_argument('-q', '--quiet', action='store_true', help='log warnings and errors only')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    def add(name, help):
        sub = commands.add_parser(name, help=help)
        sub.add_argument('-c', '--config', help='run configuration (JSON)')
        sub.add_argument('--set', dest='overrides', action='append', default=[], metavar='SECTION.KEY=VALUE',
                         help='override one scalar config field')
        return sub

    add('landscape', help='sample the ideal landscape at the design points')
    sub = add('fit', help='fit the quadratic landscape model')
    sub.add_argument('--samples', help='landscape CSV (default: <output_dir>/landscape.csv)')
    sub = add('adapt', help='run dual ascent')
    sub.add_argument('--ideal', help='fitted ideal model JSON (default: exact ideal landscape)')
    sub = add('baseline', help='train once under the uniform distribution')
    sub.add_argument('--ideal', help='fitted ideal model JSON (default: exact ideal landscape)')
    sub = add('report', help='compare baseline and adaptive gaps')
    sub.add_argument('--baseline', help='baseline CSV (default: <output_dir>/baseline.csv)')
    sub.add_argument('--summary', help='adapt summary JSON (default: <output_dir>/summary.json)')
    return parser


def _configure_logging(args):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    root = logging.getLogger()
    root.addHandler(handler)
    root.setLevel(level)
    return handler


def load_config(args):
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    for assignment in args.overrides:
        config.override(assignment)
    return config.validate()


def main(argv=None):
    """ Entry point; returns the process exit code """
    args = build_parser().parse_args(argv)
    handler = _configure_logging(args)
    try:
        config = load_config(args)
        if args.command == 'landscape':
            cmd_landscape(config)
        elif args.command == 'fit':
            cmd_fit(config, args.samples)
        elif args.command == 'adapt':
            cmd_adapt(config, args.ideal)
        elif args.command == 'baseline':
            cmd_baseline(config, args.ideal)
        else:
            cmd_report(config, args.baseline, args.summary)
    except (ConfigError, DegenerateDesignError) as e:
        logger.error('%s', e)
        return EXIT_INVALID
    except (ProtocolError, RuntimeError, OSError, KeyError, ValueError) as e:
        logger.error('%s failed: %s', args.command, e)
        return EXIT_RUNTIME
    finally:
        logging.getLogger().removeHandler(handler)
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
