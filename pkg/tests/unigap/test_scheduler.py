import json
import math
import os
import shutil
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from unigap.landscape import Dimension, LandscapeSample, SpecificationSpace, fit_quadratic, sparse_design
from unigap.learners import OracleLearner, ShrinkageLearner, shrinkage_fit, shrinkage_ideal
from unigap.noise import make_rng
from unigap.scheduler import (AscentState, DivergentStepError, LearnerError, SamplingDistribution, constant_schedule,
                              dual_step, evaluate_landscape, gap_report, ideal_landscape, inverse_sqrt_schedule,
                              make_schedule, read_landscape_table, run_adaptive, uniform_baseline,
                              write_landscape_table, write_summary, write_trajectory)

S2 = 0.25
M1 = 0.5


def two_point_space():
    """ sigma in {0.1, 1.0}: noise variances 0.01 and 1.0 """
    return SpecificationSpace([Dimension('sigma', 0.1, 1.0, 2, 'linear')])


def shrinkage_testbed():
    space = SpecificationSpace.from_preset('poisson-gaussian')
    learner = ShrinkageLearner(space, S2, M1)
    ideal = np.array([learner.ideal_psnr(theta) for theta in space])
    return space, learner, ideal


class FailingLearner(object):
    def __init__(self, fail_at):
        self.fail_at = fail_at
        self.calls = 0

    def fit(self, lam, data=None, budget=1, warm_start=None):
        if self.calls == self.fail_at:
            raise RuntimeError('out of memory')
        self.calls += 1
        return CountingLearner.Model()


class CountingLearner(object):
    class Model(object):
        def evaluate_psnr(self, theta):
            return 0.0

    def __init__(self):
        self.calls = 0
        self.warm_starts = []

    def fit(self, lam, data=None, budget=1, warm_start=None):
        self.calls += 1
        self.warm_starts.append(warm_start)
        return self.Model()


class TestSamplingDistribution(unittest.TestCase):
    def test_uniform(self):
        lam = SamplingDistribution.uniform(4)
        assert_array_equal(lam.weights, [0.25] * 4)

    def test_point_mass(self):
        lam = SamplingDistribution.point_mass(3, 1)
        assert_array_equal(lam.weights, [0.0, 1.0, 0.0])

    def test_invalid_weights(self):
        for weights in ([0.5, 0.6], [-0.1, 1.1], [], [float('nan'), 1.0]):
            with self.assertRaises(ValueError):
                SamplingDistribution(weights)

    def test_weights_are_read_only(self):
        lam = SamplingDistribution.uniform(2)
        with self.assertRaises(ValueError):
            lam.weights[0] = 1.0

    def test_expectation(self):
        lam = SamplingDistribution([0.25, 0.75])
        self.assertEqual(lam.expectation([4.0, 8.0]), 7.0)


class TestDualStep(unittest.TestCase):
    def test_matching_losses_leave_lambda_unchanged(self):
        lam = SamplingDistribution([0.2, 0.3, 0.5])
        losses = [0.01, 0.02, 0.03]
        self.assertIs(dual_step(lam, losses, losses, 0.1), lam)

    def test_hand_computed_step(self):
        lam = SamplingDistribution([0.5, 0.5])
        new = dual_step(lam, [0.2, 0.1], [0.1, 0.1], 0.1)
        assert_allclose(new.weights, [6 / 11, 5 / 11], rtol=0, atol=1e-15)

    def test_negative_weights_clamp(self):
        lam = SamplingDistribution([0.1, 0.9])
        new = dual_step(lam, [0.05, 1.0], [1.0, 1.0], 0.2)
        assert_array_equal(new.weights, [0.0, 1.0])

    def test_mass_moves_toward_larger_ratio(self):
        lam = SamplingDistribution.uniform(3)
        new = dual_step(lam, [0.3, 0.1, 0.1], [0.1, 0.1, 0.1], 0.05)
        self.assertGreater(new.weights[0], lam.weights[0])
        self.assertLess(new.weights[1], lam.weights[1])

    def test_common_loss_scale_does_not_matter(self):
        lam = SamplingDistribution([0.3, 0.7])
        loss_model = np.array([0.2, 0.05])
        loss_ideal = np.array([0.1, 0.04])
        new = dual_step(lam, loss_model, loss_ideal, 0.1)
        for scale in (1024.0, 1e-3, 7.0):
            scaled = dual_step(lam, scale * loss_model, scale * loss_ideal, 0.1)
            assert_allclose(scaled.weights, new.weights, rtol=1e-12, atol=0)

    def test_difference_mode(self):
        lam = SamplingDistribution([0.5, 0.5])
        new = dual_step(lam, [0.3, 0.1], [0.1, 0.1], 1.0, mode='difference')
        assert_allclose(new.weights, [0.7 / 1.2, 0.5 / 1.2], rtol=0, atol=1e-15)

    def test_all_weights_clamped(self):
        lam = SamplingDistribution([0.5, 0.5])
        with self.assertRaises(DivergentStepError):
            dual_step(lam, [0.01, 0.01], [1.0, 1.0], 10.0)

    def test_invalid_arguments(self):
        lam = SamplingDistribution([0.5, 0.5])
        with self.assertRaises(ValueError):
            dual_step(lam, [0.1, 0.1], [0.0, 0.1], 0.1)
        with self.assertRaises(ValueError):
            dual_step(lam, [0.1, 0.1], [0.1, 0.1], 0.0)
        with self.assertRaises(ValueError):
            dual_step(lam, [0.1], [0.1], 0.1)
        with self.assertRaises(ValueError):
            dual_step(lam, [0.1, 0.1], [0.1, 0.1], 0.1, mode='sum')


class TestSchedules(unittest.TestCase):
    def test_constant(self):
        schedule = constant_schedule(0.1)
        self.assertEqual([schedule(t) for t in range(3)], [0.1] * 3)

    def test_inverse_sqrt(self):
        schedule = inverse_sqrt_schedule(0.1)
        self.assertEqual(schedule(0), 0.1)
        self.assertAlmostEqual(schedule(3), 0.05)

    def test_make_schedule(self):
        self.assertEqual(make_schedule('inverse-sqrt', 0.4)(15), 0.1)
        with self.assertRaises(ValueError):
            make_schedule('cosine')
        with self.assertRaises(ValueError):
            make_schedule('constant', -1.0)


class TestRunAdaptive(unittest.TestCase):
    def test_oracle_is_a_fixed_point(self):
        space, _, ideal = shrinkage_testbed()
        state = run_adaptive(space, OracleLearner(space, ideal), ideal, 100)
        self.assertEqual(state.t, 100)
        assert_array_equal(state.lam.weights, SamplingDistribution.uniform(len(space)).weights)
        for record in state.history:
            self.assertEqual(record.max_gap, 0.0)

    def test_iterates_stay_feasible(self):
        space, learner, ideal = shrinkage_testbed()
        state = run_adaptive(space, learner, ideal, 30, constant_schedule(0.5))
        for weights in [r.weights for r in state.history] + [state.lam.weights]:
            self.assertTrue(np.all(weights >= 0))
            self.assertLessEqual(abs(math.fsum(weights) - 1.0), 1e-12)

    def test_zero_iterations(self):
        space, _, ideal = shrinkage_testbed()
        learner = CountingLearner()
        state = run_adaptive(space, learner, ideal, 0)
        self.assertEqual(learner.calls, 0)
        self.assertEqual(state.t, 0)
        assert_array_equal(state.lam.weights, SamplingDistribution.uniform(len(space)).weights)

    def test_mass_shifts_to_easy_point(self):
        space = two_point_space()
        learner = ShrinkageLearner(space, S2, M1)
        ideal = [learner.ideal_psnr(theta) for theta in space]
        state = run_adaptive(space, learner, ideal, 3)

        easy = [r.weights[0] for r in state.history] + [state.lam.weights[0]]
        self.assertEqual(easy[0], 0.5)
        for before, after in zip(easy, easy[1:]):
            self.assertGreater(after, before)

        # one step by hand
        variances = np.array([0.01, 1.0])
        c = S2 / (S2 + 0.5 * variances.sum())
        losses = (1 - c) ** 2 * S2 + c ** 2 * variances
        ideal_losses = S2 * variances / (S2 + variances)
        weights = np.maximum(0.5 + 0.1 * (losses / ideal_losses - 1), 0)
        assert_allclose(state.history[1].weights, weights / weights.sum(), rtol=1e-12)

    def test_two_point_losses_match_closed_form(self):
        space = two_point_space()
        variances = np.array([0.01, 1.0])
        for weights in ([0.5, 0.5], [0.9, 0.1], [0.0, 1.0]):
            model = shrinkage_fit(weights, space, S2, M1)
            c = S2 / (S2 + np.dot(weights, variances))
            for theta, v in zip(space, variances):
                self.assertLess(abs(model.loss(theta) - ((1 - c) ** 2 * S2 + c ** 2 * v)), 1e-12)

    def test_gap_equalization(self):
        space, learner, ideal = shrinkage_testbed()
        baseline = gap_report(uniform_baseline(space, learner), ideal)
        for schedule in (constant_schedule(0.1), inverse_sqrt_schedule(0.1)):
            adapted = gap_report(run_adaptive(space, learner, ideal, 50, schedule), ideal)
            self.assertLess(adapted.max_gap, baseline.max_gap)
            self.assertLess(adapted.std_gap, baseline.std_gap)

    def test_uniform_training_neglects_easy_cases(self):
        space, learner, ideal = shrinkage_testbed()
        gaps = gap_report(uniform_baseline(space, learner), ideal).gaps
        self.assertGreater(gaps[0], gaps[-1])
        self.assertEqual(int(np.argmax(gaps)), 0)

    def test_point_mass_reaches_the_ideal(self):
        space = two_point_space()
        for i, theta in enumerate(space):
            model = shrinkage_fit(SamplingDistribution.point_mass(2, i), space, S2, M1)
            c, loss = shrinkage_ideal(theta, S2, M1)
            self.assertAlmostEqual(model.c, c, places=15)
            self.assertAlmostEqual(model.loss(theta), loss, places=15)

    def test_warm_start(self):
        space, _, ideal = shrinkage_testbed()
        learner = CountingLearner()
        run_adaptive(space, learner, ideal, 3)
        self.assertIsNone(learner.warm_starts[0])
        self.assertIsNotNone(learner.warm_starts[1])

        learner = CountingLearner()
        run_adaptive(space, learner, ideal, 3, warm_start=False)
        self.assertEqual(learner.warm_starts, [None] * 3)

    def test_learner_failure_names_iteration(self):
        space, _, ideal = shrinkage_testbed()
        with self.assertRaises(LearnerError) as cm:
            run_adaptive(space, FailingLearner(2), ideal, 5)
        self.assertIn('iteration 2', str(cm.exception))
        self.assertIsInstance(cm.exception.__cause__, RuntimeError)

    def test_non_finite_psnr_is_rejected(self):
        space, _, ideal = shrinkage_testbed()

        def evaluator(model, theta, index, t):
            return math.inf if index == 3 else 20.0

        with self.assertRaises(LearnerError):
            run_adaptive(space, CountingLearner(), ideal, 2, evaluator=evaluator)

    def test_approximated_model_landscape(self):
        space, learner, ideal = shrinkage_testbed()
        design = sparse_design(space, 10, make_rng(0, 'model-design'))
        state = run_adaptive(space, learner, ideal, 10, model_design=design)
        self.assertEqual(state.t, 10)
        self.assertEqual(state.model_psnr.shape, (len(space),))
        self.assertTrue(np.all(np.isfinite(state.model_psnr)))
        self.assertFalse(np.array_equal(state.lam.weights, state.history[0].weights))

    def test_worker_count_does_not_change_result(self):
        space, learner, ideal = shrinkage_testbed()
        a = run_adaptive(space, learner, ideal, 5)
        b = run_adaptive(space, learner, ideal, 5, workers=4)
        assert_array_equal(a.lam.weights, b.lam.weights)


class TestIdealLandscape(unittest.TestCase):
    def test_from_model_table_and_callable(self):
        space, learner, ideal = shrinkage_testbed()
        assert_array_equal(ideal_landscape(space, ideal), ideal)
        assert_array_equal(ideal_landscape(space, learner.ideal_psnr), ideal)
        design = sparse_design(space, 10, make_rng(0))
        model = fit_quadratic([LandscapeSample(t, learner.ideal_psnr(t)) for t in design], space=space)
        self.assertEqual(ideal_landscape(space, model).shape, (len(space),))

    def test_wrong_length(self):
        space, _, ideal = shrinkage_testbed()
        with self.assertRaises(ValueError):
            ideal_landscape(space, ideal[:-1])


class TestGapReport(unittest.TestCase):
    def test_zero_gap(self):
        report = gap_report([30.0, 25.0], [30.0, 25.0])
        self.assertEqual((report.max_gap, report.mean_gap, report.std_gap), (0.0, 0.0, 0.0))

    def test_single_point(self):
        report = gap_report([31.4], [35.3])
        self.assertAlmostEqual(report.gaps[0], 3.9, places=12)

    def test_statistics(self):
        rng = make_rng(3)
        achieved, ideal = rng.random(50) * 30, rng.random(50) * 30
        report = gap_report(achieved, ideal)
        gaps = ideal - achieved
        self.assertEqual(report.max_gap, gaps.max())
        self.assertAlmostEqual(report.mean_gap, gaps.mean(), places=12)
        self.assertAlmostEqual(report.std_gap, math.sqrt(np.mean((gaps - gaps.mean()) ** 2)), places=12)

    def test_state_without_history(self):
        state = AscentState(SamplingDistribution.uniform(2))
        with self.assertRaises(ValueError):
            gap_report(state, [30.0, 25.0])


class TestOutputs(unittest.TestCase):
    def setUp(self):
        self.tempdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def test_trajectory_and_summary(self):
        space, learner, ideal = shrinkage_testbed()
        state = run_adaptive(space, learner, ideal, 4)
        trajectory = os.path.join(self.tempdir, 'trajectory.csv')
        summary = os.path.join(self.tempdir, 'summary.json')
        write_trajectory(trajectory, state, space, 'abc')
        write_summary(summary, state, 'abc')

        with open(trajectory) as fh:
            lines = fh.read().splitlines()
        self.assertEqual(lines[0], '# config_hash=abc')
        self.assertEqual(lines[1], 'iteration,index,sigma,alpha,beta,weight,model_psnr_db,ideal_psnr_db')
        self.assertEqual(len(lines), 2 + 4 * len(space))

        with open(summary) as fh:
            data = json.load(fh)
        self.assertEqual(data['config_hash'], 'abc')
        self.assertEqual(data['iterations'], 4)
        self.assertEqual(len(data['per_iteration']), 4)
        self.assertEqual(data['final'], data['per_iteration'][-1])
        self.assertEqual(data['final_weights'], state.lam.weights.tolist())

    def test_landscape_table_roundtrip(self):
        space, learner, ideal = shrinkage_testbed()
        psnr = uniform_baseline(space, learner)
        path = os.path.join(self.tempdir, 'baseline.csv')
        write_landscape_table(path, space, psnr, ideal, 'abc')
        model_psnr, ideal_psnr, config_hash = read_landscape_table(path)
        assert_array_equal(model_psnr, psnr)
        assert_array_equal(ideal_psnr, ideal)
        self.assertEqual(config_hash, 'abc')

    def test_evaluate_landscape_subset(self):
        space, learner, _ = shrinkage_testbed()
        model = learner.fit(SamplingDistribution.uniform(len(space)))
        values = evaluate_landscape(model, space, indices=[0, 5])
        self.assertEqual(values.tolist(), [model.closed_form_psnr(space[0]), model.closed_form_psnr(space[5])])
