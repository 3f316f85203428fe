"""
Shrinkage testbed: uniform training against dual ascent.

Typically this is run to verify that changes to the scheduler still
equalize the gap.  Prints max/mean/std gap for the uniform baseline and
for constant and decaying step sizes, plus the wall time of each run.

    python apps/benchmark.py [iterations]
"""
import logging
import sys
import time

import unigap
from unigap import (ShrinkageLearner, SpecificationSpace, gap_report, inverse_sqrt_schedule, constant_schedule,
                    run_adaptive, uniform_baseline)

logger = logging.getLogger(__name__)
ch = logging.StreamHandler()
ch.setLevel(logging.INFO)
logger.addHandler(ch)
logger.setLevel(logging.INFO)

S2 = 0.25
M1 = 0.5


def show(name, report, seconds):
    logger.info('%-14s max %7.4f  mean %7.4f  std %7.4f dB  (%.3fs)',
                name, report.max_gap, report.mean_gap, report.std_gap, seconds)


if __name__ == '__main__':
    iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 50
    logger.info('unigap %s', '.'.join(str(v) for v in unigap.__version__))

    for preset in ('poisson-gaussian', 'speckle-poisson-gaussian'):
        space = SpecificationSpace.from_preset(preset)
        learner = ShrinkageLearner(space, S2, M1)
        ideal = [learner.ideal_psnr(theta) for theta in space]
        logger.info('%s: %d grid points', preset, len(space))

        start = time.time()
        baseline = gap_report(uniform_baseline(space, learner), ideal)
        show('uniform', baseline, time.time() - start)

        for name, schedule in (('constant', constant_schedule(0.1)), ('inverse-sqrt', inverse_sqrt_schedule(0.1))):
            start = time.time()
            state = run_adaptive(space, learner, ideal, iterations, schedule)
            show(name, gap_report(state, ideal), time.time() - start)
