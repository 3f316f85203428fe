"""
Loopback trainer for the external learner protocol.

Serves requests from a unigap run whose learner.kind is "external" by
fitting the shrinkage family in closed form.  Start it before (or
alongside) the run, pointing at the same work directory and config:

    python apps/responder.py apps/data/external.json 50
"""
import logging
import sys

from unigap.cli import RunConfig
from unigap.learners import ExternalResponder, shrinkage_responder

logger = logging.getLogger(__name__)
ch = logging.StreamHandler()
ch.setLevel(logging.INFO)
logger.addHandler(ch)
logger.setLevel(logging.INFO)


if __name__ == '__main__':
    config = RunConfig.from_file(sys.argv[1])
    count = int(sys.argv[2]) if len(sys.argv) > 2 else config['ascent']['iterations']
    learner = config['learner']
    space = config.space()
    respond = shrinkage_responder(space, learner['S2'], learner['m1'], config.speckle())
    responder = ExternalResponder(learner['workdir'], space, respond, timeout=learner['timeout'])
    logger.info('serving %d requests in %s', count, learner['workdir'])
    responder.serve(count)
