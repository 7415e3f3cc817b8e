"""beta: beta numbers of every cube of a measure"""

import logging
from argparse import Namespace

from beta import BetaEngine
from constants import EXIT_OK
from rect import measure_cubes

log = logging.getLogger(__name__)


def beta(app, args: Namespace) -> int:
    mu = app.measure(args)
    config = app.config.beta
    if args.workers is not None:
        config.workers = args.workers
    if args.refine:
        config.refine = True

    system = measure_cubes(app.group, mu, app.depth)
    report = BetaEngine(mu, system, config).report()
    worst = max((record.beta_star for record in report), default=0.0)
    log.info('Largest beta* over %s cubes: %.4g', len(report), worst)

    app.emit(report)
    app.record(cubes=len(report), beta_star_max=worst)
    return EXIT_OK


def setup(app) -> None:
    parser = app.add_command('beta', beta, 'beta numbers of every cube (BetaReport)')
    app.add_measure_args(parser)
    parser.add_argument('--workers', type=int, help='threads evaluating cubes')
    parser.add_argument('--refine', action='store_true', help='polish the best candidate line')
