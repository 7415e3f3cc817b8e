"""classify: split a measure into its rectifiable and purely unrectifiable parts"""

import logging
from argparse import Namespace

from constants import EXIT_OK
from rect import CRITERIA, attach_witnesses, classify as decompose

log = logging.getLogger(__name__)


def classify(app, args: Namespace) -> int:
    mu = app.measure(args)
    config = app.config.classify
    if args.criterion is not None:
        config.criterion = args.criterion

    decomposition = decompose(app.group, mu, app.depth, config, app.config.beta)
    if args.witness:
        decomposition = attach_witnesses(
            app.group, decomposition, app.config.witness, app.config.beta, app.config.tsp
        )

    log.info(
        'rect fraction %.4f, pure fraction %.4f (%s criterion)',
        decomposition.rect_fraction, decomposition.pure_fraction, config.criterion,
    )
    app.emit(decomposition)
    app.record(rect_fraction=decomposition.rect_fraction, pure_fraction=decomposition.pure_fraction)
    return EXIT_OK


def setup(app) -> None:
    parser = app.add_command('classify', classify, 'label atoms rect or pure (Decomposition)')
    app.add_measure_args(parser)
    parser.add_argument('--criterion', choices=sorted(CRITERIA))
    parser.add_argument('--witness', action='store_true', help='build witness curves for the rect part')
