"""gen: write the measure of a scenario"""

import logging
from argparse import Namespace

from constants import EXIT_OK
from scenarios import parameters

log = logging.getLogger(__name__)


def gen(app, args: Namespace) -> int:
    if args.list_params:
        for key, value in parameters(args.scenario).items():
            print(f'{key}={value!r}')
        return EXIT_OK

    mu = app.measure(args)
    app.emit(mu)
    app.record(atoms=len(mu), total_mass=mu.total_mass, resolution=mu.resolution)
    return EXIT_OK


def setup(app) -> None:
    parser = app.add_command('gen', gen, 'generate the discrete measure of a scenario')
    app.add_measure_args(parser, default=None)
    parser.add_argument('--list-params', action='store_true', help='print the scenario parameters and their defaults')
