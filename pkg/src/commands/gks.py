"""gks: redistribute a measure into a doubling one, check it and run a curve through it"""

import logging
from argparse import Namespace

from constants import EXIT_FAILED, EXIT_OK
from cubes import build_cubes, lattice_nets
from errors import ConstructionError, NetError
from gks import build_curve, build_measure, cover, verify_doubling

log = logging.getLogger(__name__)


def lattice_system(group, mu, depth: int):
    """Lattice cubes when the atoms sit on the dyadic lattice of an abelian group, None otherwise"""

    if not group.is_abelian:
        return None
    try:
        return build_cubes(group, mu.points, lattice_nets(mu.points, depth))
    except NetError as exc:
        log.debug('Greedy nets instead of lattice cubes: %s', exc)
        return None


def gks(app, args: Namespace) -> int:
    settings = app.config.gks
    for key in ('delta', 'n1', 'rounds'):
        if getattr(args, key) is not None:
            setattr(settings, key, getattr(args, key))
    if args.skip is not None:
        settings.generation_skip = args.skip
    if args.infinite:
        settings.infinite_product = True

    mu = app.measure(args)
    depth = mu.resolution if app.depth is None else app.depth
    nu = build_measure(app.group, mu, settings, depth, lattice_system(app.group, mu, depth))
    doubling = verify_doubling(nu, settings.doubling_samples, seed=app.seed)
    if not doubling.within_bound:
        log.warning('Neighbour ratios exceed (c2 / delta)^2 times those of the base measure')

    root = nu.system.cube(nu.system.k_min, 0)
    doc = nu.to_dict()
    doc['doubling'] = doubling.to_dict()
    doc['curve'] = None
    status = EXIT_OK
    try:
        curve = build_curve(nu, root, settings, min_rounds=1)
    except ConstructionError as exc:
        log.warning("No curve: %s; lower --n1 or --skip for more generations", exc)
    else:
        doc['curve'] = curve.to_dict()
        app.record(capture_fraction=curve.capture_fraction, target=curve.target, length=curve.length)
        if not curve.meets_target:
            log.error('The curve captures %.4f of the root cube, below the target %.4f', curve.capture_fraction, curve.target)
            status = EXIT_FAILED

    if args.cover:
        doc['cover'] = cover(nu, root, settings, max_rounds=args.cover).to_dict()

    app.emit(doc)
    app.record(
        generations=nu.generations, c2=nu.c2, growth_constant=nu.growth_constant,
        ball_ratio=doubling.ball_ratio, neighbor_max=doubling.neighbor_max,
    )
    return status


def setup(app) -> None:
    parser = app.add_command('gks', gks, 'doubling measure by redistribution, its doubling report and curve (GksMeasure)')
    app.add_measure_args(parser, default='dyadic-interval')
    parser.add_argument('--delta', type=float)
    parser.add_argument('--skip', type=int, help='levels between generations')
    parser.add_argument('--n1', type=int, help='size of the first curve round, 2 delta n1 must be an integer')
    parser.add_argument('--rounds', type=int, help='curve rounds to run')
    parser.add_argument('--infinite', action='store_true', help='measure capture against the infinite product')
    parser.add_argument('--cover', type=int, metavar='ROUNDS', help='also cover the root cube with this many rounds')
