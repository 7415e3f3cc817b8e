"""curve: a curve through the nested nets of a measure, or through a cloud file"""

import logging
from argparse import Namespace
from dataclasses import dataclass
from typing import TextIO

from constants import EXIT_FAILED, EXIT_OK
from serialize import read_clouds
from tsp import (
    CloudReport,
    CurveGraph,
    LedgerReport,
    Polyline,
    build_graphs,
    clouds_from_nets,
    fit_cloud_lines,
    ledger_check,
    realize_curve,
    validate_clouds,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CurveRun:
    clouds: CloudReport
    graph: CurveGraph
    polyline: Polyline
    ledger: LedgerReport
    gap: float|None = None

    @property
    def length_bound(self) -> float:
        return self.graph.seq.length_bound()

    @property
    def length_constant(self) -> float:
        return self.polyline.length / self.length_bound

    def to_dict(self) -> dict:
        return {
            'validation': self.clouds.to_dict(),
            'graph': self.graph.to_dict(),
            'curve': self.polyline.to_dict(),
            'ledger': self.ledger.to_dict(),
            'length': self.polyline.length,
            'length_bound': self.length_bound,
            'length_constant': self.length_constant,
            'gap': self.gap,
        }

    def to_csv(self, file: TextIO) -> None:
        self.polyline.to_csv(file)


def curve(app, args: Namespace) -> int:
    tsp = app.config.tsp
    if args.clouds is not None:
        seq, atoms = read_clouds(args.clouds, app.group), None
    else:
        mu = app.measure(args)
        depth = mu.resolution if app.depth is None else app.depth
        seq = clouds_from_nets(app.group, mu.points, args.k0, depth, c_star=tsp.c_star)
        atoms = mu.points

    seq = fit_cloud_lines(seq, max_atoms=app.config.beta.max_atoms)
    clouds = validate_clouds(seq, tsp.eps)
    if not clouds.passed:
        log.warning('The clouds break the separation or proximity hypotheses, the length bound is not certified')

    graph = build_graphs(seq, tsp.eps, tsp.bilipschitz_limit)
    polyline = realize_curve(graph)
    gap = None if atoms is None else polyline.gap(atoms)
    run = CurveRun(clouds, graph, polyline, ledger_check(graph), gap)
    app.emit(run)
    app.record(
        length=run.polyline.length, length_bound=run.length_bound,
        length_constant=run.length_constant, ledger_constant=run.ledger.constant,
    )
    return EXIT_OK if clouds.passed or not args.strict else EXIT_FAILED


def setup(app) -> None:
    parser = app.add_command('curve', curve, 'curve through the clouds of a measure (CurveGraph and Polyline)')
    app.add_measure_args(parser)
    parser.add_argument('--clouds', help='cloud sequence JSON used instead of a measure')
    parser.add_argument('--k0', type=int, default=0, help='level of the first cloud')
    parser.add_argument('--strict', action='store_true', help='fail when the cloud hypotheses do not hold')
