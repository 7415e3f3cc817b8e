"""verify: run the invariant suites on fresh instances, without pytest

Every suite rebuilds small instances from the run seed and goes through the
same check_* functions the library runs on its own results. A suite fails
when a check raises or reports a broken property.
"""

import logging
from argparse import Namespace
from dataclasses import dataclass, field
from time import perf_counter
from typing import Callable

import numpy as np

from carnot import CarnotGroup, abelian, engel, engel_product, heisenberg, heisenberg_product
from config import GksSettings
from constants import EXIT_FAILED, EXIT_OK
from cubes import build_cubes, build_nets, check_cubes, check_nets, lattice_nets
from errors import CarnotRectError
from gks import build_curve, build_measure, check_families, non_central_mass
from scenarios import generate
from trees import CubeTree, leaves, localize, sum_function_all
from tsp import build_graphs, clouds_from_nets, fit_cloud_lines, ledger_check, realize_curve, validate_clouds
from utils import make_rng

log = logging.getLogger(__name__)

ARITHMETIC_TOL = 1e-9


@dataclass
class SuiteResult:
    name: str
    passed: bool = True
    failures: list[str] = field(default_factory=list)
    measured: dict[str, float] = field(default_factory=dict)
    runtime: float = 0.0

    def fail(self, message: str) -> None:
        self.passed = False
        self.failures.append(message)
        log.error('%s: %s', self.name, message)

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'passed': self.passed,
            'failures': self.failures,
            'measured': self.measured,
            'runtime': self.runtime,
        }


def arithmetic_suite(app, result: SuiteResult, size: int) -> None:
    """Associativity, inverses and the closed forms of H1 and Engel"""

    rng = make_rng(app.seed)
    for spec in (abelian(3), heisenberg(1), engel()):
        group = CarnotGroup(spec)
        a, b, c = (rng.standard_normal((size, spec.total_dim)) for _ in range(3))
        left = group.multiply(group.multiply(a, b), c)
        right = group.multiply(a, group.multiply(b, c))
        error = float(np.abs(left - right).max())
        identity = float(np.abs(group.multiply(a, group.inverse(a))).max())
        result.measured[f'{spec.name}_associativity'] = error
        if error > ARITHMETIC_TOL or identity > ARITHMETIC_TOL:
            result.fail(f'{spec.name}: associativity error {error:.3g}, inverse error {identity:.3g}')

        closed = {'h1': heisenberg_product, 'engel': engel_product}.get(spec.name)
        if closed is not None and not np.allclose(group.multiply(a, b), closed(a, b), atol=1e-12):
            result.fail(f'{spec.name}: product disagrees with its closed form')


def cubes_suite(app, result: SuiteResult, size: int) -> None:
    """Net and cube properties over random samples of the run group"""

    rng = make_rng(app.seed)
    group = app.group
    worst = 0.0
    for _ in range(3):
        points = rng.uniform(-1, 1, (size, group.dim))
        nets = build_nets(group, points, 0, 6)
        check_nets(group, points, nets)
        report = check_cubes(build_cubes(group, points, nets))
        worst = max(worst, report.outer_constant)
        if not (report.partition and report.nesting and report.inheritance and report.origin):
            result.fail('a cube system breaks partition, nesting, inheritance or the origin')
        if not report.roundness:
            log.warning('Roundness: outer constant %.4g, %s inner violations', report.outer_constant, len(report.inner_violations))
    result.measured['outer_constant'] = worst


def localize_suite(app, result: SuiteResult, size: int) -> None:
    """Localization guarantees on random weights over the unit square grid"""

    rng = make_rng(app.seed)
    group = CarnotGroup(abelian(2))
    mu = generate('lebesgue-grid', group, app.seed, depth=4)
    system = build_cubes(group, mu.points, lattice_nets(mu.points, 4))
    tree = CubeTree.full(system, system.cube(0, 0))
    for _ in range(size):
        b = {key: float(rng.exponential()) for key in tree.members if rng.random() < 0.5}
        sums = sum_function_all(tree, b, mu)[leaves(tree)]
        localize(tree, b, mu, float(np.median(sums)) + 1e-9, float(rng.uniform(0.05, 0.95)))
    result.measured['instances'] = size


def tsp_suite(app, result: SuiteResult, size: int) -> None:
    """Curve through a planar segment: every vertex visited, bounded length"""

    group = CarnotGroup(abelian(2))
    points = np.zeros((size, 2))
    points[:, 0] = (np.arange(size) + 0.5) / size
    seq = fit_cloud_lines(clouds_from_nets(group, points, 0, 7))
    if not validate_clouds(seq).passed:
        result.fail('the nested nets of a segment break the cloud hypotheses')
    graph = build_graphs(seq)
    polyline = realize_curve(graph)
    gap = polyline.gap(seq.clouds[-1])
    result.measured.update(length=polyline.length, gap=gap, ledger_constant=ledger_check(graph).constant)
    if gap > 0 or polyline.length > 3.0:
        result.fail(f'segment curve has gap {gap:.3g} and length {polyline.length:.4g}')


def gks_suite(app, result: SuiteResult, size: int) -> None:
    """Mass conservation, curve families and the non central mass on a dyadic interval"""

    group = CarnotGroup(abelian(1))
    mu = generate('dyadic-interval', group, app.seed, depth=8)
    system = build_cubes(group, mu.points, lattice_nets(mu.points, 8))
    settings = GksSettings(delta=0.25, n1=2, generation_skip=1)
    nu = build_measure(group, mu, settings, system=system)
    root = system.cube(0, 0)
    check_families(nu, root, 6)
    non_central_mass(nu, root, 3)
    curve = build_curve(nu, root, settings)
    result.measured.update(capture_fraction=curve.capture_fraction, target=curve.target)
    if not curve.meets_target:
        result.fail(f'curve captures {curve.capture_fraction:.4f}, below {curve.target:.4f}')


SUITES: dict[str, tuple[Callable, int]] = {
    'arithmetic': (arithmetic_suite, 10_000),
    'cubes': (cubes_suite, 300),
    'localize': (localize_suite, 20),
    'tsp': (tsp_suite, 200),
    'gks': (gks_suite, 1),
}


def run_suite(app, name: str) -> SuiteResult:
    suite, size = SUITES[name]
    result = SuiteResult(name)
    start = perf_counter()
    try:
        suite(app, result, size)
    except CarnotRectError as exc:
        result.fail(f'{type(exc).__name__}: {exc}')
    result.runtime = perf_counter() - start
    log.info('Suite %s %s in %.2fs', name, 'passed' if result.passed else 'FAILED', result.runtime)
    return result


def verify(app, args: Namespace) -> int:
    results = [run_suite(app, name) for name in args.suite or SUITES]
    passed = all(result.passed for result in results)
    app.emit({'passed': passed, 'suites': [result.to_dict() for result in results]})
    app.record(**{f'{result.name}_passed': result.passed for result in results})
    return EXIT_OK if passed else EXIT_FAILED


def setup(app) -> None:
    parser = app.add_command('verify', verify, 'run the invariant suites')
    parser.add_argument('--suite', action='append', choices=sorted(SUITES), help='suite to run, repeatable, all by default')
