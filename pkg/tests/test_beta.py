"""Candidate lines, beta numbers, Jones functions and densities"""

import io

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings

from beta import (
    BetaEngine,
    beta_integral,
    jones,
    jones_all,
    jones_partials,
    line_candidates,
    lower_density,
    refine_line,
    upper_doubling,
)
from carnot import CarnotGroup, HorizontalLine, abelian, heisenberg
from config import BetaConfig, Config
from constants import Variant
from cubes import build_cubes, build_nets
from errors import GeometryError, SpecError
from trees import DiscreteMeasure
from conftest import SEEDS


def measure_and_system(group: CarnotGroup, points, weights=None, depth: int=4):
    points = np.asarray(points, dtype=float)
    weights = np.full(len(points), 1 / len(points)) if weights is None else weights
    mu = DiscreteMeasure(group.spec, points, weights, depth)
    return mu, build_cubes(group, points, build_nets(group, points, 0, depth))


def on_x_axis(group: CarnotGroup, n: int) -> np.ndarray:
    points = np.zeros((n, group.dim))
    points[:, 0] = (np.arange(n) + 0.5) / n
    return points


def perpendicular(points: np.ndarray, line: HorizontalLine) -> np.ndarray:
    w = points - line.base
    return np.linalg.norm(w - np.outer(w @ line.direction, line.direction), axis=1)


class TestCandidates:

    def test_two_atoms(self, plane):
        lines = line_candidates(plane, [[0.0, 0.0], [1.0, 1.0]], [1.0, 1.0])
        assert len(lines) >= 2
        assert 'pair' in lines.provenance and 'pca' in lines.provenance
        assert all(np.linalg.norm(line.direction) == pytest.approx(1.0) for line in lines)

    def test_collinear_atoms_give_exact_line(self, plane):
        points = np.outer(np.linspace(-1, 1, 9), [3.0, 4.0]) / 5 + [0.2, -0.1]
        lines = line_candidates(plane, points, np.ones(9))
        assert min(perpendicular(points, line).max() for line in lines) < 1e-12

    def test_coincident_projections(self, h1):
        points = np.array([[0.3, 0.2, z] for z in (-1.0, 0.0, 2.0)])
        lines = line_candidates(h1, points, np.ones(3))
        assert lines.provenance == ('pca',)
        npt.assert_array_equal(lines[0].direction, [1.0, 0.0])

    def test_pair_budget(self, plane):
        points = np.random.default_rng(2).uniform(-1, 1, (7, 2))
        every = line_candidates(plane, points, np.ones(7), max_atoms=None)
        assert every.provenance.count('pair') == 21
        assert line_candidates(plane, points, np.ones(7), max_atoms=3).provenance.count('pair') == 3
        assert Config.from_dict({'beta': {'max_atoms': None}}).beta.max_atoms is None

    def test_no_atoms(self, plane):
        with pytest.raises(GeometryError):
            line_candidates(plane, np.zeros((0, 2)), [])

    def test_deterministic(self, h1):
        points = np.random.default_rng(4).uniform(-1, 1, (30, 3))
        first = line_candidates(h1, points, np.ones(30))
        second = line_candidates(h1, points, np.ones(30))
        for a, b in zip(first, second):
            npt.assert_array_equal(a.base, b.base)
            npt.assert_array_equal(a.direction, b.direction)

    def test_refinement_only_descends(self, plane):
        points = np.random.default_rng(1).normal(size=(40, 2)) * [1.0, 0.1]

        def objective(line):
            return float((perpendicular(points, line) ** 2).mean())

        start = HorizontalLine.through([0.0, 0.5], [1.0, 1.0])
        refined, value = refine_line(plane, start, objective, scale=1.0)
        assert value < objective(start)
        assert value == pytest.approx(objective(refined))
        assert refined.provenance == 'refined'

        best, _ = refine_line(plane, refined, objective, scale=1.0)
        assert objective(best) <= value


class TestBetaIntegral:

    def test_atoms_on_line(self, group):
        line = HorizontalLine.through(np.zeros(group.dim), np.eye(group.spec.layer_dims[0])[0])
        points = line.point_at(group, np.linspace(-1, 1, 7))
        assert beta_integral(group, points, np.ones(7), line, 2.0) == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_offsets(self, plane):
        line = HorizontalLine.through([0.0, 0.0], [1.0, 0.0])
        value = beta_integral(plane, [[0.3, 1.0], [-0.2, -1.0]], [0.5, 0.5], line, 4.0)
        assert value == pytest.approx(1 / 4)

    def test_massless_and_bad_diameter(self, plane):
        line = HorizontalLine.through([0.0, 0.0], [1.0, 0.0])
        assert beta_integral(plane, np.zeros((0, 2)), [], line, 1.0) == 0.0
        with pytest.raises(GeometryError):
            beta_integral(plane, [[0.0, 1.0]], [1.0], line, 0.0)

    @given(SEEDS)
    @settings(max_examples=25, deadline=None)
    def test_matches_direct_sum(self, seed):
        plane = CarnotGroup(abelian(2))
        rng = np.random.default_rng(seed)
        points = rng.uniform(-1, 1, (20, 2))
        weights = rng.uniform(0.1, 1.0, 20)
        line = HorizontalLine.through(rng.uniform(-1, 1, 2), rng.normal(size=2))
        r = float(rng.uniform(0.5, 3.0))

        expected = np.sqrt(sum(w * (d / r) ** 2 for w, d in zip(weights, perpendicular(points, line))) / weights.sum())
        assert beta_integral(plane, points, weights, line, r) == pytest.approx(expected, rel=1e-12)

    def test_heisenberg_against_dense_grid(self, h1):
        rng = np.random.default_rng(8)
        points = rng.uniform(-0.5, 0.5, (12, 3))
        weights = rng.uniform(0.5, 1.0, 12)
        line = HorizontalLine.through([0.1, -0.1, 0.05], [0.6, 0.8])
        r = 1.5

        ts = np.linspace(-4, 4, 40001)
        on_line = line.point_at(h1, ts)
        brute = []
        for z in points:
            layers = h1.layer_distances(z[None, :], on_line)
            brute.append(np.min((layers[:, 0] / r) ** 2 + (layers[:, 1] / r) ** 4))
        expected = (weights @ np.array(brute) / weights.sum()) ** 0.25

        value = beta_integral(h1, points, weights, line, r)
        assert value <= expected * (1 + 1e-6) + 1e-12
        assert value >= expected * (1 - 1e-3)

    def test_left_invariance(self, h1):
        rng = np.random.default_rng(2)
        points = rng.uniform(-1, 1, (15, 3))
        line = HorizontalLine.through(rng.uniform(-1, 1, 3), [1.0, 2.0])
        g = np.array([0.7, -1.2, 0.4])

        before = beta_integral(h1, points, np.ones(15), line, 2.0)
        after = beta_integral(h1, h1.multiply(g, points), np.ones(15), line.translated(h1, g), 2.0)
        assert after == pytest.approx(before, rel=1e-6)

    @pytest.mark.parametrize('t', [0.25, 3.0])
    def test_dilation_covariance(self, h1, t):
        rng = np.random.default_rng(3)
        points = rng.uniform(-1, 1, (15, 3))
        line = HorizontalLine.through(rng.uniform(-1, 1, 3), [2.0, -1.0])

        before = beta_integral(h1, points, np.ones(15), line, 2.0)
        after = beta_integral(h1, h1.dilate(t, points), np.ones(15), line.dilated(h1, t), 2.0 * t)
        assert after == pytest.approx(before, rel=1e-6)


class TestEngine:

    @pytest.fixture(scope='class')
    def h1_engine(self):
        group = CarnotGroup(heisenberg(1))
        rng = np.random.default_rng(6)
        points = rng.uniform(-0.5, 0.5, (40, 3))
        mu, system = measure_and_system(group, points, rng.uniform(0.5, 1.5, 40), depth=3)
        return BetaEngine(mu, system)

    @pytest.fixture(scope='class')
    def plane_engine(self):
        group = CarnotGroup(abelian(2))
        rng = np.random.default_rng(7)
        points = rng.uniform(-1, 1, (150, 2))
        mu, system = measure_and_system(group, points, depth=4)
        return BetaEngine(mu, system)

    def test_mismatched_measure(self, plane):
        mu, system = measure_and_system(plane, on_x_axis(plane, 8), depth=2)
        other = DiscreteMeasure(mu.spec, mu.points + 1, mu.weights, 2)
        with pytest.raises(SpecError):
            BetaEngine(other, system)

    @pytest.mark.parametrize('spec', [abelian(2), heisenberg(1)])
    def test_horizontal_line_data(self, spec):
        group = CarnotGroup(spec)
        mu, system = measure_and_system(group, on_x_axis(group, 32), depth=4)
        report = BetaEngine(mu, system).report()
        assert all(r.beta_star == 0 and r.beta_star_star == 0 and r.beta_ball == 0 for r in report)
        assert not jones_all(report, system, Variant.STAR).any()

    def test_single_atom(self, h1):
        mu, system = measure_and_system(h1, [[0.2, 0.1, 0.3]], depth=3)
        report = BetaEngine(mu, system).report()
        assert jones_all(report, system, Variant.TILDE).tolist() == [0.0]
        assert jones(report, system, 0, Variant.STAR) == 0.0

    def test_variant_order(self, h1_engine, plane_engine):
        for engine in (h1_engine, plane_engine):
            for record in engine.report():
                assert record.beta_star <= record.beta_star_star
                assert all(value <= record.beta_star for value in record.beta_star_c.values())
                assert min(record.beta_star, record.beta_ball) >= 0

    def test_jones_order(self, plane_engine):
        report = plane_engine.report()
        system = plane_engine.system
        star = jones_all(report, system, Variant.STAR)
        assert np.all(jones_all(report, system, Variant.STAR_C, 2 ** -3) <= star + 1e-12)
        assert np.all(star <= jones_all(report, system, Variant.STAR_STAR) + 1e-12)

    def test_truncated_variant(self, plane_engine):
        cube = plane_engine.system.cube(2, 0)
        record = plane_engine.record(cube)
        for c in (2 ** -1, 2 ** -5):
            assert plane_engine.beta_star_c(cube, c) == pytest.approx(record.beta_star_c[c], rel=1e-12)
        assert plane_engine.beta_star_c(cube, 1e9) == 0.0

    def test_dense_set_shrinks_with_c(self, plane_engine):
        cube = plane_engine.system.cube(3, 1)
        cubes = plane_engine.near(cube)
        dens = np.array([plane_engine.densities(r.level)[r.index] for r in cubes])
        grid = sorted(plane_engine.config.c_grid)
        for low, high in zip(grid, grid[1:]):
            assert set(np.flatnonzero(dens >= high)) <= set(np.flatnonzero(dens >= low))

    def test_more_candidates_never_hurt(self, plane_engine):
        cube = plane_engine.system.cube(3, 2)
        cubes = plane_engine.near(cube)
        dens = np.minimum(1.0, [plane_engine.densities(r.level)[r.index] for r in cubes])
        lines = plane_engine.candidates(cube)
        few = plane_engine.ball_powers(cubes, lines.lines[:2])
        extra = HorizontalLine.through([0.0, 0.0], [1.0, -1.0])
        many = plane_engine.ball_powers(cubes, lines.extended(extra))

        best_few = (few * dens[:, None]).max(axis=0).min()
        best_many = (many * dens[:, None]).max(axis=0).min()
        assert best_many <= best_few

    def test_star_bounded_by_every_candidate(self, h1_engine):
        cube = h1_engine.system.cube(1, 0)
        record = h1_engine.record(cube)
        cubes = h1_engine.near(cube)
        dens = np.minimum(1.0, [h1_engine.densities(r.level)[r.index] for r in cubes])
        for line in h1_engine.candidates(cube):
            bound = max(
                h1_engine.beta_integral(r, line, ball=True) ** 4 * d for r, d in zip(cubes, dens)
            ) ** 0.25
            assert record.beta_star <= bound * (1 + 1e-9) + 1e-15

    @given(SEEDS)
    @settings(max_examples=10, deadline=None)
    def test_candidates_match_line_grid(self, seed):
        # every ball 2B_R holds every atom here, so the weighted total least
        # squares line is optimal and no grid line beats the candidates
        plane = CarnotGroup(abelian(2))
        rng = np.random.default_rng(seed)
        points = rng.uniform(-0.05, 0.05, (int(rng.integers(3, 21)), 2))
        weights = rng.uniform(0.5, 1.0, len(points))
        mu, system = measure_and_system(plane, points, weights, depth=3)
        engine = BetaEngine(mu, system)
        cube = system.cube(3, 0)
        cubes = engine.near(cube)
        dens = np.minimum(1.0, [engine.densities(r.level)[r.index] for r in cubes])

        angles = np.linspace(0, np.pi, 90, endpoint=False)
        offsets = np.linspace(-0.08, 0.08, 81)
        grid = [
            HorizontalLine.through(o * np.array([-np.sin(a), np.cos(a)]), [np.cos(a), np.sin(a)])
            for a in angles for o in offsets
        ]
        brute = (engine.ball_powers(cubes, grid) * dens[:, None]).max(axis=0).min() ** 0.5
        assert engine.record(cube).beta_star <= 1.5 * brute + 1e-15

    def test_refinement_never_increases(self, h1_engine):
        refined = BetaEngine(h1_engine.mu, h1_engine.system, BetaConfig(refine=True, refine_maxiter=40))
        for cube in h1_engine.system.cubes(2)[:4]:
            plain, better = h1_engine.record(cube), refined.record(cube)
            assert better.beta_star <= plain.beta_star
            assert better.beta_star_star <= plain.beta_star_star
            assert better.beta_ball <= plain.beta_ball
            assert better.candidates >= plain.candidates

    def test_parallel_report_matches(self, plane_engine):
        parallel = BetaEngine(plane_engine.mu, plane_engine.system, BetaConfig(workers=3))
        cubes = plane_engine.system.cubes(3)
        one = plane_engine.report(cubes)
        many = parallel.report(cubes)
        assert [r.cube.key for r in one] == [r.cube.key for r in many]
        assert [r.beta_star for r in one] == [r.beta_star for r in many]

    def test_partials_are_cumulative(self, plane_engine):
        report = plane_engine.report()
        levels, partial = jones_partials(report, plane_engine.system, Variant.STAR)
        assert levels.tolist() == report.levels
        assert np.all(np.diff(partial, axis=0) >= 0)
        npt.assert_allclose(partial[-1], jones_all(report, plane_engine.system, Variant.STAR))
        x = 11
        assert jones(report, plane_engine.system, x, Variant.STAR) == pytest.approx(partial[-1, x])

    def test_query_outside(self, plane_engine):
        report = plane_engine.report(plane_engine.system.cubes(0))
        with pytest.raises(GeometryError):
            jones(report, plane_engine.system, [50.0, 50.0], Variant.STAR)

    def test_exports(self, plane_engine):
        report = plane_engine.report(plane_engine.system.cubes(1))
        buffer = io.StringIO()
        report.to_csv(buffer)
        header = buffer.getvalue().splitlines()[0].split(',')
        assert header[:5] == ['cube', 'level', 'beta_star', 'beta_star_star', 'beta_ball']
        assert len(buffer.getvalue().splitlines()) == len(report) + 1

        doc = report.to_dict()
        assert doc['step'] == 1 and len(doc['cubes']) == len(report)
        assert set(doc['cubes'][0]['beta_star_c']) == {f'{c:g}' for c in report.c_grid}


class TestDensity:

    def test_segment(self, plane):
        points = on_x_axis(plane, 1000)
        mu = DiscreteMeasure(plane.spec, points, np.full(1000, 1e-3), 8)
        assert lower_density(plane, mu, [0.5, 0.0]) == pytest.approx(0.5, rel=0.1)

    def test_single_atom(self, h1):
        mu = DiscreteMeasure(h1.spec, [[0.0, 0.0, 0.0]], [3.0], 6)
        assert lower_density(h1, mu, 0) == pytest.approx(1.5)
        assert upper_doubling(h1, mu, 0) == 1.0

    def test_monotone_in_depth(self, plane):
        rng = np.random.default_rng(0)
        mu = DiscreteMeasure(plane.spec, rng.uniform(-1, 1, (200, 2)), np.ones(200), 8)
        values = [lower_density(plane, mu, 5, depth) for depth in range(9)]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_doubling_of_uniform_segment(self, plane):
        mu = DiscreteMeasure(plane.spec, on_x_axis(plane, 1024), np.ones(1024), 8)
        assert 1.0 <= upper_doubling(plane, mu, 512) <= 2.5
