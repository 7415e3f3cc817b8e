"""Classification, witness curves and the necessity check"""

import io

import numpy as np
import numpy.testing as npt
import pytest

from beta import BetaEngine
from carnot import CarnotGroup, abelian, heisenberg
from config import ClassifyConfig, WitnessConfig
from constants import Label
from errors import ConstructionError, LocalizationError
from rect import (
    attach_witnesses,
    build_witness_curves,
    classify,
    density_trees,
    fit_line,
    measure_cubes,
    necessity_check,
    qualifying_atoms,
    select_points,
)
from trees import DiscreteMeasure, density_tree
from tsp import Polyline


def segment_measure(group: CarnotGroup, n: int=128, depth: int=5) -> DiscreteMeasure:
    points = np.zeros((n, group.dim))
    points[:, 0] = (np.arange(n) + 0.5) / n
    return DiscreteMeasure(group.spec, points, np.full(n, 1 / n), depth, 'segment')


def grid_measure(group: CarnotGroup, side: int, depth: int) -> DiscreteMeasure:
    ticks = (np.arange(side) + 0.5) / side
    points = np.array([[x, y] for x in ticks for y in ticks])
    return DiscreteMeasure(group.spec, points, np.full(len(points), 1 / len(points)), depth, 'grid')


def four_corner_cantor(group: CarnotGroup, generations: int, depth: int) -> DiscreteMeasure:
    points = np.zeros((1, 2))
    for j in range(generations):
        step = 4.0 ** -(j + 1) * 3
        corners = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float) * step
        points = (points[:, None, :] + corners[None, :, :]).reshape(-1, 2)
    return DiscreteMeasure(group.spec, points, np.full(len(points), 1 / len(points)), depth, 'cantor')


@pytest.fixture(scope='module')
def plane_segment():
    group = CarnotGroup(abelian(2))
    return group, segment_measure(group)


@pytest.fixture(scope='module')
def noisy():
    """Random atoms of the unit square with their cubes and engine"""

    group = CarnotGroup(abelian(2))
    points = np.random.default_rng(7).uniform(0, 1, (60, 2))
    mu = DiscreteMeasure(group.spec, points, np.full(60, 1 / 60), 3)
    system = measure_cubes(group, mu)
    return group, mu, system, BetaEngine(mu, system)


class TestClassify:

    def test_segment_is_rectifiable(self, plane_segment):
        group, mu = plane_segment
        decomposition = classify(group, mu)
        assert decomposition.rect.all()
        assert decomposition.rect_mass == pytest.approx(mu.total_mass)
        assert decomposition.pure_mass == 0.0
        assert not decomposition.partials.any()

    @pytest.mark.parametrize('criterion', ['all-cubes', 'doubling'])
    def test_other_criteria_on_segment(self, plane_segment, criterion):
        group, mu = plane_segment
        decomposition = classify(group, mu, config=ClassifyConfig(criterion=criterion))
        assert decomposition.rect.all()
        assert (decomposition.doubling is not None) == (criterion == 'doubling')

    def test_lebesgue_grid_is_pure(self, plane):
        mu = grid_measure(plane, 16, 4)
        decomposition = classify(plane, mu)
        assert decomposition.pure_fraction >= 0.95
        assert np.all(decomposition.slopes > 0)

    def test_single_atom(self, plane):
        mu = DiscreteMeasure(plane.spec, [[0.2, 0.4]], [1.0], 6)
        decomposition = classify(plane, mu)
        assert decomposition.labels == [Label.RECT]
        assert decomposition.density[0] == pytest.approx(0.5)

    def test_refuses_shallow_depth(self, plane_segment):
        group, mu = plane_segment
        with pytest.raises(ConstructionError):
            classify(group, mu, depth=3)
        with pytest.raises(ValueError):
            classify(group, mu, config=ClassifyConfig(criterion='median'))

    def test_labels_partition_mass(self, plane):
        mu = grid_measure(plane, 16, 4)
        decomposition = classify(plane, mu)
        assert decomposition.rect_mass + decomposition.pure_mass == pytest.approx(mu.total_mass, rel=1e-12)
        assert len(decomposition.labels) == len(mu)

    def test_deterministic(self, plane_segment):
        group, mu = plane_segment
        first, second = classify(group, mu), classify(group, mu)
        npt.assert_array_equal(first.partials, second.partials)
        npt.assert_array_equal(first.rect, second.rect)
        npt.assert_array_equal(first.density, second.density)

    def test_translation_and_dilation(self, plane_segment):
        group, mu = plane_segment
        labels = classify(group, mu).rect
        moved = mu.translate(group, [0.25, 0.3])
        npt.assert_array_equal(classify(group, moved).rect, labels)
        npt.assert_array_equal(classify(group, mu.dilate(group, 2.0)).rect, labels)

    def test_grid_constants(self, plane_segment):
        group, mu = plane_segment
        decomposition = classify(group, mu)
        # the lower density of every atom is 1/2, reached by the unit ball
        assert decomposition.density == pytest.approx(np.full(len(mu), 0.5))
        assert np.all(decomposition.grid_c == 2.0 ** -3)

    def test_exports(self, plane_segment):
        group, mu = plane_segment
        decomposition = classify(group, mu)
        doc = decomposition.to_dict()
        assert len(doc['atoms']) == len(mu)
        assert doc['atoms'][0]['label'] == 'rect'
        assert len(doc['atoms'][0]['jones_partials']) == len(decomposition.levels)
        assert doc['thresholds']['slope_max'] == pytest.approx(1e-9)

        buffer = io.StringIO()
        decomposition.to_csv(buffer)
        lines = buffer.getvalue().splitlines()
        assert lines[0] == 'x0,x1,weight,label'
        assert len(lines) == len(mu) + 1

    def test_parts(self, plane_segment):
        group, mu = plane_segment
        decomposition = classify(group, mu)
        assert len(decomposition.part(Label.RECT)) == len(mu)

    @pytest.mark.slow
    def test_vertical_segment_in_heisenberg(self):
        group = CarnotGroup(heisenberg(1))
        points = np.zeros((128, 3))
        points[:, 2] = (np.arange(128) + 0.5) / 128
        mu = DiscreteMeasure(group.spec, points, np.full(128, 1 / 128), 5)
        assert classify(group, mu).pure_fraction >= 0.95

    @pytest.mark.slow
    def test_four_corner_cantor(self, plane):
        mu = four_corner_cantor(plane, 4, 6)
        assert classify(plane, mu).pure_fraction >= 0.9


class TestDensityTrees:

    def test_segment_single_tree(self, plane_segment):
        group, mu = plane_segment
        system = measure_cubes(group, mu)
        trees = density_trees(system, mu, 2.0 ** -4)
        assert len(trees) == 1 and trees[0].top == (0, 0)

    def test_segment_tops_below_level_zero(self, plane_segment):
        group, mu = plane_segment
        system = measure_cubes(group, mu)
        # mu(2B) / diam 2B at level 0 is 3/32 < 0.1
        trees = density_trees(system, mu, 0.1)
        assert [tree.top[0] for tree in trees] == [1, 1]

    def test_no_dense_cube(self, plane_segment):
        group, mu = plane_segment
        assert density_trees(measure_cubes(group, mu), mu, 1e6) == []
        with pytest.raises(ConstructionError):
            build_witness_curves(group, mu, WitnessConfig(c=1e6))

    @pytest.mark.parametrize('c', [2.0 ** -6, 2.0 ** -4, 0.1])
    def test_qualifying_atoms_shrink_with_c(self, noisy, c):
        _, mu, system, _ = noisy
        loose = set(qualifying_atoms(system, mu, c).tolist())
        strict = set(qualifying_atoms(system, mu, 2 * c).tolist())
        assert strict <= loose


class TestPointSelection:

    def test_fit_line_attains_beta(self, noisy):
        _, _, system, engine = noisy
        cube = system.cube(2, 0)
        value, _ = fit_line(engine, cube, 2.0 ** -3)
        assert value == pytest.approx(engine.beta_star_c(cube, 2.0 ** -3) ** 2, rel=1e-9)

    def test_fit_line_without_dense_cubes(self, noisy):
        _, _, system, engine = noisy
        value, line = fit_line(engine, system.cube(1, 0), 1e6)
        assert value == 0.0 and line.provenance == 'pca'

    def test_chebyshev_bound(self, noisy):
        _, mu, system, engine = noisy
        tree = density_tree(system, system.cube(0, 0), mu, 2.0 ** -8)
        lines = {cube.key: fit_line(engine, cube, 2.0 ** -8)[1] for cube in tree.cubes()}
        chosen, worst = select_points(engine, tree, lines)
        assert set(chosen) == set(tree.members)
        # the minimum of the summed ratios is at most N, half the bound
        assert worst <= 0.5 + 1e-9
        for key, atom in chosen.items():
            assert atom in engine.ball_atoms(system.cube(*key))

    def test_flat_data_picks_centres(self, plane_segment):
        group, mu = plane_segment
        system = measure_cubes(group, mu)
        engine = BetaEngine(mu, system)
        tree = density_tree(system, system.cube(0, 0), mu, 2.0 ** -4)
        lines = {cube.key: fit_line(engine, cube, 2.0 ** -4)[1] for cube in tree.cubes()}
        chosen, worst = select_points(engine, tree, lines)
        assert worst == 0.0
        assert all(atom == system.cube(*key).center for key, atom in chosen.items())


class TestWitness:

    @pytest.fixture(scope='class')
    def segment_report(self, plane_segment):
        group, mu = plane_segment
        return build_witness_curves(group, mu, WitnessConfig(c=2.0 ** -4))

    def test_one_curve_captures_segment(self, segment_report, plane_segment):
        _, mu = plane_segment
        assert len(segment_report) == 1
        curve = segment_report.curves[0]
        assert curve.capture_fraction >= 0.99
        assert curve.captured_mass >= 0.99 * mu.total_mass
        assert curve.length <= 3.0

    def test_retention(self, segment_report):
        eps = WitnessConfig().eps_loc
        for curve in segment_report.curves:
            assert curve.retention >= 1 - eps
            assert curve.localization.leaf_mass >= (1 - eps) * curve.localization.mass_a

    def test_default_threshold(self, plane_segment):
        group, mu = plane_segment
        report = build_witness_curves(group, mu, WitnessConfig(c=0.1))
        assert 1 <= len(report) <= 2
        # leaf atoms sit within the outer radius of a finest centre, which stays a vertex
        assert sum(curve.captured_near for curve in report.curves) >= 0.99 * mu.total_mass
        assert report.capture_fraction >= 0.95
        assert report.to_dict()['capture_fraction'] == pytest.approx(report.capture_fraction)

    def test_localization_rejects_everything(self, noisy):
        group, mu, system, engine = noisy
        config = WitnessConfig(c=2.0 ** -8, n_cap=1e-12)
        with pytest.raises(LocalizationError):
            build_witness_curves(group, mu, config, system=system, engine=engine)

    def test_attach_to_decomposition(self, plane_segment):
        group, mu = plane_segment
        decomposition = attach_witnesses(group, classify(group, mu))
        assert decomposition.curves
        assert sum(curve.captured_near for curve in decomposition.curves) >= 0.99 * mu.total_mass
        doc = decomposition.to_dict()
        assert {'polyline', 'length', 'captured_mass'} <= set(doc['curves'][0])


class TestNecessity:

    def test_flat_curve_sums_vanish(self, plane_segment):
        group, mu = plane_segment
        curve = Polyline(group, mu.points)
        report = necessity_check(group, mu, np.arange(len(mu)), curve)
        assert report.total == 0.0 and report.constant == 0.0
        assert report.summable()
        assert report.off_mass == 0.0 and report.whitney_cubes == 0
        assert report.rhs == pytest.approx(curve.length)

    def test_off_curve_mass(self, plane):
        base = segment_measure(plane, 64, 4)
        m = 0.25
        mu = DiscreteMeasure(plane.spec, np.vstack([base.points, [[0.5, 3.0]]]), np.r_[base.weights, m], 4)
        curve = Polyline(plane, base.points)
        on = np.arange(len(base))

        plain = necessity_check(plane, base, on, curve)
        loaded = necessity_check(plane, mu, on, curve)
        assert loaded.off_mass == pytest.approx(m)
        assert loaded.rhs - plain.rhs == pytest.approx(m)
        assert loaded.whitney_cubes >= 1
        assert loaded.whitney_mass == pytest.approx(m)

    def test_document(self, plane_segment):
        group, mu = plane_segment
        doc = necessity_check(group, mu, np.arange(len(mu))).to_dict()
        assert doc['length'] == 0.0 and doc['summable']
        assert len(doc['on_curve']) == len(doc['levels'])
