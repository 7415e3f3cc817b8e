"""Discrete measures, trees of cubes, sum functions and localization"""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings

from carnot import CarnotGroup, abelian
from cubes import build_cubes, build_nets, lattice_nets
from errors import GeometryError, LocalizationError
from trees import (
    CubeTree,
    DiscreteMeasure,
    density_tree,
    leaves,
    leaves_by_levels,
    localize,
    resolution_for,
    sum_function,
    sum_function_all,
)
from conftest import SEEDS


def grid_measure(depth: int=6, weights=None) -> DiscreteMeasure:
    points = (np.arange(2 ** depth + 1) / 2 ** depth)[:, None]
    if weights is None:
        weights = np.full(len(points), 1 / len(points))
    return DiscreteMeasure(abelian(1), points, weights, depth, 'grid')


def grid_system(mu: DiscreteMeasure):
    group = CarnotGroup(mu.spec)
    return build_cubes(group, mu.points, lattice_nets(mu.points, mu.resolution))


def random_pruning(system, top, rng, keep: float=0.7) -> CubeTree:
    masks = {top.level: np.zeros(system.count(top.level), dtype=bool)}
    masks[top.level][top.index] = True
    for level in range(top.level + 1, system.k_max + 1):
        masks[level] = masks[level - 1][system.parents(level)] & (rng.random(system.count(level)) < keep)
    return CubeTree.from_masks(system, top, masks)


@pytest.fixture(scope='module')
def plane_instance():
    group = CarnotGroup(abelian(2))
    rng = np.random.default_rng(5)
    points = rng.uniform(-1, 1, (200, 2))
    mu = DiscreteMeasure(group.spec, points, rng.uniform(0.5, 2.0, 200), 5)
    return mu, build_cubes(group, points, build_nets(group, points, 0, 5))


class TestDiscreteMeasure:

    def test_rejects_bad_atoms(self):
        with pytest.raises(GeometryError):
            DiscreteMeasure(abelian(1), [[0.0]], [0.0], 3)
        with pytest.raises(GeometryError):
            DiscreteMeasure(abelian(1), [[0.0], [1.0]], [1.0], 3)
        with pytest.raises(GeometryError):
            DiscreteMeasure(abelian(1), np.zeros((0, 1)), [], 3)

    def test_dilation_shifts_resolution(self):
        mu = grid_measure()
        group = CarnotGroup(mu.spec)
        wide = mu.dilate(group, 4.0)
        assert wide.resolution == mu.resolution - 2
        npt.assert_allclose(wide.points, 4 * mu.points)
        assert wide.total_mass == pytest.approx(mu.total_mass)
        with pytest.raises(GeometryError):
            mu.dilate(group, 3.0)

    def test_translate_and_restrict(self):
        mu = grid_measure()
        group = CarnotGroup(mu.spec)
        npt.assert_allclose(mu.translate(group, [1.0]).points, mu.points + 1)
        half = mu.restrict(mu.points[:, 0] <= 0.5)
        assert len(half) == 33
        assert half.total_mass == pytest.approx(33 / 65)

    def test_document(self):
        mu = grid_measure(3)
        doc = mu.to_dict()
        assert doc['resolution'] == 3 and len(doc['atoms']) == 9
        back = DiscreteMeasure.from_dict(doc)
        npt.assert_array_equal(back.points, mu.points)
        assert back.spec == mu.spec

    def test_resolution_for(self):
        mu = grid_measure()
        assert resolution_for(CarnotGroup(mu.spec), mu.points) == 5


class TestLeaves:

    def test_full_tree(self):
        mu = grid_measure()
        system = grid_system(mu)
        top = system.cube(0, 0)
        tree = CubeTree.full(system, top)
        npt.assert_array_equal(leaves(tree), system.members(top))

    def test_single_branch(self):
        mu = grid_measure()
        system = grid_system(mu)
        top = system.cube(0, 0)
        child = system.children(top)[-1]
        tree = CubeTree(system, top.key, CubeTree.full(system, child).members | {top.key})
        npt.assert_array_equal(leaves(tree), system.members(child))

    def test_shallow_tree_has_no_leaves(self):
        mu = grid_measure()
        system = grid_system(mu)
        tree = CubeTree.full(system, system.cube(0, 0), depth=3)
        assert leaves(tree).size == 0

    @given(SEEDS)
    @settings(max_examples=20, deadline=None)
    def test_leaves_are_level_intersection(self, plane_instance, seed):
        _, system = plane_instance
        rng = np.random.default_rng(seed)
        top = system.cube(1, int(rng.integers(system.count(1))))
        tree = random_pruning(system, top, rng)
        assert set(leaves(tree)) == set(leaves_by_levels(tree))

    def test_rejects_orphans(self):
        mu = grid_measure()
        system = grid_system(mu)
        with pytest.raises(ValueError):
            CubeTree(system, (0, 0), frozenset({(0, 0), (2, 3)}))


class TestSumFunction:

    def test_zero_weights(self):
        mu = grid_measure()
        system = grid_system(mu)
        tree = CubeTree.full(system, system.cube(0, 0))
        assert not sum_function_all(tree, {}, mu).any()
        assert sum_function(tree, lambda cube: 0.0, mu, 3) == 0

    def test_single_cube(self):
        base = grid_measure()
        system = grid_system(base)
        top = system.cube(0, 0)
        weights = np.ones(len(base))
        inside = system.members(top)
        weights[inside] = 4 / inside.size
        mu = DiscreteMeasure(base.spec, base.points, weights, base.resolution)
        tree = CubeTree(system, top.key, frozenset({top.key}))
        x = int(inside[0])
        assert sum_function(tree, {top.key: 2.0}, mu, x) == pytest.approx(0.5)
        assert sum_function(tree, {top.key: 2.0}, mu, mu.points[x]) == pytest.approx(0.5)

    def test_negative_weight(self):
        mu = grid_measure()
        system = grid_system(mu)
        tree = CubeTree.full(system, system.cube(0, 0))
        with pytest.raises(ValueError):
            sum_function_all(tree, {(0, 0): -1.0}, mu)

    @given(SEEDS)
    @settings(max_examples=20, deadline=None)
    def test_integral_identity(self, plane_instance, seed):
        mu, system = plane_instance
        rng = np.random.default_rng(seed)
        tree = random_pruning(system, system.cube(0, 0), rng, keep=0.9)
        b = {key: float(rng.exponential()) for key in tree.members}
        a = rng.random(len(mu)) < 0.5
        a_weights = np.where(a, mu.weights, 0.0)

        left = float((sum_function_all(tree, b, mu) * a_weights).sum())
        right = sum(
            value * system.masses(k, a_weights)[i] / system.masses(k, mu.weights)[i]
            for (k, i), value in b.items()
        )
        assert left == pytest.approx(right, rel=1e-10)

    def test_monotone_in_tree(self, plane_instance):
        mu, system = plane_instance
        rng = np.random.default_rng(0)
        top = system.cube(0, 0)
        small = random_pruning(system, top, rng, keep=0.5)
        large = CubeTree.full(system, top)
        b = {key: 1.0 for key in large.members}
        assert np.all(sum_function_all(small, b, mu) <= sum_function_all(large, b, mu) + 1e-12)


class TestLocalize:

    def test_nothing_bad(self):
        mu = grid_measure()
        system = grid_system(mu)
        tree = CubeTree.full(system, system.cube(0, 0))
        result = localize(tree, {}, mu, 1.0, 0.5)
        assert result.tree.members == tree.members
        assert result.bad == ()
        assert result.leaf_mass == pytest.approx(result.mass_a)

    def test_empty_good_set(self):
        mu = grid_measure()
        system = grid_system(mu)
        tree = CubeTree.full(system, system.cube(0, 0))
        with pytest.raises(LocalizationError):
            localize(tree, {key: 10.0 for key in tree.members}, mu, 1e-3, 0.5)

    def test_parameters(self):
        mu = grid_measure()
        system = grid_system(mu)
        tree = CubeTree.full(system, system.cube(0, 0))
        with pytest.raises(ValueError):
            localize(tree, {}, mu, 1.0, 1.0)
        with pytest.raises(ValueError):
            localize(tree, {}, mu, 0.0, 0.5)

    def test_heavy_branch_is_cut(self):
        mu = grid_measure()
        system = grid_system(mu)
        top = system.cube(0, 0)
        tree = CubeTree.full(system, top)
        heavy = system.children(top)[-1]
        result = localize(tree, {heavy.key: 100.0}, mu, 1.0, 0.25)

        assert heavy.key in result.bad
        assert not set(result.good_set) & set(system.members(heavy))
        assert heavy.key not in result.tree
        assert all(not system.is_descendant(system.cube(*key), heavy) for key in result.tree.members)

        # every surviving cube carries more than its share of A
        weights = mu.weights
        a_weights = np.zeros(len(mu))
        a_weights[result.good_set] = weights[result.good_set]
        ratio = 0.25 * result.mass_a / system.mass(top, weights)
        for level, idx in result.tree.by_level.items():
            kept = system.masses(level, a_weights)[idx]
            assert np.all(kept > ratio * system.masses(level, weights)[idx])

        pruned = sum(system.mass(system.cube(*key), a_weights) for key in result.bad)
        assert pruned <= 0.25 * result.mass_a + 1e-12

    @given(SEEDS)
    @settings(max_examples=25, deadline=None)
    def test_random_instances(self, plane_instance, seed):
        mu, system = plane_instance
        rng = np.random.default_rng(seed)
        top = system.cube(0, 0)
        tree = random_pruning(system, top, rng, keep=0.95)
        if leaves(tree).size == 0:
            return

        b = {key: float(rng.exponential()) for key in tree.members if rng.random() < 0.5}
        sums = sum_function_all(tree, b, mu)[leaves(tree)]
        N = float(np.median(sums)) + 1e-9
        eps = float(rng.uniform(0.05, 0.95))

        result = localize(tree, b, mu, N, eps)
        assert result.tree.top == tree.top
        assert result.tree.members <= tree.members
        assert result.leaf_mass >= (1 - eps) * result.mass_a - 1e-12
        assert result.total_b <= result.bound
        assert result.bound == pytest.approx(N / eps * system.mass(top, mu.weights))


class TestDensityTree:

    def test_segment_is_full(self):
        mu = grid_measure()
        system = grid_system(mu)
        top = system.cube(0, 0)
        tree = density_tree(system, top, mu, 0.01)
        assert tree.members == CubeTree.full(system, top).members

    def test_huge_threshold(self):
        mu = grid_measure()
        system = grid_system(mu)
        assert density_tree(system, system.cube(0, 0), mu, 1e6) is None
        with pytest.raises(ValueError):
            density_tree(system, system.cube(0, 0), mu, 0.0)

    @pytest.mark.parametrize('c', [0.05, 0.2, 0.5])
    def test_nested_in_threshold(self, plane_instance, c):
        mu, system = plane_instance
        top = system.cube(0, 0)
        scaled = DiscreteMeasure(mu.spec, mu.points, 10 * mu.weights / mu.total_mass, mu.resolution)
        strict = density_tree(system, top, scaled, 2 * c)
        loose = density_tree(system, top, scaled, c)
        if strict is not None:
            assert loose is not None
            assert strict.members <= loose.members
        if loose is not None:
            for level, index in loose.members:
                if level > top.level:
                    assert (level - 1, int(system.parents(level)[index])) in loose
