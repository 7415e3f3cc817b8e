"""Group arithmetic, norms, lines and the spatial index"""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

from carnot import (
    CarnotGroup,
    GroupIndex,
    GroupPoint,
    HomogeneousNorm,
    HorizontalLine,
    StratificationSpec,
    abelian,
    calibrate_eta,
    dist_to_line,
    dists_to_line,
    engel,
    engel_product,
    heisenberg,
    heisenberg_product,
    resolve_group,
    stratified_dist,
    tube_alpha,
    tube_membership,
)
from errors import GeometryError, SpecError, UnsupportedStepError
from conftest import SEEDS, calibrated, random_points


def filiform4() -> StratificationSpec:
    return StratificationSpec(
        'filiform4', (2, 1, 1, 1),
        ((0, 1, 2, 1.0), (0, 2, 3, 1.0), (0, 3, 4, 1.0)),
    )


class TestSpec:

    def test_presets(self):
        assert abelian(3).homogeneous_dim == 3
        assert heisenberg(1).homogeneous_dim == 4
        assert heisenberg(2).layer_dims == (4, 1)
        assert engel().homogeneous_dim == 7

    def test_grading_violation(self):
        with pytest.raises(SpecError):
            StratificationSpec('bad', (2, 1), ((0, 1, 0, 1.0),))

    def test_layer_not_generated(self):
        with pytest.raises(SpecError):
            StratificationSpec('bad', (2, 1))

    def test_jacobi_violation(self):
        # [X0,X1]=X3, [X1,X2]=X4 and [X2,X3]=X5 break Jacobi on (X0, X1, X2)
        with pytest.raises(SpecError):
            StratificationSpec('bad', (3, 2, 1), ((0, 1, 3, 1.0), (1, 2, 4, 1.0), (2, 3, 5, 1.0)))

    def test_conflicting_constants(self):
        with pytest.raises(SpecError):
            StratificationSpec('bad', (2, 1), ((0, 1, 2, 1.0), (1, 0, 2, 1.0)))

    def test_round_trip(self):
        spec = engel()
        assert StratificationSpec.from_dict(spec.to_dict()) == spec

    def test_step_mismatch(self):
        doc = heisenberg(1).to_dict() | {'step': 3}
        with pytest.raises(SpecError):
            StratificationSpec.from_dict(doc)

    def test_resolve_group(self, tmp_path):
        assert resolve_group('abelian:2') == abelian(2)
        assert resolve_group('h2') == heisenberg(2)
        assert resolve_group('engel') == engel()
        path = tmp_path / 'g.json'
        path.write_text('{"step": 2, "layer_dims": [2, 1], "brackets": [{"i": 0, "j": 1, "k": 2, "c": 1}]}')
        assert resolve_group(f'file:{path}').layer_dims == (2, 1)
        with pytest.raises(SpecError):
            resolve_group('sl2')

    def test_truncate(self):
        quotient = engel().truncate(2)
        assert quotient.layer_dims == (2, 1)
        assert quotient.brackets == ((0, 1, 2, 1.0),)


class TestArithmetic:

    def test_abelian_product(self, plane):
        npt.assert_array_equal(plane.multiply([1, 2], [3, 4]), [4, 6])

    def test_heisenberg_product(self, h1):
        npt.assert_allclose(h1.multiply([1, 0, 0], [0, 1, 0]), [1, 1, 0.5])

    def test_group_points_in_and_out(self, h1):
        a = h1.point([1, 0, 0])
        out = h1.multiply(a, [0, 1, 0])
        assert isinstance(out, GroupPoint)
        assert out == h1.point([1, 1, 0.5])

    def test_mismatched_spec(self, h1):
        with pytest.raises(SpecError):
            h1.multiply(GroupPoint([1, 2], abelian(2)), [0, 0, 0])
        with pytest.raises(SpecError):
            h1.multiply([1, 2], [0, 0, 0])

    def test_step_four_refused(self):
        group = CarnotGroup(filiform4())
        with pytest.raises(UnsupportedStepError):
            group.multiply(np.zeros(5), np.zeros(5))

    def test_inverse_identity(self, group):
        g = random_points(group, 3, 1000, scale=2.0)
        npt.assert_allclose(group.multiply(g, group.inverse(g)), 0, atol=1e-12)
        npt.assert_array_equal(group.inverse(np.zeros(group.dim)), 0)

    @pytest.mark.parametrize('m', [1, 2])
    def test_matches_heisenberg_closed_form(self, m):
        group = CarnotGroup(heisenberg(m))
        a = random_points(group, 5, 500)
        b = random_points(group, 6, 500)
        npt.assert_allclose(group.multiply(a, b), heisenberg_product(a, b), atol=1e-12)

    def test_matches_engel_closed_form(self):
        group = CarnotGroup(engel())
        a = random_points(group, 7, 500)
        b = random_points(group, 8, 500)
        npt.assert_allclose(group.multiply(a, b), engel_product(a, b), atol=1e-12)

    def test_associativity(self, group):
        a, b, c = (random_points(group, s, 10_000) for s in (1, 2, 3))
        left = group.multiply(group.multiply(a, b), c)
        right = group.multiply(a, group.multiply(b, c))
        size = 1 + np.abs(a).sum(1) + np.abs(b).sum(1) + np.abs(c).sum(1)
        assert np.all(np.abs(left - right).max(axis=1) <= 1e-9 * size)

    def test_horizontal_points_add(self, group):
        n1 = group.spec.layer_dims[0]
        a = group.horizontal(random_points(group, 4, 100)[:, :n1])
        b = group.horizontal(random_points(group, 5, 100)[:, :n1])
        npt.assert_allclose(group.multiply(a, b)[:, :n1], a[:, :n1] + b[:, :n1])

    def test_projection_is_homomorphism(self, group):
        a = random_points(group, 9, 200)
        b = random_points(group, 10, 200)
        for i in range(1, group.step + 1):
            quotient = group.quotient(i)
            npt.assert_allclose(
                group.project_layer(group.multiply(a, b), i),
                quotient.multiply(group.project_layer(a, i), group.project_layer(b, i)),
                rtol=1e-14, atol=1e-14,
            )

    def test_dilation(self, h1):
        npt.assert_allclose(h1.dilate(2.0, [1, 0, 1]), [2, 0, 4])
        with pytest.raises(GeometryError):
            h1.dilate(0.0, [1, 0, 1])

    @given(SEEDS, st.floats(0.1, 10), st.floats(0.1, 10))
    @settings(max_examples=30, deadline=None)
    def test_dilations_compose(self, seed, u, t):
        group = CarnotGroup(engel())
        g = random_points(group, seed, 20)
        npt.assert_allclose(group.dilate(u, group.dilate(t, g)), group.dilate(u * t, g), rtol=1e-12)

    def test_project_layer(self, h1):
        npt.assert_array_equal(h1.project_layer([1, 2, 7], 1), [1, 2])
        npt.assert_array_equal(h1.project_layer([1, 2, 7], 2), [1, 2, 7])
        with pytest.raises(SpecError):
            h1.project_layer([1, 2, 7], 3)


class TestNorm:

    def test_known_values(self, h1):
        assert h1.norm_of([0, 0, 0]) == 0
        assert h1.norm_of([3, 0, 0]) == pytest.approx(3)
        assert h1.norm_of([0, 0, 4]) == pytest.approx(2)

    def test_closed_form_matches_bisection(self, h1):
        g = random_points(h1, 12, 2000, scale=3.0)
        norms = h1.layer_norms(g)
        npt.assert_allclose(h1.norm.gauge(norms), h1.norm.bisect(norms), rtol=1e-9)

    def test_bisection_solves_gauge_equation(self):
        group = CarnotGroup(engel(), HomogeneousNorm(0.5))
        g = random_points(group, 13, 2000)
        r = group.norm_of(g)
        norms = group.layer_norms(g)
        powers = np.arange(1, 4)
        lhs = np.sum(norms ** 2 * r[:, None] ** (-2.0 * powers), axis=1)
        npt.assert_allclose(lhs, 0.25, rtol=1e-9)

    def test_homogeneity_and_symmetry(self, group):
        g = random_points(group, 14, 2000)
        n = group.norm_of(g)
        tol = group.norm.gauge_tol
        for t in (0.01, 0.5, 3.0, 100.0):
            assert np.all(np.abs(group.norm_of(group.dilate(t, g)) - t * n) <= tol * t * n + 1e-300)
        assert np.all(np.abs(group.norm_of(group.inverse(g)) - n) <= tol * n)

    def test_bad_parameters(self):
        with pytest.raises(GeometryError):
            HomogeneousNorm(0.0)
        with pytest.raises(GeometryError):
            HomogeneousNorm(1.0, gauge_tol=2.0)

    def test_calibration_abelian(self):
        result = calibrate_eta(abelian(2))
        assert result.eta == 1.0 and result.trials == 0

    def test_calibrated_triangle_inequality(self, group):
        a, b = random_points(group, 15, 20_000, 2.0), random_points(group, 16, 20_000, 0.5)
        lhs = group.norm_of(group.multiply(a, b))
        assert np.all(lhs <= (group.norm_of(a) + group.norm_of(b)) * (1 + 1e-12))

    def test_left_invariance(self, group):
        g, a, b = (random_points(group, s, 1000) for s in (17, 18, 19))
        d = group.distance(a, b)
        moved = group.distance(group.multiply(g, a), group.multiply(g, b))
        assert np.all(np.abs(d - moved) <= 1e-9 * d)

    def test_projections_are_lipschitz(self, group):
        a, b = random_points(group, 20, 10_000), random_points(group, 21, 10_000)
        full = group.distance(a, b)
        dists = group.layer_distances(a, b)
        npt.assert_allclose(dists[:, -1], full)
        assert np.all(np.diff(dists, axis=1) >= -1e-12 * full[:, None])

    @pytest.mark.slow
    def test_full_calibration_contract(self):
        result = calibrate_eta(heisenberg(1), seed=3)
        group = CarnotGroup(heisenberg(1), HomogeneousNorm(result.eta))
        rng = np.random.default_rng(99)
        for _ in range(20):
            a, b = rng.standard_normal((2, 50_000, 3)) * 10.0 ** rng.uniform(-2, 2, (2, 50_000, 3))
            assert np.all(group.norm_of(group.multiply(a, b)) <= group.norm_of(a) + group.norm_of(b) + 1e-12)


class TestLines:

    def test_direction_checks(self):
        with pytest.raises(GeometryError):
            HorizontalLine.through([0, 0, 0], [0, 0])
        with pytest.raises(GeometryError):
            HorizontalLine([0, 0, 0], [2, 0])
        assert HorizontalLine.through([0, 0, 0], [3, 4]).direction.tolist() == [0.6, 0.8]

    def test_point_on_line(self, group):
        n1 = group.spec.layer_dims[0]
        base = random_points(group, 22, 1)[0]
        line = HorizontalLine.through(base, np.arange(1, n1 + 1))
        z = line.point_at(group, 0.7)
        for i in range(1, group.step + 1):
            assert dist_to_line(group, z, line, i)[0] == pytest.approx(0, abs=1e-4)
        assert stratified_dist(group, z, z, 1.0) == 0

    def test_abelian_distance(self, plane):
        line = HorizontalLine([0, 0], [1, 0])
        value, t = dist_to_line(plane, [0, 1], line, 1)
        assert value == pytest.approx(1)
        assert t == pytest.approx(0)

    def test_vertical_point_against_dense_grid(self, h1):
        zeta = 0.8
        line = HorizontalLine([0, 0, 0], [1, 0])
        value, _ = dist_to_line(h1, [0, 0, zeta], line, 2, window=(-2.0, 2.0))
        ts = np.linspace(-2.0, 2.0, 100_001)
        oracle = h1.distance(line.point_at(h1, ts), np.array([0, 0, zeta])).min()
        assert value <= oracle * (1 + 1e-5)
        assert value >= oracle * (1 - 1e-5)

    def test_default_window_contains_minimum(self, h1):
        line = HorizontalLine([0.2, -0.1, 0.3], [0.6, 0.8])
        points = random_points(h1, 23, 50)
        values, _ = dists_to_line(h1, points, line, 2)
        ts = np.linspace(-20, 20, 40_001)
        curve = line.point_at(h1, ts)
        for z, value in zip(points, values):
            assert value <= h1.distance(curve, z).min() * (1 + 1e-6) + 1e-12

    def test_empty_window(self, h1):
        line = HorizontalLine([0, 0, 0], [1, 0])
        with pytest.raises(GeometryError):
            dist_to_line(h1, [0, 0, 1], line, 2, window=(1.0, 1.0))

    def test_bad_scale(self, h1):
        with pytest.raises(GeometryError):
            stratified_dist(h1, [0, 0, 0], [1, 0, 0], 0.0)

    @given(SEEDS, st.floats(1.0, 50.0))
    @settings(max_examples=25, deadline=None)
    def test_quasi_triangle_and_scales(self, seed, ratio):
        for name in ('abelian3', 'h1', 'engel'):
            group = calibrated(name)
            x, y, z = (random_points(group, seed + i, 200) for i in range(3))
            s = group.step
            r = 0.7
            lhs = stratified_dist(group, x, y, r) ** (2 * s)
            rhs = 2 ** (2 * s - 1) * (stratified_dist(group, x, z, r) ** (2 * s) + stratified_dist(group, z, y, r) ** (2 * s))
            assert np.all(lhs <= rhs * (1 + 1e-12))

            t = r * ratio
            small, big = stratified_dist(group, x, y, t), stratified_dist(group, x, y, r)
            assert np.all(small <= big * (1 + 1e-12))
            assert np.all(big <= (t / r) * small * (1 + 1e-12))

    def test_tube_membership(self, plane, h1):
        line = HorizontalLine([0, 0], [1, 0])
        assert tube_membership(plane, [5, 0], line, 0.5, 0.0)
        assert tube_membership(plane, [1, 0.3], line, 0.5, 0.6)
        assert not tube_membership(plane, [1, 0.3], line, 0.5, 0.59)
        vertical = HorizontalLine([0, 0, 0], [1, 0])
        assert tube_membership(h1, vertical.point_at(h1, 2.0), vertical, 0.1, 0.0)
        with pytest.raises(GeometryError):
            tube_membership(plane, [1, 0.3], line, 0.5, -1.0)

    def test_tube_alpha_comparable_to_stratified_distance(self, h1):
        line = HorizontalLine([0, 0, 0], [1, 0])
        points = random_points(h1, 24, 200, 0.3)
        alpha = tube_alpha(h1, points, line, 1.0)
        ts = np.linspace(-5, 5, 20_001)
        curve = line.point_at(h1, ts)
        beta = np.array([stratified_dist(h1, curve, z, 1.0).min() for z in points])
        off = beta > 1e-6
        ratio = alpha[off] / beta[off]
        assert np.all((ratio > 0.25) & (ratio < 4.0))


class TestIndex:

    def test_within_matches_brute_force(self, group):
        points = random_points(group, 25, 400)
        index = GroupIndex(group, points)
        center = points[7]
        dist = group.distance(center, points)
        for radius in (0.1, 0.5, 1.5):
            npt.assert_array_equal(index.within(center, radius), np.flatnonzero(dist <= radius))

    def test_nearest_breaks_ties_by_index(self, plane):
        index = GroupIndex(plane, [[1, 0], [-1, 0], [0, 5]])
        idx, dist = index.nearest([[0, 0], [0, 4]])
        npt.assert_array_equal(idx, [0, 2])
        npt.assert_allclose(dist, [1, 1])

    def test_nearest_non_abelian(self, h1):
        points = random_points(h1, 26, 300)
        queries = random_points(h1, 27, 50)
        idx, dist = GroupIndex(h1, points).nearest(queries)
        brute = h1.pairwise(queries, points)
        npt.assert_array_equal(idx, brute.argmin(axis=1))
        npt.assert_allclose(dist, brute.min(axis=1))

    def test_separation(self, plane, h1):
        value, pair = GroupIndex(plane, [[0, 0], [3, 0], [0, 1]]).separation()
        assert value == pytest.approx(1) and pair == (0, 2)
        points = random_points(h1, 28, 60)
        value, _ = GroupIndex(h1, points).separation()
        full = h1.pairwise(points, points) + np.diag(np.full(60, np.inf))
        assert value == pytest.approx(full.min())

    def test_ball_mass(self, line1):
        index = GroupIndex(line1, [[0.0], [0.5], [1.0], [2.0]])
        npt.assert_allclose(index.ball_mass([0.0], [0.1, 0.5, 1.0, 10.0], [1, 2, 3, 4]), [1, 3, 6, 10])
