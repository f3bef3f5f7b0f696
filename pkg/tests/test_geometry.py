from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psafe.errors import ConfigurationError, PreconditionError
from psafe.geometry import (
    BoxRegion,
    PlaneConstraint,
    SphereRegion,
    as_point,
    contains,
    dist_to_boundary,
    project_onto_constraint,
    project_onto_constraints,
    region_from_dict,
)
from psafe.oracles import brute_force_boundary_distance

coords = st.floats(-0.95, 0.95, allow_nan=False)


class TestContains:
    def test_sphere_center_and_boundary(self, sphere100):
        assert contains(sphere100, [0, 0, 0])
        assert not contains(sphere100, [100, 0, 0])

    def test_box_interior(self):
        box = BoxRegion(-100 * np.ones(3), 100 * np.ones(3))
        assert contains(box, [99, -99, 0])
        assert not contains(box, [100, 0, 0])
        assert not contains(box, [0, 0, 101])

    def test_dimension_mismatch(self, sphere100):
        with pytest.raises(ConfigurationError):
            contains(sphere100, [0, 0])

    def test_nonfinite_point_rejected(self):
        with pytest.raises(ConfigurationError):
            as_point([np.nan, 0.0])

    def test_batched(self):
        disk = SphereRegion(np.zeros(2), 1.0)
        got = disk.contains(np.array([[0, 0], [1, 0], [0.5, 0.5]]))
        assert got.tolist() == [True, False, True]


class TestDistance:
    def test_examples(self, sphere100):
        box = BoxRegion(-100 * np.ones(3), 100 * np.ones(3))
        assert dist_to_boundary(sphere100, [0, 0, 0]) == 100
        assert dist_to_boundary(box, [90, 0, 0]) == pytest.approx(10)
        assert dist_to_boundary(SphereRegion(np.zeros(3), 1.0), [0.6, 0, 0]) == pytest.approx(0.4)

    def test_outside_raises(self, sphere100):
        with pytest.raises(PreconditionError):
            dist_to_boundary(sphere100, [200, 0, 0])
        with pytest.raises(PreconditionError):
            dist_to_boundary(sphere100, [100, 0, 0])

    @pytest.mark.parametrize(
        "region",
        [SphereRegion(np.array([0.2, -0.1, 0.0]), 1.3), BoxRegion(np.array([-1.0, -2.0, -0.5]), np.array([1.0, 0.5, 2.0]))],
    )
    def test_matches_brute_force(self, region):
        rng = np.random.default_rng(3)
        for _ in range(5):
            x = region.centroid + rng.uniform(-0.4, 0.4, 3)
            exact = dist_to_boundary(region, x)
            brute = brute_force_boundary_distance(region, x, samples=200_000, seed=1)
            assert exact <= brute + 1e-12
            assert brute - exact < 0.03

    @settings(max_examples=60, deadline=None)
    @given(x=st.tuples(coords, coords, coords), u=st.tuples(coords, coords, coords))
    def test_ball_of_radius_dist_is_inside(self, x, u):
        for region in (SphereRegion(np.zeros(3), 1.0), BoxRegion(-np.ones(3), np.ones(3))):
            x = np.asarray(x)
            if not region.contains(x):
                continue
            d = dist_to_boundary(region, x)
            assert d > 0
            v = np.asarray(u)
            if np.linalg.norm(v) < 1e-6:
                continue
            y = x + 0.999 * d * v / np.linalg.norm(v)
            assert region.contains(y)


class TestRegionConfig:
    def test_roundtrip(self):
        for region in (SphereRegion(np.zeros(3), 100.0), BoxRegion(-np.ones(2), np.ones(2))):
            back = region_from_dict(region.to_dict())
            assert type(back) is type(region)
            assert back.to_dict() == region.to_dict()

    def test_sphere_from_dimension(self):
        r = region_from_dict({"type": "sphere", "d": 2, "radius": 3})
        assert r.dim == 2 and dist_to_boundary(r, [0, 0]) == 3

    @pytest.mark.parametrize(
        "spec",
        [{"type": "torus"}, {"type": "sphere", "center": [0, 0]}, {"type": "box", "lo": [0, 0], "hi": [1, -1]}, {}],
    )
    def test_invalid(self, spec):
        with pytest.raises(ConfigurationError):
            region_from_dict(spec)

    def test_invalid_radius(self):
        with pytest.raises(ConfigurationError):
            SphereRegion(np.zeros(2), -1.0)


class TestPlaneConstraint:
    def test_axis_projection(self):
        plane = PlaneConstraint(np.array([0, 0, 5.0]), np.array([0, 0, 1.0]))
        np.testing.assert_allclose(project_onto_constraint(plane, [1, 2, 9]), [1, 2, 5])

    def test_normal_is_normalized(self):
        plane = PlaneConstraint(np.zeros(2), np.array([3.0, 4.0]))
        assert np.linalg.norm(plane.normal) == pytest.approx(1.0)

    def test_zero_normal_rejected(self):
        with pytest.raises(ConfigurationError):
            PlaneConstraint(np.zeros(2), np.zeros(2))

    def test_half_space_clip(self):
        half = PlaneConstraint(np.zeros(2), np.array([1.0, 0.0]), +1)
        y = project_onto_constraint(half, [-3, 4])
        assert half.is_feasible(y)
        np.testing.assert_allclose(y, [0, 4])
        np.testing.assert_allclose(project_onto_constraint(half, [2, 4]), [2, 4])

    def test_negative_side(self):
        half = PlaneConstraint(np.zeros(2), np.array([1.0, 0.0]), -1)
        assert half.is_feasible([-1, 0]) and not half.is_feasible([1, 0])

    def test_dict_roundtrip(self):
        half = PlaneConstraint(np.array([1.0, 2.0]), np.array([0.0, 2.0]), -1)
        back = PlaneConstraint.from_dict(half.to_dict())
        np.testing.assert_allclose(back.normal, half.normal)
        assert back.half_space_side == -1

    @settings(max_examples=80, deadline=None)
    @given(
        x=st.tuples(*[st.floats(-50, 50)] * 3),
        n=st.tuples(*[st.floats(-1, 1)] * 3),
        side=st.sampled_from([None, 1, -1]),
    )
    def test_idempotent_and_feasible(self, x, n, side):
        if np.linalg.norm(n) < 1e-3:
            return
        c = PlaneConstraint(np.array([1.0, -2.0, 0.5]), np.array(n), side)
        y = project_onto_constraint(c, x)
        assert c.is_feasible(y, tol=1e-9)
        np.testing.assert_allclose(project_onto_constraint(c, y), y, atol=1e-9)

    def test_plane_and_half_space_together(self):
        plane = PlaneConstraint(np.array([0, 0, 2.0]), np.array([0, 0, 1.0]))
        half = PlaneConstraint(np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), +1)
        y = project_onto_constraints([half, plane], [-5, 3, 7])
        assert plane.is_feasible(y, tol=1e-12) and half.is_feasible(y)
