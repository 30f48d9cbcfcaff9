"""Rigid-transform algebra, scaled-transform closure, and depth geometry."""

import numpy as np
import pytest

from syncmatch import (
    CameraIntrinsics,
    DepthMap,
    RigidTransform,
    ScaledTransform,
    backproject,
    compose,
    invert,
    project_points,
    project_to_se3,
)
from syncmatch.errors import AmbiguousProjection, DegenerateScale, EmptyPointcloud
from syncmatch.geometry import rotation_angle, rotation_from_axis_angle

from conftest import batch_axis_angle_rotations, random_transform


class TestRigidTransform:
    def test_compose_identity(self):
        ident = RigidTransform.identity()
        out = compose(ident, ident)
        np.testing.assert_array_equal(out.rotation, np.eye(3))
        np.testing.assert_array_equal(out.translation, np.zeros(3))

    def test_compose_inverse_cancels(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            t = random_transform(rng)
            out = compose(t, invert(t))
            assert np.abs(out.rotation - np.eye(3)).max() < 1e-9
            assert np.abs(out.translation).max() < 1e-9

    def test_point_action_matches_composition(self):
        # x @ (T1 T2) must equal (x @ T1) @ T2 on random points.
        rng = np.random.default_rng(2)
        t1, t2 = random_transform(rng), random_transform(rng)
        points = rng.uniform(-2, 2, size=(100, 3))
        once = compose(t1, t2).apply(points)
        twice = t2.apply(t1.apply(points))
        assert np.abs(once - twice).max() < 1e-9

    def test_matrix_row_convention(self):
        rng = np.random.default_rng(3)
        t = random_transform(rng)
        p = rng.uniform(-1, 1, size=3)
        homogeneous = np.append(p, 1.0) @ t.matrix
        np.testing.assert_allclose(homogeneous[:3], t.apply(p), atol=1e-12)
        assert homogeneous[3] == 1.0

    def test_matrix_round_trip(self):
        rng = np.random.default_rng(4)
        t = random_transform(rng)
        again = RigidTransform.from_matrix(t.matrix)
        np.testing.assert_array_equal(again.rotation, t.rotation)
        np.testing.assert_array_equal(again.translation, t.translation)

    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            RigidTransform(np.eye(3) * 1.001, np.zeros(3))
        with pytest.raises(ValueError):
            RigidTransform(-np.eye(3), np.zeros(3))  # det -1

    def test_arrays_frozen(self):
        t = RigidTransform.identity()
        with pytest.raises(ValueError):
            t.rotation[0, 0] = 2.0


class TestScaledTransform:
    def test_closure(self):
        rng = np.random.default_rng(5)
        a = ScaledTransform.from_rigid(random_transform(rng), 2.0)
        b = ScaledTransform.from_rigid(random_transform(rng), 0.7)
        for member in (a + b, a @ b, a.scaled(3.5), a.scaled(0.0)):
            assert isinstance(member, ScaledTransform)
            np.testing.assert_array_equal(member.matrix[:3, 3], np.zeros(3))
            assert member.scale >= 0.0

    def test_structural_validation(self):
        bad = np.eye(4)
        bad[0, 3] = 0.5
        with pytest.raises(ValueError):
            ScaledTransform(bad)
        neg = np.eye(4)
        neg[3, 3] = -1.0
        with pytest.raises(ValueError):
            ScaledTransform(neg)


class TestProjectToSE3:
    def test_scaling_cancels(self):
        rng = np.random.default_rng(6)
        t = random_transform(rng)
        projected = project_to_se3(ScaledTransform.from_rigid(t, 2.5))
        assert np.abs(projected.rotation - t.rotation).max() < 1e-12
        assert np.abs(projected.translation - t.translation).max() < 1e-12

    def test_exact_rotation_is_fixed_point(self):
        rng = np.random.default_rng(7)
        t = random_transform(rng)
        projected = project_to_se3(ScaledTransform.from_rigid(t, 1.0))
        assert np.abs(projected.rotation - t.rotation).max() < 1e-12

    def test_perturbed_block_is_local_minimum(self):
        # Random-search oracle: no nearby rotation is closer in Frobenius
        # norm to the noisy block than the SVD answer.
        rng = np.random.default_rng(8)
        t = random_transform(rng)
        noisy = t.matrix.copy()
        noisy[:3, :3] += 0.01
        projected = project_to_se3(ScaledTransform(noisy))
        base = np.linalg.norm(projected.rotation - noisy[:3, :3])
        deltas = rng.uniform(-1, 1, size=(500, 3))
        deltas *= (rng.uniform(0, 0.2, size=500) / np.linalg.norm(deltas, axis=1))[:, None]
        for delta_rot in batch_axis_angle_rotations(deltas):
            candidate = projected.rotation @ delta_rot
            assert np.linalg.norm(candidate - noisy[:3, :3]) >= base - 1e-12

    def test_reflection_guard(self):
        # A block that is "almost a reflection" must still project to det +1.
        block = np.diag([1.0, 1.0, -1.0 - 0.1])
        m = np.eye(4)
        m[:3, :3] = block
        projected = project_to_se3(ScaledTransform(m))
        assert np.linalg.det(projected.rotation) > 0.999999

    def test_degenerate_scale(self):
        with pytest.raises(DegenerateScale):
            project_to_se3(ScaledTransform(np.zeros((4, 4))))

    def test_ambiguous_projection(self):
        m = np.eye(4)
        m[2, :3] = m[1, :3]  # rank-deficient rotation block
        m[:3, 2] = 0.0
        m[:3, 1] = m[:3, 0]
        with pytest.raises(AmbiguousProjection):
            project_to_se3(ScaledTransform(m))


class TestBackprojection:
    intrinsics = CameraIntrinsics(fx=100.0, fy=100.0, cx=0.0, cy=0.0, width=64, height=64)

    def test_principal_point(self):
        k = CameraIntrinsics(fx=50.0, fy=50.0, cx=3.0, cy=2.0, width=8, height=8)
        depth = np.zeros((8, 8))
        depth[2, 3] = 2.0  # pixel (u=3, v=2) = principal point
        pixels, points = backproject(DepthMap(depth), k, stride=1)
        assert pixels.shape == (1, 2)
        np.testing.assert_allclose(points[0], [0.0, 0.0, 2.0], atol=1e-12)

    def test_pinhole_formula(self):
        depth = np.zeros((64, 64))
        depth[0, 50] = 1.0  # (u=50, v=0)
        _, points = backproject(DepthMap(depth), self.intrinsics, stride=1)
        np.testing.assert_allclose(points[0], [0.5, 0.0, 1.0], atol=1e-12)

    def test_missing_depth_skipped(self):
        depth = np.zeros((16, 16))
        depth[4, 4] = 1.5
        depth[8, 8] = -1.0  # missing
        k = CameraIntrinsics(fx=10.0, fy=10.0, cx=8.0, cy=8.0, width=16, height=16)
        pixels, points = backproject(DepthMap(depth), k, stride=1)
        assert len(points) == 1

    def test_all_missing_raises(self):
        k = CameraIntrinsics(fx=10.0, fy=10.0, cx=8.0, cy=8.0, width=16, height=16)
        with pytest.raises(EmptyPointcloud):
            backproject(DepthMap(np.zeros((16, 16))), k, stride=1)

    def test_stride_selects_grid(self):
        depth = np.ones((16, 16))
        k = CameraIntrinsics(fx=10.0, fy=10.0, cx=8.0, cy=8.0, width=16, height=16)
        pixels, _ = backproject(DepthMap(depth), k, stride=4)
        assert len(pixels) == 16
        assert set(map(tuple, pixels)) == {
            (float(u), float(v)) for u in (0, 4, 8, 12) for v in (0, 4, 8, 12)
        }

    def test_projection_round_trip(self):
        # project(backproject(d)) must reproduce the pixel grid.
        rng = np.random.default_rng(9)
        depth = rng.uniform(0.5, 4.0, size=(32, 32))
        k = CameraIntrinsics(fx=40.0, fy=42.0, cx=15.5, cy=16.5, width=32, height=32)
        pixels, points = backproject(DepthMap(depth), k, stride=2)
        reprojected, in_front = project_points(points, k)
        assert in_front.all()
        assert np.abs(reprojected - pixels).max() < 1e-6

    def test_invalid_stride(self):
        with pytest.raises(ValueError):
            backproject(DepthMap(np.ones((4, 4))), self.intrinsics, stride=0)


class TestValidation:
    def test_depth_map_rejects_nan(self):
        bad = np.ones((4, 4))
        bad[1, 1] = np.nan
        with pytest.raises(ValueError):
            DepthMap(bad)

    def test_intrinsics_bounds(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=-1, fy=1, cx=0, cy=0, width=4, height=4)
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=1, fy=1, cx=4, cy=0, width=4, height=4)


class TestRotationHelpers:
    def test_axis_angle_row_action(self):
        # Quarter turn about +z must take x-hat to y-hat for row vectors.
        rot = rotation_from_axis_angle([0.0, 0.0, np.pi / 2])
        np.testing.assert_allclose(np.array([1.0, 0.0, 0.0]) @ rot, [0.0, 1.0, 0.0], atol=1e-12)

    def test_angle_recovery(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            angle = rng.uniform(0, np.pi * 0.95)
            assert abs(rotation_angle(rotation_from_axis_angle(axis * angle)) - angle) < 1e-9
