"""Weighted Procrustes and WP-RANSAC behavior."""

import numpy as np
import pytest

from syncmatch import RansacConfig, compose, invert, weighted_procrustes, wp_ransac
from syncmatch.alignment import _batch_procrustes
from syncmatch.errors import DegenerateGeometry, InsufficientSupport, NoConsensus
from syncmatch.geometry import RigidTransform

from conftest import (
    batch_axis_angle_rotations,
    identity_correspondences,
    random_cloud,
    random_transform,
    rot_error_rad,
    trans_error,
    transformed_copy,
)


class TestWeightedProcrustes:
    def test_identity_when_equal(self):
        rng = np.random.default_rng(20)
        pts = rng.uniform(-1, 1, size=(30, 3))
        t = weighted_procrustes(pts, pts, np.ones(30))
        assert np.abs(t.rotation - np.eye(3)).max() < 1e-12
        assert np.abs(t.translation).max() < 1e-12

    def test_pure_translation(self):
        rng = np.random.default_rng(21)
        pts = rng.uniform(-1, 1, size=(30, 3))
        t = weighted_procrustes(pts, pts + np.array([1.0, 2.0, 3.0]), np.ones(30))
        assert np.abs(t.rotation - np.eye(3)).max() < 1e-10
        np.testing.assert_allclose(t.translation, [1.0, 2.0, 3.0], atol=1e-10)

    def test_exact_recovery(self):
        rng = np.random.default_rng(22)
        for _ in range(25):
            t = random_transform(rng)
            src = rng.uniform(-1, 1, size=(50, 3))
            est = weighted_procrustes(src, t.apply(src), np.ones(50))
            assert rot_error_rad(est, t) < 1e-9
            assert trans_error(est, t) < 1e-9

    def test_noisy_fit_beats_random_search(self):
        # Random-search optimality oracle on one instance (the acceptance
        # suite runs the full 100-trial version).
        rng = np.random.default_rng(23)
        t = random_transform(rng)
        src = rng.uniform(-1, 1, size=(50, 3))
        dst = t.apply(src) + rng.normal(0, 0.01, size=(50, 3))
        w = rng.uniform(0.2, 1.0, size=50)
        est = weighted_procrustes(src, dst, w)

        def weighted_residual(rot, tra):
            diff = dst - (src @ rot + tra)
            return float((w * (diff * diff).sum(axis=1)).sum())

        best = weighted_residual(est.rotation, est.translation)
        axes = rng.normal(size=(2000, 3))
        axes *= (rng.uniform(0, 0.1, size=2000) / np.linalg.norm(axes, axis=1))[:, None]
        rots = est.rotation[None] @ batch_axis_angle_rotations(axes)
        shifts = est.translation[None] + rng.uniform(-0.05, 0.05, size=(2000, 3))
        for k in range(2000):
            assert weighted_residual(rots[k], shifts[k]) >= best

    def test_zero_weights_ignored(self):
        rng = np.random.default_rng(24)
        t = random_transform(rng)
        src = rng.uniform(-1, 1, size=(40, 3))
        dst = t.apply(src)
        dst[5] += 100.0  # huge outlier, weight 0
        w = np.ones(40)
        w[5] = 0.0
        est = weighted_procrustes(src, dst, w)
        assert rot_error_rad(est, t) < 1e-9

    def test_insufficient_support(self):
        with pytest.raises(InsufficientSupport):
            weighted_procrustes(np.zeros((2, 3)), np.zeros((2, 3)), np.ones(2))
        with pytest.raises(InsufficientSupport):
            weighted_procrustes(
                np.ones((10, 3)), np.ones((10, 3)), np.r_[1.0, 1.0, np.zeros(8)]
            )

    def test_collinear_raises(self):
        src = np.outer(np.linspace(0, 1, 10), [1.0, 2.0, 3.0])
        with pytest.raises(DegenerateGeometry):
            weighted_procrustes(src, src + 1.0, np.ones(10))

    def test_equivariance_under_common_rotation(self):
        rng = np.random.default_rng(25)
        t = random_transform(rng)
        q = random_transform(rng)
        src = rng.uniform(-1, 1, size=(40, 3))
        dst = t.apply(src) + rng.normal(0, 0.01, size=(40, 3))
        w = rng.uniform(0.1, 1.0, size=40)
        plain = weighted_procrustes(src, dst, w)
        moved = weighted_procrustes(q.apply(src), q.apply(dst), w)
        # Conjugation: fitting Q-mapped clouds recovers Q^-1 T Q.
        expected = compose(invert(q), compose(plain, q))
        assert np.abs(moved.rotation - expected.rotation).max() < 1e-9
        assert np.abs(moved.translation - expected.translation).max() < 1e-9

    def test_batch_matches_single(self):
        # The vectorized hypothesis fitter must agree with the scalar path.
        rng = np.random.default_rng(26)
        src = rng.uniform(-1, 1, size=(16, 8, 3))
        dst = rng.uniform(-1, 1, size=(16, 8, 3))
        w = rng.uniform(0.1, 1.0, size=(16, 8))
        rots, trans, valid = _batch_procrustes(src, dst, w)
        assert valid.all()
        for h in range(16):
            single = weighted_procrustes(src[h], dst[h], w[h])
            assert np.abs(rots[h] - single.rotation).max() < 1e-12
            assert np.abs(trans[h] - single.translation).max() < 1e-12


class TestWpRansac:
    def _aligned_problem(self, rng, n=200, outlier_fraction=0.0, spread=1.0):
        src = random_cloud(rng, n, spread=spread)
        t = random_transform(rng)
        dst = transformed_copy(src, t)
        corr = identity_correspondences(n)
        if outlier_fraction > 0.0:
            n_out = int(round(outlier_fraction * n))
            bad = rng.choice(n, size=n_out, replace=False)
            points = np.array(dst.points)
            points[bad] = rng.uniform(-3, 3, size=(n_out, 3))
            dst = transformed_copy(dst, RigidTransform.identity())
            dst = type(dst)(points, dst.descriptors, dst.pixels)
        return src, dst, t, corr

    def test_exact_inliers_recovered(self):
        rng = np.random.default_rng(27)
        src, dst, t, corr = self._aligned_problem(rng)
        res = wp_ransac(corr, src, dst, RansacConfig(seed=1))
        assert rot_error_rad(res.transform, t) < 1e-9
        assert trans_error(res.transform, t) < 1e-9
        assert res.inlier_count == len(corr)
        assert res.residual_rms < 1e-9

    def test_robust_to_uniform_outliers(self):
        rng = np.random.default_rng(28)
        hits = 0
        for trial in range(10):
            src, dst, t, corr = self._aligned_problem(rng, outlier_fraction=0.3)
            res = wp_ransac(corr, src, dst, RansacConfig(seed=trial))
            ok = (
                np.degrees(rot_error_rad(res.transform, t)) < 0.5
                and trans_error(res.transform, t) < 0.01
            )
            hits += ok
        assert hits == 10

    def test_single_huge_outlier_zeroed(self):
        rng = np.random.default_rng(29)
        src = random_cloud(rng, 500)
        t = random_transform(rng)
        dst = transformed_copy(src, t)
        points = np.array(dst.points)
        points[137] += 10.0
        corrupted = type(dst)(points, dst.descriptors, dst.pixels)
        corr = identity_correspondences(500)

        clean_fit = weighted_procrustes(src.points, dst.points, np.ones(500))
        plain_fit = weighted_procrustes(src.points, corrupted.points, np.ones(500))
        robust = wp_ransac(corr, src, corrupted, RansacConfig(seed=3))

        assert trans_error(plain_fit, clean_fit) > 0.01
        assert robust.inlier_weights[137] == 0.0
        assert trans_error(robust.transform, clean_fit) < 1e-6
        assert rot_error_rad(robust.transform, clean_fit) < 1e-6

    def test_deterministic(self):
        rng = np.random.default_rng(30)
        src, dst, _, corr = self._aligned_problem(rng, outlier_fraction=0.2)
        a = wp_ransac(corr, src, dst, RansacConfig(seed=9))
        b = wp_ransac(corr, src, dst, RansacConfig(seed=9))
        np.testing.assert_array_equal(a.transform.rotation, b.transform.rotation)
        np.testing.assert_array_equal(a.transform.translation, b.transform.translation)
        np.testing.assert_array_equal(a.inlier_weights, b.inlier_weights)
        assert a.inlier_count == b.inlier_count and a.residual_rms == b.residual_rms

    def test_weighted_sampling_prefers_confident_matches(self):
        # With all weight on a consistent subset, the pose comes from it.
        rng = np.random.default_rng(31)
        src, dst, t, _ = self._aligned_problem(rng, n=100)
        points = np.array(dst.points)
        points[50:] = rng.uniform(-3, 3, size=(50, 3))  # second half garbage
        corrupted = type(dst)(points, dst.descriptors, dst.pixels)
        weights = np.r_[np.ones(50), np.full(50, 1e-6)]
        corr = identity_correspondences(100, weights)
        res = wp_ransac(corr, src, corrupted, RansacConfig(seed=2))
        assert rot_error_rad(res.transform, t) < 1e-9

    def test_insufficient_correspondences(self):
        rng = np.random.default_rng(32)
        src, dst, _, _ = self._aligned_problem(rng, n=5)
        with pytest.raises(InsufficientSupport):
            wp_ransac(identity_correspondences(5), src, dst, RansacConfig(sample_size=8, seed=0))

    def test_no_consensus(self):
        # Noise keeps even 8-point fits from reaching a 1e-15 threshold.
        rng = np.random.default_rng(33)
        src, dst, _, corr = self._aligned_problem(rng, n=60)
        noisy = type(dst)(
            dst.points + rng.normal(0, 0.05, size=dst.points.shape),
            dst.descriptors,
            dst.pixels,
        )
        tiny = RansacConfig(inlier_threshold=1e-15, seed=0)
        with pytest.raises(NoConsensus):
            wp_ransac(corr, src, noisy, tiny)

    def test_inlier_rms_below_threshold(self):
        rng = np.random.default_rng(34)
        src = random_cloud(rng, 300)
        t = random_transform(rng)
        noisy_points = t.apply(src.points) + rng.normal(0, 0.01, size=(300, 3))
        dst = type(src)(noisy_points, src.descriptors, src.pixels)
        cfg = RansacConfig(seed=4)
        res = wp_ransac(identity_correspondences(300), src, dst, cfg)
        assert res.residual_rms <= cfg.inlier_threshold
