"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from syncmatch import (
    CorrespondenceSet,
    Correspondence,
    FeaturePointcloud,
    RigidTransform,
    compose,
    invert,
)
from syncmatch.geometry import random_rigid_transform, rotation_angle


def rot_error_rad(a: RigidTransform, b: RigidTransform) -> float:
    return rotation_angle(a.rotation.T @ b.rotation)


def trans_error(a: RigidTransform, b: RigidTransform) -> float:
    return float(np.linalg.norm(a.translation - b.translation))


def random_transform(rng, translation_scale: float = 1.0) -> RigidTransform:
    return random_rigid_transform(rng, translation_scale)


def random_cloud(rng, n: int, dim: int = 32, spread: float = 1.0) -> FeaturePointcloud:
    """Cloud with well-separated random unit descriptors."""
    points = rng.uniform(-spread, spread, size=(n, 3))
    descriptors = rng.normal(size=(n, dim))
    descriptors /= np.linalg.norm(descriptors, axis=1, keepdims=True)
    pixels = rng.uniform(0, 64, size=(n, 2))
    return FeaturePointcloud(points, descriptors, pixels)


def transformed_copy(cloud: FeaturePointcloud, transform: RigidTransform) -> FeaturePointcloud:
    return FeaturePointcloud(transform.apply(cloud.points), cloud.descriptors, cloud.pixels)


def correspondence_set(sources, targets, weights, frame_pair=(0, 1)) -> CorrespondenceSet:
    """Build a set from parallel index/weight lists (sorted for the caller)."""
    order = np.lexsort((np.arange(len(weights)), -np.asarray(weights, dtype=np.float64)))
    matches = tuple(
        Correspondence(int(sources[k]), int(targets[k]), float(weights[k])) for k in order
    )
    return CorrespondenceSet(frame_pair, matches)


def identity_correspondences(n: int, weights=None, frame_pair=(0, 1)) -> CorrespondenceSet:
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    return correspondence_set(np.arange(n), np.arange(n), w, frame_pair)


def relative_pose(pose_i: RigidTransform, pose_j: RigidTransform) -> RigidTransform:
    """Transform carrying frame-i coordinates into frame j."""
    return compose(invert(pose_i), pose_j)


def batch_axis_angle_rotations(vectors: np.ndarray) -> np.ndarray:
    """Row-convention rotation matrices for a stack of axis-angle vectors.

    Independent of the library's single-vector helper; used by oracles.
    """
    v = np.asarray(vectors, dtype=np.float64)
    theta = np.linalg.norm(v, axis=1)
    safe = np.where(theta < 1e-15, 1.0, theta)
    k = v / safe[:, None]
    zeros = np.zeros_like(theta)
    k_cross = np.stack(
        [
            np.stack([zeros, -k[:, 2], k[:, 1]], axis=1),
            np.stack([k[:, 2], zeros, -k[:, 0]], axis=1),
            np.stack([-k[:, 1], k[:, 0], zeros], axis=1),
        ],
        axis=1,
    )
    eye = np.broadcast_to(np.eye(3), k_cross.shape)
    sin = np.sin(theta)[:, None, None]
    cos = np.cos(theta)[:, None, None]
    out = eye - sin * k_cross + (1.0 - cos) * (k_cross @ k_cross)
    out[theta < 1e-15] = np.eye(3)
    return out
