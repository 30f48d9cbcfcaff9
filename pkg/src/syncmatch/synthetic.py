"""Ground-truth scenes, trajectories, and controllable corruption.

Stands in for learned features: landmarks carry random unit descriptors,
cameras follow simple motion models, and observations can be corrupted
with descriptor noise, outlier descriptors, depth noise along the viewing
ray, and random point dropout. Everything is seeded and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .correspondence import FeaturePointcloud
from .errors import GenerationFailure
from .geometry import (
    CameraIntrinsics,
    DepthMap,
    RigidTransform,
    compose,
    invert,
    project_points,
    random_rigid_transform,
    rotation_from_axis_angle,
)
from .synchronization import PoseGraph

DESCRIPTOR_DIM = 128
MOTIONS = ("lateral_pan", "orbit", "corridor")

_DEFAULT_INTRINSICS = CameraIntrinsics(fx=48.0, fy=48.0, cx=32.0, cy=24.0, width=64, height=48)
_DEFAULT_STEP = {"lateral_pan": 0.5, "orbit": 10.0, "corridor": 0.3}
_NEAR_PLANE = 0.1


@dataclass(frozen=True)
class CorruptionSpec:
    """How to degrade an observation; fractions are of the visible points."""

    descriptor_sigma: float = 0.0
    outlier_fraction: float = 0.0
    depth_sigma: float = 0.0  # meters
    drop_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("outlier_fraction", "drop_fraction"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.descriptor_sigma < 0 or self.depth_sigma < 0:
            raise ValueError("noise sigmas must be nonnegative")


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    """Landmarks with descriptors, a camera trajectory, and visibility bookkeeping."""

    landmarks: NDArray[np.float64]       # (M, 3) world coordinates
    descriptors: NDArray[np.float64]     # (M, D) unit norm
    trajectory: tuple[RigidTransform, ...]  # world-to-camera per frame
    intrinsics: CameraIntrinsics
    visibility: NDArray[np.bool_]        # (N, M)
    overlap_schedule: NDArray[np.float64]  # (N, N) shared-landmark fractions

    def __post_init__(self) -> None:
        for name in ("landmarks", "descriptors", "visibility", "overlap_schedule"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "trajectory", tuple(self.trajectory))

    @property
    def n_frames(self) -> int:
        return len(self.trajectory)


def look_at(position, target, up=(0.0, 1.0, 0.0)) -> RigidTransform:
    """World-to-camera transform for a camera at `position` looking at `target`.

    Camera axes: x right, y down, z forward (pinhole convention).
    """
    pos = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - pos
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("camera position coincides with the target")
    forward = forward / norm
    right = np.cross(np.asarray(up, dtype=np.float64), forward)
    right_norm = np.linalg.norm(right)
    if right_norm < 1e-12:
        raise ValueError("up direction is parallel to the view direction")
    right = right / right_norm
    down = np.cross(forward, right)
    # Rows are the camera axes in world coordinates (column convention);
    # the row-vector transform uses the transpose.
    axes = np.vstack([right, down, forward])
    rotation = axes.T
    return RigidTransform(rotation, -pos @ rotation)


def _visible_mask(
    landmarks: NDArray[np.float64],
    pose: RigidTransform,
    intrinsics: CameraIntrinsics,
    max_range: float,
) -> NDArray[np.bool_]:
    cam = pose.apply(landmarks)
    pixels, in_front = project_points(cam, intrinsics)
    ok = in_front & (cam[:, 2] > _NEAR_PLANE) & (cam[:, 2] < max_range)
    with np.errstate(invalid="ignore"):
        ok &= (pixels[:, 0] >= 0) & (pixels[:, 0] < intrinsics.width)
        ok &= (pixels[:, 1] >= 0) & (pixels[:, 1] < intrinsics.height)
    return ok


def _overlap_schedule(visibility: NDArray[np.bool_]) -> NDArray[np.float64]:
    counts = visibility.sum(axis=1).astype(np.float64)
    n = visibility.shape[0]
    shared = visibility.astype(np.float64) @ visibility.T.astype(np.float64)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            denom = min(counts[i], counts[j])
            out[i, j] = shared[i, j] / denom if denom > 0 else 0.0
    return out


def generate_scene(
    n_frames: int,
    n_landmarks: int,
    motion: str,
    seed: int,
    *,
    step: float | None = None,
    min_overlap: float = 0.3,
    max_range: float = 10.0,
    descriptor_dim: int = DESCRIPTOR_DIM,
    intrinsics: CameraIntrinsics = _DEFAULT_INTRINSICS,
) -> SyntheticScene:
    """Build a seeded scene for one of the supported motion models.

    `step` is the per-frame camera spacing: meters for lateral_pan and
    corridor, degrees for orbit. Raises GenerationFailure when a frame
    sees nothing or an adjacent pair shares less than `min_overlap` of
    its visible landmarks.
    """
    if n_frames < 2:
        raise ValueError("need at least two frames")
    if n_landmarks < 50:
        raise ValueError("need at least 50 landmarks")
    if motion not in MOTIONS:
        raise ValueError(f"unknown motion {motion!r}; pick one of {MOTIONS}")
    rng = np.random.default_rng(seed)
    spacing = _DEFAULT_STEP[motion] if step is None else step

    if motion == "orbit":
        landmarks = rng.uniform([-1.5, -1.5, -1.5], [1.5, 1.5, 1.5], size=(n_landmarks, 3))
        radius = 4.0
        angles = np.deg2rad(spacing) * np.arange(n_frames)
        positions = np.column_stack(
            [radius * np.sin(angles), np.zeros(n_frames), -radius * np.cos(angles)]
        )
        trajectory = [look_at(pos, (0.0, 0.0, 0.0)) for pos in positions]
    elif motion == "lateral_pan":
        span = spacing * (n_frames - 1)
        landmarks = rng.uniform(
            [-span / 2 - 3.0, -1.5, 3.0], [span / 2 + 3.0, 1.5, 6.0], size=(n_landmarks, 3)
        )
        trajectory = [
            look_at((i * spacing - span / 2, 0.0, 0.0), (i * spacing - span / 2, 0.0, 1.0))
            for i in range(n_frames)
        ]
    else:  # corridor
        length = spacing * (n_frames - 1)
        landmarks = rng.uniform(
            [-2.0, -1.5, 1.0], [2.0, 1.5, length + 9.0], size=(n_landmarks, 3)
        )
        trajectory = [
            look_at((0.0, 0.0, i * spacing), (0.0, 0.0, i * spacing + 1.0))
            for i in range(n_frames)
        ]

    descriptors = rng.normal(size=(n_landmarks, descriptor_dim))
    descriptors /= np.linalg.norm(descriptors, axis=1, keepdims=True)

    visibility = np.stack(
        [_visible_mask(landmarks, pose, intrinsics, max_range) for pose in trajectory]
    )
    counts = visibility.sum(axis=1)
    if (counts == 0).any():
        frame = int(np.flatnonzero(counts == 0)[0])
        raise GenerationFailure(f"frame {frame} sees no landmarks")
    overlap = _overlap_schedule(visibility)
    weakest = min(overlap[i, i + 1] for i in range(n_frames - 1))
    if weakest < min_overlap:
        raise GenerationFailure(
            f"adjacent overlap {weakest:.2f} below the required {min_overlap:.2f}"
        )
    return SyntheticScene(
        landmarks, descriptors, tuple(trajectory), intrinsics, visibility, overlap
    )


def observe_frame(
    scene: SyntheticScene, frame: int, corruption: CorruptionSpec = CorruptionSpec()
) -> FeaturePointcloud:
    """Render one frame's visible landmarks as a corrupted feature pointcloud.

    Depth noise is additive in the depth reading, which moves each point
    along its viewing ray; pixels stay at the true projection.
    """
    if not (0 <= frame < scene.n_frames):
        raise ValueError(f"frame {frame} out of range")
    rng = np.random.default_rng(np.random.SeedSequence([corruption.seed, frame]))
    pose = scene.trajectory[frame]
    idx = np.flatnonzero(scene.visibility[frame])
    cam = pose.apply(scene.landmarks[idx])
    pixels, _ = project_points(cam, scene.intrinsics)
    descriptors = scene.descriptors[idx].copy()

    if corruption.depth_sigma > 0:
        z = cam[:, 2]
        noisy_z = z + rng.normal(0.0, corruption.depth_sigma, size=z.shape)
        cam = cam * (noisy_z / z)[:, None]
    if corruption.descriptor_sigma > 0:
        descriptors += rng.normal(0.0, corruption.descriptor_sigma, size=descriptors.shape)
        descriptors /= np.linalg.norm(descriptors, axis=1, keepdims=True)
    if corruption.outlier_fraction > 0:
        n_out = int(round(corruption.outlier_fraction * len(idx)))
        chosen = rng.choice(len(idx), size=n_out, replace=False)
        fresh = rng.normal(size=(n_out, descriptors.shape[1]))
        descriptors[chosen] = fresh / np.linalg.norm(fresh, axis=1, keepdims=True)
    if corruption.drop_fraction > 0:
        n_keep = len(idx) - int(round(corruption.drop_fraction * len(idx)))
        keep = np.sort(rng.choice(len(idx), size=max(n_keep, 0), replace=False))
        cam, pixels, descriptors = cam[keep], pixels[keep], descriptors[keep]
    return FeaturePointcloud(cam, descriptors, pixels)


def render_depth(scene: SyntheticScene, frame: int) -> DepthMap:
    """Splat the frame's visible landmarks into a depth image.

    Each landmark writes its camera-frame depth at the nearest pixel;
    collisions keep the closer surface. Pixels with no landmark stay 0
    (missing).
    """
    pose = scene.trajectory[frame]
    idx = np.flatnonzero(scene.visibility[frame])
    cam = pose.apply(scene.landmarks[idx])
    pixels, _ = project_points(cam, scene.intrinsics)
    grid = np.zeros((scene.intrinsics.height, scene.intrinsics.width))
    u = np.rint(pixels[:, 0]).astype(int)
    v = np.rint(pixels[:, 1]).astype(int)
    inside = (u >= 0) & (u < scene.intrinsics.width) & (v >= 0) & (v < scene.intrinsics.height)
    order = np.argsort(-cam[:, 2])  # write far points first so near ones win
    for k in order:
        if inside[k]:
            grid[v[k], u[k]] = cam[k, 2]
    return DepthMap(grid)


def ground_truth_graph(scene: SyntheticScene, confidence: float = 1.0) -> PoseGraph:
    """All-pairs pose graph with exact relative transforms from the trajectory."""
    edges = {}
    for i in range(scene.n_frames):
        for j in range(i + 1, scene.n_frames):
            rel = compose(invert(scene.trajectory[i]), scene.trajectory[j])
            edges[(i, j)] = (rel, confidence)
    return PoseGraph(scene.n_frames, edges)


def random_pose_problem(
    n_frames: int, rng: np.random.Generator, translation_scale: float = 1.0
) -> tuple[list[RigidTransform], PoseGraph]:
    """Random consistent synchronization instance: gt poses + all-pairs graph."""
    poses = [random_rigid_transform(rng, translation_scale) for _ in range(n_frames)]
    edges = {}
    for i in range(n_frames):
        for j in range(i + 1, n_frames):
            edges[(i, j)] = (compose(invert(poses[i]), poses[j]), 1.0)
    return poses, PoseGraph(n_frames, edges)


def perturb_pose_graph(
    graph: PoseGraph,
    rot_sigma_deg: float,
    trans_sigma_m: float,
    rng: np.random.Generator,
) -> PoseGraph:
    """Corrupt every edge: rotate by a random axis-angle with angle
    ~ N(0, rot_sigma_deg) and shift the translation by N(0, trans_sigma_m) per axis."""
    edges = {}
    for key, (transform, conf) in sorted(graph.edges.items()):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = np.deg2rad(rng.normal(0.0, rot_sigma_deg))
        noisy = RigidTransform(
            transform.rotation @ rotation_from_axis_angle(axis * angle),
            transform.translation + rng.normal(0.0, trans_sigma_m, size=3),
        )
        edges[key] = (noisy, conf)
    return PoseGraph(graph.n_frames, edges)
