"""Rigid-motion primitives and pinhole depth geometry.

Everything here uses the row-vector homogeneous convention: a point
p = (x, y, z) acts as (x, y, z, 1) @ T with

    T = [[R, 0],
         [t, 1]]

so applying T computes p @ R + t, and composition reads left to right:
compose(a, b) applies a first, then b, and its matrix is a.matrix @ b.matrix.
Callers working in the column convention transpose at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TypeAlias

import numpy as np
from numpy.typing import NDArray

from .errors import AmbiguousProjection, DegenerateScale, EmptyPointcloud

Mat3: TypeAlias = NDArray[np.float64]   # (3, 3)
Mat4: TypeAlias = NDArray[np.float64]   # (4, 4)
Vec3: TypeAlias = NDArray[np.float64]   # (3,)
Points: TypeAlias = NDArray[np.float64]  # (N, 3)

# Rotations must be orthonormal with det +1 to this tolerance at construction.
ROTATION_TOL = 1e-9

# Smallest admissible singular value when projecting a block onto SO(3).
_RANK_TOL = 1e-12


def _frozen_f64(value, shape: tuple[int, ...], name: str) -> NDArray[np.float64]:
    arr = np.array(value, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """An SE(3) element: proper rotation plus translation in meters."""

    rotation: Mat3
    translation: Vec3

    def __post_init__(self) -> None:
        rot = _frozen_f64(self.rotation, (3, 3), "rotation")
        tra = _frozen_f64(self.translation, (3,), "translation")
        gram = np.abs(rot @ rot.T - np.eye(3)).max()
        det = np.linalg.det(rot)
        if gram > ROTATION_TOL or abs(det - 1.0) > ROTATION_TOL:
            raise ValueError(
                f"rotation is not in SO(3): |R R^T - I| = {gram:.3e}, det = {det:.12f}"
            )
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tra)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: Mat4) -> "RigidTransform":
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got {m.shape}")
        if np.abs(m[:3, 3]).max() > 0 or m[3, 3] != 1.0:
            raise ValueError("matrix last column must be (0, 0, 0, 1)")
        return cls(m[:3, :3], m[3, :3])

    @property
    def matrix(self) -> Mat4:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[3, :3] = self.translation
        return m

    def apply(self, points) -> NDArray[np.float64]:
        """Map one point (3,) or a batch (N, 3) through the transform."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation + self.translation


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform that applies `a` first, then `b` (matrix a.matrix @ b.matrix)."""
    return RigidTransform(
        a.rotation @ b.rotation,
        a.translation @ b.rotation + b.translation,
    )


def invert(t: RigidTransform) -> RigidTransform:
    rot_inv = t.rotation.T
    return RigidTransform(rot_inv, -t.translation @ rot_inv)


@dataclass(frozen=True, eq=False)
class ScaledTransform:
    """A nonnegative multiple of an SE(3)-shaped matrix.

    Members look like alpha * [[M, 0], [t, 1]] with alpha >= 0 and M an
    arbitrary real 3x3 block; alpha sits in the bottom-right corner. The
    set is closed under addition, matrix multiplication, and nonnegative
    scaling, which is what lets confidence-weighted sums of transforms
    stay representable until they are projected back onto SE(3).
    """

    matrix: Mat4

    def __post_init__(self) -> None:
        m = _frozen_f64(self.matrix, (4, 4), "matrix")
        if np.abs(m[:3, 3]).max() > _RANK_TOL:
            raise ValueError("last column must be (0, 0, 0, scale)")
        if m[3, 3] < 0:
            raise ValueError(f"scale must be nonnegative, got {m[3, 3]}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_rigid(cls, t: RigidTransform, scale: float = 1.0) -> "ScaledTransform":
        if scale < 0:
            raise ValueError("scale must be nonnegative")
        return cls(scale * t.matrix)

    @property
    def scale(self) -> float:
        return float(self.matrix[3, 3])

    def __add__(self, other: "ScaledTransform") -> "ScaledTransform":
        return ScaledTransform(self.matrix + other.matrix)

    def __matmul__(self, other: "ScaledTransform") -> "ScaledTransform":
        return ScaledTransform(self.matrix @ other.matrix)

    def scaled(self, factor: float) -> "ScaledTransform":
        if factor < 0:
            raise ValueError("scaling factor must be nonnegative")
        return ScaledTransform(factor * self.matrix)


def project_to_so3(block: Mat3) -> Mat3:
    """Nearest proper rotation to `block` in the Frobenius norm.

    Uses the SVD with a reflection guard: if the plain U @ Vt product has
    determinant -1, the direction of the smallest singular value is
    negated. Raises AmbiguousProjection when the block is rank deficient
    and the nearest rotation is not unique.
    """
    u, sing, vt = np.linalg.svd(block)
    if sing[-1] < _RANK_TOL:
        raise AmbiguousProjection(
            f"rotation block is rank deficient (smallest singular value {sing[-1]:.3e})"
        )
    det = np.linalg.det(u @ vt)
    signs = np.array([1.0, 1.0, 1.0 if det > 0 else -1.0])
    return (u * signs) @ vt


def project_to_se3(m: ScaledTransform) -> RigidTransform:
    """Divide out the scale, then snap the rotation block onto SO(3)."""
    alpha = m.scale
    if alpha <= 0:
        raise DegenerateScale(f"cannot project with scale {alpha}")
    rotation = project_to_so3(m.matrix[:3, :3] / alpha)
    translation = m.matrix[3, :3] / alpha
    return RigidTransform(rotation, translation)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")


@dataclass(frozen=True, eq=False)
class DepthMap:
    """H x W grid of depths in meters; entries <= 0 mean missing."""

    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError(f"depth map must be 2-D, got shape {vals.shape}")
        if not np.isfinite(vals).all():
            raise ValueError("depth map contains non-finite entries")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def backproject(
    depth: DepthMap, intrinsics: CameraIntrinsics, stride: int = 4
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Lift valid depth pixels on a stride grid into camera-frame 3D points.

    Returns (pixels, points): pixels is (M, 2) holding (u, v) source
    coordinates and points is (M, 3) with
    point = ((u - cx) d / fx, (v - cy) d / fy, d). Pixels with missing
    depth (d <= 0) are omitted. Default stride 4 matches a quarter
    resolution feature grid.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    d = depth.values[::stride, ::stride]
    vv, uu = np.meshgrid(
        np.arange(0, depth.height, stride, dtype=np.float64),
        np.arange(0, depth.width, stride, dtype=np.float64),
        indexing="ij",
    )
    valid = d > 0
    if not valid.any():
        raise EmptyPointcloud("no valid depth on the stride grid")
    z = d[valid]
    u = uu[valid]
    v = vv[valid]
    x = (u - intrinsics.cx) * z / intrinsics.fx
    y = (v - intrinsics.cy) * z / intrinsics.fy
    return np.column_stack([u, v]), np.column_stack([x, y, z])


def project_points(
    points: Points, intrinsics: CameraIntrinsics
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Project camera-frame points onto the image plane.

    Returns (pixels, in_front); rows with z <= 0 get NaN pixels and a
    False mask entry. Bounds checking is left to the caller.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    z = pts[:, 2]
    in_front = z > 0
    pixels = np.full((pts.shape[0], 2), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = pts[:, 0] * intrinsics.fx / z + intrinsics.cx
        v = pts[:, 1] * intrinsics.fy / z + intrinsics.cy
    pixels[in_front, 0] = u[in_front]
    pixels[in_front, 1] = v[in_front]
    return pixels, in_front


def rotation_from_axis_angle(vector) -> Mat3:
    """Rotation matrix for row vectors from an axis-angle vector.

    The returned R rotates p @ R by ||vector|| radians about the axis
    (right-hand rule). Transpose of the usual column-vector Rodrigues form.
    """
    v = np.asarray(vector, dtype=np.float64).reshape(3)
    theta = float(np.linalg.norm(v))
    if theta < 1e-15:
        return np.eye(3)
    kx, ky, kz = v / theta
    k_cross = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    # Row-vector action flips the sign of the sin term.
    return np.eye(3) - math.sin(theta) * k_cross + (1.0 - math.cos(theta)) * (k_cross @ k_cross)


def rotation_angle(rotation: Mat3) -> float:
    """Rotation angle in radians.

    atan2 of the skew part's norm against the trace; accurate near zero,
    where the plain arccos-of-trace form loses half the precision.
    """
    r = np.asarray(rotation, dtype=np.float64)
    skew = 0.5 * np.array([r[1, 2] - r[2, 1], r[2, 0] - r[0, 2], r[0, 1] - r[1, 0]])
    return float(np.arctan2(np.linalg.norm(skew), (np.trace(r) - 1.0) / 2.0))


def random_rotation(rng: np.random.Generator) -> Mat3:
    """Uniform-ish random proper rotation via QR with a sign fix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def random_rigid_transform(
    rng: np.random.Generator, translation_scale: float = 1.0
) -> RigidTransform:
    return RigidTransform(
        random_rotation(rng),
        rng.uniform(-translation_scale, translation_scale, size=3),
    )
