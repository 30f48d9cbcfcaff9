"""Recovering absolute poses from noisy pairwise transforms.

Three backends share one contract (gauge-fixed so frame 0 is exactly the
identity):

* synchronize_power: form the confidence-weighted block transform matrix,
  make each block row's confidences sum to one (with the self-weight set
  to the off-diagonal mass, so the walk is lazy), square it until the
  implied walk length exceeds the frame count, read the first block
  column, divide each block by its bottom-right mass, and snap onto
  SE(3). Only matrix products and small SVDs; nothing divides by an
  eigenvalue gap.
* synchronize_eig: spectral baseline. Rotations come from the bottom
  eigenvectors of the confidence-weighted rotation Laplacian, translations
  from a weighted linear least squares on the edge residuals.
* synchronize_naive: compose the adjacent chain; cheap, fragile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .correspondence import CorrespondenceSet
from .errors import DisconnectedGraph, SynchronizationCollapse
from .geometry import (
    RigidTransform,
    ScaledTransform,
    compose,
    invert,
    project_to_se3,
    project_to_so3,
)

# Bottom-right mass below this means a frame never mixed with frame 0.
_MASS_TOL = 1e-12

DEFAULT_CONFIDENCE_THRESHOLD = 0.4


@dataclass(frozen=True, eq=False)
class PoseGraph:
    """N frames plus pairwise transform/confidence edges keyed (i, j), i < j.

    Reverse edges are implied: the transform from j to i is the inverse
    and the confidence is symmetric. Well-formed graphs produced by the
    pipeline always contain the adjacent chain (i, i+1); the algorithms
    that need it check for it.
    """

    n_frames: int
    edges: dict[tuple[int, int], tuple[RigidTransform, float]]

    def __post_init__(self) -> None:
        if self.n_frames < 2:
            raise ValueError("pose graph needs at least two frames")
        for (i, j), (_, conf) in self.edges.items():
            if not (0 <= i < j < self.n_frames):
                raise ValueError(f"bad edge key ({i}, {j}) for {self.n_frames} frames")
            if not (0.0 <= conf <= 1.0):
                raise ValueError(f"confidence must be in [0, 1], got {conf} on ({i}, {j})")
        object.__setattr__(self, "edges", dict(self.edges))

    def confidence_matrix(self) -> NDArray[np.float64]:
        """Symmetric (N, N) confidence matrix with a zero diagonal."""
        c = np.zeros((self.n_frames, self.n_frames))
        for (i, j), (_, conf) in self.edges.items():
            c[i, j] = conf
            c[j, i] = conf
        return c

    def transform(self, i: int, j: int) -> RigidTransform:
        """Relative transform from frame i to frame j (either direction)."""
        if i < j:
            return self.edges[(i, j)][0]
        return invert(self.edges[(j, i)][0])


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """4N x 4N grid of scaled transforms, one 4x4 block per frame pair."""

    n: int
    data: NDArray[np.float64]

    def __post_init__(self) -> None:
        d = np.array(self.data, dtype=np.float64)
        if d.shape != (4 * self.n, 4 * self.n):
            raise ValueError(f"expected ({4 * self.n}, {4 * self.n}) data, got {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    def block(self, i: int, j: int) -> ScaledTransform:
        return ScaledTransform(self.data[4 * i:4 * i + 4, 4 * j:4 * j + 4])


@dataclass(frozen=True, eq=False)
class SyncResult:
    """World-to-camera transforms, gauge-fixed so frame 0 is the identity."""

    world_to_camera: tuple[RigidTransform, ...]
    iterations: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "world_to_camera", tuple(self.world_to_camera))
        first = self.world_to_camera[0]
        if np.any(first.rotation != np.eye(3)) or np.any(first.translation != 0.0):
            raise ValueError("result[0] must be exactly the identity")

    def __len__(self) -> int:
        return len(self.world_to_camera)


def pairwise_confidence(corr: CorrespondenceSet) -> float:
    """Mean match weight; an empty set counts as no overlap (0)."""
    if len(corr) == 0:
        return 0.0
    return float(corr.weights().mean())


def rescale_confidence(
    c_hat: float, adjacent: bool, gamma: float = DEFAULT_CONFIDENCE_THRESHOLD
) -> float:
    """Threshold-and-stretch non-adjacent confidences; adjacent pass through.

    Non-adjacent pairs map to max(0, c_hat - gamma) / (1 - gamma), zeroing
    every pair at or below the threshold. Adjacent pairs are exempt so the
    chain always stays usable.
    """
    if not (0.0 <= c_hat <= 1.0):
        raise ValueError(f"c_hat must be in [0, 1], got {c_hat}")
    if not (0.0 <= gamma < 1.0):
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    if adjacent:
        return c_hat
    return max(0.0, c_hat - gamma) / (1.0 - gamma)


def build_block_matrix(graph: PoseGraph) -> BlockMatrix:
    """Assemble the confidence-weighted block transform matrix.

    Off-diagonal block (i, j) is c_ij * T_ij (inverse transform below the
    diagonal); diagonal block (i, i) is the total incident confidence
    times the identity. Edges absent from the graph contribute zero.
    """
    n = graph.n_frames
    conf = graph.confidence_matrix()
    mass = conf.sum(axis=1)
    dead = np.flatnonzero(mass <= 0.0)
    if dead.size:
        raise DisconnectedGraph(
            f"frame {int(dead[0])} has no positive-confidence edge", frame=int(dead[0])
        )
    data = np.zeros((4 * n, 4 * n))
    eye = np.eye(4)
    for i in range(n):
        data[4 * i:4 * i + 4, 4 * i:4 * i + 4] = mass[i] * eye
    for (i, j), (transform, c) in graph.edges.items():
        if c == 0.0:
            continue
        data[4 * i:4 * i + 4, 4 * j:4 * j + 4] = c * transform.matrix
        data[4 * j:4 * j + 4, 4 * i:4 * i + 4] = c * invert(transform).matrix
    return BlockMatrix(n, data)


def _squaring_steps(n: int) -> int:
    # Smallest t with 2**t > n. More squarings would not help: on
    # consistent graphs any t is exact, while on noisy graphs every extra
    # squaring lets edge noise random-walk further along multiplication
    # paths and inflates the translation error.
    return math.ceil(math.log2(n + 1))


def synchronize_power(graph: PoseGraph) -> SyncResult:
    """Synchronize by repeated squaring of the block transform matrix.

    Each block row is scaled so its confidences sum to one (the diagonal
    then carries exactly half the row mass). After t squarings the first
    block column holds, per frame, a confidence-blended transform into
    frame 0's coordinates; dividing by the bottom-right mass and
    projecting onto SE(3) recovers the poses.
    """
    blocks = build_block_matrix(graph)
    n = graph.n_frames
    a = np.array(blocks.data)
    # Diagonal block (i, i) holds mass_i * I, so row i's total confidence
    # (diagonal plus off-diagonal) is 2 * mass_i.
    for i in range(n):
        a[4 * i:4 * i + 4, :] /= 2.0 * a[4 * i + 3, 4 * i + 3]
    steps = _squaring_steps(n)
    for _ in range(steps):
        a = a @ a
    raw: list[RigidTransform] = []
    for i in range(n):
        block = a[4 * i:4 * i + 4, 0:4]
        if block[3, 3] < _MASS_TOL:
            raise SynchronizationCollapse(
                f"frame {i} accumulated no confidence toward frame 0", frame=i
            )
        # block ~ (transform from frame i to frame 0); invert to get the
        # world-to-camera pose with world = frame 0.
        raw.append(invert(project_to_se3(ScaledTransform(block))))
    anchor = invert(raw[0])
    poses = [RigidTransform.identity()]
    poses.extend(compose(anchor, p) for p in raw[1:])
    return SyncResult(tuple(poses), iterations=steps)


def synchronize_eig(graph: PoseGraph) -> SyncResult:
    """Spectral baseline: eigenvector rotations plus least-squares translations.

    The absolute rotations span the null space of the confidence-weighted
    rotation Laplacian, so the three bottom eigenvectors recover them up
    to a global gauge (and a sign, fixed by the block determinants).
    Translations then solve min sum c_ij ||t_j - t_i R_ij - t_ij||^2 with
    frame 0 pinned.
    """
    n = graph.n_frames
    conf = graph.confidence_matrix()
    mass = conf.sum(axis=1)
    dead = np.flatnonzero(mass <= 0.0)
    if dead.size:
        raise DisconnectedGraph(
            f"frame {int(dead[0])} has no positive-confidence edge", frame=int(dead[0])
        )

    laplacian = np.zeros((3 * n, 3 * n))
    for i in range(n):
        laplacian[3 * i:3 * i + 3, 3 * i:3 * i + 3] = mass[i] * np.eye(3)
    for (i, j), (transform, c) in graph.edges.items():
        if c == 0.0:
            continue
        laplacian[3 * i:3 * i + 3, 3 * j:3 * j + 3] = -c * transform.rotation
        laplacian[3 * j:3 * j + 3, 3 * i:3 * i + 3] = -c * transform.rotation.T
    _, eigenvectors = np.linalg.eigh(laplacian)
    basis = eigenvectors[:, :3].reshape(n, 3, 3)
    if np.sign(np.linalg.det(basis)).sum() < 0:
        basis = -basis
    # Block i approximates R_i^T times a shared gauge, so transpose after
    # projecting back onto SO(3).
    rotations = [project_to_so3(basis[i]).T for i in range(n)]

    translations = _solve_translations(graph, n)
    raw = [RigidTransform(rotations[i], translations[i]) for i in range(n)]
    anchor = invert(raw[0])
    poses = [RigidTransform.identity()]
    poses.extend(compose(anchor, p) for p in raw[1:])
    return SyncResult(tuple(poses), iterations=0)


def _solve_translations(graph: PoseGraph, n: int) -> NDArray[np.float64]:
    # Weighted least squares on t_j - t_i R_ij = t_ij with t_0 = 0; the
    # row-vector unknowns become columns, so R_ij enters transposed.
    rows: list[NDArray[np.float64]] = []
    rhs: list[NDArray[np.float64]] = []
    for (i, j), (transform, c) in graph.edges.items():
        if c == 0.0:
            continue
        sqrt_c = math.sqrt(c)
        block = np.zeros((3, 3 * (n - 1)))
        if j > 0:
            block[:, 3 * (j - 1):3 * j] = np.eye(3)
        if i > 0:
            block[:, 3 * (i - 1):3 * i] = -transform.rotation.T
        rows.append(sqrt_c * block)
        rhs.append(sqrt_c * transform.translation)
    solution, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    return np.vstack([np.zeros(3), solution.reshape(n - 1, 3)])


def synchronize_naive(graph: PoseGraph) -> SyncResult:
    """Compose the adjacent chain; frame 0 is the identity by construction."""
    poses = [RigidTransform.identity()]
    for i in range(graph.n_frames - 1):
        edge = graph.edges.get((i, i + 1))
        if edge is None:
            raise DisconnectedGraph(f"missing adjacent edge ({i}, {i + 1})", frame=i + 1)
        poses.append(compose(poses[-1], edge[0]))
    return SyncResult(tuple(poses), iterations=0)
