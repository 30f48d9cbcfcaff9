"""Descriptor matching with ratio-test weighting, plus the geometry-aware variant.

Matching is one-directional: every source point proposes its best target
under the active distance, the proposal is weighted by how much closer the
best target is than the runner-up, and the top k proposals survive. The
geometry-aware variant runs the identical pipeline with the distance
augmented by a scaled Euclidean gap between the points expressed in a
shared global frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import InsufficientTargets, InvalidNeighborOrder
from .geometry import RigidTransform

DESCRIPTOR_NORM_TOL = 1e-6
DEFAULT_TOP_K = 500
DEFAULT_SPATIAL_WEIGHT = 10.0  # 1/meters


@dataclass(frozen=True, eq=False)
class FeaturePointcloud:
    """Per-frame 3D points, unit-norm descriptors, and source pixels.

    points: (N, 3) camera-frame coordinates in meters
    descriptors: (N, D) unit-norm feature vectors
    pixels: (N, 2) source (u, v) pixel coordinates
    """

    points: NDArray[np.float64]
    descriptors: NDArray[np.float64]
    pixels: NDArray[np.float64]

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64)
        des = np.array(self.descriptors, dtype=np.float64)
        pix = np.array(self.pixels, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be (N, 3), got {pts.shape}")
        if des.ndim != 2 or des.shape[0] != pts.shape[0]:
            raise ValueError("descriptors must be (N, D) with N matching points")
        if pix.shape != (pts.shape[0], 2):
            raise ValueError(f"pixels must be (N, 2), got {pix.shape}")
        norms = np.linalg.norm(des, axis=1)
        if pts.shape[0] and np.abs(norms - 1.0).max() > DESCRIPTOR_NORM_TOL:
            worst = float(np.abs(norms - 1.0).max())
            raise ValueError(f"descriptors must be unit norm (worst deviation {worst:.2e})")
        for arr, name in ((pts, "points"), (des, "descriptors"), (pix, "pixels")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class Correspondence:
    source_index: int
    target_index: int
    weight: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.weight <= 1.0):
            raise ValueError(f"weight must be in [0, 1], got {self.weight}")


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """Weighted matches between a frame pair, sorted by weight descending."""

    frame_pair: tuple[int, int]
    matches: tuple[Correspondence, ...]

    def __post_init__(self) -> None:
        i, j = self.frame_pair
        if i >= j:
            raise ValueError(f"frame pair must satisfy i < j, got {self.frame_pair}")
        object.__setattr__(self, "matches", tuple(self.matches))
        weights = [m.weight for m in self.matches]
        if any(a < b for a, b in zip(weights, weights[1:])):
            raise ValueError("matches must be sorted by weight descending")
        sources = [m.source_index for m in self.matches]
        if len(set(sources)) != len(sources):
            raise ValueError("duplicate source index in correspondence set")

    def __len__(self) -> int:
        return len(self.matches)

    def source_indices(self) -> NDArray[np.int64]:
        return np.array([m.source_index for m in self.matches], dtype=np.int64)

    def target_indices(self) -> NDArray[np.int64]:
        return np.array([m.target_index for m in self.matches], dtype=np.int64)

    def weights(self) -> NDArray[np.float64]:
        return np.array([m.weight for m in self.matches], dtype=np.float64)

    def with_weights(self, new_weights) -> "CorrespondenceSet":
        """Same matched pairs re-weighted (and re-sorted) with `new_weights`."""
        w = np.asarray(new_weights, dtype=np.float64)
        if w.shape != (len(self.matches),):
            raise ValueError("need one weight per match")
        order = np.lexsort((list(range(len(w))), -w))
        matches = tuple(
            Correspondence(self.matches[k].source_index, self.matches[k].target_index, float(w[k]))
            for k in order
        )
        return CorrespondenceSet(self.frame_pair, matches)


def cosine_distance(a, b) -> float:
    """1 - <a, b> for unit-norm descriptors; ranges over [0, 2]."""
    return float(1.0 - np.dot(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)))


def ratio_weight(d_first: float, d_second: float) -> float:
    """Match weight 1 - d_first / d_second, clamped to [0, 1].

    Both distances zero means the two best targets are indistinguishable
    from the query, so the match carries no information and gets weight 0.
    """
    if d_second < d_first:
        raise InvalidNeighborOrder(
            f"second-nearest distance {d_second} is below nearest {d_first}"
        )
    if d_second <= 0.0:
        return 0.0
    return float(min(1.0, max(0.0, 1.0 - d_first / d_second)))


def _ratio_weights(d_first: NDArray, d_second: NDArray) -> NDArray[np.float64]:
    # Vectorized twin of ratio_weight; inputs already satisfy 0 <= d1 <= d2.
    with np.errstate(divide="ignore", invalid="ignore"):
        w = 1.0 - d_first / d_second
    return np.clip(np.where(d_second <= 0.0, 0.0, w), 0.0, 1.0)


def _match_by_distance(
    dist: NDArray[np.float64], k_keep: int, frame_pair: tuple[int, int]
) -> CorrespondenceSet:
    """Shared 2-NN + ratio-test + global top-k core.

    Nearest-neighbor ties break toward the lowest target index; equal
    weights rank by source index, so output is fully deterministic.
    """
    if k_keep < 1:
        raise ValueError("k_keep must be >= 1")
    n_src = dist.shape[0]
    rows = np.arange(n_src)
    first = np.argmin(dist, axis=1)  # first occurrence wins ties
    d1 = dist[rows, first].copy()
    dist[rows, first] = np.inf
    d2 = dist.min(axis=1)
    dist[rows, first] = d1
    weights = _ratio_weights(d1, d2)
    keep = np.lexsort((rows, -weights))[:k_keep]
    matches = tuple(
        Correspondence(int(k), int(first[k]), float(weights[k])) for k in keep
    )
    return CorrespondenceSet(frame_pair, matches)


def _feature_distance(src: FeaturePointcloud, dst: FeaturePointcloud) -> NDArray[np.float64]:
    # Clamp tiny negative values from float round-off on near-identical vectors.
    return np.maximum(1.0 - src.descriptors @ dst.descriptors.T, 0.0)


def match_ratio_test(
    src: FeaturePointcloud,
    dst: FeaturePointcloud,
    k_keep: int = DEFAULT_TOP_K,
    frame_pair: tuple[int, int] = (0, 1),
) -> CorrespondenceSet:
    """Match every source point to its closest target descriptor.

    Weights come from the ratio of nearest to second-nearest cosine
    distance; only the k_keep highest-weight matches survive.
    """
    if len(dst) < 2:
        raise InsufficientTargets("ratio test needs at least two target points")
    return _match_by_distance(_feature_distance(src, dst), k_keep, frame_pair)


def gart_distance(f_p, f_q, x_p, x_q, lam: float = DEFAULT_SPATIAL_WEIGHT) -> float:
    """Combined distance: cosine distance plus lam * ||x_p - x_q||.

    Points must already live in the same global frame; lam carries units
    of 1/meter.
    """
    gap = float(np.linalg.norm(np.asarray(x_p, dtype=np.float64) - np.asarray(x_q, dtype=np.float64)))
    return cosine_distance(f_p, f_q) + lam * gap


def match_gart(
    src: FeaturePointcloud,
    dst: FeaturePointcloud,
    transform_src: RigidTransform,
    transform_dst: RigidTransform,
    lam: float = DEFAULT_SPATIAL_WEIGHT,
    k_keep: int = DEFAULT_TOP_K,
    frame_pair: tuple[int, int] = (0, 1),
) -> CorrespondenceSet:
    """Geometry-aware rematch under the current registration.

    transform_src and transform_dst map each camera frame into the shared
    global frame. Both nearest neighbors and the ratio are recomputed
    under the combined feature + spatial distance, so with lam = 0 the
    output is identical to match_ratio_test.
    """
    if len(dst) < 2:
        raise InsufficientTargets("ratio test needs at least two target points")
    src_global = transform_src.apply(src.points)
    dst_global = transform_dst.apply(dst.points)
    # Differenced directly: the Gram-matrix shortcut loses precision
    # exactly where it matters, at near-zero gaps under good alignment.
    delta = src_global[:, None, :] - dst_global[None, :, :]
    spatial = np.sqrt((delta * delta).sum(axis=2))
    dist = _feature_distance(src, dst) + lam * spatial
    return _match_by_distance(dist, k_keep, frame_pair)
