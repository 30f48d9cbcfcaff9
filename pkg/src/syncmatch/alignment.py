"""Closed-form weighted rigid alignment and its consensus-seeking wrapper.

weighted_procrustes solves the weighted least-squares rigid fit in closed
form (weighted centroids, weighted cross-covariance, SVD with a
reflection guard). wp_ransac wraps it: sample small subsets, fit each,
keep the fit with the most inliers, zero the outliers' weights, and refit
on everything that survived. Ranking hypotheses by inlier count rather
than residual keeps one huge outlier from dragging the answer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .correspondence import CorrespondenceSet, FeaturePointcloud
from .errors import DegenerateGeometry, InsufficientSupport, NoConsensus
from .geometry import RigidTransform

# Second singular value of the weighted cross-covariance below this means
# the support is collinear and rotation is underconstrained.
_GEOMETRY_TOL = 1e-10


@dataclass(frozen=True)
class RansacConfig:
    """Consensus-search knobs; defaults suit room-scale indoor scenes."""

    hypotheses: int = 128
    sample_size: int = 8
    inlier_threshold: float = 0.05  # meters
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sample_size < 3:
            raise ValueError("sample_size must be >= 3")
        if self.hypotheses < 1:
            raise ValueError("hypotheses must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    """Robust fit output: transform plus the reweighted correspondences.

    inlier_weights are the input weights with outliers zeroed;
    residual_rms is the weight-normalized RMS residual over the inliers
    under the final transform.
    """

    transform: RigidTransform
    inlier_weights: NDArray[np.float64]
    inlier_count: int
    residual_rms: float

    def __post_init__(self) -> None:
        w = np.array(self.inlier_weights, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "inlier_weights", w)
        if self.inlier_count != int((w > 0).sum()):
            raise ValueError("inlier_count must equal the number of positive weights")
        if self.residual_rms < 0:
            raise ValueError("residual_rms must be nonnegative")


def weighted_procrustes(src_points, dst_points, weights) -> RigidTransform:
    """Rigid transform minimizing sum(w * ||dst - T(src)||^2).

    Needs at least three positively weighted correspondences whose
    weighted spread is not collinear.
    """
    src = np.asarray(src_points, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst_points, dtype=np.float64).reshape(-1, 3)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if src.shape != dst.shape or src.shape[0] != w.shape[0]:
        raise ValueError("src_points, dst_points, and weights must have matching lengths")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    if int((w > 0).sum()) < 3:
        raise InsufficientSupport(
            f"need >= 3 positive weights, got {int((w > 0).sum())}"
        )
    wn = w / w.sum()
    centroid_src = wn @ src
    centroid_dst = wn @ dst
    src_c = src - centroid_src
    dst_c = dst - centroid_dst
    cov = src_c.T @ (dst_c * wn[:, None])
    u, sing, vt = np.linalg.svd(cov)
    if sing[1] < _GEOMETRY_TOL:
        raise DegenerateGeometry(
            f"weighted support is (near) collinear: singular values {sing}"
        )
    sign = 1.0 if np.linalg.det(u @ vt) > 0 else -1.0
    rotation = (u * np.array([1.0, 1.0, sign])) @ vt
    translation = centroid_dst - centroid_src @ rotation
    return RigidTransform(rotation, translation)


def _batch_procrustes(
    src: NDArray[np.float64],
    dst: NDArray[np.float64],
    weights: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.bool_]]:
    """Closed-form weighted rigid fits for a stack of (H, k, 3) subsets.

    Same math as weighted_procrustes, batched over the leading axis.
    Returns (rotations, translations, valid); hypotheses whose support is
    (near) collinear come back invalid instead of raising.
    """
    wn = weights / weights.sum(axis=1, keepdims=True)
    centroid_src = np.einsum("hk,hkd->hd", wn, src)
    centroid_dst = np.einsum("hk,hkd->hd", wn, dst)
    src_c = src - centroid_src[:, None, :]
    dst_c = dst - centroid_dst[:, None, :]
    cov = np.einsum("hki,hkj->hij", src_c, dst_c * wn[:, :, None])
    u, sing, vt = np.linalg.svd(cov)
    valid = sing[:, 1] >= _GEOMETRY_TOL
    signs = np.ones_like(centroid_src)
    signs[:, 2] = np.sign(np.linalg.det(u @ vt))
    rotations = (u * signs[:, None, :]) @ vt
    translations = centroid_dst - np.einsum("hd,hde->he", centroid_src, rotations)
    return rotations, translations, valid


def wp_ransac(
    corr: CorrespondenceSet,
    src: FeaturePointcloud,
    dst: FeaturePointcloud,
    cfg: RansacConfig,
) -> AlignmentResult:
    """Consensus-selected weighted rigid fit over a correspondence set.

    Samples cfg.hypotheses minimal subsets (weighted by correspondence
    weight), fits each in closed form, scores by inlier count under
    cfg.inlier_threshold, zeroes the weights of the winner's outliers,
    and refits on the full reweighted set. Deterministic given cfg.seed:
    sampling uses a counter-based generator and ties pick the
    lowest-index hypothesis.
    """
    n = len(corr)
    if n < cfg.sample_size:
        raise InsufficientSupport(
            f"{n} correspondences but sample_size is {cfg.sample_size}"
        )
    p = src.points[corr.source_indices()]
    q = dst.points[corr.target_indices()]
    w = corr.weights()
    positive = int((w > 0).sum())
    if positive < cfg.sample_size:
        raise InsufficientSupport(
            f"only {positive} positively weighted correspondences"
        )

    # Weighted sampling without replacement via exponential race keys:
    # the sample_size smallest of Exp(1)/w_i per row draws indices with
    # probability proportional to weight; zero weights never win.
    rng = np.random.Generator(np.random.Philox(key=np.uint64(cfg.seed % (1 << 64))))
    with np.errstate(divide="ignore"):
        keys = rng.standard_exponential((cfg.hypotheses, n)) / w
    samples = np.argpartition(keys, cfg.sample_size - 1, axis=1)[:, : cfg.sample_size]

    rotations, translations, valid = _batch_procrustes(p[samples], q[samples], w[samples])
    diff = (p[None, :, :] @ rotations + translations[:, None, :]) - q[None, :, :]
    masks = (diff * diff).sum(axis=2) < cfg.inlier_threshold**2
    counts = np.where(valid, masks.sum(axis=1), -1)
    best = int(np.argmax(counts))  # ties resolve to the lowest index
    best_count = int(counts[best])
    if best_count <= 0:
        raise NoConsensus("no hypothesis produced any inlier")
    best_mask = masks[best]

    updated = w * best_mask
    transform = weighted_procrustes(p, q, updated)
    final_residuals = np.linalg.norm(q - transform.apply(p), axis=1)
    inliers = updated > 0
    rms = float(
        np.sqrt((updated[inliers] * final_residuals[inliers] ** 2).sum() / updated[inliers].sum())
    )
    return AlignmentResult(transform, updated, int(inliers.sum()), rms)
