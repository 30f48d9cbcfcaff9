"""Evaluation metrics: correspondence precision, pose-error AUC, and the
synchronization benchmark across backends."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .correspondence import CorrespondenceSet, FeaturePointcloud
from .errors import EmptyReport
from .geometry import (
    CameraIntrinsics,
    RigidTransform,
    compose,
    invert,
    project_points,
    rotation_angle,
)
from .synchronization import (
    SyncResult,
    synchronize_eig,
    synchronize_naive,
    synchronize_power,
)
from .synthetic import perturb_pose_graph, random_pose_problem

THRESHOLDS_3D = (0.01, 0.05, 0.10)  # meters
THRESHOLDS_2D = (1.0, 2.0, 5.0)     # pixels
ROT_AUC_THRESHOLD_DEG = 5.0
TRANS_AUC_THRESHOLD_M = 0.10

SYNC_BACKENDS = {
    "naive": synchronize_naive,
    "eig": synchronize_eig,
    "power": synchronize_power,
}


@dataclass(frozen=True, eq=False)
class CorrespondenceErrorReport:
    """Fraction of matches within each 3D (meters) and 2D (pixels) threshold."""

    precision_3d: dict[float, float]
    precision_2d: dict[float, float]
    evaluated_3d: int
    evaluated_2d: int


@dataclass(frozen=True, eq=False)
class PoseErrorReport:
    rotation_errors_deg: tuple[float, ...]
    translation_errors_m: tuple[float, ...]
    auc_rot: float
    auc_trans: float


@dataclass(frozen=True)
class BenchmarkRow:
    n_frames: int
    rot_sigma_deg: float
    trans_sigma_m: float
    backend: str
    mean_rot_err_deg: float
    mean_trans_err_m: float
    mean_runtime_s: float
    trials: int


def correspondence_errors(
    corr: CorrespondenceSet,
    src: FeaturePointcloud,
    dst: FeaturePointcloud,
    gt_src: RigidTransform,
    gt_dst: RigidTransform,
    intrinsics: CameraIntrinsics,
    thresholds_3d: tuple[float, ...] = THRESHOLDS_3D,
    thresholds_2d: tuple[float, ...] = THRESHOLDS_2D,
) -> CorrespondenceErrorReport:
    """Score matches against ground-truth world-to-camera poses.

    3D error: distance between the source point carried into the target
    frame and its matched target point. 2D error: pixel distance between
    the carried point's projection and the match's recorded target pixel;
    matches that land behind the camera drop out of the 2D denominator.
    """
    relative = compose(invert(gt_src), gt_dst)
    aligned = relative.apply(src.points[corr.source_indices()])
    target = dst.points[corr.target_indices()]
    err3d = np.linalg.norm(aligned - target, axis=1)
    pixels, in_front = project_points(aligned, intrinsics)
    target_pixels = dst.pixels[corr.target_indices()]
    err2d = np.linalg.norm(pixels[in_front] - target_pixels[in_front], axis=1)
    precision_3d = {
        t: float((err3d <= t).sum() / err3d.size) if err3d.size else 0.0
        for t in thresholds_3d
    }
    precision_2d = {
        t: float((err2d <= t).sum() / err2d.size) if err2d.size else 0.0
        for t in thresholds_2d
    }
    return CorrespondenceErrorReport(
        precision_3d, precision_2d, int(err3d.size), int(err2d.size)
    )


def auc_below(errors, threshold: float) -> float:
    """Trapezoidal area under the fraction-below-epsilon curve on [0, threshold].

    Errors are clamped at the threshold and the result is normalized by
    the threshold, so the value lives in [0, 1]. Accumulation runs left
    to right so independent reimplementations can match it exactly.
    """
    values = np.asarray(errors, dtype=np.float64)
    if values.size == 0:
        raise EmptyReport("cannot integrate an empty error list")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    n = values.size
    xs = [0.0]
    ys = [0.0]
    for rank, err in enumerate(np.sort(values, kind="stable"), start=1):
        if err > threshold:
            break
        xs.append(float(err))
        ys.append(rank / n)
    xs.append(threshold)
    ys.append(ys[-1])
    area = 0.0
    for k in range(len(xs) - 1):
        area += (xs[k + 1] - xs[k]) * (ys[k] + ys[k + 1]) / 2.0
    return area / threshold


def pose_auc(
    errors,
    rot_threshold: float = ROT_AUC_THRESHOLD_DEG,
    trans_threshold: float = TRANS_AUC_THRESHOLD_M,
) -> tuple[float, float]:
    """AUC of the rotation (degrees) and translation (meters) error CDFs."""
    pairs = list(errors)
    if not pairs:
        raise EmptyReport("no pose errors to integrate")
    rot = [e[0] for e in pairs]
    trans = [e[1] for e in pairs]
    return auc_below(rot, rot_threshold), auc_below(trans, trans_threshold)


def pose_errors(
    estimated: SyncResult | list[RigidTransform],
    ground_truth: list[RigidTransform],
) -> list[tuple[float, float]]:
    """Per-frame (rotation deg, translation m) errors after gauge alignment.

    Both trajectories are re-anchored so their frame 0 is the identity;
    frame 0 itself (identically zero) is excluded.
    """
    est = list(estimated.world_to_camera) if isinstance(estimated, SyncResult) else list(estimated)
    gt = list(ground_truth)
    if len(est) != len(gt):
        raise ValueError("estimated and ground-truth pose counts differ")
    est_anchor = invert(est[0])
    gt_anchor = invert(gt[0])
    out = []
    for e, g in zip(est[1:], gt[1:]):
        e0 = compose(est_anchor, e)
        g0 = compose(gt_anchor, g)
        rot_err = np.degrees(rotation_angle(g0.rotation.T @ e0.rotation))
        trans_err = float(np.linalg.norm(e0.translation - g0.translation))
        out.append((rot_err, trans_err))
    return out


def pose_error_report(
    estimated, ground_truth,
    rot_threshold: float = ROT_AUC_THRESHOLD_DEG,
    trans_threshold: float = TRANS_AUC_THRESHOLD_M,
) -> PoseErrorReport:
    errs = pose_errors(estimated, ground_truth)
    auc_rot, auc_trans = pose_auc(errs, rot_threshold, trans_threshold)
    return PoseErrorReport(
        tuple(e[0] for e in errs), tuple(e[1] for e in errs), auc_rot, auc_trans
    )


def sync_benchmark(
    noise_grid: list[tuple[float, float]],
    n_frames: int,
    trials: int,
    seed: int,
    backends: tuple[str, ...] = ("naive", "eig", "power"),
) -> list[BenchmarkRow]:
    """Compare synchronization backends on perturbed consistent graphs.

    For every (rotation sigma deg, translation sigma m) cell: build
    `trials` random fully connected consistent graphs, corrupt every
    edge, run each backend on the same corrupted graph, and aggregate
    gauge-aligned mean pose errors and wall time.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = []
    for cell, (rot_sigma, trans_sigma) in enumerate(noise_grid):
        errors = {b: [] for b in backends}
        runtimes = {b: [] for b in backends}
        for trial in range(trials):
            rng = np.random.default_rng(np.random.SeedSequence([seed, cell, trial]))
            gt, graph = random_pose_problem(n_frames, rng, translation_scale=0.5)
            noisy = perturb_pose_graph(graph, rot_sigma, trans_sigma, rng)
            for backend in backends:
                start = time.perf_counter()
                result = SYNC_BACKENDS[backend](noisy)
                runtimes[backend].append(time.perf_counter() - start)
                errs = pose_errors(result, gt)
                errors[backend].append(
                    (float(np.mean([e[0] for e in errs])), float(np.mean([e[1] for e in errs])))
                )
        for backend in backends:
            rot_errs = [e[0] for e in errors[backend]]
            trans_errs = [e[1] for e in errors[backend]]
            rows.append(
                BenchmarkRow(
                    n_frames=n_frames,
                    rot_sigma_deg=rot_sigma,
                    trans_sigma_m=trans_sigma,
                    backend=backend,
                    mean_rot_err_deg=float(np.mean(rot_errs)),
                    mean_trans_err_m=float(np.mean(trans_errs)),
                    mean_runtime_s=float(np.mean(runtimes[backend])),
                    trials=trials,
                )
            )
    return rows
