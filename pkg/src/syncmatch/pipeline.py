"""End-to-end multiview registration.

Full-pairwise mode: match every frame pair with the ratio test, align each
pair robustly, turn mean match weights into edge confidences, synchronize,
then rematch every pair with the geometry-aware ratio test under the
stage-1 poses and repeat alignment + synchronization. Windowed mode
bootstraps from the adjacent chain and only revisits pairs closer than the
window, which keeps the pair count linear in the sequence length.

Per-pair work is independent and deterministically seeded, so results do
not depend on evaluation order; set SYNCMATCH_THREADS to evaluate pairs in
a thread pool.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .alignment import RansacConfig, wp_ransac
from .correspondence import (
    CorrespondenceSet,
    FeaturePointcloud,
    match_gart,
    match_ratio_test,
)
from .errors import (
    AdjacentPairFailure,
    DegenerateGeometry,
    InsufficientSupport,
    InsufficientTargets,
    NoConsensus,
)
from .geometry import RigidTransform, invert
from .synchronization import (
    PoseGraph,
    SyncResult,
    pairwise_confidence,
    rescale_confidence,
    synchronize_naive,
    synchronize_power,
)

_MODES = ("full_pairwise", "windowed")
_PAIR_FAILURES = (NoConsensus, InsufficientSupport, DegenerateGeometry, InsufficientTargets)


@dataclass(frozen=True, eq=False)
class SceneInput:
    """Frames to register; adjacency_stride records the source sampling gap."""

    frames: tuple[FeaturePointcloud, ...]
    adjacency_stride: int = 20

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))
        if len(self.frames) < 2:
            raise ValueError("need at least two frames")

    @property
    def n_frames(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "full_pairwise"
    window: int = 10
    gamma: float = 0.4
    lam: float = 10.0
    k_keep: int = 500
    ransac: RansacConfig = field(default_factory=RansacConfig)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.mode == "windowed" and self.window < 2:
            raise ValueError("window must be >= 2 in windowed mode")
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError("gamma must be in [0, 1)")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.k_keep < 1:
            raise ValueError("k_keep must be >= 1")


@dataclass(frozen=True)
class PairDiagnostics:
    stage: str  # "initial" or "refined"
    i: int
    j: int
    correspondence_count: int
    confidence_raw: float
    confidence: float
    inlier_count: int
    registration_loss: float
    demoted: bool


@dataclass(frozen=True, eq=False)
class SceneRegistration:
    poses: SyncResult
    initial_poses: SyncResult
    pair_diagnostics: tuple[PairDiagnostics, ...]
    refined: bool
    pair_evaluations: int


@dataclass(frozen=True, eq=False)
class _PairRecord:
    i: int
    j: int
    corr: CorrespondenceSet | None
    transform: RigidTransform
    confidence_raw: float
    confidence: float
    inlier_count: int
    demoted: bool


def registration_loss(
    corr: CorrespondenceSet,
    src: FeaturePointcloud,
    dst: FeaturePointcloud,
    pose_src: RigidTransform,
    pose_dst: RigidTransform,
) -> float:
    """Weighted sum of residual norms in the shared world frame.

    pose_src and pose_dst are synchronized world-to-camera estimates, so
    their inverses carry the camera-frame points into the world frame.
    Diagnostic only; nothing is optimized against it.
    """
    if len(corr) == 0:
        return 0.0
    src_world = invert(pose_src).apply(src.points[corr.source_indices()])
    dst_world = invert(pose_dst).apply(dst.points[corr.target_indices()])
    residuals = np.linalg.norm(dst_world - src_world, axis=1)
    return float((corr.weights() * residuals).sum())


def _pair_seed(seed: int, stage: int, i: int, j: int) -> int:
    return int(np.random.SeedSequence([seed, stage, i, j]).generate_state(1, dtype=np.uint64)[0])


def _worker_count() -> int:
    raw = os.environ.get("SYNCMATCH_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_pairs(fn, pairs):
    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, pairs))
    return [fn(pair) for pair in pairs]


def _evaluate_pair(
    frames: tuple[FeaturePointcloud, ...],
    pair: tuple[int, int],
    cfg: PipelineConfig,
    stage: int,
    stage_poses: SyncResult | None,
) -> _PairRecord:
    """Match + robustly align one pair; failures demote non-adjacent edges.

    The mean weight of the reweighted (outlier-zeroed) matches is the raw
    confidence; the thresholded rescale is skipped for adjacent pairs.
    """
    i, j = pair
    adjacent = j - i == 1
    corr: CorrespondenceSet | None = None
    try:
        if stage_poses is None:
            corr = match_ratio_test(frames[i], frames[j], cfg.k_keep, frame_pair=pair)
        else:
            corr = match_gart(
                frames[i],
                frames[j],
                invert(stage_poses.world_to_camera[i]),
                invert(stage_poses.world_to_camera[j]),
                cfg.lam,
                cfg.k_keep,
                frame_pair=pair,
            )
        result = wp_ransac(
            corr,
            frames[i],
            frames[j],
            replace(cfg.ransac, seed=_pair_seed(cfg.seed, stage, i, j)),
        )
    except _PAIR_FAILURES as exc:
        if adjacent:
            raise AdjacentPairFailure(
                f"adjacent pair ({i}, {j}) failed to align: {exc}"
            ) from exc
        return _PairRecord(
            i, j, corr, RigidTransform.identity(),
            confidence_raw=0.0 if corr is None else pairwise_confidence(corr),
            confidence=0.0, inlier_count=0, demoted=True,
        )
    updated = corr.with_weights(result.inlier_weights)
    c_hat = pairwise_confidence(updated)
    return _PairRecord(
        i, j, updated, result.transform,
        confidence_raw=c_hat,
        confidence=rescale_confidence(c_hat, adjacent, cfg.gamma),
        inlier_count=result.inlier_count,
        demoted=False,
    )


def _diagnostics(
    records: list[_PairRecord],
    frames: tuple[FeaturePointcloud, ...],
    poses: SyncResult,
    stage_name: str,
) -> list[PairDiagnostics]:
    out = []
    for rec in records:
        loss = (
            registration_loss(
                rec.corr,
                frames[rec.i],
                frames[rec.j],
                poses.world_to_camera[rec.i],
                poses.world_to_camera[rec.j],
            )
            if rec.corr is not None
            else 0.0
        )
        out.append(
            PairDiagnostics(
                stage_name, rec.i, rec.j,
                correspondence_count=0 if rec.corr is None else len(rec.corr),
                confidence_raw=rec.confidence_raw,
                confidence=rec.confidence,
                inlier_count=rec.inlier_count,
                registration_loss=loss,
                demoted=rec.demoted,
            )
        )
    return out


def _graph(n: int, records: list[_PairRecord]) -> PoseGraph:
    return PoseGraph(n, {(r.i, r.j): (r.transform, r.confidence) for r in records})


def register_scene(scene: SceneInput, cfg: PipelineConfig) -> SceneRegistration:
    """Two-stage all-pairs registration.

    Stage 1 matches descriptors alone; stage 2 rematches with the
    geometry-aware test under the stage-1 poses. A pair that fails to
    reach consensus keeps its edge at confidence 0 instead of aborting,
    unless it is adjacent (the chain must survive).
    """
    frames = scene.frames
    n = scene.n_frames
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    stage1 = _map_pairs(lambda p: _evaluate_pair(frames, p, cfg, 1, None), pairs)
    poses1 = synchronize_power(_graph(n, stage1))

    stage2 = _map_pairs(lambda p: _evaluate_pair(frames, p, cfg, 2, poses1), pairs)
    poses2 = synchronize_power(_graph(n, stage2))

    diagnostics = _diagnostics(stage1, frames, poses1, "initial") + _diagnostics(
        stage2, frames, poses2, "refined"
    )
    return SceneRegistration(
        poses=poses2,
        initial_poses=poses1,
        pair_diagnostics=tuple(diagnostics),
        refined=True,
        pair_evaluations=len(pairs) * 2,
    )


def register_sequence_windowed(scene: SceneInput, cfg: PipelineConfig) -> SceneRegistration:
    """Linear-time variant for long sequences.

    Stage 1 aligns only the N-1 adjacent pairs and composes the chain for
    an approximate trajectory. Stage 2 evaluates every pair with index gap
    below the window under that trajectory; all other pairs implicitly
    carry confidence 0. Total pair evaluations stay at or below N * window.
    """
    if cfg.window < 2:
        raise ValueError("window must be >= 2 in windowed mode")
    frames = scene.frames
    n = scene.n_frames

    chain_pairs = [(i, i + 1) for i in range(n - 1)]
    stage1 = _map_pairs(lambda p: _evaluate_pair(frames, p, cfg, 1, None), chain_pairs)
    poses1 = synchronize_naive(_graph(n, stage1))

    window_pairs = [
        (i, j) for i in range(n) for j in range(i + 1, min(i + cfg.window, n))
    ]
    stage2 = _map_pairs(lambda p: _evaluate_pair(frames, p, cfg, 2, poses1), window_pairs)
    poses2 = synchronize_power(_graph(n, stage2))

    diagnostics = _diagnostics(stage1, frames, poses1, "initial") + _diagnostics(
        stage2, frames, poses2, "refined"
    )
    return SceneRegistration(
        poses=poses2,
        initial_poses=poses1,
        pair_diagnostics=tuple(diagnostics),
        refined=True,
        pair_evaluations=len(chain_pairs) + len(window_pairs),
    )


def register(scene: SceneInput, cfg: PipelineConfig) -> SceneRegistration:
    """Dispatch on cfg.mode."""
    if cfg.mode == "windowed":
        return register_sequence_windowed(scene, cfg)
    return register_scene(scene, cfg)
