"""Command-line surface: generate, register, bench-sync, evaluate.

Exit codes: 0 success, 2 usage or input mismatch, 3 numerical/topology
failure, 4 I/O failure. Every run writes a manifest.json next to its
outputs capturing the command, config, seed, versions, and per-stage wall
time (the wall-time fields are the only non-reproducible bytes).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .alignment import RansacConfig
from .errors import (
    InputMismatch,
    IOFailure,
    SyncMatchError,
    SynchronizationCollapse,
)
from .io import read_poses, read_scene_dir, write_poses, write_scene_dir
from .metrics import (
    ROT_AUC_THRESHOLD_DEG,
    TRANS_AUC_THRESHOLD_M,
    correspondence_errors,
    pose_error_report,
    pose_errors,
    sync_benchmark,
)
from .correspondence import match_ratio_test
from .pipeline import PipelineConfig, SceneInput, register
from .synthetic import CorruptionSpec, generate_scene

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _write_manifest(outdir: Path, args: argparse.Namespace, config: dict,
                    inputs: list[str], outputs: list[str], timings: dict) -> None:
    manifest = {
        "command": sys.argv if sys.argv else ["syncmatch"],
        "subcommand": args.command,
        "config": config,
        "seed": getattr(args, "seed", None),
        "versions": {
            "syncmatch": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "inputs": inputs,
        "outputs": outputs,
        "wall_time_s": timings,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _corruption_from_args(args) -> CorruptionSpec:
    return CorruptionSpec(
        descriptor_sigma=args.descriptor_sigma,
        outlier_fraction=args.outlier_fraction,
        depth_sigma=args.depth_sigma,
        drop_fraction=args.drop_fraction,
        seed=args.seed,
    )


def cmd_generate(args) -> int:
    outdir = Path(args.output)
    t0 = time.perf_counter()
    scene = generate_scene(
        args.frames, args.landmarks, args.motion, args.seed, step=args.step
    )
    t1 = time.perf_counter()
    try:
        written = write_scene_dir(outdir, scene, _corruption_from_args(args))
    except OSError as exc:
        raise IOFailure(f"cannot write scene to {outdir}: {exc}") from exc
    t2 = time.perf_counter()
    _write_manifest(
        outdir, args,
        config={
            "frames": args.frames, "landmarks": args.landmarks, "motion": args.motion,
            "step": args.step, "descriptor_sigma": args.descriptor_sigma,
            "outlier_fraction": args.outlier_fraction, "depth_sigma": args.depth_sigma,
            "drop_fraction": args.drop_fraction,
        },
        inputs=[], outputs=[str(p.name) for p in written],
        timings={"generate": t1 - t0, "write": t2 - t1},
    )
    print(f"wrote {args.frames}-frame scene to {outdir}")
    return EXIT_OK


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        mode=args.mode,
        window=args.window,
        gamma=args.gamma,
        lam=getattr(args, "lam"),
        k_keep=args.topk,
        ransac=RansacConfig(
            hypotheses=args.ransac_hypotheses,
            sample_size=args.ransac_sample,
            inlier_threshold=args.inlier_thresh,
            seed=args.seed,
        ),
        seed=args.seed,
    )


def _stage_summary(diagnostics, stage: str) -> list[dict]:
    return [
        {
            "i": d.i, "j": d.j,
            "correspondences": d.correspondence_count,
            "confidence_raw": d.confidence_raw,
            "confidence": d.confidence,
            "inliers": d.inlier_count,
            "loss": d.registration_loss,
            "demoted": d.demoted,
        }
        for d in diagnostics if d.stage == stage
    ]


def _pose_error_summary(result_poses, gt) -> dict:
    errs = pose_errors(result_poses, gt)
    return {
        "mean_rot_deg": float(np.mean([e[0] for e in errs])),
        "mean_trans_m": float(np.mean([e[1] for e in errs])),
        "per_frame": [{"rot_deg": e[0], "trans_m": e[1]} for e in errs],
    }


def cmd_register(args) -> int:
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = _pipeline_config(args)
    t0 = time.perf_counter()
    frames, _, gt = read_scene_dir(args.scene)
    t1 = time.perf_counter()
    scene = SceneInput(tuple(frames))
    try:
        result = register(scene, cfg)
    except SynchronizationCollapse as exc:
        (outdir / "diagnostics.json").write_text(json.dumps({
            "error": "synchronization_collapse",
            "frame": exc.frame,
            "message": str(exc),
        }, indent=2) + "\n")
        print(f"synchronization collapsed at frame {exc.frame}", file=sys.stderr)
        return EXIT_NUMERICAL
    t2 = time.perf_counter()

    write_poses(outdir / "poses.txt", result.poses.world_to_camera)
    diagnostics = {
        "n_frames": scene.n_frames,
        "mode": cfg.mode,
        "pair_evaluations": result.pair_evaluations,
        "stages": {
            "initial": {"pairs": _stage_summary(result.pair_diagnostics, "initial")},
            "refined": {"pairs": _stage_summary(result.pair_diagnostics, "refined")},
        },
    }
    if gt is not None:
        diagnostics["stages"]["initial"]["pose_error_vs_gt"] = _pose_error_summary(
            result.initial_poses, gt
        )
        diagnostics["stages"]["refined"]["pose_error_vs_gt"] = _pose_error_summary(
            result.poses, gt
        )
    (outdir / "diagnostics.json").write_text(json.dumps(diagnostics, indent=2) + "\n")
    t3 = time.perf_counter()
    _write_manifest(
        outdir, args,
        config={
            "mode": cfg.mode, "window": cfg.window, "gamma": cfg.gamma,
            "lambda": cfg.lam, "topk": cfg.k_keep,
            "ransac_hypotheses": cfg.ransac.hypotheses,
            "ransac_sample": cfg.ransac.sample_size,
            "inlier_thresh": cfg.ransac.inlier_threshold,
            "pair_evaluations": result.pair_evaluations,
        },
        inputs=[str(args.scene)],
        outputs=["poses.txt", "diagnostics.json"],
        timings={"load": t1 - t0, "register": t2 - t1, "write": t3 - t2},
    )
    if gt is not None:
        summary = diagnostics["stages"]["refined"]["pose_error_vs_gt"]
        print(
            f"registered {scene.n_frames} frames: "
            f"mean rot {summary['mean_rot_deg']:.4g} deg, "
            f"mean trans {summary['mean_trans_m']:.4g} m"
        )
    else:
        print(f"registered {scene.n_frames} frames (no ground truth in scene)")
    return EXIT_OK


def cmd_bench_sync(args) -> int:
    from .plots import save_sync_benchmark_figure

    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = [(rs, ts) for rs in args.rot_sigmas for ts in args.trans_sigmas]
    rows = []
    t0 = time.perf_counter()
    for n in args.frames:
        rows.extend(sync_benchmark(grid, n, args.trials, args.seed))
    t1 = time.perf_counter()

    csv_path = outdir / "bench_sync.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "n_frames", "rot_sigma_deg", "trans_sigma_m", "backend",
            "mean_rot_err_deg", "mean_trans_err_m", "mean_runtime_s", "trials",
        ])
        for r in rows:
            writer.writerow([
                r.n_frames, f"{r.rot_sigma_deg:g}", f"{r.trans_sigma_m:g}", r.backend,
                f"{r.mean_rot_err_deg:.12g}", f"{r.mean_trans_err_m:.12g}",
                f"{r.mean_runtime_s:.6g}", r.trials,
            ])
    figure_path = save_sync_benchmark_figure(rows, outdir / "bench_sync.png")
    t2 = time.perf_counter()
    _write_manifest(
        outdir, args,
        config={
            "frames": args.frames, "rot_sigmas": args.rot_sigmas,
            "trans_sigmas": args.trans_sigmas, "trials": args.trials,
        },
        inputs=[], outputs=["bench_sync.csv", figure_path.name],
        timings={"benchmark": t1 - t0, "write": t2 - t1},
    )
    print(f"wrote {csv_path} ({len(rows)} rows) and {figure_path.name}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .plots import save_pose_error_figure, save_precision_figure

    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    frames, intrinsics, gt = read_scene_dir(args.scene)
    if gt is None:
        raise IOFailure(f"{args.scene}: evaluation needs gt_poses.txt")
    estimated = read_poses(args.poses)
    if len(estimated) != len(frames) or len(gt) != len(frames):
        raise InputMismatch(
            f"{len(estimated)} estimated poses vs {len(frames)} frames"
        )
    t1 = time.perf_counter()

    report = pose_error_report(estimated, gt)
    pair_list = (
        [(i, j) for i in range(len(frames)) for j in range(i + 1, len(frames))]
        if args.pairs == "all"
        else [(i, i + 1) for i in range(len(frames) - 1)]
    )
    merged_3d: dict[float, list] = {}
    merged_2d: dict[float, list] = {}
    total_3d = total_2d = 0
    for (i, j) in pair_list:
        corr = match_ratio_test(frames[i], frames[j], args.topk, frame_pair=(i, j))
        pair_report = correspondence_errors(
            corr, frames[i], frames[j], gt[i], gt[j], intrinsics
        )
        for t, frac in pair_report.precision_3d.items():
            merged_3d.setdefault(t, []).append((frac, pair_report.evaluated_3d))
        for t, frac in pair_report.precision_2d.items():
            merged_2d.setdefault(t, []).append((frac, pair_report.evaluated_2d))
        total_3d += pair_report.evaluated_3d
        total_2d += pair_report.evaluated_2d

    def _pooled(merged, total):
        return {
            t: (sum(f * n for f, n in pairs) / total if total else 0.0)
            for t, pairs in merged.items()
        }

    from .metrics import CorrespondenceErrorReport

    corr_report = CorrespondenceErrorReport(
        _pooled(merged_3d, total_3d), _pooled(merged_2d, total_2d), total_3d, total_2d
    )
    t2 = time.perf_counter()

    payload = {
        "pose": {
            "auc_rot_5deg": report.auc_rot,
            "auc_trans_10cm": report.auc_trans,
            "rotation_errors_deg": list(report.rotation_errors_deg),
            "translation_errors_m": list(report.translation_errors_m),
        },
        "correspondence": {
            "precision_3d": {f"{t:g}": v for t, v in sorted(corr_report.precision_3d.items())},
            "precision_2d": {f"{t:g}": v for t, v in sorted(corr_report.precision_2d.items())},
            "evaluated_3d": corr_report.evaluated_3d,
            "evaluated_2d": corr_report.evaluated_2d,
            "pairs": len(pair_list),
        },
    }
    (outdir / "evaluation.json").write_text(json.dumps(payload, indent=2) + "\n")
    with (outdir / "pose_errors.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "rot_err_deg", "trans_err_m"])
        for k, (r, t) in enumerate(
            zip(report.rotation_errors_deg, report.translation_errors_m), start=1
        ):
            writer.writerow([k, f"{r:.12g}", f"{t:.12g}"])
    with (outdir / "correspondence_precision.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "threshold", "precision"])
        for t, v in sorted(corr_report.precision_3d.items()):
            writer.writerow(["3d", f"{t:g}", f"{v:.12g}"])
        for t, v in sorted(corr_report.precision_2d.items()):
            writer.writerow(["2d", f"{t:g}", f"{v:.12g}"])
    figures = [
        save_pose_error_figure(
            report, ROT_AUC_THRESHOLD_DEG, TRANS_AUC_THRESHOLD_M, outdir / "pose_errors.png"
        ),
        save_precision_figure(corr_report, outdir / "correspondence_precision.png"),
    ]
    t3 = time.perf_counter()
    _write_manifest(
        outdir, args,
        config={"pairs": args.pairs, "topk": args.topk},
        inputs=[str(args.scene), str(args.poses)],
        outputs=["evaluation.json", "pose_errors.csv", "correspondence_precision.csv"]
        + [f.name for f in figures],
        timings={"load": t1 - t0, "evaluate": t2 - t1, "write": t3 - t2},
    )
    print(
        f"AUC@{ROT_AUC_THRESHOLD_DEG:g}deg = {report.auc_rot:.3f}, "
        f"AUC@{TRANS_AUC_THRESHOLD_M * 100:g}cm = {report.auc_trans:.3f}"
    )
    return EXIT_OK


def _positive_int(value: str) -> int:
    out = int(value)
    if out <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return out


def _int_list(value: str) -> list[int]:
    return [int(v) for v in value.split(",") if v]


def _float_list(value: str) -> list[float]:
    return [float(v) for v in value.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="syncmatch",
        description="Multiview RGB-D registration toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic scene directory")
    gen.add_argument("--frames", type=int, required=True)
    gen.add_argument("--landmarks", type=int, default=500)
    gen.add_argument("--motion", choices=["lateral_pan", "orbit", "corridor"], default="orbit")
    gen.add_argument("--step", type=float, default=None,
                     help="camera spacing (meters; degrees for orbit)")
    gen.add_argument("--descriptor-sigma", type=float, default=0.0)
    gen.add_argument("--outlier-fraction", type=float, default=0.0)
    gen.add_argument("--depth-sigma", type=float, default=0.0)
    gen.add_argument("--drop-fraction", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output", required=True)

    reg = sub.add_parser("register", help="register a scene directory")
    reg.add_argument("scene")
    reg.add_argument("--mode", choices=["full_pairwise", "windowed"], default="full_pairwise")
    reg.add_argument("--window", type=_positive_int, default=10)
    reg.add_argument("--gamma", type=float, default=0.4)
    reg.add_argument("--lambda", dest="lam", type=float, default=10.0)
    reg.add_argument("--topk", type=_positive_int, default=500)
    reg.add_argument("--ransac-hypotheses", type=_positive_int, default=128)
    reg.add_argument("--ransac-sample", type=_positive_int, default=8)
    reg.add_argument("--inlier-thresh", type=float, default=0.05)
    reg.add_argument("--seed", type=int, default=0)
    reg.add_argument("-o", "--output", required=True)

    bench = sub.add_parser("bench-sync", help="benchmark synchronization backends")
    bench.add_argument("--frames", type=_int_list, default=[6, 30],
                       help="comma-separated frame counts")
    bench.add_argument("--rot-sigmas", type=_float_list, default=[1.0, 5.0, 10.0],
                       help="rotation noise sigmas in degrees")
    bench.add_argument("--trans-sigmas", type=_float_list, default=[0.01, 0.02, 0.05],
                       help="translation noise sigmas in meters")
    bench.add_argument("--trials", type=_positive_int, default=20)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("-o", "--output", required=True)

    ev = sub.add_parser("evaluate", help="score estimated poses against a scene")
    ev.add_argument("scene")
    ev.add_argument("--poses", required=True)
    ev.add_argument("--pairs", choices=["adjacent", "all"], default="adjacent")
    ev.add_argument("--topk", type=_positive_int, default=500)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("-o", "--output", required=True)

    return parser


_HANDLERS = {
    "generate": cmd_generate,
    "register": cmd_register,
    "bench-sync": cmd_bench_sync,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    if args.command == "generate" and args.frames < 2:
        print("error: --frames must be at least 2", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _HANDLERS[args.command](args)
    except InputMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SyncMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
