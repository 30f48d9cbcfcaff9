"""On-disk formats and scene directory layout.

Binary containers are little endian:

* depth (.dpth): magic "DPTH", u32 width, u32 height, then width*height
  row-major f32 depths in meters (<= 0 means missing).
* feature pointcloud (.fpcl): magic "FPCL", u32 count, u32 dim, then per
  point f32 x, y, z, u, v followed by dim f32 descriptor entries.

Text formats:

* intrinsics: key=value lines for fx, fy, cx, cy, width, height.
* pose graph / poses: header "N <count>", then edges as
  "E i j c r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz" and poses as
  "P i r00 ... r22 tx ty tz" (rotation row major, floats via %.17g so
  float64 round-trips exactly).

A scene directory holds intrinsics.txt, gt_poses.txt (optional), and one
frame_%04d.fpcl plus frame_%04d.dpth per frame.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .correspondence import FeaturePointcloud
from .errors import IOFailure
from .geometry import CameraIntrinsics, DepthMap, RigidTransform
from .synchronization import PoseGraph

DEPTH_MAGIC = b"DPTH"
CLOUD_MAGIC = b"FPCL"

_INTRINSICS_KEYS = ("fx", "fy", "cx", "cy", "width", "height")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_depth_map(path, depth: DepthMap) -> None:
    data = depth.values.astype("<f4").tobytes()
    header = DEPTH_MAGIC + struct.pack("<II", depth.width, depth.height)
    Path(path).write_bytes(header + data)


def read_depth_map(path) -> DepthMap:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != DEPTH_MAGIC:
        raise IOFailure(f"{path}: not a depth container")
    width, height = struct.unpack("<II", raw[4:12])
    expected = 12 + 4 * width * height
    if len(raw) != expected:
        raise IOFailure(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f4", offset=12).reshape(height, width)
    if not np.isfinite(values).all():
        raise IOFailure(f"{path}: depth map contains non-finite values")
    return DepthMap(values.astype(np.float64))


def write_intrinsics(path, intrinsics: CameraIntrinsics) -> None:
    lines = [
        f"fx={_fmt(intrinsics.fx)}",
        f"fy={_fmt(intrinsics.fy)}",
        f"cx={_fmt(intrinsics.cx)}",
        f"cy={_fmt(intrinsics.cy)}",
        f"width={intrinsics.width}",
        f"height={intrinsics.height}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_intrinsics(path) -> CameraIntrinsics:
    fields: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    missing = [k for k in _INTRINSICS_KEYS if k not in fields]
    if missing:
        raise IOFailure(f"{path}: missing intrinsics keys {missing}")
    try:
        return CameraIntrinsics(
            fx=float(fields["fx"]),
            fy=float(fields["fy"]),
            cx=float(fields["cx"]),
            cy=float(fields["cy"]),
            width=int(fields["width"]),
            height=int(fields["height"]),
        )
    except ValueError as exc:
        raise IOFailure(f"{path}: bad intrinsics ({exc})") from exc


def write_pointcloud(path, cloud: FeaturePointcloud) -> None:
    count = len(cloud)
    dim = cloud.descriptors.shape[1]
    record = np.hstack([cloud.points, cloud.pixels, cloud.descriptors]).astype("<f4")
    header = CLOUD_MAGIC + struct.pack("<II", count, dim)
    Path(path).write_bytes(header + record.tobytes())


def read_pointcloud(path) -> FeaturePointcloud:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != CLOUD_MAGIC:
        raise IOFailure(f"{path}: not a feature pointcloud container")
    count, dim = struct.unpack("<II", raw[4:12])
    expected = 12 + 4 * count * (5 + dim)
    if len(raw) != expected:
        raise IOFailure(f"{path}: expected {expected} bytes, found {len(raw)}")
    record = np.frombuffer(raw, dtype="<f4", offset=12).reshape(count, 5 + dim)
    record = record.astype(np.float64)
    try:
        return FeaturePointcloud(record[:, :3], record[:, 5:], record[:, 3:5])
    except ValueError as exc:
        raise IOFailure(f"{path}: invalid pointcloud ({exc})") from exc


def _pose_fields(transform: RigidTransform) -> str:
    values = list(transform.rotation.reshape(-1)) + list(transform.translation)
    return " ".join(_fmt(v) for v in values)


def _parse_pose(parts: list[str], path, line_no: int) -> RigidTransform:
    if len(parts) != 12:
        raise IOFailure(f"{path}:{line_no}: expected 12 pose numbers, got {len(parts)}")
    values = [float(p) for p in parts]
    try:
        return RigidTransform(np.array(values[:9]).reshape(3, 3), np.array(values[9:]))
    except ValueError as exc:
        raise IOFailure(f"{path}:{line_no}: invalid rotation ({exc})") from exc


def write_pose_graph(path, graph: PoseGraph) -> None:
    lines = [f"N {graph.n_frames}"]
    for (i, j) in sorted(graph.edges):
        transform, conf = graph.edges[(i, j)]
        lines.append(f"E {i} {j} {_fmt(conf)} {_pose_fields(transform)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_pose_graph(path) -> PoseGraph:
    n = None
    edges = {}
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0] == "#":
            continue
        if parts[0] == "N":
            n = int(parts[1])
        elif parts[0] == "E":
            i, j = int(parts[1]), int(parts[2])
            conf = float(parts[3])
            edges[(i, j)] = (_parse_pose(parts[4:], path, line_no), conf)
        else:
            raise IOFailure(f"{path}:{line_no}: unknown record {parts[0]!r}")
    if n is None:
        raise IOFailure(f"{path}: missing N header")
    return PoseGraph(n, edges)


def write_poses(path, poses) -> None:
    poses = list(poses)
    lines = [f"N {len(poses)}"]
    for i, pose in enumerate(poses):
        lines.append(f"P {i} {_pose_fields(pose)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_poses(path) -> list[RigidTransform]:
    n = None
    found: dict[int, RigidTransform] = {}
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0] == "#":
            continue
        if parts[0] == "N":
            n = int(parts[1])
        elif parts[0] == "P":
            found[int(parts[1])] = _parse_pose(parts[2:], path, line_no)
        else:
            raise IOFailure(f"{path}:{line_no}: unknown record {parts[0]!r}")
    if n is None:
        raise IOFailure(f"{path}: missing N header")
    if sorted(found) != list(range(n)):
        raise IOFailure(f"{path}: expected poses 0..{n - 1}, found {sorted(found)}")
    return [found[i] for i in range(n)]


def frame_stem(index: int) -> str:
    return f"frame_{index:04d}"


def write_scene_dir(directory, scene, corruption) -> list[Path]:
    """Materialize a synthetic scene: per-frame clouds and depths, intrinsics, gt poses.

    Feature clouds carry the corrupted observations; depth images are the
    clean renders. Returns the written paths.
    """
    from .synthetic import observe_frame, render_depth

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for i in range(scene.n_frames):
        cloud_path = directory / f"{frame_stem(i)}.fpcl"
        write_pointcloud(cloud_path, observe_frame(scene, i, corruption))
        depth_path = directory / f"{frame_stem(i)}.dpth"
        write_depth_map(depth_path, render_depth(scene, i))
        written.extend([cloud_path, depth_path])
    intr = directory / "intrinsics.txt"
    write_intrinsics(intr, scene.intrinsics)
    gt = directory / "gt_poses.txt"
    write_poses(gt, scene.trajectory)
    written.extend([intr, gt])
    return written


def read_scene_dir(directory) -> tuple[list[FeaturePointcloud], CameraIntrinsics, list[RigidTransform] | None]:
    directory = Path(directory)
    if not directory.is_dir():
        raise IOFailure(f"{directory}: not a directory")
    cloud_paths = sorted(directory.glob("frame_*.fpcl"))
    if not cloud_paths:
        raise IOFailure(f"{directory}: no frame_*.fpcl files")
    frames = [read_pointcloud(p) for p in cloud_paths]
    intrinsics = read_intrinsics(directory / "intrinsics.txt")
    gt_path = directory / "gt_poses.txt"
    gt = read_poses(gt_path) if gt_path.exists() else None
    return frames, intrinsics, gt
