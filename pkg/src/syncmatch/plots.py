"""Figure rendering for the report-producing commands.

Uses the Agg backend and writes files next to the delimited output; no
interactive windows.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

_BACKEND_STYLE = {
    "naive": dict(color="tab:gray", marker="s"),
    "eig": dict(color="tab:orange", marker="o"),
    "power": dict(color="tab:blue", marker="^"),
}


def save_sync_benchmark_figure(rows, path) -> Path:
    """Error-vs-noise curves per backend plus a runtime panel."""
    path = Path(path)
    backends = sorted({r.backend for r in rows})
    cells = sorted({(r.n_frames, r.rot_sigma_deg, r.trans_sigma_m) for r in rows})
    labels = [f"N={n}\n{rs:g}deg/{ts * 100:g}cm" for n, rs, ts in cells]
    x = np.arange(len(cells))

    fig, axes = plt.subplots(1, 3, figsize=(13, 3.6))
    for backend in backends:
        by_cell = {(r.n_frames, r.rot_sigma_deg, r.trans_sigma_m): r
                   for r in rows if r.backend == backend}
        style = _BACKEND_STYLE.get(backend, {})
        rot = [by_cell[c].mean_rot_err_deg for c in cells]
        trans = [by_cell[c].mean_trans_err_m for c in cells]
        runtime = [by_cell[c].mean_runtime_s * 1000 for c in cells]
        axes[0].plot(x, rot, label=backend, **style)
        axes[1].plot(x, trans, label=backend, **style)
        axes[2].plot(x, runtime, label=backend, **style)
    for ax, title, ylabel in (
        (axes[0], "rotation error", "mean error (deg)"),
        (axes[1], "translation error", "mean error (m)"),
        (axes[2], "runtime", "mean runtime (ms)"),
    ):
        ax.set_title(title)
        ax.set_ylabel(ylabel)
        ax.set_xticks(x, labels, fontsize=7)
        ax.set_yscale("log")
        ax.grid(True, alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_pose_error_figure(report, rot_threshold, trans_threshold, path) -> Path:
    """Cumulative pose-error curves with the AUC thresholds marked."""
    path = Path(path)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for ax, errors, threshold, name, unit in (
        (axes[0], report.rotation_errors_deg, rot_threshold, "rotation", "deg"),
        (axes[1], report.translation_errors_m, trans_threshold, "translation", "m"),
    ):
        values = np.sort(np.asarray(errors))
        fractions = np.arange(1, values.size + 1) / values.size
        ax.step(values, fractions, where="post")
        ax.axvline(threshold, color="tab:red", linestyle="--", linewidth=1)
        ax.set_xlabel(f"{name} error ({unit})")
        ax.set_ylabel("fraction of frames")
        ax.set_ylim(0, 1.02)
        ax.grid(True, alpha=0.3)
    axes[0].set_title(f"AUC@{rot_threshold:g}deg = {report.auc_rot:.3f}")
    axes[1].set_title(f"AUC@{trans_threshold * 100:g}cm = {report.auc_trans:.3f}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_precision_figure(report, path) -> Path:
    """Bar chart of correspondence precision at each threshold."""
    path = Path(path)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for ax, precisions, fmt, title in (
        (axes[0], report.precision_3d, lambda t: f"{t * 100:g}cm", "3D precision"),
        (axes[1], report.precision_2d, lambda t: f"{t:g}px", "2D precision"),
    ):
        keys = sorted(precisions)
        ax.bar([fmt(k) for k in keys], [precisions[k] for k in keys], color="tab:blue")
        ax.set_ylim(0, 1.05)
        ax.set_title(title)
        ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
