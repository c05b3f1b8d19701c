"""Figure rendering for pipeline reports.

Everything renders through the Agg backend straight to files; nothing here
affects the numerical outputs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import as_points

_FIXED_STYLE = dict(s=2, c="tab:green", alpha=0.35, linewidths=0)
_MOVING_STYLE = dict(s=3, c="tab:red", alpha=0.6, linewidths=0)


def _scatter(ax, fixed, moving, title):
    fixed = as_points(fixed)
    moving = as_points(moving)
    step_f = max(1, len(fixed) // 4000)
    step_m = max(1, len(moving) // 4000)
    ax.scatter(*fixed[::step_f].T, **_FIXED_STYLE, label="anatomical")
    ax.scatter(*moving[::step_m].T, **_MOVING_STYLE, label="functional")
    ax.set_title(title, fontsize=9)
    ax.set_box_aspect((1, 1, 1))
    for axis in (ax.xaxis, ax.yaxis, ax.zaxis):
        axis.set_ticklabels([])


def save_overlay(path, fixed, before, after, algo: str) -> Path:
    """Side-by-side 3D overlays of the clouds before and after registration."""
    fig = plt.figure(figsize=(8, 4))
    ax1 = fig.add_subplot(1, 2, 1, projection="3d")
    _scatter(ax1, fixed, before, "before")
    ax2 = fig.add_subplot(1, 2, 2, projection="3d")
    _scatter(ax2, fixed, after, f"after {algo}")
    ax2.legend(loc="upper right", fontsize=7)
    fig.subplots_adjust(left=0.02, right=0.98, wspace=0.05)
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def save_metric_bars(path, rows: list[tuple[str, dict]]) -> Path:
    """Bar chart per metric over the algorithm set (mirrors the summary table)."""
    metrics = [("mpe_mm", "MPE (mm)"), ("ae_deg", "AE (deg)"), ("mge_mm", "MGE (mm)"), ("gce_mm", "GCE (mm)")]
    algos = [name for name, _ in rows]
    fig, axes = plt.subplots(1, 4, figsize=(12, 3))
    for ax, (key, label) in zip(axes, metrics):
        values = [vals[key] for _, vals in rows]
        ax.bar(range(len(algos)), values, color="tab:blue")
        ax.set_xticks(range(len(algos)))
        ax.set_xticklabels(algos, rotation=60, fontsize=7)
        ax.set_title(label, fontsize=9)
        ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def save_traces(path, traces: dict[str, tuple[float, ...]]) -> Path:
    """Objective traces per algorithm, each normalized to its first value."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for algo, trace in traces.items():
        values = np.asarray(trace, dtype=np.float64)
        if values.size == 0:
            continue
        shifted = values - values.min()
        scale = shifted[0] if shifted[0] > 0 else 1.0
        ax.plot(shifted / scale, label=algo, lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective (normalized decrease)")
    ax.set_yscale("symlog", linthresh=1e-9)
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def save_volume_panel(path, anatomical, preview) -> Path:
    """Mid-slice panels of the anatomical volume and the fused preview."""
    fig, axes = plt.subplots(2, 3, figsize=(9, 6))
    for row, vol in enumerate((anatomical, preview)):
        data = vol.data
        slices = [data[data.shape[0] // 2, :, :], data[:, data.shape[1] // 2, :], data[:, :, data.shape[2] // 2]]
        for col, (name, img) in enumerate(zip(("sagittal", "coronal", "transverse"), slices)):
            ax = axes[row, col]
            ax.imshow(img.T, origin="lower", cmap="viridis" if row else "gray")
            ax.set_title(("anatomical " if row == 0 else "fused ") + name, fontsize=8)
            ax.axis("off")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
