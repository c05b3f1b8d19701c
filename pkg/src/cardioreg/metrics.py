"""Registration-quality metrics: MPE, AE, MGE, GCE and Dice."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CountMismatchError, EmptyInputError, GridMismatchError, ZeroVectorError
from .geometry import Plane, SpatialIndex, as_points
from .volume import VoxelVolume


@dataclass(frozen=True)
class MetricReport:
    mpe_mm: float
    ae_deg: float
    mge_mm: float
    gce_mm: float

    def as_dict(self) -> dict:
        return {"mpe_mm": self.mpe_mm, "ae_deg": self.ae_deg, "mge_mm": self.mge_mm, "gce_mm": self.gce_mm}

    def csv_row(self) -> str:
        return f"{self.mpe_mm:.17g},{self.ae_deg:.17g},{self.mge_mm:.17g},{self.gce_mm:.17g}"


def mpe(fixed, registered) -> float:
    """Mean distance from each fixed point to its nearest registered point."""
    fixed_pts = as_points(fixed)
    reg_pts = as_points(registered)
    if fixed_pts.shape[0] == 0 or reg_pts.shape[0] == 0:
        raise EmptyInputError("mean point error needs two non-empty clouds")
    _, dist = SpatialIndex(reg_pts).nearest_many(fixed_pts)
    return float(np.mean(dist))


def apex_angle(apex_fixed, apex_moved, center_fixed) -> float:
    """Angle in degrees between the two apex vectors anchored at the fixed center."""
    center = np.asarray(center_fixed, dtype=np.float64).reshape(3)
    v_fixed = np.asarray(apex_fixed, dtype=np.float64).reshape(3) - center
    v_moved = np.asarray(apex_moved, dtype=np.float64).reshape(3) - center
    n_fixed = np.linalg.norm(v_fixed)
    n_moved = np.linalg.norm(v_moved)
    if n_fixed < 1e-9 or n_moved < 1e-9:
        raise ZeroVectorError("apex coincides with the fixed center")
    cosine = np.clip(v_fixed @ v_moved / (n_fixed * n_moved), -1.0, 1.0)
    return float(np.degrees(np.arccos(cosine)))


def mge(groove_fixed, groove_moved) -> float:
    """Mean index-corresponding distance between two groove point lists."""
    fixed_pts = as_points(groove_fixed)
    moved_pts = as_points(groove_moved)
    if fixed_pts.shape[0] != moved_pts.shape[0]:
        raise CountMismatchError(f"{fixed_pts.shape[0]} vs {moved_pts.shape[0]} groove points")
    if fixed_pts.shape[0] == 0:
        raise EmptyInputError("groove error needs at least one point")
    return float(np.mean(np.linalg.norm(fixed_pts - moved_pts, axis=1)))


def gce(plane_fixed: Plane, plane_moved: Plane) -> float:
    """Euclidean distance between the two junction-plane centers."""
    return float(np.linalg.norm(plane_fixed.center - plane_moved.center))


def dice(mask_a: VoxelVolume, mask_b: VoxelVolume) -> float:
    """Dice overlap of two binary masks on the same grid; 1.0 when both empty."""
    if not mask_a.same_geometry(mask_b):
        raise GridMismatchError("dice needs masks on an identical grid")
    a = mask_a.data > 0.5
    b = mask_b.data > 0.5
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / total
