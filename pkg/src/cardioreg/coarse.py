"""Scale normalization and landmark-driven rigid initialization.

The coarse stage makes the two modalities comparable: an isotropic scale
factor from principal-axis variance ratios, then a closed-form least-squares
rigid alignment of corresponding anatomical landmarks.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    CountMismatchError,
    DegenerateCloudError,
    DegenerateConfigurationError,
)
from .geometry import PointCloud, as_points, pca
from .transforms import SimilarityTransform


def scale_factor(moving, fixed) -> float:
    """Isotropic scale from sqrt ratios of descending-sorted eigenvalues.

    s = (1/3) * sum_i sqrt(lambda_fixed[i] / lambda_moving[i]); both clouds
    must have full-rank covariance.
    """
    ev_moving = pca(moving).eigenvalues
    ev_fixed = pca(fixed).eigenvalues
    if ev_moving.min() <= 1e-12 or ev_fixed.min() <= 1e-12:
        raise DegenerateCloudError("scale factor needs full-rank covariance on both clouds")
    return float(np.mean(np.sqrt(ev_fixed / ev_moving)))


def _check_correspondences(src, dst) -> tuple[np.ndarray, np.ndarray]:
    s = as_points(src)
    d = as_points(dst)
    if s.shape[0] != d.shape[0]:
        raise CountMismatchError(f"{s.shape[0]} source vs {d.shape[0]} destination landmarks")
    if s.shape[0] < 3:
        raise DegenerateConfigurationError("need at least 3 corresponding landmarks")
    for pts in (s, d):
        centered = pts - pts.mean(axis=0)
        sv = np.linalg.svd(centered, compute_uv=False)
        if (sv > 1e-9 * max(sv[0], 1.0)).sum() < 2:
            raise DegenerateConfigurationError("landmark configuration has rank < 2")
    return s, d


def umeyama_rigid(src_landmarks, dst_landmarks) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form least-squares rigid transform between corresponding sets.

    Returns (R, t) minimizing sum ||R s_i + t - d_i||^2, with the reflection
    guard of the Umeyama construction (scale fixed at 1).
    """
    src, dst = _check_correspondences(src_landmarks, dst_landmarks)
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    cov = (dst - mu_d).T @ (src - mu_s) / src.shape[0]
    u, _, vt = np.linalg.svd(cov)
    s_fix = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_fix[2, 2] = -1.0
    rotation = u @ s_fix @ vt
    translation = mu_d - rotation @ mu_s
    return rotation, translation


def umeyama_similarity(src_landmarks, dst_landmarks) -> tuple[float, np.ndarray, np.ndarray]:
    """With-scale Umeyama: (s, R, t) minimizing sum ||s R x_i + t - y_i||^2."""
    src, dst = _check_correspondences(src_landmarks, dst_landmarks)
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    src_c = src - mu_s
    dst_c = dst - mu_d
    cov = dst_c.T @ src_c / src.shape[0]
    var_src = float((src_c**2).sum() / src.shape[0])
    u, d, vt = np.linalg.svd(cov)
    s_fix = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_fix[2, 2] = -1.0
    rotation = u @ s_fix @ vt
    scale = float(np.trace(np.diag(d) @ s_fix) / var_src)
    translation = mu_d - scale * rotation @ mu_s
    return scale, rotation, translation


def rigid_residual(rotation, translation, src, dst) -> float:
    """Objective value sum ||R s_i + t - d_i||^2 for external verification."""
    s = as_points(src)
    d = as_points(dst)
    return float(((s @ np.asarray(rotation).T + np.asarray(translation) - d) ** 2).sum())


def coarse_register(moving, fixed, moving_lm, fixed_lm) -> tuple[SimilarityTransform, PointCloud]:
    """Scale the moving side to the fixed side, then align landmarks rigidly.

    Landmarks are scaled about the moving-cloud centroid so their relative
    positions are preserved, the rigid part comes from Umeyama on the 19
    corresponding points (apex + 18 groove points), and the resulting
    similarity is applied to the whole moving cloud in one shot.
    """
    moving_cloud = moving if isinstance(moving, PointCloud) else PointCloud(moving)
    s = scale_factor(moving_cloud, fixed)
    center = moving_cloud.centroid
    src_pts = moving_lm.correspondence_points()
    dst_pts = fixed_lm.correspondence_points()
    scaled_src = center + s * (src_pts - center)
    rotation, translation = umeyama_rigid(scaled_src, dst_pts)
    transform = SimilarityTransform(scale=s, rotation=rotation, translation=translation, center=center)
    moved = moving_cloud.with_points(transform.apply(moving_cloud))
    return transform, moved
