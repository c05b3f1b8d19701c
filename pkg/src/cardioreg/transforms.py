"""Point-map transform types: rigid, similarity, affine and nonrigid.

The nonrigid map follows the offset-matrix convention used throughout the
registration stack: x -> R x + t + delta_i, with one offset per source point
and nearest-neighbor extension for points that are not source points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, SingularTransformError
from .geometry import SpatialIndex, as_points

_ORTHO_TOL = 1e-9


def _check_rotation(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64).reshape(3, 3)
    if np.abs(r.T @ r - np.eye(3)).max() > 1e-6:
        raise InvalidParameterError("rotation matrix is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > 1e-6:
        raise InvalidParameterError("rotation matrix must have det +1")
    return r


def rotation_about(axis, degrees: float) -> np.ndarray:
    """Rodrigues rotation matrix about an arbitrary axis."""
    a = np.asarray(axis, dtype=np.float64).reshape(3)
    norm = np.linalg.norm(a)
    if norm < 1e-12:
        raise InvalidParameterError("rotation axis has zero norm")
    a = a / norm
    theta = np.deg2rad(degrees)
    k = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
    return np.eye(3) + np.sin(theta) * k + (1.0 - np.cos(theta)) * (k @ k)


def rotation_angle_deg(r: np.ndarray) -> float:
    """Rotation angle of an orthonormal matrix, in degrees."""
    c = (np.trace(np.asarray(r)) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


@dataclass(frozen=True, eq=False)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        return as_points(points) @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def linear_offset(self) -> tuple[np.ndarray, np.ndarray]:
        """(A, b) such that the map is x -> A x + b."""
        return self.rotation.copy(), self.translation.copy()


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """x -> R (s (x - c) + c) + t with isotropic scale s about center c."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not self.scale > 0.0:
            raise InvalidParameterError("similarity scale must be positive")
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        pts = as_points(points)
        scaled = self.center + self.scale * (pts - self.center)
        return scaled @ self.rotation.T + self.translation

    def linear_offset(self) -> tuple[np.ndarray, np.ndarray]:
        a = self.scale * self.rotation
        b = self.rotation @ (self.center * (1.0 - self.scale)) + self.translation
        return a, b

    def inverse_apply(self, points) -> np.ndarray:
        pts = as_points(points)
        unrotated = (pts - self.translation) @ self.rotation
        return self.center + (unrotated - self.center) / self.scale


@dataclass(frozen=True, eq=False)
class AffineTransform:
    matrix: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))

    def apply(self, points) -> np.ndarray:
        return as_points(points) @ self.matrix.T + self.translation

    def inverse_apply(self, points) -> np.ndarray:
        if abs(np.linalg.det(self.matrix)) < 1e-12:
            raise SingularTransformError("affine matrix is singular")
        return np.linalg.solve(self.matrix, (as_points(points) - self.translation).T).T

    def linear_offset(self) -> tuple[np.ndarray, np.ndarray]:
        return self.matrix.copy(), self.translation.copy()


@dataclass(frozen=True, eq=False)
class NonrigidTransform:
    """Base rigid map plus one learned offset per source point.

    Arbitrary points borrow the offset of their nearest source point, so the
    map stays defined off the source samples (landmarks, voxel grids).
    """

    rotation: np.ndarray
    translation: np.ndarray
    source_points: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))
        src = as_points(self.source_points)
        off = as_points(self.offsets)
        if src.shape != off.shape:
            raise InvalidParameterError("offsets must match source points one-to-one")
        object.__setattr__(self, "source_points", src)
        object.__setattr__(self, "offsets", off)

    def apply_to_source(self) -> np.ndarray:
        """Transformed source points using each point's own offset."""
        return self.source_points @ self.rotation.T + self.translation + self.offsets

    def apply(self, points) -> np.ndarray:
        pts = as_points(points)
        index = SpatialIndex(self.source_points)
        idx, _ = index.nearest_many(pts)
        return pts @ self.rotation.T + self.translation + self.offsets[idx]


Transform = RigidTransform | SimilarityTransform | AffineTransform | NonrigidTransform


def apply_transform(transform: Transform, points) -> np.ndarray:
    """Apply any transform kind to points (nonrigid uses NN offset extension)."""
    return transform.apply(points)
