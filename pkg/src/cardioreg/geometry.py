"""Core 3D geometry: point clouds, spatial index, PCA, planes, Bezier curves.

All coordinates are millimeters, float64. Operations are pure functions of
their inputs; the spatial index is immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyInputError, InsufficientPointsError, InvalidParameterError


@dataclass(frozen=True)
class SamplingMeta:
    """Angular-sampling descriptor carried by rotationally sampled clouds."""

    n_planes: int
    angular_step_deg: float


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered list of 3D points in mm, optionally with sampling metadata."""

    points: np.ndarray
    meta: SamplingMeta | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidParameterError(f"points must have shape (N, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise InvalidParameterError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def centroid(self) -> np.ndarray:
        if len(self) == 0:
            raise EmptyInputError("centroid of empty cloud")
        return self.points.mean(axis=0)

    def with_points(self, points: np.ndarray) -> "PointCloud":
        """New cloud with the same metadata and replaced coordinates."""
        return PointCloud(points, meta=self.meta)


def as_points(obj) -> np.ndarray:
    """Coerce a PointCloud or array-like into an (N, 3) float64 array."""
    if isinstance(obj, PointCloud):
        return obj.points
    pts = np.atleast_2d(np.asarray(obj, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidParameterError(f"expected (N, 3) points, got shape {pts.shape}")
    return pts


@dataclass(frozen=True, eq=False)
class Plane:
    """Plane given by a center point and a unit normal."""

    center: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        norm = float(np.linalg.norm(n))
        if norm < 1e-12:
            raise InvalidParameterError("plane normal has zero norm")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "normal", n / norm)

    def signed_distance(self, points) -> np.ndarray:
        pts = as_points(points)
        return (pts - self.center) @ self.normal


@dataclass(frozen=True, eq=False)
class PcaResult:
    """Centroid plus eigenvalues (descending) and matching eigenvector rows."""

    centroid: np.ndarray
    eigenvalues: np.ndarray  # shape (3,), sorted descending, >= 0
    eigenvectors: np.ndarray  # shape (3, 3), row i pairs with eigenvalues[i]


class SpatialIndex:
    """Immutable nearest-neighbor index over a point cloud.

    Queries reproduce a brute-force linear scan exactly; distance ties are
    broken by the lowest point index.
    """

    def __init__(self, cloud):
        pts = as_points(cloud)
        if pts.shape[0] == 0:
            raise EmptyInputError("cannot index an empty cloud")
        self._points = pts
        self._tree = cKDTree(pts)

    @property
    def points(self) -> np.ndarray:
        return self._points

    def nearest(self, query) -> tuple[int, float]:
        """Index and distance of the nearest point (lowest index on ties)."""
        q = np.asarray(query, dtype=np.float64).reshape(3)
        dist, idx = self._tree.query(q)
        # Equidistant points: the kd-tree picks an arbitrary one, so gather
        # everything at the winning radius and keep the smallest index.
        ties = self._tree.query_ball_point(q, dist)
        if len(ties) > 1:
            idx = min(ties)
        d = np.linalg.norm(self._points[idx] - q)
        return int(idx), float(d)

    def nearest_many(self, queries) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized nearest query; returns (indices, distances)."""
        q = as_points(queries)
        k = min(2, self._points.shape[0])
        dist, idx = self._tree.query(q, k=k)
        if k == 1:
            return idx.reshape(-1).astype(np.int64), dist.reshape(-1)
        tied = dist[:, 0] == dist[:, 1]
        out_idx = idx[:, 0].astype(np.int64)
        out_dist = dist[:, 0]
        for i in np.nonzero(tied)[0]:
            out_idx[i], out_dist[i] = self.nearest(q[i])
        return out_idx, out_dist

    def within_radius(self, query, radius: float) -> list[int]:
        q = np.asarray(query, dtype=np.float64).reshape(3)
        return sorted(self._tree.query_ball_point(q, radius))


def build_spatial_index(cloud) -> SpatialIndex:
    """Build an immutable NN index over the cloud (error on empty input)."""
    return SpatialIndex(cloud)


def pca(cloud) -> PcaResult:
    """Eigen-decomposition of the zero-mean covariance of the cloud.

    Uses the population covariance (1/N) so single-point inputs degrade to
    zero eigenvalues instead of dividing by zero. Eigenvalues are clamped at
    zero against round-off and sorted descending.
    """
    pts = as_points(cloud)
    if pts.shape[0] == 0:
        raise EmptyInputError("pca of empty cloud")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / pts.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order].T  # rows are eigenvectors
    return PcaResult(centroid=centroid, eigenvalues=evals, eigenvectors=evecs)


def _sign_normalize(normal: np.ndarray) -> np.ndarray:
    """Resolve the PCA sign ambiguity: n.z >= 0, then n.y >= 0, then n.x > 0."""
    for axis in (2, 1, 0):
        if normal[axis] > 0.0:
            return normal
        if normal[axis] < 0.0:
            return -normal
    return normal


def fit_plane_pca(points) -> Plane:
    """Least-squares plane: centroid + smallest-eigenvalue eigenvector.

    The normal sign follows the deterministic convention of _sign_normalize
    so downstream orderings are reproducible.
    """
    pts = as_points(points)
    if pts.shape[0] < 3:
        raise InsufficientPointsError(f"plane fit needs >= 3 points, got {pts.shape[0]}")
    result = pca(pts)
    normal = _sign_normalize(result.eigenvectors[2].copy())
    return Plane(center=result.centroid, normal=normal)


def plane_basis(plane: Plane) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic right-handed in-plane basis (e1, e2) with e1 x e2 = normal.

    e1 is the global axis least aligned with the normal, projected into the
    plane; ties between axes resolve in x, y, z order.
    """
    n = plane.normal
    k = int(np.argmin(np.abs(n)))
    axis = np.zeros(3)
    axis[k] = 1.0
    e1 = axis - (axis @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


@dataclass(frozen=True, eq=False)
class PlaneProjection:
    """(u, v) coordinates of points in a plane's in-plane basis."""

    coords: np.ndarray  # shape (N, 2)
    plane: Plane
    e1: np.ndarray
    e2: np.ndarray

    def to_world(self, coords=None) -> np.ndarray:
        """Map (u, v) rows back to 3D: center + u*e1 + v*e2."""
        uv = self.coords if coords is None else np.atleast_2d(np.asarray(coords, dtype=np.float64))
        return self.plane.center + np.outer(uv[:, 0], self.e1) + np.outer(uv[:, 1], self.e2)


def project_to_plane(cloud, plane: Plane) -> PlaneProjection:
    """Orthogonal projection of points onto the plane as 2D coordinates."""
    pts = as_points(cloud)
    rel = pts - plane.center
    e1, e2 = plane_basis(plane)
    uv = np.column_stack([rel @ e1, rel @ e2])
    return PlaneProjection(coords=uv, plane=plane, e1=e1, e2=e2)


def bezier_sample(p_start, p_control, p_end, n: int) -> np.ndarray:
    """n uniform samples of the quadratic Bezier through the three points.

    B(t) = (1-t)^2 p_start + 2 t (1-t) p_control + t^2 p_end at t = k/(n-1);
    the first and last samples are the endpoints bitwise-exactly.
    """
    if n < 2:
        raise InvalidParameterError(f"bezier_sample needs n >= 2, got {n}")
    p0 = np.asarray(p_start, dtype=np.float64).reshape(3)
    pc = np.asarray(p_control, dtype=np.float64).reshape(3)
    p1 = np.asarray(p_end, dtype=np.float64).reshape(3)
    t = np.linspace(0.0, 1.0, n).reshape(-1, 1)
    samples = (1.0 - t) ** 2 * p0 + 2.0 * t * (1.0 - t) * pc + t**2 * p1
    samples[0] = p0
    samples[-1] = p1
    return samples
