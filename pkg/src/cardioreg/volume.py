"""Voxel volumes, deformation fields, inverse-grid resampling and fusion.

Volumes are scalar grids with world coordinates origin + index * spacing (mm),
stored as (nx, ny, nz) arrays indexed [ix, iy, iz]; the serialized payload is
x-fastest (Fortran ravel of that array).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import ndimage

from .errors import (
    EmptyFieldError,
    GridMismatchError,
    InvalidParameterError,
)
from .geometry import SpatialIndex, as_points
from .transforms import (
    AffineTransform,
    NonrigidTransform,
    RigidTransform,
    SimilarityTransform,
    Transform,
)


@dataclass(frozen=True, eq=False)
class VoxelVolume:
    origin: np.ndarray
    spacing: np.ndarray
    dims: tuple[int, int, int]
    data: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        spacing = np.asarray(self.spacing, dtype=np.float64).reshape(3)
        dims = tuple(int(d) for d in self.dims)
        if any(d <= 0 for d in dims):
            raise InvalidParameterError(f"dims must be positive, got {dims}")
        if (spacing <= 0).any():
            raise InvalidParameterError("spacing components must be positive")
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != dims:
            if data.size == dims[0] * dims[1] * dims[2]:
                data = data.reshape(dims, order="F")
            else:
                raise InvalidParameterError(f"data length {data.size} does not match dims {dims}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    def same_geometry(self, other: "VoxelVolume") -> bool:
        return (
            self.dims == other.dims
            and np.allclose(self.origin, other.origin, atol=1e-9)
            and np.allclose(self.spacing, other.spacing, atol=1e-9)
        )

    def index_to_world(self, indices) -> np.ndarray:
        idx = np.atleast_2d(np.asarray(indices, dtype=np.float64))
        return self.origin + idx * self.spacing


def world_grid(vol: VoxelVolume) -> Iterator[tuple[tuple[int, int, int], np.ndarray]]:
    """Yield (voxel index, world point) in x-fastest order."""
    nx, ny, nz = vol.dims
    for iz in range(nz):
        for iy in range(ny):
            for ix in range(nx):
                world = vol.origin + np.array([ix, iy, iz], dtype=np.float64) * vol.spacing
                yield (ix, iy, iz), world


def grid_world_points(vol: VoxelVolume) -> np.ndarray:
    """All voxel-center world coordinates, x-fastest, shape (prod(dims), 3)."""
    nx, ny, nz = vol.dims
    ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    idx = np.column_stack([ix.ravel(order="F"), iy.ravel(order="F"), iz.ravel(order="F")])
    return vol.origin + idx * vol.spacing


@dataclass(frozen=True, eq=False)
class DeformationField:
    """Sampled offsets: offsets[i] applies near sample_points[i]."""

    sample_points: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        samples = as_points(self.sample_points)
        offsets = as_points(self.offsets)
        if samples.shape != offsets.shape:
            raise InvalidParameterError("sample point and offset counts must match")
        object.__setattr__(self, "sample_points", samples)
        object.__setattr__(self, "offsets", offsets)

    def __len__(self) -> int:
        return self.sample_points.shape[0]


def nn_offset_interpolate(field: DeformationField, query) -> np.ndarray:
    """Offset of the sample nearest to the query point (lowest index on ties)."""
    if len(field) == 0:
        raise EmptyFieldError("deformation field has no samples")
    idx, _ = SpatialIndex(field.sample_points).nearest(np.asarray(query, dtype=np.float64).reshape(3))
    return field.offsets[idx].copy()


def _interpolate_offsets(field: DeformationField, queries: np.ndarray) -> np.ndarray:
    if len(field) == 0:
        raise EmptyFieldError("deformation field has no samples")
    idx, _ = SpatialIndex(field.sample_points).nearest_many(queries)
    return field.offsets[idx]


def _inverse_map(transform: Transform, targets: np.ndarray, field: DeformationField | None) -> np.ndarray:
    """Source-space locations for target-space points under the inverse map."""
    if isinstance(transform, NonrigidTransform):
        if field is None:
            field = DeformationField(transform.apply_to_source(), transform.offsets)
        base = RigidTransform(transform.rotation, transform.translation)
        return base.inverse().apply(targets - _interpolate_offsets(field, targets))
    if field is not None:
        targets = targets - _interpolate_offsets(field, targets)
    if isinstance(transform, RigidTransform):
        return transform.inverse().apply(targets)
    if isinstance(transform, (SimilarityTransform, AffineTransform)):
        return transform.inverse_apply(targets)
    raise InvalidParameterError(f"unsupported transform type {type(transform).__name__}")


def resample(
    moving: VoxelVolume,
    target: VoxelVolume,
    transform: Transform,
    field: DeformationField | None = None,
) -> VoxelVolume:
    """Resample the moving volume onto the target grid through the inverse map.

    Every target voxel center is pulled back to source space (closed-form
    inverse for the linear part, nearest-neighbor offset subtraction for the
    nonrigid part) and the moving volume is sampled there with an
    interpolating tricubic spline; out-of-bounds samples fill with 0.
    """
    targets = grid_world_points(target)
    sources = _inverse_map(transform, targets, field)
    voxel_coords = (sources - moving.origin) / moving.spacing
    values = ndimage.map_coordinates(
        moving.data, voxel_coords.T, order=3, mode="grid-constant", cval=0.0, prefilter=True
    )
    return VoxelVolume(
        origin=target.origin,
        spacing=target.spacing,
        dims=target.dims,
        data=values.reshape(target.dims, order="F"),
    )


def _minmax_normalize(data: np.ndarray) -> np.ndarray:
    lo = float(data.min())
    hi = float(data.max())
    if hi - lo < 1e-300:
        return np.zeros_like(data)
    return (data - lo) / (hi - lo)


@dataclass(frozen=True, eq=False)
class FusedVolumes:
    anatomical: VoxelVolume
    functional: VoxelVolume
    preview: VoxelVolume


def fuse(anatomical: VoxelVolume, functional_resampled: VoxelVolume) -> FusedVolumes:
    """Pair the volumes on their shared grid plus a 0.5/0.5 blended preview.

    Intensities are min-max normalized per volume before blending; the preview
    is presentation-only.
    """
    if not anatomical.same_geometry(functional_resampled):
        raise GridMismatchError("fused volumes must share origin, spacing and dims")
    preview = 0.5 * _minmax_normalize(anatomical.data) + 0.5 * _minmax_normalize(functional_resampled.data)
    return FusedVolumes(
        anatomical=anatomical,
        functional=functional_resampled,
        preview=VoxelVolume(anatomical.origin, anatomical.spacing, anatomical.dims, preview),
    )
