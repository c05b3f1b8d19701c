"""Synthetic two-chamber phantom with closed-form ground truth.

The fixed (anatomical) side is a truncated ellipsoid LV shell flattened
against a planar septum (parallel to the long axis at 60% of the transverse
radius, where the rotating-plane detector of the single-cloud extractor can
find it) plus a laterally offset partial RV shell whose own septal face sits
a small wall gap away. The moving (functional) side resamples the same LV
surface on rotated long-axis planes, then passes through an optional smooth
bend, the ground-truth similarity transform, and additive noise. Every
landmark the extractors look for exists in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpecError
from .geometry import Plane, PointCloud, SamplingMeta, bezier_sample, plane_basis
from .landmarks import GROOVE_COUNT, LandmarkSet, transform_landmark_set
from .transforms import SimilarityTransform
from .volume import VoxelVolume, grid_world_points

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True)
class PhantomSpec:
    lv_semi_axes: tuple[float, float, float] = (35.0, 35.0, 50.0)
    base_cut: float = 0.7  # shell kept for z <= base_cut * c (open base)
    septum_frac: float = 0.6  # septal plane offset at mid-level, fraction of a
    septum_gap: float = 1.5  # wall gap between the LV and RV septal faces
    rv_semi_axes: tuple[float, float, float] = (26.0, 28.0, 42.0)
    rv_offset: float = 16.0  # RV center beyond the septal face, along its normal
    rv_center_z: float = -8.0
    surface_samples: int = 9000  # pre-filter ellipsoid samples, RV side
    disc_samples: int = 600  # septal face samples, RV side
    fixed_surface_points: int = 6000  # anatomical LV samples (golden-angle lattice)
    points_per_plane: int = 60
    angular_step_deg: float = 9.0  # 9 (slice generator) or 20 (structured cloud)
    noise_sigma: float = 0.0
    truth_transform: SimilarityTransform = field(default_factory=SimilarityTransform.identity)
    bend_amplitude: float = 0.0
    bend_wavelength: float = 160.0
    anatomical_spacing: float = 2.0
    functional_spacing: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if min(self.lv_semi_axes) <= 0 or min(self.rv_semi_axes) <= 0:
            raise InvalidSpecError("semi-axes must be positive")
        if self.noise_sigma < 0:
            raise InvalidSpecError("noise sigma must be non-negative")
        if not 0.0 < self.septum_frac < 1.0:
            raise InvalidSpecError("septum fraction must lie in (0, 1)")
        if self.angular_step_deg <= 0 or self.points_per_plane < 2:
            raise InvalidSpecError("angular sampling parameters out of range")
        if self.bend_wavelength <= 0:
            raise InvalidSpecError("bend wavelength must be positive")


@dataclass(frozen=True, eq=False)
class _Septum:
    """Plane {p . normal = offset} through the apex, tilted toward the base."""

    normal: np.ndarray
    offset: float

    def coordinate(self, points: np.ndarray) -> np.ndarray:
        return points @ self.normal - self.offset

    def boundary_radius(self, z: float, cos_phi: float) -> float:
        """Radius where the ray at azimuth phi and height z meets the plane."""
        denominator = self.normal[0] * cos_phi
        if denominator <= 1e-12:
            return np.inf
        return (self.offset - z * self.normal[2]) / denominator


def _septum_geometry(a: float, c: float, z_cut: float, septum_frac: float) -> _Septum:
    return _Septum(normal=np.array([1.0, 0.0, 0.0]), offset=septum_frac * a)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    transform: SimilarityTransform
    bend_amplitude: float
    bend_wavelength: float
    apex: np.ndarray
    groove_points: np.ndarray
    junction_plane: Plane
    septum_plane: Plane  # midsurface between the two septal faces

    def bend(self, points: np.ndarray) -> np.ndarray:
        """Smooth displacement orthogonal to the long axis, canonical frame."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64)).copy()
        if self.bend_amplitude != 0.0:
            pts[:, 0] += self.bend_amplitude * np.sin(2.0 * np.pi * pts[:, 2] / self.bend_wavelength)
        return pts

    def unbend(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64)).copy()
        if self.bend_amplitude != 0.0:
            pts[:, 0] -= self.bend_amplitude * np.sin(2.0 * np.pi * pts[:, 2] / self.bend_wavelength)
        return pts

    def map_points(self, points) -> np.ndarray:
        """Canonical fixed coordinates -> moving coordinates (bend then transform)."""
        return self.transform.apply(self.bend(points))

    def unmap_points(self, points) -> np.ndarray:
        """Moving coordinates -> canonical fixed coordinates (exact inverse)."""
        return self.unbend(self.transform.inverse_apply(points))


@dataclass(frozen=True, eq=False)
class PhantomData:
    lv_cloud: PointCloud
    rv_cloud: PointCloud
    functional_cloud: PointCloud
    truth_landmarks_fixed: LandmarkSet
    truth_landmarks_moving: LandmarkSet
    lv_volume: VoxelVolume
    functional_volume: VoxelVolume
    ground_truth: GroundTruth


def _fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n, dtype=np.float64)
    z = 1.0 - 2.0 * (k + 0.5) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    theta = _GOLDEN_ANGLE * k
    return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])


def _sunflower_disc(n: int) -> np.ndarray:
    k = np.arange(n, dtype=np.float64)
    r = np.sqrt((k + 0.5) / n)
    theta = _GOLDEN_ANGLE * k
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _rv_shell(
    semi_axes: tuple[float, float, float],
    center: np.ndarray,
    z_cut: float,
    septum: _Septum,
    gap: float,
    n_surface: int,
    n_disc: int,
) -> np.ndarray:
    """RV ellipsoid patch beyond the septal face plus its face disc."""
    axes = np.asarray(semi_axes)
    shell = _fibonacci_sphere(n_surface) * axes + center
    face_offset = septum.offset + gap
    keep = (shell[:, 2] <= z_cut) & (shell @ septum.normal >= face_offset)
    shell = shell[keep]

    # Face disc: points on {p . n = offset + gap} inside the RV ellipsoid,
    # sampled on an in-plane sunflower pattern with rejection.
    face_plane = Plane(center=center - (float(center @ septum.normal) - face_offset) * septum.normal, normal=septum.normal)
    e1, e2 = plane_basis(face_plane)
    disc = _sunflower_disc(4 * n_disc) * float(axes.max())
    candidates = face_plane.center + np.outer(disc[:, 0], e1) + np.outer(disc[:, 1], e2)
    quad = (((candidates - center) / axes) ** 2).sum(axis=1)
    face = candidates[(quad <= 1.0) & (candidates[:, 2] <= z_cut)][:n_disc]
    if face.shape[0] == 0:
        raise InvalidSpecError("RV septal face does not intersect the RV ellipsoid")
    return np.vstack([shell, face])


def _lv_profile_point(a: float, c: float, septum: _Septum, phi: float, v: float) -> np.ndarray:
    """Point of the LV surface in the long-axis plane at angle phi.

    v in [-1, base_cut] parametrizes the profile from apex toward the base
    with the same z-marginal as the uniform-sphere sampling (keeps covariance
    scale ratios between the two clouds honest); the profile rides the
    ellipsoid until it hits the septal face, then stays on the face.
    """
    z = c * v
    r_ell = a * np.sqrt(max(1.0 - v * v, 0.0))
    r = min(r_ell, septum.boundary_radius(z, np.cos(phi)))
    return np.array([r * np.cos(phi), r * np.sin(phi), z])


def _analytic_landmarks(semi_axes, z_cut: float, septum: _Septum) -> LandmarkSet:
    a, b, c = semi_axes
    apex = np.array([0.0, 0.0, -c])
    base = np.array([0.0, 0.0, z_cut])
    mid = 0.5 * (apex + base)
    n = septum.normal
    plane_center = mid - (float(mid @ n) - septum.offset) * n

    axis_dir = np.array([0.0, 0.0, 1.0])
    in_plane = axis_dir - (axis_dir @ n) * n
    in_plane /= np.linalg.norm(in_plane)
    line_dir = np.cross(n, in_plane)
    anchor = plane_center

    # line (anchor + t * dir) meets the ellipsoid where a quadratic vanishes
    scales = np.array([a, b, c])
    alpha = ((line_dir / scales) ** 2).sum()
    beta = 2.0 * ((anchor * line_dir) / scales**2).sum()
    gamma = ((anchor / scales) ** 2).sum() - 1.0
    disc = beta * beta - 4.0 * alpha * gamma
    if disc <= 0:
        raise InvalidSpecError("septal plane does not intersect the mid-level LV surface")
    t_hi = (-beta + np.sqrt(disc)) / (2.0 * alpha)
    t_lo = (-beta - np.sqrt(disc)) / (2.0 * alpha)
    point_a = anchor + t_hi * line_dir  # curve A: greater coordinate along the line
    point_b = anchor + t_lo * line_dir
    curves = []
    for endpoint in (point_a, point_b):
        control = 0.5 * (apex + endpoint)
        control = control - (float(control @ n) - septum.offset) * n
        curves.append(bezier_sample(apex, control, endpoint, GROOVE_COUNT // 2))
    return LandmarkSet(
        apex=apex,
        groove_points=np.vstack(curves),
        junction_plane=Plane(center=plane_center, normal=n),
        long_axis=(apex, base),
        flags=(),
    )


def _logistic(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def _chamber_intensity(points, semi_axes, z_cut: float, septum: _Septum) -> np.ndarray:
    a, b, c = semi_axes
    q = (points[:, 0] / a) ** 2 + (points[:, 1] / b) ** 2 + (points[:, 2] / c) ** 2
    interior = _logistic((1.0 - q) / 0.08)
    septal = _logistic(-septum.coordinate(points) / 2.0)
    basal = _logistic((z_cut - points[:, 2]) / 2.0)
    return 100.0 * interior * septal * basal


def _volume_on_bbox(points: np.ndarray, spacing: float, pad: float, intensity) -> VoxelVolume:
    lo = points.min(axis=0) - pad
    hi = points.max(axis=0) + pad
    dims = tuple(int(np.ceil((hi[d] - lo[d]) / spacing)) + 1 for d in range(3))
    vol = VoxelVolume(origin=lo, spacing=np.full(3, spacing), dims=dims, data=np.zeros(dims))
    values = intensity(grid_world_points(vol))
    return VoxelVolume(origin=lo, spacing=np.full(3, spacing), dims=dims, data=values.reshape(dims, order="F"))


def generate(spec: PhantomSpec) -> PhantomData:
    """Build the full phantom bundle for one specification."""
    a, b, c = spec.lv_semi_axes
    z_cut = spec.base_cut * c
    septum = _septum_geometry(a, c, z_cut, spec.septum_frac)
    rng = np.random.default_rng(spec.seed)

    # The anatomical LV cloud shares the functional cloud's product measure
    # (uniform z-marginal, uniform azimuth) so covariance ratios between the
    # two reflect scale only, but uses a golden-angle lattice instead of
    # structured rays: structured-on-structured sampling gives nearest
    # neighbor registration artificial rotational detents.
    fixed_i = np.arange(spec.fixed_surface_points, dtype=np.float64)
    lv_points = np.array(
        [
            _lv_profile_point(a, c, septum, phi, v)
            for phi, v in zip(
                np.mod(fixed_i * _GOLDEN_ANGLE, 2.0 * np.pi),
                -1.0 + (fixed_i + 0.5) / spec.fixed_surface_points * (1.0 + spec.base_cut),
            )
        ]
    )

    z_mid = 0.5 * (-c + z_cut)
    rv_center = np.array([spec.septum_frac * a, 0.0, z_mid]) + (spec.septum_gap + spec.rv_offset) * septum.normal
    rv_center[2] = spec.rv_center_z
    rv_points = _rv_shell(
        spec.rv_semi_axes,
        rv_center,
        z_cut,
        septum,
        spec.septum_gap,
        n_surface=int(spec.surface_samples * 0.6),
        n_disc=spec.disc_samples,
    )

    n_planes = int(round(360.0 / spec.angular_step_deg))
    moving_canonical = np.array(
        [
            _lv_profile_point(
                a,
                c,
                septum,
                np.deg2rad(k * spec.angular_step_deg),
                -1.0 + (j + 0.5) / spec.points_per_plane * (1.0 + spec.base_cut),
            )
            for k in range(n_planes)
            for j in range(spec.points_per_plane)
        ]
    )

    truth_fixed = _analytic_landmarks(spec.lv_semi_axes, z_cut, septum)
    ground_truth = GroundTruth(
        transform=spec.truth_transform,
        bend_amplitude=spec.bend_amplitude,
        bend_wavelength=spec.bend_wavelength,
        apex=truth_fixed.apex,
        groove_points=truth_fixed.groove_points,
        junction_plane=truth_fixed.junction_plane,
        septum_plane=Plane(
            center=truth_fixed.junction_plane.center + 0.5 * spec.septum_gap * septum.normal,
            normal=septum.normal,
        ),
    )

    moving_points = ground_truth.map_points(moving_canonical)
    if spec.noise_sigma > 0:
        moving_points = moving_points + rng.normal(scale=spec.noise_sigma, size=moving_points.shape)
    meta = SamplingMeta(n_planes=n_planes, angular_step_deg=spec.angular_step_deg)

    truth_moving = transform_landmark_set(truth_fixed, ground_truth.map_points, spec.truth_transform.rotation)

    lv_volume = _volume_on_bbox(
        lv_points,
        spec.anatomical_spacing,
        pad=3.0 * spec.anatomical_spacing,
        intensity=lambda pts: _chamber_intensity(pts, spec.lv_semi_axes, z_cut, septum),
    )
    functional_volume = _volume_on_bbox(
        moving_points,
        spec.functional_spacing,
        pad=3.0 * spec.functional_spacing,
        intensity=lambda pts: _chamber_intensity(ground_truth.unmap_points(pts), spec.lv_semi_axes, z_cut, septum),
    )

    return PhantomData(
        lv_cloud=PointCloud(lv_points),
        rv_cloud=PointCloud(rv_points),
        functional_cloud=PointCloud(moving_points, meta=meta),
        truth_landmarks_fixed=truth_fixed,
        truth_landmarks_moving=truth_moving,
        lv_volume=lv_volume,
        functional_volume=functional_volume,
        ground_truth=ground_truth,
    )
