"""Automatic anatomical landmark extraction for both modalities.

Two extractors produce index-corresponding 19-point landmark sets (apex plus
18 groove points):

* ``cta_landmarks`` uses the spatial relationship of two chamber clouds: the
  junction plane comes from PCA of the contact region, the long axis and apex
  from projected 2D PCA and local boundary curvature, and the groove endpoints
  from a bidirectional contraction search along the junction intersection line.
* ``spect_landmarks`` works on a single structured cloud: RANSAC circle fit of
  the projection locates the long axis, a rotating-plane sweep with coverage
  maximization finds the junction plane, and the groove construction is shared
  with the CTA path.

Both extractors resolve orientation ambiguities intrinsically (chamber-to-
chamber direction, apex-to-base direction, cloud-intrinsic canonical frame) so
the outputs commute with rigid motions of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateAxisError,
    EmptyInputError,
    InsufficientPointsError,
    InvalidParameterError,
    NoCandidatesError,
    NoConvergenceError,
    NoModelError,
)
from .geometry import (
    Plane,
    PointCloud,
    SpatialIndex,
    as_points,
    bezier_sample,
    fit_plane_pca,
    pca,
    project_to_plane,
)

GROOVE_COUNT = 18


@dataclass(frozen=True, eq=False)
class LandmarkSet:
    """Apex, ordered groove points, and the junction plane that produced them.

    ``groove_points`` holds curve A then curve B, each sampled apex-first, so
    rows 0 and 9 duplicate the apex. Curve A is the curve whose endpoint has
    the greater coordinate along the junction-plane intersection line.
    """

    apex: np.ndarray
    groove_points: np.ndarray
    junction_plane: Plane
    long_axis: tuple[np.ndarray, np.ndarray]
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        apex = np.asarray(self.apex, dtype=np.float64).reshape(3)
        groove = as_points(self.groove_points)
        if groove.shape[0] != GROOVE_COUNT:
            raise InvalidParameterError(f"expected {GROOVE_COUNT} groove points, got {groove.shape[0]}")
        half = GROOVE_COUNT // 2
        if not (np.array_equal(groove[0], apex) and np.array_equal(groove[half], apex)):
            raise InvalidParameterError("groove curves must both start at the apex")
        axis = (
            np.asarray(self.long_axis[0], dtype=np.float64).reshape(3),
            np.asarray(self.long_axis[1], dtype=np.float64).reshape(3),
        )
        object.__setattr__(self, "apex", apex)
        object.__setattr__(self, "groove_points", groove)
        object.__setattr__(self, "long_axis", axis)
        object.__setattr__(self, "flags", tuple(self.flags))

    def correspondence_points(self) -> np.ndarray:
        """Apex plus groove points as a (19, 3) correspondence array."""
        return np.vstack([self.apex[None, :], self.groove_points])


def transform_landmark_set(lm: LandmarkSet, point_map, rotation) -> LandmarkSet:
    """Map a landmark set through a point map; the plane normal rotates only."""
    rot = np.asarray(rotation, dtype=np.float64).reshape(3, 3)

    def one(p):
        return point_map(np.asarray(p, dtype=np.float64).reshape(1, 3))[0]

    groove = point_map(lm.groove_points)
    apex = one(lm.apex)
    groove = groove.copy()
    groove[0] = apex
    groove[GROOVE_COUNT // 2] = apex
    plane = Plane(center=one(lm.junction_plane.center), normal=rot @ lm.junction_plane.normal)
    axis = (one(lm.long_axis[0]), one(lm.long_axis[1]))
    return LandmarkSet(apex=apex, groove_points=groove, junction_plane=plane, long_axis=axis, flags=lm.flags)


@dataclass(frozen=True)
class CircleFit:
    """RANSAC circle model: center, radius and strict-interior support count."""

    center: tuple[float, float]
    radius: float
    inlier_count: int = 0


@dataclass(frozen=True, eq=False)
class JunctionPlaneResult:
    plane: Plane
    fallback: bool
    contact_count: int


@dataclass(frozen=True, eq=False)
class LongAxisResult:
    endpoint_a: np.ndarray  # minimum projection along the in-plane long axis
    endpoint_b: np.ndarray  # maximum projection
    apex: np.ndarray
    base: np.ndarray
    direction: np.ndarray  # in-plane long-axis direction, oriented apex -> base
    low_confidence: bool


@dataclass(frozen=True, eq=False)
class SpectAxisResult:
    apex: np.ndarray
    base_center: np.ndarray
    low_confidence: bool


@dataclass(frozen=True, eq=False)
class SpectJunctionResult:
    plane: Plane
    angle_deg: float
    coverage: int
    strict: bool  # False when the zero-boundary-band rule had to be relaxed


@dataclass(frozen=True)
class CtaLandmarkConfig:
    contact_threshold: float = 3.0
    min_contact: int = 30
    tol_plane: float = 2.0
    tol_proximity: float = 2.0
    step: float = 1.0
    slab: float = 10.0
    curvature_neighbors: int = 15
    samples_per_curve: int = 9


@dataclass(frozen=True)
class SpectLandmarkConfig:
    ransac_iterations: int = 500
    band_tol: float = 0.5
    cover_tol: float = 2.0
    tol_plane: float = 2.0
    tol_proximity: float = 3.0  # structured clouds leave mm-scale gaps along the line
    step: float = 1.0
    slab: float = 10.0
    samples_per_curve: int = 9
    seed: int = 0


# ---------------------------------------------------------------------------
# Junction plane from the contact region of two chamber clouds
# ---------------------------------------------------------------------------


def contact_points(lv, rv, threshold: float) -> tuple[PointCloud, PointCloud]:
    """Points of each cloud whose nearest neighbor in the other is <= threshold."""
    lv_pts = as_points(lv)
    rv_pts = as_points(rv)
    if lv_pts.shape[0] == 0 or rv_pts.shape[0] == 0:
        raise EmptyInputError("contact query needs two non-empty clouds")
    if threshold <= 0:
        raise InvalidParameterError("contact threshold must be positive")
    _, d_lv = SpatialIndex(rv_pts).nearest_many(lv_pts)
    _, d_rv = SpatialIndex(lv_pts).nearest_many(rv_pts)
    return PointCloud(lv_pts[d_lv <= threshold]), PointCloud(rv_pts[d_rv <= threshold])


def junction_plane(lv, rv, threshold: float, min_contact: int = 30) -> JunctionPlaneResult:
    """PCA plane of the contact region, falling back to the whole cavity.

    When fewer than ``min_contact`` contact points exist the plane degrades to
    PCA over the union of both clouds and the fallback flag is set.
    """
    lv_contact, rv_contact = contact_points(lv, rv, threshold)
    combined = np.vstack([lv_contact.points, rv_contact.points])
    if combined.shape[0] >= min_contact:
        return JunctionPlaneResult(plane=fit_plane_pca(combined), fallback=False, contact_count=combined.shape[0])
    everything = np.vstack([as_points(lv), as_points(rv)])
    return JunctionPlaneResult(plane=fit_plane_pca(everything), fallback=True, contact_count=combined.shape[0])


# ---------------------------------------------------------------------------
# Long axis, apex, and the contraction search for the groove endpoints
# ---------------------------------------------------------------------------


def _end_taper(axis_coords: np.ndarray, transverse: np.ndarray, take_max_end: bool, k: int) -> float:
    """Transverse extent of the strip at one end of the projected long axis.

    The pointier (higher boundary curvature) end tapers toward the axis, so
    its end strip has the smaller transverse spread. The strip spans 15% of
    the axis extent but never fewer than k + 1 points.
    """
    extent = float(axis_coords.max() - axis_coords.min())
    strip = 0.15 * extent
    if take_max_end:
        mask = axis_coords >= axis_coords.max() - strip
        order = np.argsort(-axis_coords, kind="stable")
    else:
        mask = axis_coords <= axis_coords.min() + strip
        order = np.argsort(axis_coords, kind="stable")
    if mask.sum() < k + 1:
        mask = np.zeros_like(mask)
        mask[order[: k + 1]] = True
    return float(np.quantile(np.abs(transverse[mask]), 0.9))


def long_axis_and_apex(lv, plane: Plane, k: int = 15) -> LongAxisResult:
    """Long-axis endpoints from projected 2D PCA; apex by boundary curvature.

    The apex is the endpoint whose end of the projected cloud tapers harder
    toward the axis (smaller transverse spread in the end strip). An exact
    taper tie falls back to the lower point index and is flagged
    low-confidence.
    """
    pts = as_points(lv)
    if pts.shape[0] < 3:
        raise InsufficientPointsError("long axis extraction needs >= 3 points")
    projection = project_to_plane(pts, plane)
    uv = projection.coords
    centered = uv - uv.mean(axis=0)
    cov = centered.T @ centered / uv.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    direction = evecs[:, int(np.argmax(evals))]
    coords = centered @ direction
    transverse = centered @ np.array([-direction[1], direction[0]])
    i_min = int(np.argmin(coords))
    i_max = int(np.argmax(coords))
    k_eff = min(k, pts.shape[0] - 1)
    taper_min = _end_taper(coords, transverse, take_max_end=False, k=k_eff)
    taper_max = _end_taper(coords, transverse, take_max_end=True, k=k_eff)
    low_confidence = abs(taper_min - taper_max) <= 1e-9
    if low_confidence:
        apex_idx = min(i_min, i_max)
    else:
        apex_idx = i_min if taper_min < taper_max else i_max
    base_idx = i_max if apex_idx == i_min else i_min
    # The in-plane principal direction is far more stable than the endpoint
    # pair (the base extreme can sit anywhere on an open rim), so carry it as
    # the long-axis direction, oriented from apex toward base.
    direction_3d = direction[0] * projection.e1 + direction[1] * projection.e2
    if apex_idx == i_max:
        direction_3d = -direction_3d
    return LongAxisResult(
        endpoint_a=pts[i_min].copy(),
        endpoint_b=pts[i_max].copy(),
        apex=pts[apex_idx].copy(),
        base=pts[base_idx].copy(),
        direction=direction_3d,
        low_confidence=low_confidence,
    )


def contraction_search(
    lv,
    junction: Plane,
    long_axis_mid,
    axis_dir,
    tol_plane: float,
    tol_proximity: float,
    step: float,
    slab: float = 10.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Bidirectional march along the junction intersection line.

    The short-axis plane passes through ``long_axis_mid`` perpendicular to the
    junction plane; its intersection line with the junction plane is the
    search direction. Candidate cloud points within ``tol_plane`` of the
    junction plane and within the short-axis slab seed the extreme positions,
    and each front moves inward by ``step`` until the line point lies within
    ``tol_proximity`` of the cloud. Returns (high end, low end) along the
    line direction normal x axis.
    """
    if tol_plane <= 0 or tol_proximity <= 0 or step <= 0:
        raise InvalidParameterError("contraction tolerances must be positive")
    pts = as_points(lv)
    if pts.shape[0] == 0:
        raise EmptyInputError("contraction search on empty cloud")
    n = junction.normal
    mid = np.asarray(long_axis_mid, dtype=np.float64).reshape(3)
    d = np.asarray(axis_dir, dtype=np.float64).reshape(3)
    d_in_plane = d - (d @ n) * n
    norm = np.linalg.norm(d_in_plane)
    if norm < 1e-9:
        raise InvalidParameterError("long axis is parallel to the junction normal")
    d_hat = d_in_plane / norm
    line_dir = np.cross(n, d_hat)
    anchor = mid - ((mid - junction.center) @ n) * n

    plane_ok = np.abs((pts - junction.center) @ n) <= tol_plane
    slab_ok = np.abs((pts - mid) @ d_hat) <= slab
    candidates = pts[plane_ok & slab_ok]
    if candidates.shape[0] == 0:
        raise NoCandidatesError("no points satisfy the junction-plane tolerance")

    span = (candidates - anchor) @ line_dir
    hi = float(span.max())
    lo = float(span.min())
    index = SpatialIndex(pts)

    found_hi = found_lo = False
    point_hi = point_lo = None
    while not (found_hi and found_lo):
        if not found_hi:
            probe = anchor + hi * line_dir
            _, dist = index.nearest(probe)
            if dist <= tol_proximity:
                found_hi, point_hi = True, probe
            else:
                hi -= step
        if not found_lo:
            probe = anchor + lo * line_dir
            _, dist = index.nearest(probe)
            if dist <= tol_proximity:
                found_lo, point_lo = True, probe
            else:
                lo += step
        if not (found_hi and found_lo) and hi < lo:
            raise NoConvergenceError("contraction fronts crossed before satisfying proximity")
    return point_hi, point_lo


def _groove_points(apex: np.ndarray, plane: Plane, point_a: np.ndarray, point_b: np.ndarray, per_curve: int) -> np.ndarray:
    """Two quadratic Beziers apex -> endpoint, control = midpoint projected onto the plane."""
    curves = []
    for endpoint in (point_a, point_b):
        control = 0.5 * (apex + endpoint)
        control = control - ((control - plane.center) @ plane.normal) * plane.normal
        curves.append(bezier_sample(apex, control, endpoint, per_curve))
    return np.vstack(curves)


def cta_landmarks(lv, rv, cfg: CtaLandmarkConfig = CtaLandmarkConfig()) -> LandmarkSet:
    """Full CTA-style extraction from the two chamber clouds."""
    lv_pts = as_points(lv)
    rv_pts = as_points(rv)
    if lv_pts.shape[0] == 0 or rv_pts.shape[0] == 0:
        raise EmptyInputError("landmark extraction needs two non-empty clouds")
    flags: list[str] = []

    jp = junction_plane(lv_pts, rv_pts, cfg.contact_threshold, cfg.min_contact)
    if jp.fallback:
        flags.append("fallback_plane")
    # Orient the normal from the first chamber toward the second so the
    # downstream curve labeling does not depend on the world frame.
    chamber_dir = rv_pts.mean(axis=0) - lv_pts.mean(axis=0)
    normal = jp.plane.normal
    if normal @ chamber_dir < 0:
        normal = -normal
    plane = Plane(center=jp.plane.center, normal=normal)

    axis = long_axis_and_apex(lv_pts, plane, k=cfg.curvature_neighbors)
    if axis.low_confidence:
        flags.append("low_confidence_apex")
    axis_dir = axis.direction
    mid = 0.5 * (axis.endpoint_a + axis.endpoint_b)

    point_a, point_b = contraction_search(
        lv_pts, plane, mid, axis_dir, cfg.tol_plane, cfg.tol_proximity, cfg.step, slab=cfg.slab
    )
    groove = _groove_points(axis.apex, plane, point_a, point_b, cfg.samples_per_curve)
    return LandmarkSet(
        apex=axis.apex,
        groove_points=groove,
        junction_plane=plane,
        long_axis=(axis.endpoint_a, axis.endpoint_b),
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# RANSAC circle fit for the structured single-cloud extractor
# ---------------------------------------------------------------------------


def _dedup_rows(points: np.ndarray) -> np.ndarray:
    """Drop exact duplicate rows, preserving first-occurrence order."""
    _, first = np.unique(points, axis=0, return_index=True)
    return points[np.sort(first)]


def _circumcircle(tri: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Circle through three 2D points, or None when they are collinear."""
    a, b, c = tri
    ab = b - a
    ac = c - a
    det = 2.0 * (ab[0] * ac[1] - ab[1] * ac[0])
    scale = max(np.abs(tri).max(), 1.0)
    if abs(det) < 1e-12 * scale * scale:
        return None
    sa = float(a @ a)
    sb = float(b @ b)
    sc = float(c @ c)
    ux = ((sb - sa) * ac[1] - (sc - sa) * ab[1]) / det
    uy = ((sc - sa) * ab[0] - (sb - sa) * ac[0]) / det
    center = np.array([ux, uy])
    return center, float(np.linalg.norm(center - a))


def ransac_circle(points2d, iterations: int, band_tol: float, seed: int) -> CircleFit:
    """Best 3-point circle supported entirely by strict-interior points.

    Each iteration fits the circumcircle of 3 random distinct points; a model
    is admissible when no other point falls inside the circumferential band
    (|dist - radius| <= band_tol) and at least one point lies strictly inside
    (dist < radius - band_tol). The highest strict-interior count wins; the
    run is deterministic for a given seed.
    """
    pts = np.atleast_2d(np.asarray(points2d, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidParameterError(f"expected (N, 2) points, got shape {pts.shape}")
    pts = _dedup_rows(pts)
    n = pts.shape[0]
    if n < 3:
        raise InsufficientPointsError("circle fit needs >= 3 unique points")
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[1] <= 1e-9 * max(sv[0], 1.0):
        raise InsufficientPointsError("all points are collinear")

    rng = np.random.default_rng(seed)
    best: CircleFit | None = None
    for _ in range(iterations):
        ids = rng.choice(n, size=3, replace=False)
        model = _circumcircle(pts[ids])
        if model is None:
            continue
        center, radius = model
        dist = np.linalg.norm(pts - center, axis=1)
        in_band = np.abs(dist - radius) <= band_tol
        in_band[ids] = False  # the defining sample always sits on the circle
        if in_band.any():
            continue
        inside = dist < radius - band_tol
        inside[ids] = False
        score = int(inside.sum())
        if score < 1:
            continue
        if best is None or score > best.inlier_count:
            best = CircleFit(center=(float(center[0]), float(center[1])), radius=radius, inlier_count=score)
    if best is None:
        raise NoModelError("no admissible circle after all iterations")
    return best


def _fallback_circle(points2d: np.ndarray) -> CircleFit:
    """Centroid circle used when RANSAC finds no admissible model."""
    pts = _dedup_rows(np.atleast_2d(np.asarray(points2d, dtype=np.float64)))
    center = pts.mean(axis=0)
    radial = np.linalg.norm(pts - center, axis=1)
    return CircleFit(center=(float(center[0]), float(center[1])), radius=float(np.quantile(radial, 0.9)), inlier_count=0)


# ---------------------------------------------------------------------------
# SPECT-style long axis, junction plane and full extraction
# ---------------------------------------------------------------------------


def spect_long_axis(cloud, circle: CircleFit) -> SpectAxisResult:
    """Apex and basal center along the vertical axis through the circle center.

    The closed (apical) side is the z half with fewer points in the outer
    radial band; the apex is the extremal-z point within half a radius of the
    axis, and the basal center is the centroid of the opposite 10% z slab.
    """
    pts = as_points(cloud)
    if pts.shape[0] == 0:
        raise EmptyInputError("long-axis search on empty cloud")
    radial = np.hypot(pts[:, 0] - circle.center[0], pts[:, 1] - circle.center[1])
    z = pts[:, 2]
    z_mid = 0.5 * (z.min() + z.max())
    outer = radial > 0.5 * circle.radius
    lower_outer = int((outer & (z <= z_mid)).sum())
    upper_outer = int((outer & (z > z_mid)).sum())
    low_confidence = lower_outer == upper_outer
    apex_low = lower_outer < upper_outer or low_confidence

    near_axis = radial <= 0.5 * circle.radius
    if not near_axis.any():
        near_axis = np.ones(pts.shape[0], dtype=bool)
        low_confidence = True
    candidate_z = np.where(near_axis, z, np.inf if apex_low else -np.inf)
    apex_idx = int(np.argmin(candidate_z)) if apex_low else int(np.argmax(candidate_z))

    if apex_low:
        slab = z >= np.quantile(z, 0.9)
    else:
        slab = z <= np.quantile(z, 0.1)
    base_center = pts[slab].mean(axis=0)
    return SpectAxisResult(apex=pts[apex_idx].copy(), base_center=base_center, low_confidence=low_confidence)


def spect_junction_plane(
    cloud, apex, base_center, cover_tol: float, *, strict: bool = True
) -> SpectJunctionResult:
    """Coverage-maximizing plane among 72 normals rotated about the long axis.

    Candidate normals start from a deterministic vector orthogonal to the
    axis, rotated in 5 degree steps; each plane center sits at 60% of the
    maximum projection radius from the axis center. In strict mode candidates
    with any point in the boundary band (cover_tol, 2*cover_tol] are rejected
    and NoModelError is raised when all 72 are; ties break at the smaller
    rotation angle.
    """
    pts = as_points(cloud)
    if pts.shape[0] == 0:
        raise EmptyInputError("junction-plane search on empty cloud")
    apex = np.asarray(apex, dtype=np.float64).reshape(3)
    base = np.asarray(base_center, dtype=np.float64).reshape(3)
    axis = base - apex
    length = np.linalg.norm(axis)
    if length < 1.0:
        raise DegenerateAxisError("long axis shorter than 1 mm")
    d = axis / length
    axis_center = 0.5 * (apex + base)

    k = int(np.argmin(np.abs(d)))
    seed_axis = np.zeros(3)
    seed_axis[k] = 1.0
    e1 = seed_axis - (seed_axis @ d) * d
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)

    rel = pts - axis_center
    radial = rel - np.outer(rel @ d, d)
    r_max = float(np.linalg.norm(radial, axis=1).max())
    offset = 0.6 * r_max

    best: tuple[int, float, Plane] | None = None  # (coverage, angle, plane)
    for step_idx in range(72):
        angle = 5.0 * step_idx
        theta = np.deg2rad(angle)
        normal = np.cos(theta) * e1 + np.sin(theta) * e2
        center = axis_center + offset * normal
        dist = np.abs((pts - center) @ normal)
        if strict and bool(((dist > cover_tol) & (dist <= 2.0 * cover_tol)).any()):
            continue
        coverage = int((dist <= cover_tol).sum())
        if best is None or coverage > best[0]:
            best = (coverage, angle, Plane(center=center, normal=normal))
    if best is None:
        raise NoModelError("every candidate plane has boundary-band points")
    return SpectJunctionResult(plane=best[2], angle_deg=best[1], coverage=best[0], strict=strict)


def intrinsic_frame(cloud) -> tuple[np.ndarray, np.ndarray]:
    """Cloud-intrinsic orthonormal frame: rows (x, y, z), z = longest axis.

    Eigenvector signs are fixed by the third central moment along each axis,
    which makes the frame follow rigid motions of the cloud. Canonical
    coordinates are (p - centroid) @ frame.T.
    """
    result = pca(cloud)
    pts = as_points(cloud)
    centered = pts - result.centroid

    def skew_oriented(v):
        moment = float(((centered @ v) ** 3).sum())
        return -v if moment < 0 else v

    z_axis = skew_oriented(result.eigenvectors[0].copy())
    x_axis = skew_oriented(result.eigenvectors[1].copy())
    y_axis = np.cross(z_axis, x_axis)
    return np.vstack([x_axis, y_axis, z_axis]), result.centroid


def spect_landmarks(cloud, cfg: SpectLandmarkConfig = SpectLandmarkConfig()) -> LandmarkSet:
    """Full single-cloud extraction in the cloud's intrinsic frame.

    The input is first mapped into its intrinsic frame (so the result commutes
    with rigid motions and arbitrary input orientations are handled), then the
    projection / circle / axis / rotating-plane / contraction steps run, and
    the landmarks are mapped back to world coordinates.
    """
    pts = as_points(cloud)
    if pts.shape[0] == 0:
        raise EmptyInputError("landmark extraction needs a non-empty cloud")
    flags: list[str] = []

    frame, centroid = intrinsic_frame(pts)
    canon = (pts - centroid) @ frame.T

    try:
        circle = ransac_circle(canon[:, :2], cfg.ransac_iterations, cfg.band_tol, cfg.seed)
    except NoModelError:
        circle = _fallback_circle(canon[:, :2])
        flags.append("fallback_circle")

    axis = spect_long_axis(canon, circle)
    if axis.low_confidence:
        flags.append("low_confidence_apex")

    try:
        junction = spect_junction_plane(canon, axis.apex, axis.base_center, cfg.cover_tol, strict=True)
    except NoModelError:
        junction = spect_junction_plane(canon, axis.apex, axis.base_center, cfg.cover_tol, strict=False)
        flags.append("relaxed_plane_band")

    axis_dir = axis.base_center - axis.apex
    axis_dir = axis_dir / np.linalg.norm(axis_dir)
    mid = 0.5 * (axis.apex + axis.base_center)
    try:
        point_a, point_b = contraction_search(
            canon, junction.plane, mid, axis_dir, cfg.tol_plane, cfg.tol_proximity, cfg.step, slab=cfg.slab
        )
    except (NoCandidatesError, NoConvergenceError):
        # sparse angular sampling can leave the intersection line hovering
        # between rings; widen the tolerances once before giving up
        point_a, point_b = contraction_search(
            canon,
            junction.plane,
            mid,
            axis_dir,
            2.0 * cfg.tol_plane,
            2.0 * cfg.tol_proximity,
            cfg.step,
            slab=cfg.slab,
        )
        flags.append("relaxed_contraction")
    groove = _groove_points(axis.apex, junction.plane, point_a, point_b, cfg.samples_per_curve)

    def to_world(p):
        return np.atleast_2d(p) @ frame + centroid

    apex_w = to_world(axis.apex)[0]
    groove_w = to_world(groove)
    groove_w[0] = apex_w
    groove_w[GROOVE_COUNT // 2] = apex_w
    plane_w = Plane(center=to_world(junction.plane.center)[0], normal=junction.plane.normal @ frame)
    axis_w = (apex_w, to_world(axis.base_center)[0])
    return LandmarkSet(
        apex=apex_w,
        groove_points=groove_w,
        junction_plane=plane_w,
        long_axis=axis_w,
        flags=tuple(flags),
    )
