from itertools import combinations

import numpy as np
import pytest

from cardioreg.errors import (
    DegenerateAxisError,
    EmptyInputError,
    InsufficientPointsError,
    NoCandidatesError,
    NoModelError,
)
from cardioreg.geometry import Plane, PointCloud
from cardioreg.landmarks import (
    CircleFit,
    CtaLandmarkConfig,
    LandmarkSet,
    SpectLandmarkConfig,
    _circumcircle,
    _dedup_rows,
    contact_points,
    contraction_search,
    cta_landmarks,
    junction_plane,
    long_axis_and_apex,
    ransac_circle,
    spect_junction_plane,
    spect_landmarks,
    spect_long_axis,
)
from cardioreg.phantom import PhantomSpec, generate
from cardioreg.transforms import RigidTransform, rotation_about


class TestContactPoints:
    def test_far_apart_clouds_have_no_contact(self):
        a = np.zeros((5, 3)) + [0.0, 0, 0]
        b = np.zeros((5, 3)) + [10.0, 0, 0]
        ca, cb = contact_points(a, b, 5.0)
        assert len(ca) == 0 and len(cb) == 0

    def test_identical_clouds_fully_in_contact(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-5, 5, (40, 3))
        ca, cb = contact_points(pts, pts, 0.5)
        assert len(ca) == 40 and len(cb) == 40

    def test_two_spheres_match_pairwise_oracle(self):
        rng = np.random.default_rng(1)

        def sphere(center, n):
            u = rng.normal(size=(n, 3))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            return center + 30.0 * u

        a = sphere(np.zeros(3), 400)
        b = sphere(np.array([58.0, 0, 0]), 400)
        ca, cb = contact_points(a, b, 3.0)
        d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
        assert np.array_equal(ca.points, a[d.min(axis=1) <= 3.0])
        assert np.array_equal(cb.points, b[d.min(axis=0) <= 3.0])

    def test_empty_cloud_rejected(self):
        with pytest.raises(EmptyInputError):
            contact_points(np.zeros((0, 3)), np.zeros((3, 3)), 1.0)


class TestJunctionPlane:
    def test_parallel_slabs(self):
        rng = np.random.default_rng(2)
        uv = rng.uniform(-20, 20, (400, 2))
        slab_a = np.column_stack([uv[:200, 0], uv[:200, 1], np.zeros(200)])
        slab_b = np.column_stack([uv[200:, 0], uv[200:, 1], np.full(200, 2.0)])
        result = junction_plane(slab_a, slab_b, 3.0)
        assert not result.fallback
        angle = np.degrees(np.arccos(np.clip(abs(result.plane.normal @ [0, 0, 1]), -1, 1)))
        assert angle < 1.0

    def test_disjoint_clouds_fall_back_to_global_pca(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(-5, 5, (50, 3))
        b = rng.uniform(-5, 5, (50, 3)) + [100.0, 0, 0]
        result = junction_plane(a, b, 1e-6)
        assert result.fallback
        from cardioreg.geometry import fit_plane_pca

        expected = fit_plane_pca(np.vstack([a, b]))
        assert np.allclose(result.plane.normal, expected.normal, atol=1e-12)

    def test_phantom_septum_recovered(self, default_phantom):
        data = default_phantom
        result = junction_plane(data.lv_cloud, data.rv_cloud, 3.0)
        assert not result.fallback
        septum = data.ground_truth.septum_plane
        # the fitted plane passes within 1 mm of the septum midsurface
        assert abs(septum.signed_distance(result.plane.center[None])[0]) < 1.0
        angle = np.degrees(np.arccos(np.clip(abs(result.plane.normal @ septum.normal), -1, 1)))
        assert angle < 3.0


class TestLongAxisAndApex:
    def test_ellipse_extremes(self):
        theta = np.linspace(0, 2 * np.pi, 144, endpoint=False)
        pts = np.column_stack([np.zeros_like(theta), 10 * np.cos(theta), 20 * np.sin(theta)])
        plane = Plane(center=np.zeros(3), normal=np.array([1.0, 0, 0]))
        result = long_axis_and_apex(pts, plane)
        assert abs(result.endpoint_a[2]) > 19.9
        assert abs(result.endpoint_b[2]) > 19.9

    def test_phantom_apex_at_closed_pole(self, default_phantom):
        data = default_phantom
        plane = Plane(center=data.ground_truth.junction_plane.center, normal=data.ground_truth.junction_plane.normal)
        result = long_axis_and_apex(data.lv_cloud, plane)
        assert np.linalg.norm(result.apex - data.ground_truth.apex) < 6.0
        assert not result.low_confidence

    def test_symmetric_circle_ties_to_lower_index(self):
        theta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        pts = np.column_stack([np.zeros_like(theta), np.cos(theta), np.sin(theta)]) * 10
        plane = Plane(center=np.zeros(3), normal=np.array([1.0, 0, 0]))
        result = long_axis_and_apex(pts, plane)
        assert result.low_confidence

    def test_too_few_points(self):
        with pytest.raises(InsufficientPointsError):
            long_axis_and_apex(np.zeros((2, 3)), Plane(np.zeros(3), np.array([0.0, 0, 1])))


class TestContractionSearch:
    PLANE = Plane(center=np.zeros(3), normal=np.array([0.0, 0, 1.0]))

    def test_dense_line_returns_extremes(self):
        line = np.column_stack([np.zeros(61), np.linspace(-30, 30, 61), np.zeros(61)])
        hi, lo = contraction_search(line, self.PLANE, np.zeros(3), np.array([1.0, 0, 0]), 2.0, 2.0, 1.0)
        # line direction is normal x axis = z x x = +y
        assert np.allclose(hi, [0, 30, 0], atol=1e-9)
        assert np.allclose(lo, [0, -30, 0], atol=1e-9)

    def test_gap_contracts_inward(self):
        dense = np.column_stack([np.zeros(39), np.linspace(-30, 8, 39), np.zeros(39)])
        displaced = np.array([[8.0, 20.0, 0.0]])  # candidate with no on-line support
        cloud = np.vstack([dense, displaced])
        hi, lo = contraction_search(cloud, self.PLANE, np.zeros(3), np.array([1.0, 0, 0]), 2.0, 2.0, 1.0)
        assert hi[1] <= 10.0  # contracted at least 10 mm from the y=20 extreme
        assert np.allclose(lo, [0, -30, 0], atol=1e-9)

    def test_no_candidates(self):
        far = np.column_stack([np.zeros(10), np.linspace(-5, 5, 10), np.full(10, 50.0)])
        with pytest.raises(NoCandidatesError):
            contraction_search(far, self.PLANE, np.zeros(3), np.array([1.0, 0, 0]), 2.0, 2.0, 1.0)


class TestCtaLandmarks:
    def test_groove_near_junction_plane(self, default_phantom):
        # The quadratic curve starts at the apex, whose plane distance decays
        # as (1 - t)^2 along the curve; the other two control points sit on
        # the plane, so each sample stays within 2 * tol_plane of that decay.
        data = default_phantom
        cfg = CtaLandmarkConfig()
        lm = cta_landmarks(data.lv_cloud, data.rv_cloud, cfg)
        dist = np.abs(lm.junction_plane.signed_distance(lm.groove_points))
        apex_dist = abs(lm.junction_plane.signed_distance(lm.apex[None])[0])
        t = np.tile(np.linspace(0.0, 1.0, 9), 2)
        assert (dist <= (1.0 - t) ** 2 * apex_dist + 2.0 * cfg.tol_plane).all()
        # the curve tail (parameter >= 5/8) satisfies the flat bound outright
        tail = np.abs(np.concatenate([dist[5:9], dist[14:18]]))
        assert tail.max() <= 2.0 * cfg.tol_plane

    def test_bezier_endpoints_exact(self, default_phantom):
        data = default_phantom
        lm = cta_landmarks(data.lv_cloud, data.rv_cloud)
        assert np.array_equal(lm.groove_points[0], lm.apex)
        assert np.array_equal(lm.groove_points[9], lm.apex)

    def test_rigid_equivariance(self, default_phantom):
        data = default_phantom
        T = RigidTransform(rotation_about([0.5, 1, 0.1], 67.0), np.array([7.0, -3.0, 12.0]))
        lm = cta_landmarks(data.lv_cloud, data.rv_cloud)
        lm_t = cta_landmarks(PointCloud(T.apply(data.lv_cloud)), PointCloud(T.apply(data.rv_cloud)))
        assert np.abs(T.apply(lm.groove_points) - lm_t.groove_points).max() < 1e-6

    def test_accuracy_against_analytic_truth(self, default_phantom):
        data = default_phantom
        lm = cta_landmarks(data.lv_cloud, data.rv_cloud)
        err = np.linalg.norm(lm.groove_points - data.truth_landmarks_fixed.groove_points, axis=1)
        assert err.max() < 3.0


def _exhaustive_circle(pts, band_tol):
    pts = _dedup_rows(pts)
    best = None
    for ids in combinations(range(len(pts)), 3):
        model = _circumcircle(pts[list(ids)])
        if model is None:
            continue
        center, radius = model
        dist = np.linalg.norm(pts - center, axis=1)
        band = np.abs(dist - radius) <= band_tol
        band[list(ids)] = False
        if band.any():
            continue
        inside = dist < radius - band_tol
        inside[list(ids)] = False
        score = int(inside.sum())
        if score >= 1 and (best is None or score > best[0]):
            best = (score, center, radius)
    return best


class TestRansacCircle:
    def _instance(self):
        rng = np.random.default_rng(0)
        theta = np.linspace(0, 2 * np.pi, 18, endpoint=False)
        ring = np.column_stack([5 + 20 * np.cos(theta), 3 + 20 * np.sin(theta)])
        interior = np.column_stack([5 + rng.uniform(-12, 12, 20), 3 + rng.uniform(-12, 12, 20)])
        return np.vstack([ring, interior])

    def test_matches_exhaustive_subset_search(self):
        pts = self._instance()
        oracle = _exhaustive_circle(pts, 0.5)
        fit = ransac_circle(pts, iterations=3000, band_tol=0.5, seed=123)
        assert oracle is not None
        assert fit.inlier_count == oracle[0]
        # an admissible circle must enclose the ring, so its radius exceeds 20
        assert fit.radius > 20.0

    def test_returned_model_is_admissible_argmax(self):
        pts = _dedup_rows(self._instance())
        fit = ransac_circle(pts, iterations=3000, band_tol=0.5, seed=123)
        # replay: the returned model's score is computable and every point
        # outside the defining triple stays clear of the band
        center = np.asarray(fit.center)
        dist = np.linalg.norm(pts - center, axis=1)
        on_circle = np.isclose(dist, fit.radius, atol=1e-9)
        assert on_circle.sum() == 3
        others = ~on_circle
        assert (np.abs(dist[others] - fit.radius) > 0.5).all()
        assert int((dist[others] < fit.radius - 0.5).sum()) == fit.inlier_count

    def test_three_points_give_no_model(self):
        pts = np.array([[0.0, 0], [4.0, 0], [0.0, 3.0]])
        with pytest.raises(NoModelError):
            ransac_circle(pts, iterations=50, band_tol=0.5, seed=0)

    def test_collinear_points_rejected(self):
        pts = np.column_stack([np.arange(10.0), 2.0 * np.arange(10.0)])
        with pytest.raises(InsufficientPointsError):
            ransac_circle(pts, iterations=10, band_tol=0.5, seed=0)

    def test_deterministic_given_seed(self):
        pts = self._instance()
        a = ransac_circle(pts, iterations=500, band_tol=0.5, seed=9)
        b = ransac_circle(pts, iterations=500, band_tol=0.5, seed=9)
        assert a == b


def _half_ellipsoid(n=800, a=30.0, c=45.0, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    pts = u * np.array([a, a, c])
    return pts[pts[:, 2] <= 0]


class TestSpectLongAxis:
    def test_apex_at_bottom_pole(self):
        pts = _half_ellipsoid()
        result = spect_long_axis(pts, CircleFit((0.0, 0.0), 30.0))
        assert result.apex[2] < -40.0
        assert np.linalg.norm(result.apex[:2]) < 12.0
        assert result.base_center[2] > -10.0

    def test_symmetric_ellipsoid_ties_low(self):
        phi = np.linspace(0, 2 * np.pi, 36, endpoint=False)
        z = np.linspace(-0.9, 0.9, 20)  # symmetric levels, no point at the split
        pp, zz = np.meshgrid(phi, z)
        r = 30.0 * np.sqrt(1 - zz**2)
        pts = np.column_stack([(r * np.cos(pp)).ravel(), (r * np.sin(pp)).ravel(), (45.0 * zz).ravel()])
        result = spect_long_axis(pts, CircleFit((0.0, 0.0), 30.0))
        assert result.low_confidence
        assert result.apex[2] == pytest.approx(-40.5, abs=1e-9)

    def test_invariant_under_rotation_about_axis(self):
        pts = _half_ellipsoid(seed=3)
        circle = CircleFit((0.0, 0.0), 30.0)
        rot = rotation_about([0, 0, 1], 40.0)
        a = spect_long_axis(pts, circle)
        b = spect_long_axis(pts @ rot.T, circle)
        assert np.allclose(rot @ a.apex, b.apex, atol=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            spect_long_axis(np.zeros((0, 3)), CircleFit((0.0, 0.0), 1.0))


class TestSpectJunctionPlane:
    def _ridge(self, angle_deg):
        normal = np.array([np.cos(np.deg2rad(angle_deg)), np.sin(np.deg2rad(angle_deg)), 0.0])
        tangent = np.array([-normal[1], normal[0], 0.0])
        offset = 21.0
        width = offset * np.sqrt(1.0 / 0.36 - 1.0)  # so 0.6 * r_max lands on the ridge plane
        t = np.linspace(-width, width, 25)
        z = np.linspace(-30.0, 30.0, 21)
        tt, zz = np.meshgrid(t, z)
        return offset * normal + np.outer(tt.ravel(), tangent) + np.outer(zz.ravel(), [0, 0, 1.0])

    def test_ridge_angle_recovered(self):
        pts = self._ridge(40.0)
        result = spect_junction_plane(pts, np.array([0, 0, -40.0]), np.array([0, 0, 40.0]), 2.0)
        expected = np.array([np.cos(np.deg2rad(40.0)), np.sin(np.deg2rad(40.0)), 0.0])
        angle = np.degrees(np.arccos(np.clip(abs(result.plane.normal @ expected), -1, 1)))
        assert angle < 5.0
        assert result.strict

    def test_featureless_axis_ties_at_zero(self):
        pts = np.column_stack([np.zeros(7), np.zeros(7), np.linspace(-20, 20, 7)])
        result = spect_junction_plane(pts, np.array([0, 0, -25.0]), np.array([0, 0, 25.0]), 2.0)
        assert result.angle_deg == 0.0

    def test_argmax_property(self):
        pts = self._ridge(40.0)
        apex, base = np.array([0, 0, -40.0]), np.array([0, 0, 40.0])
        result = spect_junction_plane(pts, apex, base, 2.0)
        d = np.array([0, 0, 1.0])
        axis_center = 0.5 * (apex + base)
        rel = pts - axis_center
        radial = rel - np.outer(rel @ d, d)
        r_max = np.linalg.norm(radial, axis=1).max()
        for k in range(72):
            theta = np.deg2rad(5.0 * k)
            n = np.cos(theta) * np.array([1.0, 0, 0]) + np.sin(theta) * np.array([0, 1.0, 0])
            center = axis_center + 0.6 * r_max * n
            dist = np.abs((pts - center) @ n)
            if ((dist > 2.0) & (dist <= 4.0)).any():
                continue
            assert result.coverage >= int((dist <= 2.0).sum())

    def test_degenerate_axis(self):
        with pytest.raises(DegenerateAxisError):
            spect_junction_plane(np.zeros((5, 3)), np.zeros(3), np.array([0, 0, 0.5]), 2.0)

    def test_dense_shell_has_no_strict_model(self):
        rng = np.random.default_rng(5)
        u = rng.normal(size=(3000, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        pts = 30.0 * u
        with pytest.raises(NoModelError):
            spect_junction_plane(pts, np.array([0, 0, -30.0]), np.array([0, 0, 30.0]), 2.0, strict=True)


class TestSpectLandmarks:
    def test_output_shape_and_apex_duplication(self, default_phantom):
        lm = spect_landmarks(default_phantom.functional_cloud)
        assert lm.groove_points.shape == (18, 3)
        assert np.array_equal(lm.groove_points[0], lm.apex)
        assert np.array_equal(lm.groove_points[9], lm.apex)

    def test_paired_phantom_correspondence(self, default_phantom):
        # Identity-pose phantom: both extractors should produce comparable
        # landmark sets. The SPECT side only sees the septal feature through
        # its angular sampling, so the agreement is supports-limited.
        data = default_phantom
        lm_cta = cta_landmarks(data.lv_cloud, data.rv_cloud)
        lm_spect = spect_landmarks(data.functional_cloud)
        d = np.linalg.norm(lm_cta.groove_points - lm_spect.groove_points, axis=1)
        # the functional cloud's lowest sampling ring sits ~6 mm off the pole,
        # which bounds how closely the two apex estimates can agree
        assert np.linalg.norm(lm_cta.apex - lm_spect.apex) < 6.5
        assert d.mean() < 5.0
        assert d.max() < 7.5

    def test_rigid_equivariance(self, default_phantom):
        data = default_phantom
        T = RigidTransform(rotation_about([1, 0.2, 0.4], 113.0), np.array([-9.0, 14.0, 3.0]))
        lm = spect_landmarks(data.functional_cloud)
        lm_t = spect_landmarks(PointCloud(T.apply(data.functional_cloud)))
        assert np.abs(T.apply(lm.groove_points) - lm_t.groove_points).max() < 1e-6

    def test_deterministic(self, default_phantom):
        a = spect_landmarks(default_phantom.functional_cloud)
        b = spect_landmarks(default_phantom.functional_cloud)
        assert np.array_equal(a.groove_points, b.groove_points)
        assert a.flags == b.flags


def test_landmark_set_requires_apex_duplication():
    groove = np.zeros((18, 3))
    groove[9] = [1.0, 0, 0]  # second curve does not start at the apex
    with pytest.raises(Exception):
        LandmarkSet(
            apex=np.zeros(3),
            groove_points=groove,
            junction_plane=Plane(np.zeros(3), np.array([0.0, 0, 1])),
            long_axis=(np.zeros(3), np.ones(3)),
        )
