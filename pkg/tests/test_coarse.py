import numpy as np
import pytest

from cardioreg.coarse import (
    coarse_register,
    rigid_residual,
    scale_factor,
    umeyama_rigid,
    umeyama_similarity,
)
from cardioreg.errors import CountMismatchError, DegenerateCloudError
from cardioreg.geometry import PointCloud
from cardioreg.landmarks import cta_landmarks, spect_landmarks
from cardioreg.metrics import mpe
from cardioreg.phantom import PhantomSpec, generate
from cardioreg.transforms import SimilarityTransform, rotation_about
from conftest import random_rigid


def _blob(rng, n=300, axes=(9.0, 5.0, 2.0)):
    return rng.normal(size=(n, 3)) * np.asarray(axes)


class TestScaleFactor:
    def test_identical_clouds(self):
        rng = np.random.default_rng(0)
        pts = _blob(rng)
        assert scale_factor(pts, pts) == pytest.approx(1.0, abs=1e-12)

    def test_doubled_cloud(self):
        rng = np.random.default_rng(1)
        pts = _blob(rng)
        assert scale_factor(pts, 2.0 * pts) == pytest.approx(2.0, rel=1e-12)

    def test_anisotropic_stretch_along_principal_axes(self):
        rng = np.random.default_rng(2)
        pts = _blob(rng, axes=(9.0, 5.0, 2.0))
        # stretch along the cloud's own principal axes by (2, 2, 0.5)
        from cardioreg.geometry import pca

        res = pca(pts)
        coords = (pts - res.centroid) @ res.eigenvectors.T
        stretched = res.centroid + (coords * np.array([2.0, 2.0, 0.5])) @ res.eigenvectors
        assert scale_factor(pts, stretched) == pytest.approx(1.5, rel=1e-9)

    def test_roundtrip_on_similarity_pairs(self):
        rng = np.random.default_rng(3)
        pts = _blob(rng)
        rot, t = random_rigid(rng)
        other = 1.37 * (pts @ rot.T) + t
        assert scale_factor(pts, other) * scale_factor(other, pts) == pytest.approx(1.0, abs=1e-9)

    def test_degenerate_cloud(self):
        flat = np.column_stack([np.arange(10.0), np.zeros(10), np.zeros(10)])
        with pytest.raises(DegenerateCloudError):
            scale_factor(flat, flat)


class TestUmeyama:
    def test_identity(self):
        rng = np.random.default_rng(4)
        pts = _blob(rng, n=25)
        rot, t = umeyama_rigid(pts, pts)
        assert np.abs(rot - np.eye(3)).max() < 1e-12
        assert np.abs(t).max() < 1e-12

    def test_exact_rigid_recovery(self):
        rng = np.random.default_rng(5)
        pts = _blob(rng, n=19)
        rz = rotation_about([0, 0, 1], 90.0)
        dst = pts @ rz.T + np.array([1.0, 2.0, 3.0])
        rot, t = umeyama_rigid(pts, dst)
        assert np.abs(rot - rz).max() < 1e-9
        assert np.allclose(t, [1, 2, 3], atol=1e-9)

    def test_noisy_fit_beats_random_transforms(self):
        rng = np.random.default_rng(6)
        pts = _blob(rng, n=40)
        rot_true, t_true = random_rigid(rng)
        dst = pts @ rot_true.T + t_true + rng.normal(scale=1.0, size=pts.shape)
        rot, t = umeyama_rigid(pts, dst)
        best = rigid_residual(rot, t, pts, dst)
        for _ in range(1000):
            r_rand, t_rand = random_rigid(rng)
            assert best <= rigid_residual(r_rand, t_rand, pts, dst) + 1e-9

    def test_objective_matches_independent_computation(self):
        rng = np.random.default_rng(7)
        pts = _blob(rng, n=30)
        dst = _blob(rng, n=30)
        rot, t = umeyama_rigid(pts, dst)
        manual = float(((pts @ rot.T + t - dst) ** 2).sum())
        assert rigid_residual(rot, t, pts, dst) == pytest.approx(manual, rel=1e-12)

    def test_similarity_variant_reduces_to_rigid(self):
        rng = np.random.default_rng(8)
        pts = _blob(rng, n=30)
        rot_true, t_true = random_rigid(rng)
        dst = pts @ rot_true.T + t_true
        s, rot, t = umeyama_similarity(pts, dst)
        assert s == pytest.approx(1.0, abs=1e-12)
        rot_r, t_r = umeyama_rigid(pts, dst)
        assert np.abs(rot - rot_r).max() < 1e-9
        assert np.abs(t - t_r).max() < 1e-9

    def test_count_mismatch(self):
        with pytest.raises(CountMismatchError):
            umeyama_rigid(np.zeros((4, 3)), np.zeros((5, 3)))


class TestCoarseRegister:
    def test_identity_when_already_aligned(self, default_phantom):
        data = default_phantom
        transform, moved = coarse_register(
            data.functional_cloud,
            data.functional_cloud,
            data.truth_landmarks_moving,
            data.truth_landmarks_moving,
        )
        assert transform.scale == pytest.approx(1.0, abs=1e-9)
        assert np.abs(transform.rotation - np.eye(3)).max() < 1e-9
        assert np.abs(moved.points - data.functional_cloud.points).max() < 1e-9

    def test_exact_similarity_recovery(self):
        rng = np.random.default_rng(9)
        data = generate(PhantomSpec(seed=5))
        rot, t = random_rigid(rng)
        truth = SimilarityTransform(scale=1.3, rotation=rot, translation=t)
        moving = data.functional_cloud
        fixed = PointCloud(truth.apply(moving))
        from cardioreg.landmarks import transform_landmark_set

        lm_moving = data.truth_landmarks_moving
        lm_fixed = transform_landmark_set(lm_moving, truth.apply, truth.rotation)
        transform, moved = coarse_register(moving, fixed, lm_moving, lm_fixed)
        assert np.abs(moved.points - fixed.points).max() < 1e-6
        assert transform.scale == pytest.approx(1.3, rel=1e-6)

    def test_landmark_residual_exact_for_similarity_images(self):
        data = generate(PhantomSpec(seed=6))
        truth = SimilarityTransform(
            scale=0.9, rotation=rotation_about([1, 0.5, 0.2], 40.0), translation=np.array([3.0, 4.0, -5.0])
        )
        from cardioreg.landmarks import transform_landmark_set

        moving = data.functional_cloud
        fixed = PointCloud(truth.apply(moving))
        lm_fixed = transform_landmark_set(data.truth_landmarks_moving, truth.apply, truth.rotation)
        transform, _ = coarse_register(moving, fixed, data.truth_landmarks_moving, lm_fixed)
        residual = transform.apply(data.truth_landmarks_moving.correspondence_points()) - lm_fixed.correspondence_points()
        assert np.abs(residual).max() < 1e-6

    def test_post_coarse_beats_pre_coarse(self, transformed_phantom):
        data = transformed_phantom
        lm_fixed = cta_landmarks(data.lv_cloud, data.rv_cloud)
        lm_moving = spect_landmarks(data.functional_cloud)
        _, moved = coarse_register(data.functional_cloud, data.lv_cloud, lm_moving, lm_fixed)
        before = mpe(data.lv_cloud, data.functional_cloud)
        after = mpe(data.lv_cloud, moved)
        assert after < before
