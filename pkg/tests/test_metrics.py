import numpy as np
import pytest

from cardioreg.errors import CountMismatchError, EmptyInputError, GridMismatchError, ZeroVectorError
from cardioreg.geometry import Plane
from cardioreg.metrics import MetricReport, apex_angle, dice, gce, mge, mpe
from cardioreg.transforms import rotation_about
from cardioreg.volume import VoxelVolume


class TestMpe:
    def test_identical_clouds(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-10, 10, (50, 3))
        assert mpe(pts, pts) == 0.0

    def test_two_isolated_points(self):
        assert mpe(np.array([[0.0, 0, 0]]), np.array([[3.0, 0, 0]])) == 3.0

    def test_matches_pairwise_oracle_exactly(self):
        rng = np.random.default_rng(1)
        fixed = rng.uniform(-30, 30, (200, 3))
        registered = rng.uniform(-30, 30, (170, 3))
        oracle = np.sqrt(((fixed[:, None, :] - registered[None, :, :]) ** 2).sum(axis=2)).min(axis=1).mean()
        assert mpe(fixed, registered) == oracle

    def test_rigid_invariance(self):
        rng = np.random.default_rng(2)
        a = rng.uniform(-10, 10, (80, 3))
        b = rng.uniform(-10, 10, (90, 3))
        rot = rotation_about([1, 2, 0.5], 33.0)
        t = np.array([4.0, -7.0, 2.0])
        assert mpe(a @ rot.T + t, b @ rot.T + t) == pytest.approx(mpe(a, b), abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            mpe(np.zeros((0, 3)), np.zeros((5, 3)))


class TestApexAngle:
    CENTER = np.array([1.0, 1.0, 1.0])

    def test_zero_when_identical(self):
        apex = np.array([5.0, 1.0, 1.0])
        assert apex_angle(apex, apex, self.CENTER) == 0.0

    def test_perpendicular(self):
        a = self.CENTER + [4.0, 0, 0]
        b = self.CENTER + [0, 9.0, 0]
        assert apex_angle(a, b, self.CENTER) == pytest.approx(90.0, abs=1e-12)

    def test_antiparallel(self):
        a = self.CENTER + [2.0, 0, 0]
        b = self.CENTER - [5.0, 0, 0]
        assert apex_angle(a, b, self.CENTER) == pytest.approx(180.0, abs=1e-12)

    def test_symmetric_and_scale_invariant(self):
        rng = np.random.default_rng(3)
        a = self.CENTER + rng.normal(size=3)
        b = self.CENTER + rng.normal(size=3)
        assert apex_angle(a, b, self.CENTER) == pytest.approx(apex_angle(b, a, self.CENTER), abs=1e-12)
        a2 = self.CENTER + 7.0 * (a - self.CENTER)
        b2 = self.CENTER + 0.3 * (b - self.CENTER)
        assert apex_angle(a2, b2, self.CENTER) == pytest.approx(apex_angle(a, b, self.CENTER), abs=1e-9)

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVectorError):
            apex_angle(self.CENTER, self.CENTER + [1.0, 0, 0], self.CENTER)


class TestMge:
    def test_identical_sets(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(-5, 5, (18, 3))
        assert mge(pts, pts) == 0.0

    def test_uniform_offset(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-5, 5, (18, 3))
        assert mge(pts, pts + [0.0, 4.0, 0.0]) == pytest.approx(4.0, abs=1e-12)

    def test_matches_index_oracle(self):
        rng = np.random.default_rng(6)
        a = rng.uniform(-5, 5, (18, 3))
        b = rng.uniform(-5, 5, (18, 3))
        oracle = float(np.mean(np.sqrt(((a - b) ** 2).sum(axis=1))))
        assert mge(a, b) == oracle

    def test_count_mismatch(self):
        with pytest.raises(CountMismatchError):
            mge(np.zeros((18, 3)), np.zeros((17, 3)))


class TestGce:
    def test_same_plane(self):
        p = Plane(np.array([1.0, 2, 3]), np.array([0.0, 0, 1]))
        assert gce(p, p) == 0.0

    def test_center_distance(self):
        a = Plane(np.zeros(3), np.array([0.0, 0, 1]))
        b = Plane(np.array([3.0, 4.0, 0.0]), np.array([0.0, 1, 0]))
        assert gce(a, b) == 5.0


def _mask(data):
    dims = data.shape
    return VoxelVolume(np.zeros(3), np.ones(3), dims, data.astype(float))


class TestDice:
    def test_identical_masks(self):
        data = np.zeros((4, 4, 4))
        data[1:3, 1:3, 1:3] = 1.0
        assert dice(_mask(data), _mask(data)) == 1.0

    def test_disjoint_masks(self):
        a = np.zeros((4, 4, 4))
        b = np.zeros((4, 4, 4))
        a[0, 0, 0] = 1.0
        b[3, 3, 3] = 1.0
        assert dice(_mask(a), _mask(b)) == 0.0

    def test_both_empty_is_one(self):
        empty = np.zeros((3, 3, 3))
        assert dice(_mask(empty), _mask(empty)) == 1.0

    def test_symmetric(self):
        rng = np.random.default_rng(7)
        a = (rng.uniform(size=(5, 5, 5)) > 0.5).astype(float)
        b = (rng.uniform(size=(5, 5, 5)) > 0.5).astype(float)
        assert dice(_mask(a), _mask(b)) == dice(_mask(b), _mask(a))

    def test_grid_mismatch(self):
        a = _mask(np.zeros((3, 3, 3)))
        b = VoxelVolume(np.ones(3), np.ones(3), (3, 3, 3), np.zeros((3, 3, 3)))
        with pytest.raises(GridMismatchError):
            dice(a, b)


def test_metric_report_csv_row_roundtrip():
    report = MetricReport(mpe_mm=1.25, ae_deg=6.5, mge_mm=8.0, gce_mm=6.625)
    values = [float(v) for v in report.csv_row().split(",")]
    assert values == [1.25, 6.5, 8.0, 6.625]
