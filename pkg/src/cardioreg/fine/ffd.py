"""Free-form deformation on a cubic B-spline control lattice.

The lattice spans the source bounding box padded by one cell; a point moves by
the tensor-product cubic B-spline blend of the 4x4x4 surrounding control
displacements. The energy couples squared nearest-neighbor alignment error
with a discrete-Laplacian smoothness penalty on the control displacements, and
is minimized by gradient descent with a backtracking line search (so the
recorded energy never increases).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError
from ..geometry import SpatialIndex, as_points
from ..transforms import NonrigidTransform
from .base import FineParams, FineResult, check_pair, converged


def _bspline_basis(u: np.ndarray) -> np.ndarray:
    """Uniform cubic B-spline basis values for offsets (-1, 0, 1, 2); shape (N, 4)."""
    u2 = u * u
    u3 = u2 * u
    return np.stack(
        [
            (1.0 - u) ** 3 / 6.0,
            (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
            (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
            u3 / 6.0,
        ],
        axis=1,
    )


@dataclass(frozen=True, eq=False)
class BsplineLattice:
    """Control lattice with (l+1, m+1, n+1) nodes spanning a padded box."""

    origin: np.ndarray
    spacing: np.ndarray
    shape: tuple[int, int, int]  # node counts per axis

    @classmethod
    def around(cls, points, cells: tuple[int, int, int]) -> "BsplineLattice":
        pts = as_points(points)
        if min(cells) < 3:
            raise InvalidParameterError("lattice needs at least 3 cells per axis")
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        extent = np.maximum(hi - lo, 1e-6)
        cells_arr = np.asarray(cells, dtype=np.float64)
        spacing = extent / (cells_arr - 2.0)
        origin = lo - spacing
        shape = tuple(int(c) + 1 for c in cells)
        return cls(origin=np.asarray(origin), spacing=np.asarray(spacing), shape=shape)

    def support(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Flat control indices (N, 64) and blend weights (N, 64) per point."""
        pts = as_points(points)
        grid = (pts - self.origin) / self.spacing
        shape = np.asarray(self.shape)
        base = np.clip(np.floor(grid).astype(int), 1, shape - 3)
        local = grid - base
        weights_axis = [_bspline_basis(np.clip(local[:, d], 0.0, 1.0)) for d in range(3)]
        offsets = np.arange(-1, 3)
        idx = []
        wts = []
        for a in range(4):
            for b in range(4):
                for c in range(4):
                    node = np.stack(
                        [base[:, 0] + offsets[a], base[:, 1] + offsets[b], base[:, 2] + offsets[c]], axis=1
                    )
                    flat = (node[:, 0] * shape[1] + node[:, 1]) * shape[2] + node[:, 2]
                    idx.append(flat)
                    wts.append(weights_axis[0][:, a] * weights_axis[1][:, b] * weights_axis[2][:, c])
        return np.stack(idx, axis=1), np.stack(wts, axis=1)

    def displace(self, points, control_disp: np.ndarray) -> np.ndarray:
        """Displacements of points for control displacements (l+1, m+1, n+1, 3)."""
        idx, wts = self.support(points)
        flat = control_disp.reshape(-1, 3)
        return (wts[:, :, None] * flat[idx]).sum(axis=1)

    def transform(self, points, control_disp: np.ndarray) -> np.ndarray:
        return as_points(points) + self.displace(points, control_disp)


def _laplacian(disp: np.ndarray) -> np.ndarray:
    lap = np.zeros_like(disp)
    lap[1:-1, :, :] += disp[2:, :, :] - 2.0 * disp[1:-1, :, :] + disp[:-2, :, :]
    lap[:, 1:-1, :] += disp[:, 2:, :] - 2.0 * disp[:, 1:-1, :] + disp[:, :-2, :]
    lap[:, :, 1:-1] += disp[:, :, 2:] - 2.0 * disp[:, :, 1:-1] + disp[:, :, :-2]
    return lap


def _laplacian_adjoint(y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[2:, :, :] += y[1:-1, :, :]
    out[1:-1, :, :] -= 2.0 * y[1:-1, :, :]
    out[:-2, :, :] += y[1:-1, :, :]
    out[:, 2:, :] += y[:, 1:-1, :]
    out[:, 1:-1, :] -= 2.0 * y[:, 1:-1, :]
    out[:, :-2, :] += y[:, 1:-1, :]
    out[:, :, 2:] += y[:, :, 1:-1]
    out[:, :, 1:-1] -= 2.0 * y[:, :, 1:-1]
    out[:, :, :-2] += y[:, :, 1:-1]
    return out


def ffd(src, dst, params: FineParams = FineParams()) -> FineResult:
    s, d = check_pair(src, dst)
    lattice = BsplineLattice.around(s, params.lattice)
    idx, wts = lattice.support(s)
    n_nodes = int(np.prod(lattice.shape))
    disp = np.zeros(lattice.shape + (3,))

    index = SpatialIndex(d)

    def moved_points(disp_arr):
        flat = disp_arr.reshape(-1, 3)
        return s + (wts[:, :, None] * flat[idx]).sum(axis=1)

    def energy(disp_arr, targets):
        moved = moved_points(disp_arr)
        data = float(((moved - targets) ** 2).sum())
        lap = _laplacian(disp_arr)
        return data + params.lam * float((lap**2).sum()), moved

    def gradient(disp_arr, targets):
        moved = moved_points(disp_arr)
        residual = 2.0 * (moved - targets)
        grad_flat = np.zeros((n_nodes, 3))
        for column in range(idx.shape[1]):
            np.add.at(grad_flat, idx[:, column], wts[:, column, None] * residual)
        grad = grad_flat.reshape(lattice.shape + (3,))
        grad += 2.0 * params.lam * _laplacian_adjoint(_laplacian(disp_arr))
        return grad

    match_idx, _ = index.nearest_many(s)
    trace: list[float] = []
    done = False
    prev = None
    step = 1.0 / max(float(len(s)), 1.0)
    for _ in range(params.max_iter):
        targets = d[match_idx]
        current, _ = energy(disp, targets)
        grad = gradient(disp, targets)
        gnorm2 = float((grad**2).sum())
        accepted = False
        trial_step = step * 2.0
        for _ in range(40):
            candidate = disp - trial_step * grad
            value, _ = energy(candidate, targets)
            if value <= current - 1e-4 * trial_step * gnorm2:
                disp = candidate
                step = trial_step
                accepted = True
                break
            trial_step *= 0.5
        moved = moved_points(disp)
        match_idx, dist = index.nearest_many(moved)
        lap = _laplacian(disp)
        regularizer = params.lam * float((lap**2).sum())
        objective = float((dist**2).sum()) + regularizer
        trace.append(objective)
        if not accepted or (prev is not None and converged(prev, objective, params.tol)):
            done = True
            break
        prev = objective

    moved = moved_points(disp)
    lap = _laplacian(disp)
    transform = NonrigidTransform(np.eye(3), np.zeros(3), source_points=s, offsets=moved - s)
    return FineResult(
        algo="ffd",
        transform=transform,
        iterations=len(trace),
        objective_trace=tuple(trace),
        converged=done,
        params=params,
        extras={"control_displacements": disp, "regularizer": params.lam * float((lap**2).sum())},
    )
