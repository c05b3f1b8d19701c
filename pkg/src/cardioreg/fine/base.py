"""Shared parameter/result types and helpers for the fine registration family."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import EmptyInputError, InvalidParameterError
from ..geometry import SpatialIndex, as_points
from ..transforms import NonrigidTransform, Transform


@dataclass(frozen=True)
class FineParams:
    """Knobs shared across the fine registration algorithms.

    Only the fields an algorithm reads matter to it: the CPD family uses
    outlier_weight, bcpd adds beta/lam/bcpd_downsample, clureg uses clusters,
    ffd uses lattice/lam.
    """

    max_iter: int = 100
    tol: float = 1e-6
    outlier_weight: float = 0.1
    beta: float = 15.0
    lam: float = 2.0
    clusters: int = 8
    lattice: tuple[int, int, int] = (6, 6, 6)
    bcpd_downsample: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidParameterError("max_iter must be >= 1")
        if not 0.0 <= self.outlier_weight < 1.0:
            raise InvalidParameterError("outlier weight must lie in [0, 1)")
        if self.tol < 0 or self.beta <= 0 or self.lam < 0 or self.bcpd_downsample < 1:
            raise InvalidParameterError("fine parameters out of range")

    def with_overrides(self, **kwargs) -> "FineParams":
        return replace(self, **kwargs)


@dataclass(frozen=True, eq=False)
class FineResult:
    algo: str
    transform: Transform
    iterations: int
    objective_trace: tuple[float, ...]
    converged: bool
    params: FineParams
    extras: dict = field(default_factory=dict)

    def registered(self, src) -> np.ndarray:
        """Source points under the estimated transform."""
        if isinstance(self.transform, NonrigidTransform):
            return self.transform.apply_to_source()
        return self.transform.apply(src)


def check_pair(src, dst) -> tuple[np.ndarray, np.ndarray]:
    s = as_points(src)
    d = as_points(dst)
    if s.shape[0] == 0 or d.shape[0] == 0:
        raise EmptyInputError("registration needs two non-empty clouds")
    return s, d


def converged(prev: float, new: float, tol: float) -> bool:
    return abs(prev - new) <= tol * max(abs(prev), abs(new), 1e-12)


def nn_squared_error(points: np.ndarray, index: SpatialIndex) -> tuple[float, np.ndarray, np.ndarray]:
    """Sum of squared nearest-neighbor distances plus the match itself."""
    idx, dist = index.nearest_many(points)
    return float((dist**2).sum()), idx, dist


def weighted_rigid(src: np.ndarray, dst: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weighted least-squares rigid fit (Umeyama with fixed scale)."""
    w = np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        raise InvalidParameterError("weights must have positive sum")
    mu_s = (w @ src) / total
    mu_d = (w @ dst) / total
    cov = (dst - mu_d).T @ ((src - mu_s) * w[:, None]) / total
    u, _, vt = np.linalg.svd(cov)
    fix = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        fix[2, 2] = -1.0
    rotation = u @ fix @ vt
    translation = mu_d - rotation @ mu_s
    return rotation, translation
