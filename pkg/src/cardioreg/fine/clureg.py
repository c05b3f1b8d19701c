"""Cluster-blended piecewise-rigid registration.

The source cloud is partitioned by seeded k-means; each cluster carries its
own rigid transform fitted against nearest-neighbor correspondences, and a
point moves by the convex blend of the cluster transforms with Gaussian
weights of its distance to each cluster centroid. The blend weights of every
point sum to one by construction.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidParameterError
from ..geometry import SpatialIndex
from ..transforms import NonrigidTransform
from .base import FineParams, FineResult, check_pair, converged, nn_squared_error, weighted_rigid


def _kmeans(points: np.ndarray, k: int, rng: np.random.Generator, iters: int = 60) -> np.ndarray:
    """Plain Lloyd k-means with k-means++ seeding; returns the centroids."""
    n = points.shape[0]
    centroids = np.empty((k, 3))
    centroids[0] = points[rng.integers(n)]
    dist2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        probs = dist2 / max(dist2.sum(), 1e-300)
        centroids[j] = points[rng.choice(n, p=probs)]
        dist2 = np.minimum(dist2, ((points - centroids[j]) ** 2).sum(axis=1))
    for _ in range(iters):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        new_centroids = centroids.copy()
        for j in range(k):
            members = points[labels == j]
            if members.shape[0] == 0:
                # reseed an empty cluster at the farthest point
                far = int(d2.min(axis=1).argmax())
                new_centroids[j] = points[far]
            else:
                new_centroids[j] = members.mean(axis=0)
        if np.allclose(new_centroids, centroids):
            centroids = new_centroids
            break
        centroids = new_centroids
    return centroids


def _best_centroids(points: np.ndarray, k: int, seed: int, restarts: int = 3) -> np.ndarray:
    best = None
    best_inertia = np.inf
    for r in range(restarts):
        rng = np.random.default_rng(seed + r)
        centroids = _kmeans(points, k, rng)
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        inertia = float(d2.min(axis=1).sum())
        if inertia < best_inertia:
            best_inertia = inertia
            best = centroids
    return best


def clureg(src, dst, params: FineParams = FineParams()) -> FineResult:
    s, d = check_pair(src, dst)
    if params.clusters < 1:
        raise InvalidParameterError("cluster count must be >= 1")
    k = min(params.clusters, s.shape[0])

    if k == 1:
        weights = np.ones((s.shape[0], 1))
    else:
        centroids = _best_centroids(s, k, params.seed)
        pair = ((centroids[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        bandwidth = float(np.sqrt(np.median(pair[np.triu_indices(k, 1)])))
        bandwidth = max(bandwidth, 1e-9)
        logits = -((s[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2) / (2.0 * bandwidth**2)
        logits -= logits.max(axis=1, keepdims=True)
        weights = np.exp(logits)
        weights /= weights.sum(axis=1, keepdims=True)

    index = SpatialIndex(d)
    moved = s
    _, match_idx, _ = nn_squared_error(moved, index)
    trace: list[float] = []
    done = False
    prev = None
    for _ in range(params.max_iter):
        targets = d[match_idx]
        blended = np.zeros_like(s)
        for j in range(k):
            rotation, translation = weighted_rigid(s, targets, weights[:, j])
            blended += weights[:, j, None] * (s @ rotation.T + translation)
        moved = blended
        objective, match_idx, _ = nn_squared_error(moved, index)
        trace.append(objective)
        if prev is not None and converged(prev, objective, params.tol):
            done = True
            break
        prev = objective
    transform = NonrigidTransform(np.eye(3), np.zeros(3), source_points=s, offsets=moved - s)
    return FineResult(
        algo="clureg",
        transform=transform,
        iterations=len(trace),
        objective_trace=tuple(trace),
        converged=done,
        params=params,
        extras={"cluster_weights_sum": float(np.abs(weights.sum(axis=1) - 1.0).max())},
    )
