"""Iterative closest point, rigid and similarity variants.

Each iteration matches every source point to its nearest target point and
solves the closed-form (Umeyama) fit on those pairs. The recorded objective is
the sum of squared nearest-neighbor distances at the updated transform, which
is non-increasing by the classical alternation argument.
"""

from __future__ import annotations

from ..coarse import umeyama_rigid, umeyama_similarity
from ..geometry import SpatialIndex
from ..transforms import RigidTransform, SimilarityTransform
from .base import FineParams, FineResult, check_pair, converged, nn_squared_error


def icp(src, dst, params: FineParams = FineParams()) -> FineResult:
    s, d = check_pair(src, dst)
    index = SpatialIndex(d)
    rotation = RigidTransform.identity().rotation
    translation = RigidTransform.identity().translation
    moved = s
    _, match_idx, _ = nn_squared_error(moved, index)

    trace: list[float] = []
    done = False
    prev = None
    for _ in range(params.max_iter):
        delta_r, delta_t = umeyama_rigid(moved, d[match_idx])
        rotation = delta_r @ rotation
        translation = delta_r @ translation + delta_t
        moved = s @ rotation.T + translation
        objective, match_idx, _ = nn_squared_error(moved, index)
        trace.append(objective)
        if prev is not None and converged(prev, objective, params.tol):
            done = True
            break
        prev = objective
    return FineResult(
        algo="icp",
        transform=RigidTransform(rotation, translation),
        iterations=len(trace),
        objective_trace=tuple(trace),
        converged=done,
        params=params,
    )


def sicp(src, dst, params: FineParams = FineParams()) -> FineResult:
    s, d = check_pair(src, dst)
    index = SpatialIndex(d)
    scale = 1.0
    rotation = RigidTransform.identity().rotation
    translation = RigidTransform.identity().translation
    moved = s
    _, match_idx, _ = nn_squared_error(moved, index)

    trace: list[float] = []
    done = False
    prev = None
    for _ in range(params.max_iter):
        delta_s, delta_r, delta_t = umeyama_similarity(moved, d[match_idx])
        scale = delta_s * scale
        rotation = delta_r @ rotation
        translation = delta_s * (delta_r @ translation) + delta_t
        moved = scale * (s @ rotation.T) + translation
        objective, match_idx, _ = nn_squared_error(moved, index)
        trace.append(objective)
        if prev is not None and converged(prev, objective, params.tol):
            done = True
            break
        prev = objective
    return FineResult(
        algo="sicp",
        transform=SimilarityTransform(scale=scale, rotation=rotation, translation=translation),
        iterations=len(trace),
        objective_trace=tuple(trace),
        converged=done,
        params=params,
    )
