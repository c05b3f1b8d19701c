"""Coherent point drift family: rigid, affine, and the Bayesian nonrigid form.

All three share one EM scaffold: each transformed source point is a Gaussian
mixture component with shared variance sigma^2 plus a uniform outlier slot of
weight w. The E-step computes soft correspondences, the M-step refits the
transform family and the variance, and the trace records the negative
log-likelihood (plus the offset prior penalty for the nonrigid variant), which
EM makes non-increasing.
"""

from __future__ import annotations

import numpy as np

from ..errors import SingularSystemError
from ..geometry import SpatialIndex
from ..transforms import AffineTransform, NonrigidTransform, RigidTransform
from .base import FineParams, FineResult, check_pair, converged, weighted_rigid

_SIGMA_FLOOR = 1e-12


def _initial_sigma2(x: np.ndarray, y: np.ndarray) -> float:
    """Per-coordinate variance seeded from actual nearest-neighbor residuals.

    The mean-squared-pairwise-distance seed of the original formulation makes
    the affine variant collapse into the outlier slot on already-aligned
    clouds, so the mixture starts at the scale of the current misalignment
    instead.
    """
    _, dist = SpatialIndex(x).nearest_many(y)
    return max(float((dist**2).mean()) / 3.0, 1e-9)


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared distances (len(a), len(b)) via the Gram expansion."""
    d2 = (a**2).sum(axis=1)[:, None] + (b**2).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def _estep(x: np.ndarray, moved: np.ndarray, sigma2: float, w: float) -> tuple[np.ndarray, float]:
    """Soft correspondence matrix P (M, N) and the negative log-likelihood."""
    n, m = x.shape[0], moved.shape[0]
    diff2 = _sq_dists(moved, x)
    p = np.exp(-diff2 / (2.0 * sigma2))
    kernel_sum = p.sum(axis=0)
    c = (2.0 * np.pi * sigma2) ** 1.5 * (w / (1.0 - w)) * (m / n) if w > 0 else 0.0
    denom = np.maximum(kernel_sum + c, 1e-300)
    p /= denom
    nll = -float(np.log(denom).sum()) - n * float(np.log((1.0 - w) / (m * (2.0 * np.pi * sigma2) ** 1.5)))
    return p, nll


def cpd_nll(x, moved, sigma2: float, w: float) -> float:
    """Negative log-likelihood of the CPD mixture for external verification."""
    _, nll = _estep(np.asarray(x, dtype=np.float64), np.asarray(moved, dtype=np.float64), sigma2, w)
    return nll


def _residual_sigma2(x, p, p1, pt1, moved) -> float:
    """Exact M-step variance: weighted mean squared residual (never negative)."""
    n_p = float(p1.sum())
    sq = float((pt1 * (x**2).sum(axis=1)).sum()) - 2.0 * float((moved * (p @ x)).sum()) + float(
        (p1 * (moved**2).sum(axis=1)).sum()
    )
    return max(sq / (3.0 * n_p), _SIGMA_FLOOR)


def _em_loop(x, y, params, mstep, moved_of):
    """Generic EM driver; returns (state, trace, converged, sigma2, sigma_trace)."""
    sigma2 = _initial_sigma2(x, y)
    state = None
    moved = y
    p, nll = _estep(x, moved, sigma2, params.outlier_weight)
    trace: list[float] = []
    sigma_trace: list[float] = []
    done = False
    for _ in range(params.max_iter):
        if float(p.sum()) < 1e-12:
            break  # all mass went to the outlier slot; keep the last state
        state = mstep(p)
        moved = moved_of(state)
        sigma2 = _residual_sigma2(x, p, p.sum(axis=1), p.sum(axis=0), moved)
        sigma_trace.append(sigma2)
        p, new_nll = _estep(x, moved, sigma2, params.outlier_weight)
        trace.append(new_nll)
        if converged(nll, new_nll, params.tol):
            done = True
            break
        nll = new_nll
    return state, trace, done, sigma2, sigma_trace


def cpd_rigid(src, dst, params: FineParams = FineParams()) -> FineResult:
    y, x = check_pair(src, dst)  # y: source components, x: observed targets

    def mstep(p):
        p1 = p.sum(axis=1)
        pt1 = p.sum(axis=0)
        n_p = float(p1.sum())
        mu_x = (x.T @ pt1) / n_p
        mu_y = (y.T @ p1) / n_p
        xh = x - mu_x
        yh = y - mu_y
        a = xh.T @ p.T @ yh
        u, _, vt = np.linalg.svd(a)
        fix = np.eye(3)
        if np.linalg.det(u) * np.linalg.det(vt) < 0:
            fix[2, 2] = -1.0
        rotation = u @ fix @ vt
        translation = mu_x - rotation @ mu_y
        return rotation, translation

    state, trace, done, sigma2, sigma_trace = _em_loop(x, y, params, mstep, lambda st: y @ st[0].T + st[1])
    rotation, translation = state
    return FineResult(
        algo="cpd_rigid",
        transform=RigidTransform(rotation, translation),
        iterations=len(trace),
        objective_trace=tuple(trace),
        converged=done,
        params=params,
        extras={"sigma2": sigma2, "sigma2_trace": tuple(sigma_trace)},
    )


def cpd_affine(src, dst, params: FineParams = FineParams()) -> FineResult:
    y, x = check_pair(src, dst)

    def mstep(p):
        p1 = p.sum(axis=1)
        pt1 = p.sum(axis=0)
        n_p = float(p1.sum())
        mu_x = (x.T @ pt1) / n_p
        mu_y = (y.T @ p1) / n_p
        xh = x - mu_x
        yh = y - mu_y
        a = xh.T @ p.T @ yh
        gram = yh.T @ (yh * p1[:, None])
        if abs(np.linalg.det(gram)) < 1e-12:
            raise SingularSystemError("weighted normal equations are rank deficient")
        matrix = a @ np.linalg.inv(gram)
        translation = mu_x - matrix @ mu_y
        return matrix, translation

    state, trace, done, sigma2, sigma_trace = _em_loop(x, y, params, mstep, lambda st: y @ st[0].T + st[1])
    matrix, translation = state
    return FineResult(
        algo="cpd_affine",
        transform=AffineTransform(matrix, translation),
        iterations=len(trace),
        objective_trace=tuple(trace),
        converged=done,
        params=params,
        extras={"sigma2": sigma2, "sigma2_trace": tuple(sigma_trace)},
    )


def _gp_kernel(a: np.ndarray, b: np.ndarray, beta: float) -> np.ndarray:
    return np.exp(-_sq_dists(a, b) / (2.0 * beta * beta))


def bcpd(src, dst, params: FineParams = FineParams()) -> FineResult:
    """Rigid motion plus a Gaussian-process-regularized per-point offset field.

    The offset prior uses the kernel G(p_i, p_j) = exp(-|p_i - p_j|^2 /
    (2 beta^2)) with weight lam; large source clouds are handled by running
    the EM on a seeded uniform subsample and extending the offsets to all
    points by kernel-weighted interpolation with the same G.
    """
    y_full, x = check_pair(src, dst)
    rng = np.random.default_rng(params.seed)
    if y_full.shape[0] > params.bcpd_downsample:
        chosen = np.sort(rng.choice(y_full.shape[0], size=params.bcpd_downsample, replace=False))
        y = y_full[chosen]
    else:
        chosen = None
        y = y_full

    m = y.shape[0]
    g = _gp_kernel(y, y, params.beta)
    rotation = np.eye(3)
    translation = np.zeros(3)
    delta = np.zeros_like(y)
    penalty = 0.0
    sigma2 = _initial_sigma2(x, y)

    moved = y
    p, nll = _estep(x, moved, sigma2, params.outlier_weight)
    objective = nll
    trace: list[float] = []
    done = False
    for _ in range(params.max_iter):
        p1 = np.maximum(p.sum(axis=1), 1e-300)
        n_p = float(p1.sum())
        xhat = (p @ x) / p1[:, None]

        rotation, translation = weighted_rigid(y, xhat - delta, p1)
        residual = xhat - (y @ rotation.T + translation)
        system = g * p1[:, None] + params.lam * sigma2 * np.eye(m)
        z = np.linalg.solve(system, residual * p1[:, None])
        delta = g @ z
        penalty = 0.5 * params.lam * float((z * delta).sum())

        moved = y @ rotation.T + translation + delta
        pt1 = p.sum(axis=0)
        sq = float((pt1 * (x**2).sum(axis=1)).sum()) - 2.0 * float((moved * (p @ x)).sum()) + float(
            (p1 * (moved**2).sum(axis=1)).sum()
        )
        sigma2 = max(sq / (3.0 * n_p), _SIGMA_FLOOR)

        p, nll = _estep(x, moved, sigma2, params.outlier_weight)
        new_objective = nll + penalty
        trace.append(new_objective)
        if converged(objective, new_objective, params.tol):
            done = True
            break
        objective = new_objective

    extras = {"sigma2": sigma2, "penalty": penalty}
    if chosen is not None:
        # Gaussian-process extension with the same kernel: exact at the
        # subsample, smooth in between (a jitter term keeps G invertible).
        cross = _gp_kernel(y_full, y, params.beta)
        delta_full = cross @ np.linalg.solve(g + 1e-8 * np.eye(m), delta)
        extras["subset"] = chosen
        extras["subset_offsets"] = delta
    else:
        delta_full = delta
    transform = NonrigidTransform(rotation, translation, source_points=y_full, offsets=delta_full)
    return FineResult(
        algo="bcpd",
        transform=transform,
        iterations=len(trace),
        objective_trace=tuple(trace),
        converged=done,
        params=params,
        extras=extras,
    )
