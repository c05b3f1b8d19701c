"""Fine registration algorithms behind a single dispatch interface."""

from __future__ import annotations

import numpy as np

from ..errors import UnknownAlgorithmError
from ..geometry import SpatialIndex, as_points
from ..transforms import NonrigidTransform
from .base import FineParams, FineResult
from .clureg import clureg
from .cpd import bcpd, cpd_affine, cpd_nll, cpd_rigid
from .ffd import BsplineLattice, ffd
from .icp import icp, sicp

ALGORITHMS = {
    "icp": icp,
    "sicp": sicp,
    "cpd_rigid": cpd_rigid,
    "cpd_affine": cpd_affine,
    "clureg": clureg,
    "ffd": ffd,
    "bcpd": bcpd,
}


def run_fine(algo: str, src, dst, params: FineParams = FineParams()) -> FineResult:
    """Dispatch one fine registration algorithm by name."""
    try:
        fn = ALGORITHMS[algo]
    except KeyError:
        valid = ", ".join(sorted(ALGORITHMS))
        raise UnknownAlgorithmError(f"unknown algorithm {algo!r}; valid: {valid}") from None
    return fn(src, dst, params)


def recompute_objective(result: FineResult, src, dst) -> float:
    """Recompute the final objective value from the returned transform.

    For the alignment-error family this is the sum of squared nearest-neighbor
    distances of the registered cloud; for the CPD family it is the mixture
    negative log-likelihood at the stored variance (plus the stored offset
    prior penalty for the nonrigid variant).
    """
    registered = result.registered(src)
    if result.algo in ("cpd_rigid", "cpd_affine", "bcpd"):
        moved = registered
        if result.algo == "bcpd" and isinstance(result.transform, NonrigidTransform):
            subset = result.extras.get("subset")
            if subset is not None:
                # the EM ran on a subsample; its exact offsets are kept so
                # the trace value stays reproducible after interpolation
                base = result.transform
                moved = (
                    base.source_points[subset] @ base.rotation.T
                    + base.translation
                    + result.extras["subset_offsets"]
                )
        value = cpd_nll(as_points(dst), moved, result.extras["sigma2"], result.params.outlier_weight)
        return value + result.extras.get("penalty", 0.0)
    _, dist = SpatialIndex(as_points(dst)).nearest_many(registered)
    return float((dist**2).sum()) + result.extras.get("regularizer", 0.0)


__all__ = [
    "ALGORITHMS",
    "BsplineLattice",
    "FineParams",
    "FineResult",
    "bcpd",
    "clureg",
    "cpd_affine",
    "cpd_rigid",
    "ffd",
    "icp",
    "recompute_objective",
    "run_fine",
    "sicp",
]
