"""File formats: point clouds (PLY/CSV), landmarks, transforms, volumes, metrics.

All text numerics are written with 17 significant digits so float64 values
round-trip losslessly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, InvalidParameterError, ParseError
from .geometry import Plane, PointCloud, SamplingMeta
from .landmarks import LandmarkSet
from .metrics import MetricReport
from .transforms import (
    AffineTransform,
    NonrigidTransform,
    RigidTransform,
    SimilarityTransform,
    Transform,
)
from .volume import VoxelVolume

_FMT = "%.17g"


def _fmt(value: float) -> str:
    return _FMT % float(value)


def _fmt_vec(vec) -> list[float]:
    return [float(v) for v in np.asarray(vec).ravel()]


def _fmt_mat(mat) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.asarray(mat)]


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------


def write_cloud(path, cloud: PointCloud) -> None:
    """Write a cloud as ASCII PLY (.ply) or CSV (.csv), chosen by extension."""
    path = Path(path)
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if path.suffix == ".csv":
        lines = ["x,y,z"]
        lines += [",".join(_fmt(v) for v in p) for p in pts]
        path.write_text("\n".join(lines) + "\n")
        return
    header = ["ply", "format ascii 1.0"]
    meta = cloud.meta if isinstance(cloud, PointCloud) else None
    if meta is not None:
        header.append(f"comment sampling n_planes={meta.n_planes} angular_step_deg={_fmt(meta.angular_step_deg)}")
    header += [
        f"element vertex {len(pts)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    body = [" ".join(_fmt(v) for v in p) for p in pts]
    path.write_text("\n".join(header + body) + "\n")


def _read_ply(path: Path) -> PointCloud:
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{path}:1: not a PLY file")
    count = None
    meta = None
    properties: list[str] = []
    body_start = None
    for i, line in enumerate(lines[1:], start=2):
        token = line.strip().split()
        if not token:
            continue
        if token[0] == "element" and len(token) == 3 and token[1] == "vertex":
            try:
                count = int(token[2])
            except ValueError:
                raise ParseError(f"{path}:{i}: bad vertex count {token[2]!r}") from None
        elif token[0] == "property" and len(token) == 3:
            properties.append(token[2])
        elif token[0] == "comment" and "sampling" in line:
            try:
                kv = dict(part.split("=") for part in token[2:])
                meta = SamplingMeta(int(kv["n_planes"]), float(kv["angular_step_deg"]))
            except (ValueError, KeyError):
                meta = None
        elif token[0] == "end_header":
            body_start = i
            break
    if body_start is None or count is None:
        raise ParseError(f"{path}: missing end_header or vertex element")
    for axis in ("x", "y", "z"):
        if axis not in properties:
            raise ParseError(f"{path}: vertex property {axis!r} missing")
    cols = [properties.index(a) for a in ("x", "y", "z")]
    rows = []
    for i, line in enumerate(lines[body_start : body_start + count], start=body_start + 1):
        parts = line.split()
        try:
            rows.append([float(parts[c]) for c in cols])
        except (ValueError, IndexError):
            raise ParseError(f"{path}:{i}: bad vertex row") from None
    if len(rows) != count:
        raise ParseError(f"{path}: expected {count} vertices, found {len(rows)}")
    if count == 0:
        raise EmptyInputError(f"{path}: empty point cloud")
    return PointCloud(np.asarray(rows, dtype=np.float64), meta=meta)


def _read_csv(path: Path) -> PointCloud:
    lines = path.read_text().splitlines()
    if not lines:
        raise EmptyInputError(f"{path}: empty file")
    header = [h.strip().lower() for h in lines[0].split(",")]
    for axis in ("x", "y", "z"):
        if axis not in header:
            raise ParseError(f"{path}:1: column {axis!r} missing")
    cols = [header.index(a) for a in ("x", "y", "z")]
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            rows.append([float(parts[c]) for c in cols])
        except (ValueError, IndexError):
            raise ParseError(f"{path}:{i}: bad row") from None
    if not rows:
        raise EmptyInputError(f"{path}: no points")
    return PointCloud(np.asarray(rows, dtype=np.float64))


def read_cloud(path) -> PointCloud:
    path = Path(path)
    if path.suffix == ".csv":
        return _read_csv(path)
    return _read_ply(path)


# ---------------------------------------------------------------------------
# Landmarks
# ---------------------------------------------------------------------------


def landmark_set_to_dict(lm: LandmarkSet) -> dict:
    return {
        "apex": _fmt_vec(lm.apex),
        "groove": _fmt_mat(lm.groove_points),
        "plane": {"center": _fmt_vec(lm.junction_plane.center), "normal": _fmt_vec(lm.junction_plane.normal)},
        "long_axis": [_fmt_vec(lm.long_axis[0]), _fmt_vec(lm.long_axis[1])],
        "flags": list(lm.flags),
    }


def landmark_set_from_dict(doc: dict) -> LandmarkSet:
    return LandmarkSet(
        apex=np.asarray(doc["apex"], dtype=np.float64),
        groove_points=np.asarray(doc["groove"], dtype=np.float64),
        junction_plane=Plane(
            center=np.asarray(doc["plane"]["center"], dtype=np.float64),
            normal=np.asarray(doc["plane"]["normal"], dtype=np.float64),
        ),
        long_axis=(
            np.asarray(doc["long_axis"][0], dtype=np.float64),
            np.asarray(doc["long_axis"][1], dtype=np.float64),
        ),
        flags=tuple(doc.get("flags", [])),
    )


def write_landmarks(path, lm: LandmarkSet) -> None:
    Path(path).write_text(json.dumps(landmark_set_to_dict(lm), indent=1) + "\n")


def read_landmarks(path) -> LandmarkSet:
    return landmark_set_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------


def similarity_to_dict(t: SimilarityTransform) -> dict:
    return {
        "scale": float(t.scale),
        "rotation": _fmt_mat(t.rotation),
        "translation": _fmt_vec(t.translation),
        "center": _fmt_vec(t.center),
    }


def similarity_from_dict(doc: dict) -> SimilarityTransform:
    return SimilarityTransform(
        scale=float(doc["scale"]),
        rotation=np.asarray(doc["rotation"], dtype=np.float64),
        translation=np.asarray(doc["translation"], dtype=np.float64),
        center=np.asarray(doc.get("center", [0.0, 0.0, 0.0]), dtype=np.float64),
    )


def write_similarity(path, t: SimilarityTransform) -> None:
    Path(path).write_text(json.dumps(similarity_to_dict(t), indent=1) + "\n")


def read_similarity(path) -> SimilarityTransform:
    return similarity_from_dict(json.loads(Path(path).read_text()))


def transform_to_dict(transform: Transform, offsets_file: str | None = None) -> dict:
    if isinstance(transform, RigidTransform):
        return {
            "kind": "rigid",
            "rotation": _fmt_mat(transform.rotation),
            "translation": _fmt_vec(transform.translation),
        }
    if isinstance(transform, SimilarityTransform):
        doc = similarity_to_dict(transform)
        doc["kind"] = "similarity"
        return doc
    if isinstance(transform, AffineTransform):
        return {
            "kind": "affine",
            "matrix": _fmt_mat(transform.matrix),
            "translation": _fmt_vec(transform.translation),
        }
    if isinstance(transform, NonrigidTransform):
        return {
            "kind": "nonrigid",
            "rotation": _fmt_mat(transform.rotation),
            "translation": _fmt_vec(transform.translation),
            "offsets_file": offsets_file,
        }
    raise InvalidParameterError(f"unsupported transform type {type(transform).__name__}")


def write_fine_result(path, result, source_cloud: PointCloud | None = None) -> None:
    """Serialize a FineResult; nonrigid offsets go to a binary sidecar file."""
    path = Path(path)
    offsets_file = None
    if isinstance(result.transform, NonrigidTransform):
        offsets_file = path.stem + "_offsets.bin"
        (path.parent / offsets_file).write_bytes(
            np.ascontiguousarray(result.transform.offsets, dtype="<f8").tobytes()
        )
    doc = {
        "algo": result.algo,
        "params": {
            "max_iter": result.params.max_iter,
            "tol": result.params.tol,
            "outlier_weight": result.params.outlier_weight,
            "beta": result.params.beta,
            "lam": result.params.lam,
            "clusters": result.params.clusters,
            "lattice": list(result.params.lattice),
            "bcpd_downsample": result.params.bcpd_downsample,
            "seed": result.params.seed,
        },
        "transform": transform_to_dict(result.transform, offsets_file),
        "trace": [float(v) for v in result.objective_trace],
        "iterations": result.iterations,
        "converged": bool(result.converged),
    }
    path.write_text(json.dumps(doc, indent=1) + "\n")


def read_transform(path, source_cloud: PointCloud | None = None) -> Transform:
    """Load the transform of a serialized fine result (or a bare transform doc)."""
    path = Path(path)
    doc = json.loads(path.read_text())
    if "transform" in doc:
        doc = doc["transform"]
    kind = doc.get("kind", "similarity" if "scale" in doc else None)
    if kind == "rigid":
        return RigidTransform(np.asarray(doc["rotation"]), np.asarray(doc["translation"]))
    if kind == "similarity":
        return similarity_from_dict(doc)
    if kind == "affine":
        return AffineTransform(np.asarray(doc["matrix"]), np.asarray(doc["translation"]))
    if kind == "nonrigid":
        if source_cloud is None:
            raise InvalidParameterError("nonrigid transform needs the source cloud to pair offsets")
        raw = (path.parent / doc["offsets_file"]).read_bytes()
        offsets = np.frombuffer(raw, dtype="<f8").reshape(-1, 3)
        if offsets.shape[0] != len(source_cloud):
            raise ParseError(f"{doc['offsets_file']}: {offsets.shape[0]} offsets for {len(source_cloud)} points")
        return NonrigidTransform(
            np.asarray(doc["rotation"]), np.asarray(doc["translation"]), source_cloud.points, offsets
        )
    raise ParseError(f"{path}: unknown transform kind {kind!r}")


# ---------------------------------------------------------------------------
# Volumes
# ---------------------------------------------------------------------------


def write_volume(path, vol: VoxelVolume) -> None:
    """Write <name>.json header plus <name>.raw little-endian float32 payload."""
    path = Path(path)
    base = path.with_suffix("")
    header = {
        "dims": list(vol.dims),
        "spacing_mm": _fmt_vec(vol.spacing),
        "origin_mm": _fmt_vec(vol.origin),
        "dtype": "f32",
        "order": "x-fastest",
    }
    base.with_suffix(".json").write_text(json.dumps(header, indent=1) + "\n")
    payload = np.ravel(vol.data, order="F").astype("<f4")
    base.with_suffix(".raw").write_bytes(payload.tobytes())


def read_volume(path) -> VoxelVolume:
    path = Path(path)
    base = path.with_suffix("")
    header = json.loads(base.with_suffix(".json").read_text())
    dims = tuple(int(d) for d in header["dims"])
    raw = base.with_suffix(".raw").read_bytes()
    expected = dims[0] * dims[1] * dims[2] * 4
    if len(raw) != expected:
        raise ParseError(f"{base.with_suffix('.raw')}: payload is {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(dims, order="F")
    return VoxelVolume(
        origin=np.asarray(header["origin_mm"], dtype=np.float64),
        spacing=np.asarray(header["spacing_mm"], dtype=np.float64),
        dims=dims,
        data=data,
    )


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def write_metrics(path, report: MetricReport) -> None:
    path = Path(path)
    path.with_suffix(".json").write_text(json.dumps(report.as_dict(), indent=1) + "\n")
    path.with_suffix(".csv").write_text("mpe,ae,mge,gce\n" + report.csv_row() + "\n")
