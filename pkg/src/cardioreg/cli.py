"""Command-line pipeline driver.

Subcommands mirror the pipeline stages: phantom, landmarks, coarse, fine,
metrics, fuse, and pipeline (everything end to end, with a per-algorithm
summary table and report figures). Exit codes: 0 success, 1 usage error,
2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io, report
from .coarse import coarse_register
from .errors import CardioregError, UnknownAlgorithmError
from .fine import ALGORITHMS, FineParams, run_fine
from .geometry import PointCloud
from .landmarks import (
    CtaLandmarkConfig,
    LandmarkSet,
    SpectLandmarkConfig,
    cta_landmarks,
    spect_landmarks,
    transform_landmark_set,
)
from .metrics import MetricReport, apex_angle, gce, mge, mpe
from .phantom import PhantomSpec, generate
from .transforms import (
    AffineTransform,
    NonrigidTransform,
    RigidTransform,
    SimilarityTransform,
    rotation_about,
)
from .volume import DeformationField, fuse, resample

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are 1 here
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _vec(text: str) -> np.ndarray:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated values")
    return np.asarray(parts)


def _phantom_spec(args, seed: int) -> PhantomSpec:
    transform = SimilarityTransform(
        scale=args.scale,
        rotation=rotation_about(args.rotation_axis, args.rotation_deg),
        translation=np.asarray(args.translation, dtype=np.float64),
    )
    return PhantomSpec(
        truth_transform=transform,
        noise_sigma=args.noise,
        bend_amplitude=args.bend_amplitude,
        bend_wavelength=args.bend_wavelength,
        angular_step_deg=args.angular_step,
        points_per_plane=args.points_per_plane,
        fixed_surface_points=args.fixed_points,
        seed=seed,
    )


def _add_phantom_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rotation-deg", type=float, default=20.0)
    p.add_argument("--rotation-axis", type=_vec, default=np.array([0.3, 1.0, 0.2]))
    p.add_argument("--translation", type=_vec, default=np.array([10.0, -6.0, 4.0]))
    p.add_argument("--scale", type=float, default=1.1)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--bend-amplitude", type=float, default=0.0)
    p.add_argument("--bend-wavelength", type=float, default=160.0)
    p.add_argument("--angular-step", type=float, default=9.0)
    p.add_argument("--points-per-plane", type=int, default=60)
    p.add_argument("--fixed-points", type=int, default=6000)


def _add_fine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--outlier-weight", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=15.0)
    p.add_argument("--lam", type=float, default=2.0)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--lattice", type=int, nargs=3, default=(6, 6, 6))
    p.add_argument("--bcpd-downsample", type=int, default=2000)


def _fine_params(args, seed: int) -> FineParams:
    return FineParams(
        max_iter=args.max_iter,
        tol=args.tol,
        outlier_weight=args.outlier_weight,
        beta=args.beta,
        lam=args.lam,
        clusters=args.clusters,
        lattice=tuple(args.lattice),
        bcpd_downsample=args.bcpd_downsample,
        seed=seed,
    )


def _rotation_part(transform) -> np.ndarray:
    if isinstance(transform, (RigidTransform, SimilarityTransform, NonrigidTransform)):
        return transform.rotation
    if isinstance(transform, AffineTransform):
        u, _, vt = np.linalg.svd(transform.matrix)
        fix = np.eye(3)
        if np.linalg.det(u) * np.linalg.det(vt) < 0:
            fix[2, 2] = -1.0
        return u @ fix @ vt
    return np.eye(3)


def _write_phantom(out: Path, data) -> None:
    io.write_cloud(out / "fixed_lv.ply", data.lv_cloud)
    io.write_cloud(out / "fixed_rv.ply", data.rv_cloud)
    io.write_cloud(out / "moving.ply", data.functional_cloud)
    io.write_cloud(out / "moving.csv", data.functional_cloud)
    io.write_landmarks(out / "truth_landmarks_fixed.json", data.truth_landmarks_fixed)
    io.write_landmarks(out / "truth_landmarks_moving.json", data.truth_landmarks_moving)
    io.write_volume(out / "anatomical.json", data.lv_volume)
    io.write_volume(out / "functional.json", data.functional_volume)
    gt = data.ground_truth
    doc = {
        "transform": io.similarity_to_dict(gt.transform),
        "bend_amplitude": gt.bend_amplitude,
        "bend_wavelength": gt.bend_wavelength,
        "apex": [float(v) for v in gt.apex],
    }
    (out / "ground_truth.json").write_text(json.dumps(doc, indent=1) + "\n")


def _cmd_phantom(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = generate(_phantom_spec(args, args.seed))
    _write_phantom(out, data)
    print(f"phantom written to {out}")
    return 0


def _cmd_landmarks(args) -> int:
    if args.mode == "cta":
        if not args.lv or not args.rv:
            raise UnknownAlgorithmError("cta mode needs --lv and --rv")  # handled as usage below
        lm = cta_landmarks(io.read_cloud(args.lv), io.read_cloud(args.rv), CtaLandmarkConfig())
    else:
        if not args.cloud:
            raise UnknownAlgorithmError("spect mode needs --cloud")
        lm = spect_landmarks(io.read_cloud(args.cloud), SpectLandmarkConfig(seed=args.seed))
    io.write_landmarks(args.out, lm)
    print(f"landmarks written to {args.out}")
    return 0


def _cmd_coarse(args) -> int:
    moving = io.read_cloud(args.moving)
    fixed = io.read_cloud(args.fixed)
    lm_moving = io.read_landmarks(args.moving_landmarks)
    lm_fixed = io.read_landmarks(args.fixed_landmarks)
    transform, moved = coarse_register(moving, fixed, lm_moving, lm_fixed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_similarity(out / "coarse_transform.json", transform)
    io.write_cloud(out / "moving_coarse.ply", moved)
    print(f"coarse transform written to {out}")
    return 0


def _cmd_fine(args) -> int:
    if args.algo not in ALGORITHMS:
        print(f"error: unknown algorithm {args.algo!r}; valid: {', '.join(sorted(ALGORITHMS))}", file=sys.stderr)
        return USAGE_ERROR
    moving = io.read_cloud(args.moving)
    fixed = io.read_cloud(args.fixed)
    result = run_fine(args.algo, moving, fixed, _fine_params(args, args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_fine_result(out / f"fine_{args.algo}.json", result)
    io.write_cloud(out / f"registered_{args.algo}.ply", moving.with_points(result.registered(moving)))
    print(f"fine result written to {out}")
    return 0


def _cmd_metrics(args) -> int:
    fixed = io.read_cloud(args.fixed_cloud)
    registered = io.read_cloud(args.registered_cloud)
    lm_fixed = io.read_landmarks(args.fixed_landmarks)
    lm_moved = io.read_landmarks(args.moved_landmarks)
    report_vals = MetricReport(
        mpe_mm=mpe(fixed, registered),
        ae_deg=apex_angle(lm_fixed.apex, lm_moved.apex, fixed.centroid),
        mge_mm=mge(lm_fixed.groove_points, lm_moved.groove_points),
        gce_mm=gce(lm_fixed.junction_plane, lm_moved.junction_plane),
    )
    io.write_metrics(Path(args.out), report_vals)
    print(report_vals.csv_row())
    return 0


def _cmd_fuse(args) -> int:
    anatomical = io.read_volume(args.anatomical)
    functional = io.read_volume(args.functional)
    source = io.read_cloud(args.source_cloud) if args.source_cloud else None
    transform = io.read_transform(args.result, source)
    field = None
    if isinstance(transform, NonrigidTransform):
        field = DeformationField(transform.apply_to_source(), transform.offsets)
    resampled = resample(functional, anatomical, transform, field)
    fused = fuse(anatomical, resampled)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_volume(out / "functional_resampled.json", fused.functional)
    io.write_volume(out / "fused_preview.json", fused.preview)
    report.save_volume_panel(out / "fusion.png", fused.anatomical, fused.preview)
    print(f"fused volumes written to {out}")
    return 0


def _full_point_map(coarse_transform, fine_transform):
    def mapper(points):
        staged = coarse_transform.apply(points) if coarse_transform is not None else np.asarray(points, float)
        return fine_transform.apply(staged)

    return mapper


def _cmd_pipeline(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    algos = sorted(ALGORITHMS) if "all" in args.algo else list(dict.fromkeys(args.algo))
    for algo in algos:
        if algo not in ALGORITHMS:
            print(f"error: unknown algorithm {algo!r}; valid: {', '.join(sorted(ALGORITHMS))}", file=sys.stderr)
            return USAGE_ERROR

    inputs = out / "inputs"
    inputs.mkdir(exist_ok=True)
    data = generate(_phantom_spec(args, args.seed))
    _write_phantom(inputs, data)
    fixed_cloud = data.lv_cloud
    moving_cloud = data.functional_cloud

    lm_dir = out / "landmarks"
    lm_dir.mkdir(exist_ok=True)
    lm_fixed = cta_landmarks(fixed_cloud, data.rv_cloud, CtaLandmarkConfig())
    lm_moving = spect_landmarks(moving_cloud, SpectLandmarkConfig(seed=args.seed))
    io.write_landmarks(lm_dir / "cta.json", lm_fixed)
    io.write_landmarks(lm_dir / "spect.json", lm_moving)

    coarse_dir = out / "coarse"
    coarse_dir.mkdir(exist_ok=True)
    if args.skip_coarse:
        coarse_transform = None
        moved = moving_cloud
        lm_staged = lm_moving
    else:
        coarse_transform, moved = coarse_register(moving_cloud, fixed_cloud, lm_moving, lm_fixed)
        io.write_similarity(coarse_dir / "coarse_transform.json", coarse_transform)
        lm_staged = transform_landmark_set(lm_moving, coarse_transform.apply, coarse_transform.rotation)
    io.write_cloud(coarse_dir / "moving_coarse.ply", moved)

    fine_dir = out / "fine"
    metrics_dir = out / "metrics"
    figures_dir = out / "figures"
    fused_dir = out / "fused"
    for d in (fine_dir, metrics_dir, figures_dir, fused_dir):
        d.mkdir(exist_ok=True)

    params = _fine_params(args, args.seed)
    summary_rows = []
    traces = {}
    best = None
    for algo in algos:
        result = run_fine(algo, moved, fixed_cloud, params)
        io.write_fine_result(fine_dir / f"{algo}.json", result)
        registered = result.registered(moved.points)
        io.write_cloud(fine_dir / f"registered_{algo}.ply", moving_cloud.with_points(registered))
        traces[algo] = result.objective_trace

        rotation = _rotation_part(result.transform) @ (
            coarse_transform.rotation if coarse_transform is not None else np.eye(3)
        )
        lm_moved = transform_landmark_set(
            lm_moving, _full_point_map(coarse_transform, result.transform), rotation
        )
        io.write_landmarks(metrics_dir / f"landmarks_{algo}.json", lm_moved)
        vals = MetricReport(
            mpe_mm=mpe(fixed_cloud, registered),
            ae_deg=apex_angle(lm_fixed.apex, lm_moved.apex, fixed_cloud.centroid),
            mge_mm=mge(lm_fixed.groove_points, lm_moved.groove_points),
            gce_mm=gce(lm_fixed.junction_plane, lm_moved.junction_plane),
        )
        io.write_metrics(metrics_dir / algo, vals)
        summary_rows.append((algo, vals))
        report.save_overlay(figures_dir / f"overlay_{algo}.png", fixed_cloud.points, moving_cloud.points, registered, algo)
        if best is None or vals.mpe_mm < best[1].mpe_mm:
            best = (algo, vals, result)

    with (out / "summary.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algo", "mpe_mm", "ae_deg", "mge_mm", "gce_mm"])
        for algo, vals in summary_rows:
            writer.writerow([algo, *vals.csv_row().split(",")])

    report.save_metric_bars(figures_dir / "metrics.png", [(a, v.as_dict()) for a, v in summary_rows])
    report.save_traces(figures_dir / "traces.png", traces)

    # voxel fusion with the best algorithm's full map
    algo, _, result = best
    a_lin, b_lin = (np.eye(3), np.zeros(3))
    if coarse_transform is not None:
        a_lin, b_lin = coarse_transform.linear_offset()
    if isinstance(result.transform, NonrigidTransform):
        base = RigidTransform(result.transform.rotation, result.transform.translation)
        a_fine, b_fine = base.linear_offset()
        field = DeformationField(result.transform.apply_to_source(), result.transform.offsets)
    else:
        a_fine, b_fine = result.transform.linear_offset()
        field = None
    total = AffineTransform(a_fine @ a_lin, a_fine @ b_lin + b_fine)
    resampled = resample(data.functional_volume, data.lv_volume, total, field)
    fused = fuse(data.lv_volume, resampled)
    io.write_volume(fused_dir / f"{algo}_resampled.json", fused.functional)
    io.write_volume(fused_dir / f"{algo}_preview.json", fused.preview)
    report.save_volume_panel(figures_dir / f"fusion_{algo}.png", fused.anatomical, fused.preview)

    for algo, vals in summary_rows:
        print(f"{algo}: {vals.csv_row()}")
    print(f"pipeline outputs in {out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="cardioreg", description="Coarse-to-fine cardiac point-cloud registration and fusion")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_phantom_args(p)
    p.set_defaults(fn=_cmd_phantom)

    p = sub.add_parser("landmarks", help="extract anatomical landmarks")
    p.add_argument("--mode", choices=("cta", "spect"), required=True)
    p.add_argument("--lv")
    p.add_argument("--rv")
    p.add_argument("--cloud")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_landmarks)

    p = sub.add_parser("coarse", help="scale and landmark-align the moving cloud")
    p.add_argument("--moving", required=True)
    p.add_argument("--fixed", required=True)
    p.add_argument("--moving-landmarks", required=True)
    p.add_argument("--fixed-landmarks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_coarse)

    p = sub.add_parser("fine", help="run one fine registration algorithm")
    p.add_argument("--algo", required=True)
    p.add_argument("--moving", required=True)
    p.add_argument("--fixed", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_fine_args(p)
    p.set_defaults(fn=_cmd_fine)

    p = sub.add_parser("metrics", help="registration quality metrics")
    p.add_argument("--fixed-cloud", required=True)
    p.add_argument("--registered-cloud", required=True)
    p.add_argument("--fixed-landmarks", required=True)
    p.add_argument("--moved-landmarks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_metrics)

    p = sub.add_parser("fuse", help="resample and fuse volumes with a fine result")
    p.add_argument("--anatomical", required=True)
    p.add_argument("--functional", required=True)
    p.add_argument("--result", required=True)
    p.add_argument("--source-cloud")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_fuse)

    p = sub.add_parser("pipeline", help="run every stage on a seeded phantom")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algo", nargs="+", default=["all"])
    p.add_argument("--skip-coarse", action="store_true")
    p.add_argument("--config", help="JSON file with default values for any flag")
    _add_phantom_args(p)
    _add_fine_args(p)
    p.set_defaults(fn=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    # a config file supplies defaults; explicit flags still win
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        try:
            defaults = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {cfg_path}: {exc}", file=sys.stderr)
            return DATA_ERROR
        for sub_action in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
            sub_action.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    except UnknownAlgorithmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except CardioregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
