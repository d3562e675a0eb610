"""Command-line interface: each pipeline stage as a composable subcommand."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io as aio
from .averaging import cross_subject_average_run
from .divergence import Measure, divergence_matrix
from .hcluster import cut, l_method, ward_cluster
from .kinematics import ArmGeometry, end_effector_trace, trace_motion
from .model import (
    Dataset,
    Direction,
    Handedness,
    Segment,
    SegmentMeta,
    model_by_name,
    validate_dataset,
)
from .pipeline import (
    PipelineConfig,
    PipelineError,
    _build_clusters,
    compare_methods,
    prepare_dataset,
    run_pipeline,
    synth_dataset,
    write_compare_csv,
)
from .synth import SynthSpec


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "model",
            "measure",
            "num_clusters",
            "fpca_threshold",
            "seed",
            "workers",
            "knee_min_points",
            "max_compare_clusters",
        )
    }
    if getattr(args, "z_normalize", False):
        overrides["z_normalize"] = True
    if getattr(args, "no_square_ward", False):
        overrides["square_ward"] = False
    if getattr(args, "degrees", False):
        overrides["degrees"] = True
    if getattr(args, "allow_wrap_jumps", False):
        overrides["allow_wrap_jumps"] = True
    config_path = getattr(args, "config", None)
    if config_path:
        return PipelineConfig.from_file(config_path, overrides)
    kwargs = {k: v for k, v in overrides.items() if v is not None}
    return PipelineConfig(**kwargs)


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        model=model_by_name(args.model),
        num_clusters=args.clusters,
        motions_per_cluster=args.motions_per_cluster,
        subjects=args.subjects,
        repetitions=args.repetitions,
        noise_sd=args.noise_sd,
        duration_jitter=args.duration_jitter,
        base_frames=args.base_frames,
        reverse_prob=args.reverse_prob,
        seed=args.seed,
    )
    manifest = synth_dataset(spec, args.out)
    print(manifest)
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    dataset = aio.read_dataset(
        args.manifest, degrees=args.degrees or None, allow_wrap_jumps=args.allow_wrap_jumps
    )
    violations = validate_dataset(dataset)
    for v in violations:
        print(f"{v.segment_id or '<dataset>'}: {v.rule}: {v.message}")
    if violations:
        print(f"{len(violations)} violation(s) in {len(dataset)} segment(s)")
        return 1
    print(f"ok: {len(dataset)} segment(s), model {dataset.model.name}")
    return 0


def _cmd_average(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    dataset = prepare_dataset(config, args.manifest)
    if args.task is not None:
        motions = [(args.task, args.submotion)]
    else:
        motions = sorted({(s.meta.task_code, s.meta.submotion_index) for s in dataset.segments})
    out = Path(args.out)
    segments = []
    for task, submotion in motions:
        run, _ = cross_subject_average_run(dataset, task, submotion)
        meta = SegmentMeta(task, submotion, "avg", 1, Direction.FORWARD, Handedness.RIGHT)
        segments.append(Segment(run.consensus, meta))
    manifest = aio.write_dataset(out, Dataset(tuple(segments), dataset.model))
    print(manifest)
    return 0


def _cmd_divergence(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    dataset = prepare_dataset(config, args.manifest)
    matrix = divergence_matrix(
        dataset,
        Measure(config.measure),
        workers=config.workers,
        z_normalize=config.z_normalize,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    aio.write_divergence_matrix(out, matrix, extra={"dataset_hash": aio.dataset_content_hash(dataset)})
    print(out)
    return 0


def _cmd_cluster(args: argparse.Namespace) -> int:
    matrix = aio.read_divergence_matrix(args.matrix)
    dendrogram = ward_cluster(matrix, square_inputs=not args.no_square_ward)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    aio.write_dendrogram(out, dendrogram)
    newick = out.with_suffix(".newick")
    newick.write_text(aio.dendrogram_to_newick(dendrogram) + "\n", encoding="utf-8")
    print(out)
    print(newick)
    return 0


def _cmd_knee(args: argparse.Namespace) -> int:
    dendrogram = aio.read_dendrogram(args.dendrogram)
    knee = l_method(dendrogram, args.knee_min_points)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    aio.write_knee(out, knee)
    print(f"{out} (num_clusters={knee.num_clusters})")
    return 0


def _cmd_cut(args: argparse.Namespace) -> int:
    dendrogram = aio.read_dendrogram(args.dendrogram)
    assignment = cut(dendrogram, args.k)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    aio.write_assignment(out, assignment)
    print(out)
    return 0


def _cmd_fpca(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    dataset = prepare_dataset(config, args.manifest)
    averages = aio.read_dataset(args.averages)
    assignment = aio.read_assignment(args.assignment)
    _build_clusters(dataset, assignment, averages, Path(args.out), config.fpca_threshold)
    print(args.out)
    return 0


def _cmd_trace(args: argparse.Namespace) -> int:
    model = model_by_name("Full7")
    trajectory = aio.read_segment_csv(args.segment, args.frame_rate, model)
    geometry = ArmGeometry(args.humerus, args.forearm, args.hand)
    poses = trace_motion(trajectory, geometry)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.segment).stem
    aio.write_pose_trace(out / f"{stem}_pose.json", poses, geometry)
    aio.write_end_effector_csv(out / f"{stem}_end_effector.csv", end_effector_trace(poses))
    print(out)
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    dataset = prepare_dataset(config, args.manifest)
    rows = compare_methods(config, dataset)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_compare_csv(out, rows)
    print(out)
    return 0


def _cmd_pipeline(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = Path(args.out)
    if args.synth:
        manifest = synth_dataset(SynthSpec(seed=config.seed), out / "dataset")
    elif args.manifest is not None:
        manifest = Path(args.manifest)
    else:
        print("pipeline needs a dataset manifest or --synth", file=sys.stderr)
        return 2
    paths = run_pipeline(config, manifest, out)
    print(paths["pipeline"])
    return 0


def _add_config_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file; flags override its values")
    p.add_argument("--model", choices=["Full7", "ElbowWrist4", "WristOnly3", "ShoulderElbow4"])
    p.add_argument("--measure", choices=[m.value for m in Measure])
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--z-normalize", action="store_true")
    p.add_argument("--no-square-ward", action="store_true")
    p.add_argument("--degrees", action="store_true", help="ingest CSV angles as degrees")
    p.add_argument("--allow-wrap-jumps", action="store_true")
    p.add_argument("--knee-min-points", type=int)
    p.add_argument("--num-clusters", type=int)
    p.add_argument("--fpca-threshold", type=float)
    p.add_argument("--max-compare-clusters", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="armclust",
        description="Cluster multivariate joint-angle motion trajectories and "
        "analyze within-cluster variability.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted clusters")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--model", default="Full7")
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--motions-per-cluster", type=int, default=4)
    p.add_argument("--subjects", type=int, default=12)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--noise-sd", type=float, default=0.02)
    p.add_argument("--duration-jitter", type=float, default=0.15)
    p.add_argument("--base-frames", type=int, default=64)
    p.add_argument("--reverse-prob", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="check dataset invariants")
    p.add_argument("manifest", type=Path)
    p.add_argument("--degrees", action="store_true")
    p.add_argument("--allow-wrap-jumps", action="store_true")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("average", help="cross-subject averages per motion type")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--task", help="limit to one task code")
    p.add_argument("--submotion", type=int, default=1)
    _add_config_options(p)
    p.set_defaults(func=_cmd_average)

    p = sub.add_parser("divergence", help="pairwise divergence matrix")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_config_options(p)
    p.set_defaults(func=_cmd_divergence)

    p = sub.add_parser("cluster", help="Ward dendrogram from a divergence matrix")
    p.add_argument("matrix", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--no-square-ward", action="store_true")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("knee", help="select the cluster count with the L method")
    p.add_argument("dendrogram", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--knee-min-points", type=int, default=20)
    p.set_defaults(func=_cmd_knee)

    p = sub.add_parser("cut", help="flat clustering at a chosen cluster count")
    p.add_argument("dendrogram", type=Path)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_cut)

    p = sub.add_parser("fpca", help="per-cluster averages, alignment, and fPCA")
    p.add_argument("manifest", type=Path)
    p.add_argument("averages", type=Path, help="averages dataset manifest")
    p.add_argument("assignment", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_config_options(p)
    p.set_defaults(func=_cmd_fpca)

    p = sub.add_parser("trace", help="forward-kinematics trace of a Full7 segment CSV")
    p.add_argument("segment", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--frame-rate", type=float, default=100.0)
    p.add_argument("--humerus", type=float, default=0.31)
    p.add_argument("--forearm", type=float, default=0.26)
    p.add_argument("--hand", type=float, default=0.08)
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("compare", help="quality-vs-k table for the three methods")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_config_options(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("pipeline", help="run every stage into an artifact directory")
    p.add_argument("manifest", type=Path, nargs="?")
    p.add_argument("--synth", action="store_true", help="generate the default synthetic corpus")
    p.add_argument("--out", type=Path, required=True)
    _add_config_options(p)
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
