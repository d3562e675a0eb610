"""End-to-end orchestration with cached, resumable stages.

Stage outputs are plain files (see :mod:`armclust.io`); each stage also
writes a provenance record containing the hashes of its inputs and its
parameters. A rerun with matching provenance skips recomputation and reads
the existing outputs back, so every artifact passes through its own
ingestion path. Nothing written depends on wall-clock or worker count:
identical inputs give byte-identical artifact directories.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from . import io as aio
from .averaging import (
    batch_dtw_align,
    cluster_average_run,
    cross_subject_average_run,
    normalize_directions,
)
from .divergence import Measure, divergence_matrix
from .fpca import cluster_fpca, components_to_cover, reconstruct_component
from .hcluster import cut, k_medoids, l_method, quality_score, ward_cluster
from .kinematics import ArmGeometry, end_effector_trace, trace_motion
from .model import (
    Dataset,
    Direction,
    Handedness,
    Segment,
    SegmentMeta,
    mirror_left_handed,
    model_by_name,
    project_dataset,
    validate_dataset,
)
from .synth import SynthSpec, generate


class PipelineError(RuntimeError):
    """A stage failure, tagged with the stage name and offending segments."""

    def __init__(self, stage: str, message: str, segment_ids: tuple[str, ...] = ()):
        tail = f" (segments: {', '.join(segment_ids)})" if segment_ids else ""
        super().__init__(f"[{stage}] {message}{tail}")
        self.stage = stage
        self.segment_ids = segment_ids


@dataclass
class PipelineConfig:
    """Declarative pipeline configuration; flags override file values."""

    model: str = "Full7"
    measure: str = "normalized_dtw"
    linkage: str = "ward"
    square_ward: bool = True
    z_normalize: bool = False
    knee_min_points: int = 20
    num_clusters: int | None = None  # override the L-method selection
    fpca_threshold: float = 0.8
    seed: int = 0
    workers: int = 1
    degrees: bool = False
    allow_wrap_jumps: bool = False
    humerus_length: float = 0.31
    forearm_length: float = 0.26
    hand_length: float = 0.08
    max_compare_clusters: int = 25

    def __post_init__(self) -> None:
        if self.linkage != "ward":
            raise ValueError(f"unsupported linkage {self.linkage!r}")
        model_by_name(self.model)
        Measure(self.measure)

    @classmethod
    def from_file(cls, path: Path, overrides: dict | None = None) -> "PipelineConfig":
        values = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def geometry(self) -> ArmGeometry:
        return ArmGeometry(self.humerus_length, self.forearm_length, self.hand_length)

    def to_mapping(self) -> dict:
        return dataclasses.asdict(self)


def _file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _stage(out_dir: Path, name: str, fingerprint: dict, outputs: list[Path], build) -> bool:
    """Run ``build`` unless matching provenance and outputs already exist."""
    record = {"stage": name, **fingerprint}
    record = json.loads(json.dumps(record, sort_keys=True))  # JSON-native form
    prov_path = out_dir / f"{name}.provenance.json"
    if prov_path.exists():
        try:
            existing = json.loads(prov_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            existing = None
        if existing == record and all(p.exists() for p in outputs):
            return False
    build()
    prov_path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return True


def prepare_dataset(config: PipelineConfig, manifest_path: Path) -> Dataset:
    """Ingest, validate, mirror left-handed segments, and project channels."""
    try:
        dataset = aio.read_dataset(
            manifest_path, degrees=config.degrees or None, allow_wrap_jumps=config.allow_wrap_jumps
        )
    except (OSError, ValueError, KeyError) as e:
        raise PipelineError("ingest", str(e)) from e

    violations = validate_dataset(dataset)
    if violations:
        ids = tuple(sorted({v.segment_id for v in violations if v.segment_id}))
        detail = "; ".join(f"{v.segment_id}: {v.rule}" for v in violations[:10])
        raise PipelineError("validate", f"{len(violations)} violation(s): {detail}", ids)

    segments = []
    for seg in dataset.segments:
        if seg.meta.handedness is Handedness.LEFT:
            seg = Segment(mirror_left_handed(seg.trajectory, seg.meta), seg.meta)
        segments.append(seg)
    dataset = Dataset(tuple(segments), dataset.model)

    target = model_by_name(config.model)
    try:
        return project_dataset(dataset, target)
    except ValueError as e:
        raise PipelineError("project", str(e)) from e


def _motion_types(dataset: Dataset) -> list[tuple[str, int]]:
    return sorted({(s.meta.task_code, s.meta.submotion_index) for s in dataset.segments})


def _build_averages(dataset: Dataset, directory: Path) -> None:
    segments = []
    info = []
    for task, submotion in _motion_types(dataset):
        run, metas = cross_subject_average_run(dataset, task, submotion)
        meta = SegmentMeta(task, submotion, "avg", 1, Direction.FORWARD, Handedness.RIGHT)
        segments.append(Segment(run.consensus, meta))
        info.append(
            {
                "motion": f"{task}.{submotion}",
                "members": [m.segment_id for m in metas],
                "iterations": run.iterations,
                "objective": run.objective,
            }
        )
    averages = Dataset(tuple(segments), dataset.model)
    aio.write_dataset(directory, averages)
    (directory / "averaging_info.json").write_text(
        json.dumps({"motions": info}, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _build_clusters(
    dataset: Dataset,
    assignment: dict[str, int],
    averages: Dataset,
    directory: Path,
    threshold: float,
) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    motion_cluster = {
        seg.meta.motion_id: assignment[seg.meta.segment_id] for seg in averages.segments
    }
    summary_rows = []
    for cid in sorted(set(motion_cluster.values())):
        motions = {m for m, c in motion_cluster.items() if c == cid}
        members = [s for s in dataset.segments if s.meta.motion_id in motions]
        if not members:
            raise PipelineError("clusters", f"cluster {cid} has no member segments")
        trajs = [s.trajectory for s in members]
        directions = [s.meta.direction for s in members]
        run = cluster_average_run(trajs, directions)
        aligned = batch_dtw_align(normalize_directions(trajs, directions), run.consensus)
        result = cluster_fpca(aligned, run.consensus)

        cdir = directory / f"cluster_{cid:02d}"
        cdir.mkdir(parents=True, exist_ok=True)
        aio.write_segment_csv(cdir / "average.csv", run.consensus)
        (cdir / "average_info.json").write_text(
            json.dumps(
                {
                    "cluster": cid,
                    "motions": sorted(motions),
                    "members": [s.meta.segment_id for s in members],
                    "iterations": run.iterations,
                    "objective": run.objective,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
        aio.write_fpca(cdir / "fpca.json", result)
        for k in range(1, min(2, result.n_components) + 1):
            plus, minus = reconstruct_component(result, k)
            aio.write_component_curves(
                cdir / f"component_{k:02d}.csv", result.mean_curve(), plus, minus
            )
        cumulative = []
        total = 0.0
        for f in result.variance_fractions:
            total += float(f)
            cumulative.append(total)
        summary_rows.append(
            {
                "cluster": cid,
                "members": len(members),
                "mean_pairwise_divergence": result.pairwise_divergence_mean,
                "components_needed": components_to_cover(result, threshold),
                "cumulative_fractions": cumulative,
            }
        )
    aio.write_variance_summary(directory / "variance_summary.csv", summary_rows)


def run_pipeline(config: PipelineConfig, manifest_path: Path, out_dir: Path) -> dict[str, Path]:
    """Run every stage and return the paths of the main artifacts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = Path(manifest_path)

    dataset = prepare_dataset(config, manifest_path)
    dataset_hash = aio.dataset_content_hash(dataset)

    paths = {
        "averages_manifest": out_dir / "averages" / "manifest.json",
        "divergence": out_dir / "divergence.csv",
        "dendrogram": out_dir / "dendrogram.json",
        "newick": out_dir / "dendrogram.newick",
        "knee": out_dir / "knee.csv",
        "assignment": out_dir / "assignment.json",
        "clusters": out_dir / "clusters",
        "pipeline": out_dir / "pipeline.json",
    }

    # cross-subject averages
    def build_averages() -> None:
        try:
            _build_averages(dataset, out_dir / "averages")
        except ValueError as e:
            raise PipelineError("averages", str(e)) from e

    _stage(
        out_dir,
        "averages",
        {"input_hash": dataset_hash, "params": {}},
        [paths["averages_manifest"]],
        build_averages,
    )
    averages = aio.read_dataset(paths["averages_manifest"])

    # pairwise divergences between averages
    averages_hash = aio.dataset_content_hash(averages)
    measure = Measure(config.measure)

    def build_divergence() -> None:
        try:
            matrix = divergence_matrix(
                averages, measure, workers=config.workers, z_normalize=config.z_normalize
            )
        except ValueError as e:
            raise PipelineError("divergence", str(e)) from e
        aio.write_divergence_matrix(
            paths["divergence"], matrix, extra={"dataset_hash": averages_hash}
        )

    _stage(
        out_dir,
        "divergence",
        {
            "input_hash": averages_hash,
            "params": {"measure": measure.value, "z_normalize": config.z_normalize},
        },
        [paths["divergence"]],
        build_divergence,
    )
    matrix = aio.read_divergence_matrix(paths["divergence"])

    # dendrogram
    def build_dendrogram() -> None:
        try:
            dendrogram = ward_cluster(matrix, config.square_ward)
        except ValueError as e:
            raise PipelineError("cluster", str(e)) from e
        aio.write_dendrogram(paths["dendrogram"], dendrogram)
        paths["newick"].write_text(aio.dendrogram_to_newick(dendrogram) + "\n", encoding="utf-8")

    _stage(
        out_dir,
        "dendrogram",
        {"input_hash": _file_hash(paths["divergence"]), "params": {"square_ward": config.square_ward}},
        [paths["dendrogram"], paths["newick"]],
        build_dendrogram,
    )
    dendrogram = aio.read_dendrogram(paths["dendrogram"])

    # cluster-count selection
    def build_knee() -> None:
        try:
            knee = l_method(dendrogram, config.knee_min_points)
        except ValueError as e:
            raise PipelineError("knee", str(e)) from e
        aio.write_knee(paths["knee"], knee)

    knee = None
    try:
        _stage(
            out_dir,
            "knee",
            {
                "input_hash": _file_hash(paths["dendrogram"]),
                "params": {"min_points": config.knee_min_points},
            },
            [paths["knee"]],
            build_knee,
        )
        knee = aio.read_knee(paths["knee"])
    except PipelineError:
        # the curve can be too short for the L method; an explicit cluster
        # count keeps the pipeline usable on tiny datasets
        if config.num_clusters is None:
            raise
    k = config.num_clusters if config.num_clusters is not None else knee.num_clusters
    k = max(1, min(k, dendrogram.n_leaves))

    # flat cut
    def build_cut() -> None:
        aio.write_assignment(paths["assignment"], cut(dendrogram, k))

    _stage(
        out_dir,
        "cut",
        {"input_hash": _file_hash(paths["dendrogram"]), "params": {"k": k}},
        [paths["assignment"]],
        build_cut,
    )
    assignment = aio.read_assignment(paths["assignment"])

    # per-cluster averages, alignment, and fPCA
    def build_clusters() -> None:
        try:
            _build_clusters(
                dataset, assignment, averages, paths["clusters"], config.fpca_threshold
            )
        except ValueError as e:
            raise PipelineError("fpca", str(e)) from e

    _stage(
        out_dir,
        "clusters",
        {
            "input_hash": dataset_hash,
            "params": {
                "assignment_hash": _file_hash(paths["assignment"]),
                "fpca_threshold": config.fpca_threshold,
            },
        },
        [paths["clusters"] / "variance_summary.csv"],
        build_clusters,
    )

    # forward-kinematics traces of cluster averages (full-arm model only)
    if model_by_name(config.model).name == "Full7":
        traces_dir = out_dir / "traces"

        def build_traces() -> None:
            traces_dir.mkdir(parents=True, exist_ok=True)
            geometry = config.geometry()
            for cdir in sorted(paths["clusters"].glob("cluster_*")):
                average = aio.read_segment_csv(
                    cdir / "average.csv", 1.0, model_by_name(config.model)
                )
                poses = trace_motion(average, geometry)
                aio.write_pose_trace(traces_dir / f"{cdir.name}_pose.json", poses, geometry)
                aio.write_end_effector_csv(
                    traces_dir / f"{cdir.name}_end_effector.csv", end_effector_trace(poses)
                )

        _stage(
            out_dir,
            "traces",
            {
                "input_hash": _file_hash(paths["assignment"]),
                "params": {
                    "dataset_hash": dataset_hash,
                    "geometry": [config.humerus_length, config.forearm_length, config.hand_length],
                },
            },
            [traces_dir],
            build_traces,
        )
        paths["traces"] = traces_dir

    manifest = {
        "format": "armclust-pipeline-v1",
        "config": config.to_mapping(),
        "dataset_hash": dataset_hash,
        "num_clusters_used": k,
        "knee_num_clusters": knee.num_clusters if knee else None,
        "artifacts": {name: str(p.relative_to(out_dir)) for name, p in paths.items() if name != "pipeline"},
    }
    paths["pipeline"].write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return paths


def synth_dataset(spec: SynthSpec, directory: Path) -> Path:
    """Generate a corpus and write it in the standard dataset format."""
    directory = Path(directory)
    dataset, labels = generate(spec)
    manifest = aio.write_dataset(directory, dataset)
    aio.write_labels(directory / "labels.json", dataset, labels)
    return manifest


def compare_methods(config: PipelineConfig, dataset: Dataset) -> list[dict]:
    """Quality-vs-k table on individual segments for the three methods.

    Rows hold the repetition-consistency score of normalized-DTW + Ward,
    Bezier features + Ward, and normalized-DTW + K-medoids for each cluster
    count from 1 to ``max_compare_clusters``.
    """
    metas = dataset.metas()
    matrix_dtw = divergence_matrix(
        dataset, Measure.NORMALIZED_DTW, workers=config.workers, z_normalize=config.z_normalize
    )
    matrix_bez = divergence_matrix(dataset, Measure.BEZIER_EUCLID)
    dend_dtw = ward_cluster(matrix_dtw, config.square_ward)
    dend_bez = ward_cluster(matrix_bez, config.square_ward)
    rows = []
    for k in range(1, min(config.max_compare_clusters, len(dataset)) + 1):
        rows.append(
            {
                "k": k,
                "dtw_ward": quality_score(cut(dend_dtw, k), metas),
                "bezier_ward": quality_score(cut(dend_bez, k), metas),
                "dtw_kmedoids": quality_score(k_medoids(matrix_dtw, k, 10, config.seed), metas),
            }
        )
    return rows


def write_compare_csv(path: Path, rows: list[dict]) -> None:
    lines = ["k,dtw_ward,bezier_ward,dtw_kmedoids"]
    for r in rows:
        lines.append(
            f"{r['k']},{r['dtw_ward']!r},{r['bezier_ward']!r},{r['dtw_kmedoids']!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
