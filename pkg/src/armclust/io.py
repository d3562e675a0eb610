"""File formats for datasets and derived artifacts.

Segments are CSV files (header = channel labels, one row per frame) listed by
a JSON manifest carrying the metadata; derived artifacts (divergence matrix,
dendrogram, knee curve, assignments, fPCA results, pose traces) each have a
reader and writer so every output round-trips. All numbers are written with
full precision and no file embeds wall-clock state, so identical inputs
produce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .divergence import DivergenceMatrix, Measure
from .fpca import FpcaResult
from .hcluster import Dendrogram, KneeResult, Merge
from .kinematics import ArmGeometry, ArmPose
from .model import (
    Dataset,
    Direction,
    Handedness,
    Segment,
    SegmentMeta,
    Trajectory,
    model_by_name,
)

FLOAT_FMT = "%.17g"  # round-trips float64 exactly


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# -- segments and datasets ---------------------------------------------------


def write_segment_csv(path: Path, trajectory: Trajectory) -> None:
    header = ",".join(trajectory.model.channel_labels)
    np.savetxt(path, trajectory.samples, fmt=FLOAT_FMT, delimiter=",", header=header, comments="")


def read_segment_csv(path: Path, frame_rate: float, model) -> Trajectory:
    samples = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(samples, frame_rate, model)


def dataset_content_hash(dataset: Dataset) -> str:
    """SHA-256 over model, metadata and raw samples, in segment order."""
    h = hashlib.sha256()
    h.update(dataset.model.name.encode())
    for seg in dataset.segments:
        m = seg.meta
        h.update(
            f"{m.task_code}|{m.submotion_index}|{m.subject_id}|{m.repetition}"
            f"|{m.direction.value}|{m.handedness.value}|{seg.trajectory.frame_rate!r}".encode()
        )
        h.update(seg.trajectory.samples.tobytes())
    return h.hexdigest()


def write_dataset(directory: Path, dataset: Dataset) -> Path:
    """Write per-segment CSVs plus manifest.json; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for idx, seg in enumerate(dataset.segments):
        name = f"seg{idx:04d}.csv"
        write_segment_csv(directory / name, seg.trajectory)
        m = seg.meta
        entries.append(
            {
                "file": name,
                "task_code": m.task_code,
                "submotion_index": m.submotion_index,
                "subject_id": m.subject_id,
                "repetition": m.repetition,
                "direction": m.direction.value,
                "handedness": m.handedness.value,
                "frame_rate": seg.trajectory.frame_rate,
            }
        )
    manifest = directory / "manifest.json"
    _write_json(
        manifest,
        {
            "format": "armclust-dataset-v1",
            "model": dataset.model.name,
            "angle_unit": "radians",
            "segments": entries,
        },
    )
    return manifest


def read_dataset(
    manifest_path: Path,
    *,
    degrees: bool | None = None,
    allow_wrap_jumps: bool = False,
) -> Dataset:
    """Load a dataset from its manifest.

    ``degrees`` overrides the manifest's angle unit (None = trust the
    manifest). Jumps larger than pi between consecutive frames are rejected
    as likely angle-wrap artifacts unless ``allow_wrap_jumps`` is set.
    """
    manifest_path = Path(manifest_path)
    payload = _read_json(manifest_path)
    model = model_by_name(payload["model"])
    in_degrees = degrees if degrees is not None else payload.get("angle_unit") == "degrees"
    segments = []
    for entry in payload["segments"]:
        traj = read_segment_csv(
            manifest_path.parent / entry["file"], float(entry["frame_rate"]), model
        )
        if in_degrees:
            traj = traj.with_samples(np.deg2rad(traj.samples))
        meta = SegmentMeta(
            task_code=entry["task_code"],
            submotion_index=int(entry["submotion_index"]),
            subject_id=entry["subject_id"],
            repetition=int(entry["repetition"]),
            direction=Direction(entry["direction"]),
            handedness=Handedness(entry["handedness"]),
        )
        if not allow_wrap_jumps and traj.frames >= 2:
            jumps = np.abs(np.diff(traj.samples, axis=0))
            if np.any(jumps > np.pi):
                frame, channel = np.argwhere(jumps > np.pi)[0]
                raise ValueError(
                    f"segment {meta.segment_id}: jump > pi at frame {frame}, channel "
                    f"{model.channel_labels[channel]} (likely wrap artifact; pass "
                    "allow_wrap_jumps to accept)"
                )
        segments.append(Segment(traj, meta))
    return Dataset(tuple(segments), model)


def write_labels(path: Path, dataset: Dataset, labels: list[int]) -> None:
    _write_json(
        Path(path),
        {
            "format": "armclust-labels-v1",
            "labels": {seg.meta.segment_id: int(l) for seg, l in zip(dataset.segments, labels)},
        },
    )


def read_labels(path: Path) -> dict[str, int]:
    return {k: int(v) for k, v in _read_json(Path(path))["labels"].items()}


# -- divergence matrix -------------------------------------------------------


def write_divergence_matrix(path: Path, matrix: DivergenceMatrix, extra: dict | None = None) -> None:
    """Square CSV with id header/index plus a .meta.json sidecar."""
    path = Path(path)
    lines = ["id," + ",".join(matrix.ids)]
    for i, row_id in enumerate(matrix.ids):
        row = ",".join(FLOAT_FMT % x for x in matrix.values[i])
        lines.append(f"{row_id},{row}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {
        "format": "armclust-divergence-v1",
        "measure": matrix.measure.value,
        "ids": list(matrix.ids),
        "reversed": matrix.reversed.astype(int).tolist(),
    }
    if extra:
        meta.update(extra)
    _write_json(path.with_suffix(".meta.json"), meta)


def read_divergence_matrix(path: Path) -> DivergenceMatrix:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    ids = tuple(lines[0].split(",")[1:])
    values = np.array(
        [[float(x) for x in line.split(",")[1:]] for line in lines[1:]]
    )
    meta = _read_json(path.with_suffix(".meta.json"))
    return DivergenceMatrix(
        values=values,
        measure=Measure(meta["measure"]),
        reversed=np.array(meta["reversed"], dtype=bool),
        ids=ids,
    )


# -- dendrogram --------------------------------------------------------------


def write_dendrogram(path: Path, dendrogram: Dendrogram) -> None:
    _write_json(
        Path(path),
        {
            "format": "armclust-dendrogram-v1",
            "leaf_ids": list(dendrogram.leaf_ids),
            "merges": [
                {"left": m.left, "right": m.right, "height": m.height, "size": m.size}
                for m in dendrogram.merges
            ],
        },
    )


def read_dendrogram(path: Path) -> Dendrogram:
    payload = _read_json(Path(path))
    merges = tuple(
        Merge(int(m["left"]), int(m["right"]), float(m["height"]), int(m["size"]))
        for m in payload["merges"]
    )
    return Dendrogram(tuple(payload["leaf_ids"]), merges)


def dendrogram_to_newick(dendrogram: Dendrogram) -> str:
    """Newick text; child branch lengths are height differences to the parent."""
    n = dendrogram.n_leaves
    height = {i: 0.0 for i in range(n)}
    text = {i: dendrogram.leaf_ids[i] for i in range(n)}
    for step, merge in enumerate(dendrogram.merges):
        node = n + step
        height[node] = merge.height
        bl_left = merge.height - height[merge.left]
        bl_right = merge.height - height[merge.right]
        text[node] = (
            f"({text[merge.left]}:{bl_left!r},{text[merge.right]}:{bl_right!r})"
        )
    return text[2 * n - 2] + ";"


# -- knee --------------------------------------------------------------------


def write_knee(csv_path: Path, knee: KneeResult) -> None:
    csv_path = Path(csv_path)
    lines = ["clusters,rmse_tot"]
    lines += [f"{c},{FLOAT_FMT % r}" for c, r in knee.rmse_curve]
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(
        csv_path.with_suffix(".json"),
        {
            "format": "armclust-knee-v1",
            "num_clusters": knee.num_clusters,
            "evaluation_window": list(knee.evaluation_window),
        },
    )


def read_knee(csv_path: Path) -> KneeResult:
    csv_path = Path(csv_path)
    lines = csv_path.read_text(encoding="utf-8").strip().splitlines()[1:]
    curve = tuple((int(c), float(r)) for c, r in (line.split(",") for line in lines))
    payload = _read_json(csv_path.with_suffix(".json"))
    return KneeResult(
        num_clusters=int(payload["num_clusters"]),
        rmse_curve=curve,
        evaluation_window=tuple(payload["evaluation_window"]),
    )


# -- flat assignments --------------------------------------------------------


def write_assignment(path: Path, assignment: dict[str, int]) -> None:
    _write_json(
        Path(path),
        {"format": "armclust-assignment-v1", "assignment": {k: int(v) for k, v in assignment.items()}},
    )


def read_assignment(path: Path) -> dict[str, int]:
    return {k: int(v) for k, v in _read_json(Path(path))["assignment"].items()}


# -- fPCA --------------------------------------------------------------------


def write_fpca(path: Path, result: FpcaResult) -> None:
    _write_json(
        Path(path),
        {
            "format": "armclust-fpca-v1",
            "model": result.model.name,
            "frame_rate": result.frame_rate,
            "domain_length": result.domain_length,
            "mean_coefficients": result.mean_coefficients.tolist(),
            "components": result.components.tolist(),
            "variance_fractions": result.variance_fractions.tolist(),
            "eigenvalues": result.eigenvalues.tolist(),
            "member_scores": result.member_scores.tolist(),
            "pairwise_divergence_mean": result.pairwise_divergence_mean,
            "total_variance": result.total_variance,
        },
    )


def read_fpca(path: Path) -> FpcaResult:
    p = _read_json(Path(path))
    dim = len(p["mean_coefficients"])
    return FpcaResult(
        mean_coefficients=np.array(p["mean_coefficients"]),
        components=np.array(p["components"]).reshape(-1, dim),
        variance_fractions=np.array(p["variance_fractions"]),
        pairwise_divergence_mean=float(p["pairwise_divergence_mean"]),
        eigenvalues=np.array(p["eigenvalues"]),
        member_scores=np.array(p["member_scores"]).reshape(len(p["member_scores"]), -1),
        total_variance=float(p["total_variance"]),
        domain_length=int(p["domain_length"]),
        model=model_by_name(p["model"]),
        frame_rate=float(p["frame_rate"]),
    )


def write_component_curves(
    path: Path, mean: Trajectory, plus: Trajectory, minus: Trajectory
) -> None:
    """Mean and +/- variation curves side by side, one row per frame."""
    labels = mean.model.channel_labels
    header = ",".join(
        [f"mean_{c}" for c in labels] + [f"plus_{c}" for c in labels] + [f"minus_{c}" for c in labels]
    )
    data = np.hstack((mean.samples, plus.samples, minus.samples))
    np.savetxt(Path(path), data, fmt=FLOAT_FMT, delimiter=",", header=header, comments="")


def write_variance_summary(path: Path, rows: list[dict]) -> None:
    """Per-cluster variance summary (cumulative fractions + mean divergence)."""
    if not rows:
        Path(path).write_text(
            "cluster,members,mean_pairwise_divergence,components_needed\n", encoding="utf-8"
        )
        return
    max_comp = max(len(r["cumulative_fractions"]) for r in rows)
    header = "cluster,members,mean_pairwise_divergence,components_needed," + ",".join(
        f"cum_frac_{i + 1}" for i in range(max_comp)
    )
    lines = [header]
    for r in rows:
        frac = list(r["cumulative_fractions"]) + [""] * (max_comp - len(r["cumulative_fractions"]))
        frac_txt = ",".join(FLOAT_FMT % f if f != "" else "" for f in frac)
        lines.append(
            f"{r['cluster']},{r['members']},{FLOAT_FMT % r['mean_pairwise_divergence']},"
            f"{r['components_needed']},{frac_txt}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- pose traces -------------------------------------------------------------


def write_pose_trace(json_path: Path, poses: list[ArmPose], geometry: ArmGeometry) -> None:
    """Per-frame origins and quaternions (x, y, z, w) of all four frames."""
    frames = []
    for pose in poses:
        entry = {}
        for name in ("shoulder", "elbow", "wrist", "hand"):
            frame = getattr(pose, name)
            quat = Rotation.from_matrix(frame.rotation).as_quat()
            entry[name] = {"origin": frame.origin.tolist(), "quaternion": quat.tolist()}
        frames.append(entry)
    _write_json(
        Path(json_path),
        {
            "format": "armclust-trace-v1",
            "geometry": {
                "humerus_length": geometry.humerus_length,
                "forearm_length": geometry.forearm_length,
                "hand_length": geometry.hand_length,
            },
            "frames": frames,
        },
    )


def write_end_effector_csv(path: Path, trace: np.ndarray) -> None:
    np.savetxt(Path(path), trace, fmt=FLOAT_FMT, delimiter=",", header="x,y,z", comments="")


def read_end_effector_csv(path: Path) -> np.ndarray:
    return np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
