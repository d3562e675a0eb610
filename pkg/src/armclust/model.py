"""Domain types for joint-angle motion segments.

All angles are stored in radians. Types are immutable after construction
(arrays are frozen), so values can be shared freely between workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Channels whose positive sense depends on body side; these flip sign when a
# left-handed recording is mirrored into the right-handed convention.
LATERALIZED_CHANNELS = frozenset(
    {"plane_of_elevation", "internal_rotation", "supination", "deviation"}
)


class Direction(Enum):
    FORWARD = "forward"
    RETURN = "return"


class Handedness(Enum):
    RIGHT = "right"
    LEFT = "left"


@dataclass(frozen=True)
class JointModel:
    """A fixed ordering of joint-angle channels."""

    name: str
    channel_labels: tuple[str, ...]

    @property
    def dof_count(self) -> int:
        return len(self.channel_labels)

    def channel_index(self, label: str) -> int:
        return self.channel_labels.index(label)

    def lateralized_indices(self) -> tuple[int, ...]:
        return tuple(
            i for i, lbl in enumerate(self.channel_labels) if lbl in LATERALIZED_CHANNELS
        )


FULL7 = JointModel(
    "Full7",
    (
        "plane_of_elevation",
        "elevation",
        "internal_rotation",
        "elbow_flexion",
        "supination",
        "wrist_flexion",
        "deviation",
    ),
)
ELBOW_WRIST4 = JointModel(
    "ElbowWrist4", ("elbow_flexion", "supination", "wrist_flexion", "deviation")
)
WRIST_ONLY3 = JointModel("WristOnly3", ("supination", "wrist_flexion", "deviation"))
SHOULDER_ELBOW4 = JointModel(
    "ShoulderElbow4",
    ("plane_of_elevation", "elevation", "internal_rotation", "elbow_flexion"),
)

_MODELS = {m.name: m for m in (FULL7, ELBOW_WRIST4, WRIST_ONLY3, SHOULDER_ELBOW4)}


def model_by_name(name: str) -> JointModel:
    try:
        return _MODELS[name]
    except KeyError:
        raise ValueError(f"unknown joint model {name!r}; know {sorted(_MODELS)}") from None


@dataclass(frozen=True)
class Trajectory:
    """One motion segment: frames x dof matrix of joint angles.

    Construction enforces shape only; data-quality rules (finiteness,
    minimum length) are reported by :func:`validate_dataset` so that bad
    recordings can be inspected instead of crashing ingestion.
    """

    samples: np.ndarray
    frame_rate: float
    model: JointModel

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.samples, dtype=np.float64))
        if arr.ndim != 2:
            raise ValueError(f"samples must be 2-D (frames x dof), got ndim={arr.ndim}")
        if arr.shape[0] < 1:
            raise ValueError("trajectory has no frames")
        if arr.shape[1] != self.model.dof_count:
            raise ValueError(
                f"samples have {arr.shape[1]} channels, model "
                f"{self.model.name} expects {self.model.dof_count}"
            )
        if not self.frame_rate > 0:
            raise ValueError(f"frame_rate must be positive, got {self.frame_rate}")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @property
    def frames(self) -> int:
        return self.samples.shape[0]

    def reversed(self) -> "Trajectory":
        return Trajectory(self.samples[::-1].copy(), self.frame_rate, self.model)

    def with_samples(self, samples: np.ndarray) -> "Trajectory":
        return Trajectory(samples, self.frame_rate, self.model)


@dataclass(frozen=True)
class SegmentMeta:
    """Identity of a motion segment within a dataset."""

    task_code: str
    submotion_index: int
    subject_id: str
    repetition: int
    direction: Direction = Direction.FORWARD
    handedness: Handedness = Handedness.RIGHT

    @property
    def key(self) -> tuple[str, int, str, int]:
        """The uniqueness key (task, submotion, subject, repetition)."""
        return (self.task_code, self.submotion_index, self.subject_id, self.repetition)

    @property
    def segment_id(self) -> str:
        return f"{self.task_code}.{self.submotion_index}.{self.subject_id}.{self.repetition}"

    @property
    def motion_id(self) -> str:
        """Identifies the motion type (task + submotion), shared across subjects."""
        return f"{self.task_code}.{self.submotion_index}"


@dataclass(frozen=True)
class Segment:
    trajectory: Trajectory
    meta: SegmentMeta


@dataclass(frozen=True)
class Dataset:
    """A collection of segments sharing one joint model."""

    segments: tuple[Segment, ...]
    model: JointModel

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))

    def __len__(self) -> int:
        return len(self.segments)

    def segment_ids(self) -> list[str]:
        return [s.meta.segment_id for s in self.segments]

    def metas(self) -> list[SegmentMeta]:
        return [s.meta for s in self.segments]

    def trajectories(self) -> list[Trajectory]:
        return [s.trajectory for s in self.segments]


@dataclass(frozen=True)
class Violation:
    """One data-quality rule broken by one segment (or the dataset)."""

    segment_id: str | None
    rule: str
    message: str


def validate_dataset(dataset: Dataset) -> list[Violation]:
    """Check dataset invariants; returns an empty list iff all hold.

    Violations are data, not failures: callers decide whether to abort.
    """
    violations: list[Violation] = []
    seen: dict[tuple, str] = {}
    for seg in dataset.segments:
        sid = seg.meta.segment_id
        traj = seg.trajectory
        if traj.model is not dataset.model and traj.model != dataset.model:
            violations.append(
                Violation(sid, "model", f"segment model {traj.model.name} != dataset model {dataset.model.name}")
            )
        if traj.frames < 2:
            violations.append(Violation(sid, "min-frames", f"only {traj.frames} frame(s), need >= 2"))
        if not np.all(np.isfinite(traj.samples)):
            bad = int(np.count_nonzero(~np.isfinite(traj.samples)))
            violations.append(Violation(sid, "finite", f"{bad} non-finite sample(s)"))
        if seg.meta.repetition < 1:
            violations.append(Violation(sid, "repetition", f"repetition {seg.meta.repetition} < 1"))
        if seg.meta.submotion_index < 1:
            violations.append(Violation(sid, "submotion", f"submotion_index {seg.meta.submotion_index} < 1"))
        key = seg.meta.key
        if key in seen:
            violations.append(
                Violation(sid, "unique", f"duplicate (task, submotion, subject, repetition) with {seen[key]}")
            )
        else:
            seen[key] = sid
    return violations


def mirror_left_handed(trajectory: Trajectory, meta: SegmentMeta) -> Trajectory:
    """Mirror a left-handed recording into the right-handed convention.

    Sign is flipped on exactly the lateralized channels (plane of elevation,
    internal rotation, supination, deviation); elevation and the flexion
    channels are side-symmetric and pass through unchanged. Applying the
    mirror twice restores the input exactly.
    """
    if meta.handedness is not Handedness.LEFT:
        raise ValueError(
            f"segment {meta.segment_id} is {meta.handedness.value}-handed; "
            "mirroring applies to left-handed segments only"
        )
    flipped = trajectory.samples.copy()
    idx = trajectory.model.lateralized_indices()
    flipped[:, idx] = -flipped[:, idx]
    return trajectory.with_samples(flipped)


def project_dataset(dataset: Dataset, target: JointModel) -> Dataset:
    """Extract the target model's channels from a wider recording.

    Every channel of ``target`` must exist in the dataset's model; column
    order follows the target model.
    """
    source = dataset.model
    if target == source:
        return dataset
    missing = [c for c in target.channel_labels if c not in source.channel_labels]
    if missing:
        raise ValueError(
            f"cannot project {source.name} onto {target.name}: missing channels {missing}"
        )
    cols = [source.channel_index(c) for c in target.channel_labels]
    segments = tuple(
        Segment(
            Trajectory(seg.trajectory.samples[:, cols], seg.trajectory.frame_rate, target),
            seg.meta,
        )
        for seg in dataset.segments
    )
    return Dataset(segments, target)
