"""Synthetic motion corpus with planted cluster structure.

Each planted cluster owns a pair of start/end angle configurations; motion
types within a cluster perturb those endpoints slightly, and every recorded
segment adds a per-subject offset, frame noise, duration jitter, and a random
direction flag (return segments are stored time-reversed). The per-motion and
per-subject spreads scale with ``noise_sd`` so a zero-noise corpus collapses
each cluster to identical segments up to reversal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    FULL7,
    Dataset,
    Direction,
    Handedness,
    JointModel,
    Segment,
    SegmentMeta,
    Trajectory,
)

MOTION_WIGGLE_FACTOR = 2.0  # per-motion endpoint sd, in units of noise_sd
SUBJECT_OFFSET_FACTOR = 1.5  # per-subject channel offset sd, in units of noise_sd


@dataclass(frozen=True)
class SynthSpec:
    """Shape and noise parameters of a generated corpus."""

    model: JointModel = FULL7
    num_clusters: int = 5
    motions_per_cluster: int = 4
    subjects: int = 12
    repetitions: int = 3
    noise_sd: float = 0.02
    duration_jitter: float = 0.15
    base_frames: int = 64
    reverse_prob: float = 0.5
    separation_factor: float = 10.0
    frame_rate: float = 100.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_clusters < 1:
            raise ValueError("num_clusters must be >= 1")
        if self.motions_per_cluster < 1:
            raise ValueError("motions_per_cluster must be >= 1")
        if self.subjects < 1:
            raise ValueError("subjects must be >= 1")
        if self.repetitions < 2:
            raise ValueError("repetitions must be >= 2 (quality scoring needs pairs)")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if not 0 <= self.duration_jitter < 1:
            raise ValueError("duration_jitter must be in [0, 1)")
        if self.base_frames < 8:
            raise ValueError("base_frames must be >= 8")
        if not 0 <= self.reverse_prob <= 1:
            raise ValueError("reverse_prob must be in [0, 1]")


def minimum_jerk_profile(start: float, end: float, frames: int) -> np.ndarray:
    """Quintic start-to-end profile with zero boundary velocity/acceleration."""
    if frames < 2:
        raise ValueError(f"need >= 2 frames, got {frames}")
    tau = np.linspace(0.0, 1.0, frames)
    q = 10.0 * tau**3 - 15.0 * tau**4 + 6.0 * tau**5
    return start + (end - start) * q


def _draw_templates(
    rng: np.random.Generator, clusters: int, dof: int, sep_min: float
) -> tuple[np.ndarray, np.ndarray]:
    """Cluster endpoint templates, redrawn until pairwise separation holds.

    Separation is measured on the concatenated (start, end) vector and also
    against the time-reversed (end, start) form, since direction handling
    folds reversed segments back before comparison.
    """
    for _ in range(1000):
        starts = rng.uniform(-0.8, 0.8, (clusters, dof))
        ends = rng.uniform(-0.8, 0.8, (clusters, dof))
        if clusters == 1:
            return starts, ends
        cat = np.hstack((starts, ends))
        rev = np.hstack((ends, starts))
        ok = True
        for i in range(clusters):
            for j in range(i + 1, clusters):
                d_fwd = np.linalg.norm(cat[i] - cat[j])
                d_rev = np.linalg.norm(cat[i] - rev[j])
                if min(d_fwd, d_rev) < sep_min:
                    ok = False
        if ok:
            return starts, ends
    raise RuntimeError(
        f"could not separate {clusters} cluster templates by {sep_min:.3f} rad"
    )


def generate(spec: SynthSpec) -> tuple[Dataset, list[int]]:
    """Generate a corpus and its ground-truth cluster label per segment.

    Deterministic for a given seed: draws happen in a fixed order
    (templates, motion endpoints, subject offsets, then per-segment duration,
    noise, and direction).
    """
    rng = np.random.default_rng(spec.seed)
    dof = spec.model.dof_count
    sep_min = spec.separation_factor * spec.noise_sd * np.sqrt(2.0 * dof)
    starts, ends = _draw_templates(rng, spec.num_clusters, dof, sep_min)

    motions: list[tuple[str, np.ndarray, np.ndarray, int]] = []
    for c in range(spec.num_clusters):
        for _ in range(spec.motions_per_cluster):
            s = starts[c] + rng.normal(0.0, MOTION_WIGGLE_FACTOR * spec.noise_sd, dof)
            e = ends[c] + rng.normal(0.0, MOTION_WIGGLE_FACTOR * spec.noise_sd, dof)
            motions.append((f"m{len(motions):02d}", s, e, c))

    offsets = rng.normal(0.0, SUBJECT_OFFSET_FACTOR * spec.noise_sd, (spec.subjects, dof))

    segments: list[Segment] = []
    labels: list[int] = []
    for task, m_start, m_end, cluster in motions:
        for subject in range(spec.subjects):
            for rep in range(1, spec.repetitions + 1):
                stretch = 1.0 + rng.uniform(-spec.duration_jitter, spec.duration_jitter)
                frames = max(8, int(round(spec.base_frames * stretch)))
                profile = np.column_stack(
                    [
                        minimum_jerk_profile(
                            m_start[d] + offsets[subject, d],
                            m_end[d] + offsets[subject, d],
                            frames,
                        )
                        for d in range(dof)
                    ]
                )
                samples = profile + rng.normal(0.0, spec.noise_sd, (frames, dof))
                direction = Direction.FORWARD
                if rng.random() < spec.reverse_prob:
                    samples = samples[::-1]
                    direction = Direction.RETURN
                meta = SegmentMeta(
                    task_code=task,
                    submotion_index=1,
                    subject_id=f"s{subject:02d}",
                    repetition=rep,
                    direction=direction,
                    handedness=Handedness.RIGHT,
                )
                segments.append(Segment(Trajectory(samples, spec.frame_rate, spec.model), meta))
                labels.append(cluster)
    return Dataset(tuple(segments), spec.model), labels


def motion_labels(dataset: Dataset, labels: list[int]) -> dict[str, int]:
    """Ground-truth cluster per motion type (task + submotion), from segment labels."""
    out: dict[str, int] = {}
    for seg, label in zip(dataset.segments, labels):
        mid = seg.meta.motion_id
        if mid in out and out[mid] != label:
            raise ValueError(f"motion {mid} spans multiple planted clusters")
        out[mid] = label
    return out
