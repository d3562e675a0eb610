"""Consensus motions: barycenter averaging and batch alignment.

The barycenter refinement aligns every member to the current consensus with
banded DTW and replaces each consensus frame by the mean of the member frames
mapped to it. Alignment uses the squared Euclidean local cost, under which
the mean update is the exact minimizer, so the group objective (sum of banded
DTW costs to the consensus) never increases between iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .divergence import _accumulate, _backtrack, _step_back
from .model import Dataset, Direction, SegmentMeta, Trajectory


@nb.njit(cache=True, nogil=True, parallel=True)
def _dba_pass(consensus, data, lengths, warp_limit):
    """One alignment pass: per-member frame sums, counts, and DTW costs.

    Members are processed independently and write member-indexed slots, so
    the pass is deterministic under any thread count; callers reduce the
    partial sums in a fixed order.
    """
    nmem = data.shape[0]
    n = consensus.shape[0]
    dof = consensus.shape[1]
    sums = np.zeros((nmem, n, dof))
    counts = np.zeros((nmem, n))
    costs = np.zeros(nmem)
    for k in nb.prange(nmem):
        mlen = lengths[k]
        member = data[k, :mlen]
        band = warp_limit
        diff = n - mlen if n > mlen else mlen - n
        if diff > band:
            band = diff
        acc = _accumulate(consensus, member, band, True)
        costs[k] = acc[n - 1, mlen - 1]
        i = n - 1
        j = mlen - 1
        while True:
            for c in range(dof):
                sums[k, i, c] += member[j, c]
            counts[k, i] += 1.0
            if i == 0 and j == 0:
                break
            i, j = _step_back(acc, i, j)
    return sums, counts, costs


@dataclass(frozen=True)
class DbaRun:
    """Consensus plus convergence diagnostics from one barycenter run."""

    consensus: Trajectory
    iterations: int
    objective: float
    objective_history: tuple[float, ...]


def _check_group(group: list[Trajectory]) -> None:
    if not group:
        raise ValueError("group of trajectories is empty")
    model = group[0].model
    for t in group[1:]:
        if t.model != model:
            raise ValueError(f"mixed joint models in group: {model.name} vs {t.model.name}")


def default_warp_limit(group: list[Trajectory]) -> int:
    """Minimum warp needed to align the shortest and longest members."""
    _check_group(group)
    lengths = [t.frames for t in group]
    return max(lengths) - min(lengths)


def dba_run(
    group: list[Trajectory],
    init: Trajectory,
    warp_limit: int,
    iters: int = 30,
    tol: float = 1e-6,
) -> DbaRun:
    """Barycenter averaging with a Sakoe-Chiba corridor of half-width warp_limit.

    The corridor is widened per pair to the length difference so the end
    point stays reachable. Stops when the consensus changes by less than
    ``tol`` (max-abs, radians) or after ``iters`` refinement passes. The
    objective history has one entry per alignment pass, including a final
    pass over the returned consensus.
    """
    _check_group(group)
    if warp_limit < 0:
        raise ValueError(f"warp_limit must be >= 0, got {warp_limit}")
    if init.frames < 2:
        raise ValueError("init must have >= 2 frames")
    if init.model != group[0].model:
        raise ValueError("init model differs from group model")

    consensus = init.samples.copy()
    n = consensus.shape[0]
    lengths = np.array([t.frames for t in group], dtype=np.int64)
    data = np.zeros((len(group), int(lengths.max()), consensus.shape[1]))
    for idx, t in enumerate(group):
        data[idx, : t.frames] = t.samples

    history: list[float] = []
    iterations = 0
    for _ in range(iters):
        sums, counts, costs = _dba_pass(consensus, data, lengths, warp_limit)
        history.append(float(costs.sum()))
        updated = sums.sum(axis=0) / counts.sum(axis=0)[:, None]
        delta = float(np.max(np.abs(updated - consensus)))
        consensus = updated
        iterations += 1
        if delta < tol:
            break
    _, _, costs = _dba_pass(consensus, data, lengths, warp_limit)
    final = float(costs.sum())
    history.append(final)
    traj = Trajectory(consensus, init.frame_rate, init.model)
    return DbaRun(traj, iterations, final, tuple(history))


def dba_average(
    group: list[Trajectory],
    init: Trajectory,
    warp_limit: int,
    iters: int = 30,
    tol: float = 1e-6,
) -> Trajectory:
    """Consensus trajectory of a group; length is fixed at the init length."""
    return dba_run(group, init, warp_limit, iters, tol).consensus


def normalize_directions(
    members: list[Trajectory], directions: list[Direction]
) -> list[Trajectory]:
    """Time-reverse the return-direction members so all run forward."""
    if len(members) != len(directions):
        raise ValueError(f"{len(members)} members but {len(directions)} direction flags")
    return [
        m.reversed() if d is Direction.RETURN else m for m, d in zip(members, directions)
    ]


def _median_length_member(group: list[Trajectory]) -> Trajectory:
    order = sorted(range(len(group)), key=lambda i: (group[i].frames, i))
    return group[order[(len(group) - 1) // 2]]


def motion_group(dataset: Dataset, task: str, submotion: int) -> list:
    """All segments of one motion type (task code + submotion index)."""
    return [
        s
        for s in dataset.segments
        if s.meta.task_code == task and s.meta.submotion_index == submotion
    ]


def cross_subject_average_run(dataset: Dataset, task: str, submotion: int) -> tuple[DbaRun, list[SegmentMeta]]:
    """Barycenter over every recording of one motion type.

    Return-direction members are reversed first so mixed-direction groups
    average coherently; the consensus is emitted in the forward orientation.
    Init is the member of median length; the warp limit is the group's
    length spread.
    """
    segments = motion_group(dataset, task, submotion)
    if not segments:
        raise ValueError(f"no segments match task={task!r} submotion={submotion}")
    members = normalize_directions(
        [s.trajectory for s in segments], [s.meta.direction for s in segments]
    )
    init = _median_length_member(members)
    run = dba_run(members, init, default_warp_limit(members))
    return run, [s.meta for s in segments]


def cross_subject_average(dataset: Dataset, task: str, submotion: int) -> Trajectory:
    return cross_subject_average_run(dataset, task, submotion)[0].consensus


def cluster_average_run(
    members: list[Trajectory], directions: list[Direction]
) -> DbaRun:
    """Barycenter of a cluster's members, init at the longest member."""
    if not members:
        raise ValueError("cluster has no members")
    forward = normalize_directions(members, directions)
    longest = max(range(len(forward)), key=lambda i: (forward[i].frames, -i))
    init = forward[longest]
    return dba_run(forward, init, default_warp_limit(forward))


def cluster_average(members: list[Trajectory], directions: list[Direction]) -> Trajectory:
    return cluster_average_run(members, directions).consensus


def batch_dtw_align(members: list[Trajectory], reference: Trajectory) -> list[Trajectory]:
    """Warp every member onto the reference's time base.

    The reference is never warped: member frames mapped to the same reference
    frame are pooled by per-channel mean, and a member frame spanning several
    reference frames is repeated. Every output has exactly the reference
    length; no member frame is dropped.
    """
    aligned: list[Trajectory] = []
    ref = reference.samples
    r = reference.frames
    for member in members:
        if member.model != reference.model:
            raise ValueError(
                f"joint model mismatch: {member.model.name} vs {reference.model.name}"
            )
        acc = _accumulate(member.samples, ref, member.frames + r, False)
        path = _backtrack(acc)
        sums = np.zeros((r, ref.shape[1]))
        counts = np.zeros(r)
        np.add.at(sums, path[:, 1], member.samples[path[:, 0]])
        np.add.at(counts, path[:, 1], 1.0)
        aligned.append(Trajectory(sums / counts[:, None], reference.frame_rate, reference.model))
    return aligned
