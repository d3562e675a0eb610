"""Agglomerative clustering with Ward's criterion and cluster-count selection.

Merge heights record the Ward criterion value W = SS12 - (SS1 + SS2), the
increase in within-cluster sum of squares. Input divergences are treated as
Euclidean distances and squared before the Lance-Williams recurrence (opt-out
via ``square_inputs``), so heights reduce to textbook Ward whenever the input
really is Euclidean.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .divergence import DivergenceMatrix
from .model import SegmentMeta


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Ordered merge list over leaves 0..k-1; merge t creates node k+t."""

    leaf_ids: tuple[str, ...]
    merges: tuple[Merge, ...]

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_ids)

    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])


@dataclass(frozen=True)
class KneeResult:
    """Selected cluster count plus the curve it was read from."""

    num_clusters: int
    rmse_curve: tuple[tuple[int, float], ...]
    evaluation_window: tuple[int, int]


def ward_cluster(matrix: DivergenceMatrix, square_inputs: bool = True) -> Dendrogram:
    """Agglomerate by minimal Ward distance via the Lance-Williams recurrence.

    Ties in the minimal distance break on the lowest (left, right) pair of
    smallest contained leaf indices, so the merge order is deterministic.
    """
    v = matrix.values
    k = matrix.size
    if k < 2:
        raise ValueError(f"need at least 2 items to cluster, got {k}")
    if not np.array_equal(v, v.T):
        raise ValueError("divergence matrix must be symmetric")
    if np.any(v < 0):
        raise ValueError("divergence matrix must be non-negative")

    total = 2 * k - 1
    # Working table holds 2*W between clusters; dead rows/cols are +inf.
    work = np.full((total, total), np.inf)
    work[:k, :k] = v**2 if square_inputs else v
    np.fill_diagonal(work, np.inf)
    alive = np.zeros(total, dtype=bool)
    alive[:k] = True
    size = np.ones(total, dtype=np.int64)
    minleaf = np.arange(total)

    merges: list[Merge] = []
    for step in range(k - 1):
        cur = k + step
        sub = work[:cur, :cur]
        dmin = sub.min()
        cand = np.argwhere(sub == dmin)
        best = None
        for a, b in cand:
            if a >= b:
                continue
            la, lb = minleaf[a], minleaf[b]
            key = (min(la, lb), max(la, lb))
            if best is None or key < best[0]:
                best = (key, int(a), int(b))
        _, a, b = best
        height = dmin / 2.0

        new = cur
        others = np.flatnonzero(alive)
        others = others[(others != a) & (others != b)]
        na, nb, nw = size[a], size[b], size[others]
        work[new, others] = (
            (na + nw) * work[a, others] + (nb + nw) * work[b, others] - nw * work[a, b]
        ) / (na + nb + nw)
        work[others, new] = work[new, others]

        work[a, :cur] = np.inf
        work[:cur, a] = np.inf
        work[b, :cur] = np.inf
        work[:cur, b] = np.inf
        alive[a] = alive[b] = False
        alive[new] = True
        size[new] = na + nb
        minleaf[new] = min(minleaf[a], minleaf[b])
        merges.append(Merge(min(a, b), max(a, b), float(height), int(na + nb)))

    return Dendrogram(matrix.ids, tuple(merges))


def cut(dendrogram: Dendrogram, k: int) -> dict[str, int]:
    """Flat clustering with exactly k clusters (undo the last k-1 merges).

    Cluster ids are assigned by each cluster's smallest leaf index, so cuts
    at successive k differ by splitting exactly one cluster.
    """
    n = dendrogram.n_leaves
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    for step in range(n - k):
        merge = dendrogram.merges[step]
        node = n + step
        members[node] = members.pop(merge.left) + members.pop(merge.right)
    clusters = sorted(members.values(), key=min)
    assignment: dict[str, int] = {}
    for cid, leaves in enumerate(clusters):
        for leaf in leaves:
            assignment[dendrogram.leaf_ids[leaf]] = cid
    return assignment


def _line_rmse(x: np.ndarray, y: np.ndarray) -> float:
    coeffs = np.polyfit(x, y, 1)
    resid = y - np.polyval(coeffs, x)
    return float(np.sqrt(np.mean(resid**2)))


def _best_split(xs: np.ndarray, ys: np.ndarray) -> tuple[int, list[tuple[int, float]]]:
    n = len(xs)
    curve: list[tuple[int, float]] = []
    best_c = None
    best_val = np.inf
    for s in range(2, n - 1):
        rmse_left = _line_rmse(xs[:s], ys[:s])
        rmse_right = _line_rmse(xs[s:], ys[s:])
        total = (s / n) * rmse_left + ((n - s) / n) * rmse_right
        c = int(xs[s - 1])
        curve.append((c, total))
        if total < best_val:
            best_val = total
            best_c = c
    return best_c, curve


def find_knee(xs: Sequence[int], ys: Sequence[float], min_points: int = 20) -> KneeResult:
    """Two-line knee of an (x, y) curve with iterative window refinement.

    Each candidate split fits both sides by least squares and scores the
    size-weighted total RMSE; the knee is the argmin split's last left-side
    x value. The evaluation window then shrinks to the points with
    x <= 2 * knee (never below ``min_points`` points, never growing) and the
    fit repeats until the knee is stable.
    """
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.float64)
    if len(xs) != len(ys):
        raise ValueError("xs and ys must have equal length")
    if len(xs) < 4:
        raise ValueError(f"need at least 4 curve points, got {len(xs)}")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")

    window = len(xs)
    last_knee = None
    while True:
        knee, curve = _best_split(xs[:window], ys[:window])
        target = int(np.count_nonzero(xs <= 2 * knee))
        new_window = min(window, max(target, min_points, 4))
        if knee == last_knee or new_window == window:
            return KneeResult(
                num_clusters=knee,
                rmse_curve=tuple(curve),
                evaluation_window=(int(xs[0]), int(xs[window - 1])),
            )
        last_knee = knee
        window = new_window


def merge_curve(dendrogram: Dendrogram) -> tuple[np.ndarray, np.ndarray]:
    """Greedy evaluation curve: x = cluster count c, y = cost of the merge
    that dissolves c clusters into c-1."""
    k = dendrogram.n_leaves
    xs = np.arange(2, k + 1, dtype=np.int64)
    heights = dendrogram.heights()
    ys = np.array([heights[k - c] for c in xs])
    return xs, ys


def l_method(dendrogram: Dendrogram, min_points: int = 20) -> KneeResult:
    """Cluster count at the knee of the merge-distance curve.

    Points at and left of the largest merge distance are discarded first
    (with Ward's monotone heights that is the final merge, so evaluation
    starts at the distance between 2 and 3 clusters).
    """
    xs, ys = merge_curve(dendrogram)
    start = int(np.argmax(ys)) + 1
    xs, ys = xs[start:], ys[start:]
    if len(xs) < 5:
        raise ValueError(
            f"only {len(xs)} usable merge points after discarding the largest; need >= 5"
        )
    return find_knee(xs, ys, min_points)


def _pam(values: np.ndarray, medoids: np.ndarray, max_iter: int = 200):
    """One PAM-style run from fixed initial medoids.

    Returns (labels, medoids, objective_history); the history is the total
    divergence to assigned medoids after each assignment pass and is
    non-increasing.
    """
    medoids = np.sort(np.asarray(medoids, dtype=np.int64))
    n = values.shape[0]
    history: list[float] = []
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dist = values[:, medoids]
        labels = np.argmin(dist, axis=1)
        history.append(float(dist[np.arange(n), labels].sum()))
        updated = medoids.copy()
        for c in range(len(medoids)):
            members = np.flatnonzero(labels == c)
            if members.size == 0:
                continue  # duplicate-point tie emptied this medoid; keep it
            within = values[np.ix_(members, members)].sum(axis=1)
            updated[c] = members[int(np.argmin(within))]
        updated = np.sort(updated)
        if np.array_equal(updated, medoids):
            break
        medoids = updated
    return labels, medoids, history


def k_medoids(
    matrix: DivergenceMatrix, k: int, restarts: int = 10, seed: int = 0
) -> dict[str, int]:
    """Best-of-restarts K-medoids on a precomputed divergence matrix.

    Each restart draws k distinct initial medoids from its own child seed, so
    the result is deterministic given ``seed`` and independent of restart
    execution order; ties on the objective keep the lowest restart index.
    """
    n = matrix.size
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        init = rng.choice(n, size=k, replace=False)
        labels, medoids, history = _pam(matrix.values, init)
        objective = history[-1]
        if best is None or objective < best[0]:
            best = (objective, labels, medoids)
    _, labels, medoids = best
    # medoids stay sorted inside _pam, so labels already number clusters by
    # ascending medoid index.
    return {matrix.ids[i]: int(labels[i]) for i in range(n)}


def repetition_pairs(metas: Sequence[SegmentMeta]) -> list[tuple[str, str]]:
    """All same-subject same-motion repetition pairs, by segment id."""
    groups: dict[tuple, list[str]] = defaultdict(list)
    for meta in metas:
        groups[(meta.subject_id, meta.task_code, meta.submotion_index)].append(
            meta.segment_id
        )
    for key, ids in groups.items():
        if len(ids) < 2:
            raise ValueError(
                f"(subject, task, submotion) {key} has {len(ids)} repetition(s); need >= 2"
            )
    pairs: list[tuple[str, str]] = []
    for ids in groups.values():
        pairs.extend(combinations(sorted(ids), 2))
    return pairs


def quality_score(assignment: Mapping[str, int], metas: Sequence[SegmentMeta]) -> float:
    """Fraction of same-subject same-motion repetition pairs co-clustered."""
    pairs = repetition_pairs(metas)
    hits = 0
    for a, b in pairs:
        if a not in assignment or b not in assignment:
            missing = a if a not in assignment else b
            raise ValueError(f"assignment does not cover segment {missing}")
        if assignment[a] == assignment[b]:
            hits += 1
    return hits / len(pairs)
