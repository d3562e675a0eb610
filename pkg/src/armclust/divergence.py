"""Pairwise divergence measures between motion segments.

Two measures are provided: dynamic time warping (with reversal handling and
warped-length normalization) and a Euclidean distance between cubic Bezier
feature vectors. The DTW recursion allows the three unit-weight moves
(i-1,j), (i-1,j-1), (i,j-1); the local cost d(i,j) is the plain Euclidean
distance between DOF vectors. Backtracking prefers the diagonal on ties, so
results are deterministic; on contrived ties the warped length (and hence the
normalized value) can depend on argument order, but costs never do.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numba as nb
import numpy as np

from .model import Dataset, Trajectory

nb.config.THREADING_LAYER = "workqueue"  # portable; avoids the TBB version probe


@nb.njit(cache=True, nogil=True)
def _accumulate(a, b, band, squared):
    """DP table of accumulated costs inside a |i-j| <= band corridor."""
    n = a.shape[0]
    m = b.shape[0]
    dof = a.shape[1]
    acc = np.full((n, m), np.inf)
    for i in range(n):
        lo = i - band
        if lo < 0:
            lo = 0
        hi = i + band
        if hi > m - 1:
            hi = m - 1
        for j in range(lo, hi + 1):
            s = 0.0
            for c in range(dof):
                diff = a[i, c] - b[j, c]
                s += diff * diff
            cost = s if squared else math.sqrt(s)
            if i == 0 and j == 0:
                acc[0, 0] = cost
                continue
            best = np.inf
            if i > 0 and j > 0 and acc[i - 1, j - 1] < best:
                best = acc[i - 1, j - 1]
            if i > 0 and acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if j > 0 and acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = cost + best
    return acc


@nb.njit(cache=True, nogil=True)
def _step_back(acc, i, j):
    """Predecessor of (i, j) on an optimal path; ties prefer the diagonal,
    then the i-step."""
    best = np.inf
    bi = i
    bj = j
    if i > 0 and j > 0:
        best = acc[i - 1, j - 1]
        bi = i - 1
        bj = j - 1
    if i > 0 and acc[i - 1, j] < best:
        best = acc[i - 1, j]
        bi = i - 1
        bj = j
    if j > 0 and acc[i, j - 1] < best:
        bi = i
        bj = j - 1
    return bi, bj


@nb.njit(cache=True, nogil=True)
def _backtrack(acc):
    """Optimal path from (0,0) to (n-1,m-1) as an (L, 2) index array."""
    n = acc.shape[0]
    m = acc.shape[1]
    maxlen = n + m - 1
    out = np.empty((maxlen, 2), np.int64)
    pos = maxlen - 1
    i = n - 1
    j = m - 1
    out[pos, 0] = i
    out[pos, 1] = j
    while i > 0 or j > 0:
        i, j = _step_back(acc, i, j)
        pos -= 1
        out[pos, 0] = i
        out[pos, 1] = j
    return out[pos:].copy()


@nb.njit(cache=True, nogil=True)
def _path_length(acc):
    """Number of pairs on the optimal path, without materializing it."""
    i = acc.shape[0] - 1
    j = acc.shape[1] - 1
    length = 1
    while i > 0 or j > 0:
        i, j = _step_back(acc, i, j)
        length += 1
    return length


@nb.njit(cache=True, nogil=True, parallel=True)
def _batch_normalized(data, lengths, pairs):
    """Normalized DTW for many (i, j) pairs of padded sequences.

    Each pair writes its own slot, so results do not depend on thread count.
    """
    out = np.empty(pairs.shape[0])
    for p in nb.prange(pairs.shape[0]):
        a = data[pairs[p, 0], : lengths[pairs[p, 0]]]
        b = data[pairs[p, 1], : lengths[pairs[p, 1]]]
        acc = _accumulate(a, b, a.shape[0] + b.shape[0], False)
        out[p] = acc[a.shape[0] - 1, b.shape[0] - 1] / _path_length(acc)
    return out


class Measure(Enum):
    NORMALIZED_DTW = "normalized_dtw"
    BEZIER_EUCLID = "bezier_euclid"


@dataclass(frozen=True)
class WarpPath:
    """Monotone, continuous alignment between two segments (0-based indices)."""

    pairs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pairs, dtype=np.int64)
        arr.flags.writeable = False
        object.__setattr__(self, "pairs", arr)

    def __len__(self) -> int:
        return self.pairs.shape[0]


@dataclass(frozen=True)
class DivergenceMatrix:
    """Symmetric pairwise divergence table with provenance."""

    values: np.ndarray
    measure: Measure
    reversed: np.ndarray
    ids: tuple[str, ...]

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        r = np.asarray(self.reversed, dtype=bool)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"values must be square, got shape {v.shape}")
        if r.shape != v.shape:
            raise ValueError("reversed matrix shape must match values")
        if len(self.ids) != v.shape[0]:
            raise ValueError(f"{len(self.ids)} ids for a {v.shape[0]}x{v.shape[0]} matrix")
        if not np.all(np.isfinite(v)):
            raise ValueError("divergence values must be finite")
        if np.any(v < 0):
            raise ValueError("divergence values must be non-negative")
        if not np.array_equal(v, v.T):
            raise ValueError("divergence matrix must be symmetric")
        if np.any(np.diag(v) != 0):
            raise ValueError("self-divergence must be zero")
        v.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "reversed", r)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BezierFeature:
    """Cubic Bezier control points per channel, P0..P3 row-wise."""

    control_points: np.ndarray

    def __post_init__(self) -> None:
        cp = np.asarray(self.control_points, dtype=np.float64)
        if cp.ndim != 2 or cp.shape[1] != 4:
            raise ValueError(f"control_points must be dof x 4, got {cp.shape}")
        cp.flags.writeable = False
        object.__setattr__(self, "control_points", cp)

    @property
    def vector(self) -> np.ndarray:
        """Feature vector of length 4 * dof (per-channel P0..P3 blocks)."""
        return self.control_points.ravel()


def _check_pair(a: Trajectory, b: Trajectory) -> None:
    if a.model != b.model:
        raise ValueError(f"joint model mismatch: {a.model.name} vs {b.model.name}")
    if a.frames == 0 or b.frames == 0:
        raise ValueError("cannot warp an empty trajectory")


def dtw(a: Trajectory, b: Trajectory, band: int | None = None) -> tuple[float, WarpPath]:
    """Accumulated DTW cost and the optimal warp path.

    ``band`` restricts warping to |i - j| <= band (widened to the length
    difference so the end point stays reachable); None means unconstrained.
    """
    _check_pair(a, b)
    n, m = a.frames, b.frames
    if band is None:
        eff = n + m
    else:
        if band < 0:
            raise ValueError(f"band must be >= 0, got {band}")
        eff = max(band, abs(n - m))
    acc = _accumulate(a.samples, b.samples, eff, False)
    path = _backtrack(acc)
    return float(acc[-1, -1]), WarpPath(path)


def normalized_dtw(a: Trajectory, b: Trajectory, band: int | None = None) -> float:
    """DTW cost divided by the warped length (pairs on the optimal path)."""
    cost, path = dtw(a, b, band)
    return cost / len(path)


def normalized_dtw_pairs(trajectories: list[Trajectory]) -> np.ndarray:
    """Condensed vector of pairwise normalized-DTW values, (i < j) row-major.

    Computes exactly what per-pair :func:`normalized_dtw` calls would, in one
    batched kernel.
    """
    n = len(trajectories)
    if n < 2:
        return np.zeros(0)
    model = trajectories[0].model
    for t in trajectories[1:]:
        if t.model != model:
            raise ValueError("mixed joint models in pairwise computation")
    lengths = np.array([t.frames for t in trajectories], dtype=np.int64)
    data = np.zeros((n, int(lengths.max()), model.dof_count))
    for idx, t in enumerate(trajectories):
        data[idx, : t.frames] = t.samples
    rows, cols = np.triu_indices(n, k=1)
    pairs = np.column_stack((rows, cols)).astype(np.int64)
    return _batch_normalized(data, lengths, pairs)


def bidirectional_divergence(a: Trajectory, b: Trajectory) -> tuple[float, bool]:
    """Smaller of the forward and reversed normalized divergences.

    Returns (value, used_reverse); ties resolve to the forward orientation.
    """
    forward = normalized_dtw(a, b)
    backward = normalized_dtw(a, b.reversed())
    if backward < forward:
        return backward, True
    return forward, False


def znormalize_dataset(dataset: Dataset) -> Dataset:
    """Standardize each channel to zero mean / unit variance across the dataset.

    Pooled over all frames of all segments; constant channels pass through
    centered only. Opt-in preprocessing for divergence computation.
    """
    from .model import Segment  # local import keeps module load order simple

    stacked = np.vstack([s.trajectory.samples for s in dataset.segments])
    mean = stacked.mean(axis=0)
    sd = stacked.std(axis=0)
    sd[sd == 0] = 1.0
    segments = tuple(
        Segment(s.trajectory.with_samples((s.trajectory.samples - mean) / sd), s.meta)
        for s in dataset.segments
    )
    return Dataset(segments, dataset.model)


def divergence_matrix(
    dataset: Dataset,
    measure: Measure = Measure.NORMALIZED_DTW,
    *,
    workers: int = 1,
    z_normalize: bool = False,
) -> DivergenceMatrix:
    """All-pairs divergences for a dataset.

    Pairs are independent and may be computed on any number of workers;
    results are written by pair index, so the matrix is identical regardless
    of worker count or evaluation order.
    """
    if z_normalize:
        dataset = znormalize_dataset(dataset)
    ids = tuple(dataset.segment_ids())
    trajs = dataset.trajectories()
    k = len(trajs)
    values = np.zeros((k, k))
    rev = np.zeros((k, k), dtype=bool)
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]

    if measure is Measure.BEZIER_EUCLID:
        feats = []
        for idx, t in enumerate(trajs):
            try:
                feats.append(fit_cubic_bezier(t))
            except ValueError as e:
                raise ValueError(f"segment {ids[idx]}: {e}") from e
        for i, j in pairs:
            values[i, j] = values[j, i] = bezier_divergence(feats[i], feats[j])
        return DivergenceMatrix(values, measure, rev, ids)

    if measure is not Measure.NORMALIZED_DTW:
        raise ValueError(f"unsupported measure {measure}")

    def one(pair: tuple[int, int]) -> tuple[int, int, float, bool]:
        i, j = pair
        try:
            value, used_reverse = bidirectional_divergence(trajs[i], trajs[j])
        except ValueError as e:
            raise ValueError(f"pair ({ids[i]}, {ids[j]}): {e}") from e
        return i, j, value, used_reverse

    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, pairs))
    else:
        results = [one(p) for p in pairs]
    for i, j, value, used_reverse in results:
        values[i, j] = values[j, i] = value
        rev[i, j] = rev[j, i] = used_reverse
    return DivergenceMatrix(values, measure, rev, ids)


def _bernstein(s: np.ndarray) -> np.ndarray:
    """Cubic Bernstein basis evaluated at s in [0, 1]; columns B0..B3."""
    u = 1.0 - s
    return np.column_stack((u**3, 3 * s * u**2, 3 * s**2 * u, s**3))


def bezier_curve(control_points: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Evaluate per-channel cubic Beziers at parameters s; returns len(s) x dof."""
    return _bernstein(np.asarray(s, dtype=np.float64)) @ np.asarray(control_points).T


def fit_cubic_bezier(trajectory: Trajectory) -> BezierFeature:
    """Least-squares cubic Bezier per channel, uniform parameterization.

    End control points are pinned to the first and last samples; only the two
    interior points are solved for.
    """
    y = trajectory.samples
    n = trajectory.frames
    if n < 4:
        raise ValueError(f"need >= 4 frames to fit a cubic Bezier, got {n}")
    s = np.linspace(0.0, 1.0, n)
    basis = _bernstein(s)
    p0 = y[0]
    p3 = y[-1]
    rhs = y - np.outer(basis[:, 0], p0) - np.outer(basis[:, 3], p3)
    interior, *_ = np.linalg.lstsq(basis[:, 1:3], rhs, rcond=None)
    cp = np.column_stack((p0, interior[0], interior[1], p3))
    return BezierFeature(cp)


def bezier_divergence(a: BezierFeature, b: BezierFeature) -> float:
    """Euclidean distance between two Bezier feature vectors."""
    va, vb = a.vector, b.vector
    if va.shape != vb.shape:
        raise ValueError(f"feature length mismatch: {va.shape[0]} vs {vb.shape[0]}")
    return float(np.linalg.norm(va - vb))
