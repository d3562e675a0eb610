"""Within-cluster variability via functional PCA on B-spline coefficients.

Curves are represented on a clamped cubic B-spline basis with three equal
spans (6 basis functions per channel); principal components are eigenvectors
of the coefficient covariance. Coefficient vectors are raw by default; a
Gram-weighted mode is available for an L2 curve metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline
from scipy.special import roots_legendre

from .divergence import normalized_dtw_pairs
from .model import JointModel, Trajectory

SPLINE_DEGREE = 3
SPLINE_SPANS = 3
BASIS_SIZE = SPLINE_DEGREE + SPLINE_SPANS  # 6 coefficients per channel


def bspline_knots(frames: int) -> np.ndarray:
    """Clamped knot vector for 3 equal spans over [0, frames - 1]."""
    b = float(frames - 1)
    return np.concatenate(
        (np.zeros(SPLINE_DEGREE + 1), [b / 3.0, 2.0 * b / 3.0], np.full(SPLINE_DEGREE + 1, b))
    )


def bspline_design(frames: int) -> np.ndarray:
    """Design matrix of the basis at the integer sample grid, frames x 6."""
    x = np.arange(frames, dtype=np.float64)
    return BSpline.design_matrix(x, bspline_knots(frames), SPLINE_DEGREE).toarray()


def bspline_gram(frames: int) -> np.ndarray:
    """Exact Gram matrix of the basis under the L2 inner product on the domain."""
    knots = bspline_knots(frames)
    nodes, weights = roots_legendre(SPLINE_DEGREE + 1)
    gram = np.zeros((BASIS_SIZE, BASIS_SIZE))
    breaks = np.unique(knots)
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
        pts = mid + half * nodes
        basis = BSpline.design_matrix(pts, knots, SPLINE_DEGREE).toarray()
        gram += half * (basis * weights[:, None]).T @ basis
    return gram


@dataclass(frozen=True)
class SplineFit:
    """Per-channel least-squares spline coefficients for one segment."""

    coefficients: np.ndarray  # basis_size x dof
    knots: np.ndarray
    domain_length: int

    def evaluate(self) -> np.ndarray:
        """Fitted curve at the sample grid (the least-squares projection)."""
        return bspline_design(self.domain_length) @ self.coefficients


def fit_bspline(trajectory: Trajectory) -> SplineFit:
    """Least-squares fit of every channel on the 6-function basis."""
    n = trajectory.frames
    if n < BASIS_SIZE:
        raise ValueError(f"need >= {BASIS_SIZE} frames for the spline basis, got {n}")
    design = bspline_design(n)
    coef, *_ = np.linalg.lstsq(design, trajectory.samples, rcond=None)
    return SplineFit(coef, bspline_knots(n), n)


@dataclass(frozen=True)
class FpcaResult:
    """Principal modes of a cluster's coefficient vectors.

    Coefficient vectors are flattened channel-major (six coefficients per
    channel, channels concatenated). ``components`` rows are unit-norm and
    mutually orthogonal; ``member_scores @ components + mean_coefficients``
    reconstructs every member's spline fit. A cluster of identical members
    has zero total variance and is reported with no components.
    """

    mean_coefficients: np.ndarray
    components: np.ndarray
    variance_fractions: np.ndarray
    pairwise_divergence_mean: float
    eigenvalues: np.ndarray
    member_scores: np.ndarray
    total_variance: float
    domain_length: int
    model: JointModel
    frame_rate: float

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def _coefficients_to_trajectory(self, flat: np.ndarray) -> Trajectory:
        coef = flat.reshape(self.model.dof_count, BASIS_SIZE).T
        samples = bspline_design(self.domain_length) @ coef
        return Trajectory(samples, self.frame_rate, self.model)

    def mean_curve(self) -> Trajectory:
        return self._coefficients_to_trajectory(self.mean_coefficients)


def _flatten(coefficients: np.ndarray) -> np.ndarray:
    # channel-major blocks: [ch0 c0..c5, ch1 c0..c5, ...]
    return coefficients.T.ravel()


def cluster_fpca(
    members: list[Trajectory],
    average: Trajectory,
    gram_weighted: bool = False,
) -> FpcaResult:
    """PCA of member spline coefficients about their mean.

    Members must already be aligned to the average's length with reversals
    applied. Also reports the mean pairwise normalized-DTW divergence among
    the members.
    """
    if len(members) < 2:
        raise ValueError(f"need >= 2 members for fPCA, got {len(members)}")
    for m in members:
        if m.frames != average.frames:
            raise ValueError(
                f"member length {m.frames} != average length {average.frames}; align first"
            )
        if m.model != average.model:
            raise ValueError("member model differs from average model")

    rows = np.vstack([_flatten(fit_bspline(m).coefficients) for m in members])
    mean = rows.mean(axis=0)
    centered = rows - mean

    # In gram-weighted mode the PCA runs in the whitened (L2 curve metric)
    # space; components are mapped back so reconstruction still works, at the
    # price of raw-space orthonormality.
    transform = None
    work = centered
    if gram_weighted:
        gram = bspline_gram(average.frames)
        dof = average.model.dof_count
        transform = np.linalg.cholesky(np.kron(np.eye(dof), gram))
        work = centered @ transform

    cov = work.T @ work / (len(members) - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]

    pairwise_mean = float(np.mean(normalized_dtw_pairs(members)))

    total = float(eigvals.sum())
    scale = max(1.0, float(mean @ mean))
    if total <= 1e-18 * scale:
        dim = rows.shape[1]
        return FpcaResult(
            mean_coefficients=mean,
            components=np.zeros((0, dim)),
            variance_fractions=np.zeros(0),
            pairwise_divergence_mean=pairwise_mean,
            eigenvalues=np.zeros(0),
            member_scores=np.zeros((len(members), 0)),
            total_variance=0.0,
            domain_length=average.frames,
            model=average.model,
            frame_rate=average.frame_rate,
        )

    components = eigvecs.T
    scores = work @ eigvecs
    if transform is not None:
        components = eigvecs.T @ np.linalg.inv(transform)
    return FpcaResult(
        mean_coefficients=mean,
        components=components,
        variance_fractions=eigvals / total,
        pairwise_divergence_mean=pairwise_mean,
        eigenvalues=eigvals,
        member_scores=scores,
        total_variance=total,
        domain_length=average.frames,
        model=average.model,
        frame_rate=average.frame_rate,
    )


def components_to_cover(result: FpcaResult, threshold: float) -> int:
    """Smallest number of leading components explaining >= threshold variance."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if result.n_components == 0:
        return 0
    cumulative = np.cumsum(result.variance_fractions)
    return int(np.searchsorted(cumulative, threshold - 1e-12) + 1)


def reconstruct_component(
    result: FpcaResult, k: int, alpha: float | None = None
) -> tuple[Trajectory, Trajectory]:
    """Variation curves mean +/- alpha * component_k around the mean curve.

    ``k`` is 1-based; when ``alpha`` is not given it defaults to the
    component's variance fraction.
    """
    if not 1 <= k <= result.n_components:
        raise ValueError(f"component index must be in [1, {result.n_components}], got {k}")
    if alpha is None:
        alpha = float(result.variance_fractions[k - 1])
    direction = result.components[k - 1]
    plus = result._coefficients_to_trajectory(result.mean_coefficients + alpha * direction)
    minus = result._coefficients_to_trajectory(result.mean_coefficients - alpha * direction)
    return plus, minus
