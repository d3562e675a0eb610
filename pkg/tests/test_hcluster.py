import numpy as np
import pytest

from armclust.divergence import DivergenceMatrix, Measure
from armclust.hcluster import (
    _pam,
    cut,
    find_knee,
    k_medoids,
    l_method,
    merge_curve,
    quality_score,
    repetition_pairs,
    ward_cluster,
)
from armclust.model import Direction, Handedness, SegmentMeta

from oracles import ward_merges_bruteforce


def matrix_from_points(points: np.ndarray) -> DivergenceMatrix:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 1:
        points = points.T
    k = points.shape[0]
    values = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            values[i, j] = values[j, i] = np.linalg.norm(points[i] - points[j])
    ids = tuple(f"p{i:02d}" for i in range(k))
    return DivergenceMatrix(values, Measure.NORMALIZED_DTW, np.zeros((k, k), bool), ids)


def random_matrix(rng, k: int) -> DivergenceMatrix:
    values = np.zeros((k, k))
    upper = rng.uniform(0.1, 5.0, size=(k, k))
    values = np.triu(upper, 1)
    values = values + values.T
    ids = tuple(f"p{i:02d}" for i in range(k))
    return DivergenceMatrix(values, Measure.NORMALIZED_DTW, np.zeros((k, k), bool), ids)


class TestWard:
    def test_two_singletons_merge_at_half_squared_distance(self):
        d = 3.0
        dend = ward_cluster(matrix_from_points([0.0, d]))
        assert len(dend.merges) == 1
        # two points at distance d: combined sum of squares is d^2 / 2
        assert dend.merges[0].height == pytest.approx(d**2 / 2, abs=1e-12)

    def test_line_example_merge_order_and_heights(self):
        dend = ward_cluster(matrix_from_points([0.0, 1.0, 10.0, 11.0]))
        merges = [(m.left, m.right) for m in dend.merges]
        assert merges == [(0, 1), (2, 3), (4, 5)]
        heights = [m.height for m in dend.merges]
        assert heights[0] == pytest.approx(0.5, abs=1e-12)
        assert heights[1] == pytest.approx(0.5, abs=1e-12)
        assert heights[2] == pytest.approx(100.0, abs=1e-10)

    def test_matches_bruteforce_on_euclidean_point_sets(self, rng):
        for _ in range(40):
            k = int(rng.integers(3, 8))
            dim = int(rng.integers(1, 4))
            points = rng.normal(0, 1, (k, dim))
            dend = ward_cluster(matrix_from_points(points))
            expected = ward_merges_bruteforce(points)
            for merge, (left, right, height, size) in zip(dend.merges, expected):
                assert (merge.left, merge.right) == (left, right)
                assert merge.height == pytest.approx(height, abs=1e-10)
                assert merge.size == size

    def test_duplicate_leaves_merge_first_at_zero(self, rng):
        dend = ward_cluster(matrix_from_points([2.0, 5.0, 2.0]))
        assert (dend.merges[0].left, dend.merges[0].right) == (0, 2)
        assert dend.merges[0].height == 0.0

    def test_heights_monotone_on_random_matrices(self, rng):
        for _ in range(200):
            k = int(rng.integers(3, 12))
            dend = ward_cluster(random_matrix(rng, k))
            heights = dend.heights()
            assert np.all(np.diff(heights) >= -1e-12)

    def test_unsquared_mode_also_monotone(self, rng):
        for _ in range(50):
            dend = ward_cluster(random_matrix(rng, 8), square_inputs=False)
            assert np.all(np.diff(dend.heights()) >= -1e-12)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            ward_cluster(matrix_from_points([0.0]))


class TestCut:
    def test_extremes(self):
        dend = ward_cluster(matrix_from_points([0.0, 1.0, 10.0, 11.0]))
        assert set(cut(dend, 1).values()) == {0}
        assert sorted(cut(dend, 4).values()) == [0, 1, 2, 3]

    def test_line_example_two_clusters(self):
        dend = ward_cluster(matrix_from_points([0.0, 1.0, 10.0, 11.0]))
        assignment = cut(dend, 2)
        assert assignment["p00"] == assignment["p01"]
        assert assignment["p02"] == assignment["p03"]
        assert assignment["p00"] != assignment["p02"]

    def test_successive_cuts_split_exactly_one_cluster(self, rng):
        dend = ward_cluster(random_matrix(rng, 10))
        for k in range(1, 10):
            a = cut(dend, k)
            b = cut(dend, k + 1)
            # group b-clusters by their a-cluster; exactly one a-cluster splits
            split = {}
            for leaf, cluster in b.items():
                split.setdefault(a[leaf], set()).add(cluster)
            sizes = sorted(len(v) for v in split.values())
            assert sizes == [1] * (k - 1) + [2]

    def test_out_of_range_rejected(self):
        dend = ward_cluster(matrix_from_points([0.0, 1.0]))
        with pytest.raises(ValueError):
            cut(dend, 0)
        with pytest.raises(ValueError):
            cut(dend, 3)


def two_line_curve(breakpoint_x: int, n_points: int = 30, noise_sd: float = 0.0,
                   rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Steep/shallow line pair crossing between breakpoint_x and its successor."""
    xs = np.arange(2, 2 + n_points)
    a1, b1 = -3.0, 100.0  # steep left line
    a2 = -0.2  # shallow right slope
    x_meet = breakpoint_x + 0.5
    b2 = (a1 - a2) * x_meet + b1
    ys = np.where(xs <= breakpoint_x, a1 * xs + b1, a2 * xs + b2)
    if noise_sd > 0:
        ys = ys + rng.normal(0, noise_sd * (ys.max() - ys.min()), ys.shape)
    return xs, ys.astype(float)


class TestFindKnee:
    def test_exact_breakpoint_recovery_all_positions(self):
        for bp in range(5, 26):
            xs, ys = two_line_curve(bp)
            assert find_knee(xs, ys).num_clusters == bp

    def test_noisy_recovery_within_one(self, rng):
        hits = 0
        for trial in range(100):
            xs, ys = two_line_curve(7, noise_sd=0.01, rng=rng)
            if abs(find_knee(xs, ys).num_clusters - 7) <= 1:
                hits += 1
        assert hits >= 95

    def test_window_shrinks_to_minimum_points(self):
        xs, ys = two_line_curve(7)
        knee = find_knee(xs, ys)
        # 2 * 7 = 14 points would undershoot the 20-point floor
        assert knee.evaluation_window == (2, 21)

    def test_window_respects_custom_minimum(self):
        xs, ys = two_line_curve(7)
        knee = find_knee(xs, ys, min_points=10)
        # refinement keeps points with x <= 2 * 7
        assert knee.evaluation_window == (2, 14)
        assert knee.num_clusters == 7

    def test_flat_line_reports_inspectable_curve(self):
        xs = np.arange(2, 32)
        ys = np.full(30, 5.0)
        knee = find_knee(xs, ys)
        assert len(knee.rmse_curve) > 0
        assert max(r for _, r in knee.rmse_curve) < 1e-9

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError):
            find_knee([2, 3, 4], [3.0, 2.0, 1.0])


class TestLMethod:
    def _dendrogram(self, heights):
        # synthetic dendrogram over k leaves with the given ascending heights
        k = len(heights) + 1
        points = np.zeros(k)  # placeholder leaves; merges injected directly
        from armclust.hcluster import Dendrogram, Merge

        merges = []
        next_node = k
        nodes = list(range(k))
        for i, h in enumerate(heights):
            left, right = nodes[0], nodes[1]
            nodes = nodes[2:] + [next_node]
            merges.append(Merge(min(left, right), max(left, right), float(h), i + 2))
            next_node += 1
        return Dendrogram(tuple(f"l{i}" for i in range(k)), tuple(merges))

    def test_largest_merge_excluded_from_window(self):
        # 30 leaves; the last six merges are expensive, so seven homogeneous
        # groups exist before the costly phase begins
        heights = np.concatenate(
            (np.linspace(0.1, 1.0, 23), [40.0, 55.0, 70.0, 85.0, 100.0, 200.0])
        )
        dend = self._dendrogram(heights)
        knee = l_method(dend)
        assert knee.evaluation_window == (3, 22)  # x = 2 discarded, then 20 points
        assert knee.num_clusters == 7

    def test_curve_orientation(self):
        heights = np.arange(1.0, 11.0)  # 11 leaves
        xs, ys = merge_curve(self._dendrogram(heights))
        assert xs[0] == 2 and xs[-1] == 11
        assert ys[0] == 10.0  # dissolving 2 clusters is the last, largest merge
        assert ys[-1] == 1.0

    def test_too_few_merges_rejected(self):
        dend = self._dendrogram([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            l_method(dend)


class TestKMedoids:
    def test_k_equals_size_gives_singletons(self, rng):
        m = random_matrix(rng, 6)
        labels = k_medoids(m, 6, restarts=3, seed=1)
        assert sorted(labels.values()) == list(range(6))

    def test_two_blobs_recovered(self, rng):
        # blobs with inter/intra divergence ratio >= 10
        k = 10
        values = np.zeros((k, k))
        for i in range(k):
            for j in range(i + 1, k):
                same = (i < 5) == (j < 5)
                values[i, j] = values[j, i] = rng.uniform(0.5, 1.0) if same else rng.uniform(10.0, 12.0)
        ids = tuple(f"p{i:02d}" for i in range(k))
        m = DivergenceMatrix(values, Measure.NORMALIZED_DTW, np.zeros((k, k), bool), ids)
        labels = k_medoids(m, 2, seed=0)
        first = {labels[f"p{i:02d}"] for i in range(5)}
        second = {labels[f"p{i:02d}"] for i in range(5, 10)}
        assert len(first) == 1 and len(second) == 1 and first != second

    def test_deterministic_given_seed(self, rng):
        m = random_matrix(rng, 12)
        a = k_medoids(m, 3, seed=42)
        b = k_medoids(m, 3, seed=42)
        assert a == b

    def test_best_of_restarts_by_objective(self, rng):
        m = random_matrix(rng, 12)
        labels = k_medoids(m, 3, restarts=10, seed=5)

        def objective(assign):
            clusters = {}
            for sid, c in assign.items():
                clusters.setdefault(c, []).append(int(sid[1:]))
            total = 0.0
            for members in clusters.values():
                sub = m.values[np.ix_(members, members)]
                costs = sub.sum(axis=1)
                total += costs.min()
            return total

        best = objective(labels)
        for r in range(10):
            rng_r = np.random.default_rng([5, r])
            init = rng_r.choice(12, size=3, replace=False)
            _, _, history = _pam(m.values, init)
            assert best <= history[-1] + 1e-12

    def test_inner_objective_non_increasing(self, rng):
        for _ in range(20):
            m = random_matrix(rng, 15)
            init = rng.choice(15, size=4, replace=False)
            _, _, history = _pam(m.values, init)
            assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))

    def test_out_of_range_rejected(self, rng):
        m = random_matrix(rng, 5)
        with pytest.raises(ValueError):
            k_medoids(m, 0)
        with pytest.raises(ValueError):
            k_medoids(m, 6)


def metas_grid(subjects=2, motions=2, reps=3):
    out = []
    for s in range(subjects):
        for t in range(motions):
            for r in range(1, reps + 1):
                out.append(
                    SegmentMeta(f"t{t}", 1, f"s{s}", r, Direction.FORWARD, Handedness.RIGHT)
                )
    return out


class TestQualityScore:
    def test_single_cluster_is_perfect(self):
        metas = metas_grid()
        assignment = {m.segment_id: 0 for m in metas}
        assert quality_score(assignment, metas) == 1.0

    def test_all_singletons_scores_zero(self):
        metas = metas_grid()
        assignment = {m.segment_id: i for i, m in enumerate(metas)}
        assert quality_score(assignment, metas) == 0.0

    def test_pair_count_formula(self):
        metas = metas_grid(subjects=12, motions=85, reps=3)
        assert len(repetition_pairs(metas)) == 3 * 85 * 12

    def test_grouped_by_motion_and_subject_stays_perfect(self):
        # one cluster per (subject, motion): 1020 clusters for the 85 x 12 x 3
        # corpus shape, still a perfect score
        metas = metas_grid(subjects=12, motions=85, reps=3)
        assignment = {m.segment_id: (m.subject_id, m.task_code) for m in metas}
        remap = {key: i for i, key in enumerate(sorted(set(assignment.values())))}
        assignment = {sid: remap[key] for sid, key in assignment.items()}
        assert len(set(assignment.values())) == 1020
        assert quality_score(assignment, metas) == 1.0

    def test_missing_repetitions_rejected(self):
        metas = [SegmentMeta("t0", 1, "s0", 1, Direction.FORWARD, Handedness.RIGHT)]
        with pytest.raises(ValueError):
            quality_score({metas[0].segment_id: 0}, metas)

    def test_uncovered_segment_rejected(self):
        metas = metas_grid(subjects=1, motions=1, reps=2)
        with pytest.raises(ValueError):
            quality_score({}, metas)

    def test_monotone_along_dendrogram_cuts(self, rng):
        metas = metas_grid(subjects=3, motions=4, reps=3)
        k = len(metas)
        m = random_matrix(rng, k)
        m = DivergenceMatrix(
            m.values, m.measure, np.zeros((k, k), bool), tuple(x.segment_id for x in metas)
        )
        dend = ward_cluster(m)
        scores = [quality_score(cut(dend, kk), metas) for kk in range(1, k + 1)]
        assert all(b <= a + 1e-12 for a, b in zip(scores, scores[1:]))
