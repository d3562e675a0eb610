import json

import numpy as np
import pytest

from armclust import io as aio
from armclust.divergence import Measure, divergence_matrix
from armclust.fpca import cluster_fpca
from armclust.hcluster import l_method, ward_cluster
from armclust.kinematics import ArmGeometry, end_effector_trace, trace_motion
from armclust.model import FULL7, Dataset, Handedness, Segment, SegmentMeta, Trajectory
from armclust.synth import SynthSpec, generate

from conftest import smooth_random

SMALL = SynthSpec(num_clusters=2, motions_per_cluster=2, subjects=3,
                  repetitions=2, base_frames=24, seed=9)


@pytest.fixture
def dataset():
    return generate(SMALL)[0]


class TestDatasetRoundTrip:
    def test_round_trip_is_exact(self, tmp_path, dataset):
        manifest = aio.write_dataset(tmp_path, dataset)
        loaded = aio.read_dataset(manifest)
        assert loaded.model == dataset.model
        assert len(loaded) == len(dataset)
        for a, b in zip(dataset.segments, loaded.segments):
            assert a.meta == b.meta
            assert np.array_equal(a.trajectory.samples, b.trajectory.samples)
            assert a.trajectory.frame_rate == b.trajectory.frame_rate

    def test_content_hash_stability(self, tmp_path, dataset):
        h1 = aio.dataset_content_hash(dataset)
        manifest = aio.write_dataset(tmp_path, dataset)
        h2 = aio.dataset_content_hash(aio.read_dataset(manifest))
        assert h1 == h2

    def test_degrees_flag_converts(self, tmp_path):
        samples_deg = np.array([[0.0], [90.0], [180.0]])
        model = FULL7
        samples = np.tile(samples_deg, (1, 7))
        t = Trajectory(samples, 100.0, model)
        ds = Dataset((Segment(t, SegmentMeta("tk", 1, "s0", 1)),), model)
        manifest = aio.write_dataset(tmp_path, ds)
        # rewrite the manifest to declare degrees
        payload = json.loads(manifest.read_text())
        payload["angle_unit"] = "degrees"
        manifest.write_text(json.dumps(payload))
        loaded = aio.read_dataset(manifest, allow_wrap_jumps=True)
        assert np.allclose(loaded.segments[0].trajectory.samples[:, 0],
                           [0.0, np.pi / 2, np.pi])

    def test_wrap_jump_rejected_without_override(self, tmp_path):
        samples = np.zeros((4, 7))
        samples[2, 3] = 3.5  # > pi jump between consecutive frames
        ds = Dataset(
            (Segment(Trajectory(samples, 100.0, FULL7), SegmentMeta("tk", 1, "s0", 1)),),
            FULL7,
        )
        manifest = aio.write_dataset(tmp_path, ds)
        with pytest.raises(ValueError, match="wrap"):
            aio.read_dataset(manifest)
        loaded = aio.read_dataset(manifest, allow_wrap_jumps=True)
        assert loaded.segments[0].trajectory.samples[2, 3] == 3.5

    def test_labels_round_trip(self, tmp_path):
        ds, labels = generate(SMALL)
        aio.write_labels(tmp_path / "labels.json", ds, labels)
        loaded = aio.read_labels(tmp_path / "labels.json")
        for seg, label in zip(ds.segments, labels):
            assert loaded[seg.meta.segment_id] == label


class TestMatrixRoundTrip:
    def test_divergence_matrix_round_trip_exact(self, tmp_path, dataset):
        matrix = divergence_matrix(dataset)
        aio.write_divergence_matrix(tmp_path / "m.csv", matrix)
        loaded = aio.read_divergence_matrix(tmp_path / "m.csv")
        assert np.array_equal(loaded.values, matrix.values)
        assert np.array_equal(loaded.reversed, matrix.reversed)
        assert loaded.ids == matrix.ids
        assert loaded.measure is Measure.NORMALIZED_DTW


class TestDendrogramRoundTrip:
    def test_json_round_trip(self, tmp_path, dataset):
        dend = ward_cluster(divergence_matrix(dataset))
        aio.write_dendrogram(tmp_path / "d.json", dend)
        loaded = aio.read_dendrogram(tmp_path / "d.json")
        assert loaded == dend

    def test_newick_is_well_formed(self, dataset):
        dend = ward_cluster(divergence_matrix(dataset))
        text = aio.dendrogram_to_newick(dend)
        assert text.endswith(";")
        assert text.count("(") == len(dend.merges)
        for leaf in dend.leaf_ids:
            assert leaf in text

    def test_knee_round_trip(self, tmp_path, dataset):
        dend = ward_cluster(divergence_matrix(dataset))
        knee = l_method(dend, min_points=5)
        aio.write_knee(tmp_path / "knee.csv", knee)
        loaded = aio.read_knee(tmp_path / "knee.csv")
        assert loaded == knee

    def test_assignment_round_trip(self, tmp_path):
        assignment = {"a.1.s0.1": 0, "b.1.s0.1": 1}
        aio.write_assignment(tmp_path / "a.json", assignment)
        assert aio.read_assignment(tmp_path / "a.json") == assignment


class TestFpcaRoundTrip:
    def test_fpca_round_trip_exact(self, tmp_path, rng):
        # serialization names the joint model, so members must use a catalog one
        from armclust.model import WRIST_ONLY3

        members = [
            Trajectory(rng.normal(0, 0.5, (25, 3)), 100.0, WRIST_ONLY3) for _ in range(6)
        ]
        result = cluster_fpca(members, members[0])
        aio.write_fpca(tmp_path / "f.json", result)
        loaded = aio.read_fpca(tmp_path / "f.json")
        assert np.array_equal(loaded.mean_coefficients, result.mean_coefficients)
        assert np.array_equal(loaded.components, result.components)
        assert np.array_equal(loaded.variance_fractions, result.variance_fractions)
        assert np.array_equal(loaded.member_scores, result.member_scores)
        assert loaded.pairwise_divergence_mean == result.pairwise_divergence_mean
        assert loaded.model == result.model
        assert loaded.domain_length == result.domain_length


class TestTraceExport:
    def test_pose_trace_and_csv(self, tmp_path, rng):
        t = Trajectory(rng.normal(0, 0.5, (8, 7)), 100.0, FULL7)
        geometry = ArmGeometry()
        poses = trace_motion(t, geometry)
        aio.write_pose_trace(tmp_path / "trace.json", poses, geometry)
        aio.write_end_effector_csv(tmp_path / "ee.csv", end_effector_trace(poses))
        payload = json.loads((tmp_path / "trace.json").read_text())
        assert len(payload["frames"]) == 8
        quat = payload["frames"][0]["hand"]["quaternion"]
        assert abs(np.linalg.norm(quat) - 1.0) < 1e-9
        trace = aio.read_end_effector_csv(tmp_path / "ee.csv")
        assert np.array_equal(trace, end_effector_trace(poses))
