import numpy as np
import pytest

from armclust.divergence import divergence_matrix
from armclust.model import Direction
from armclust.synth import SynthSpec, generate, minimum_jerk_profile, motion_labels


class TestMinimumJerk:
    def test_constant_when_endpoints_equal(self):
        profile = minimum_jerk_profile(0.4, 0.4, 25)
        assert np.allclose(profile, 0.4)

    def test_endpoints_and_midpoint(self):
        profile = minimum_jerk_profile(-1.0, 1.0, 41)
        assert profile[0] == -1.0
        assert profile[-1] == 1.0
        assert profile[20] == pytest.approx(0.0, abs=1e-12)  # odd symmetry

    def test_boundary_velocities_vanish(self):
        frames = 200
        profile = minimum_jerk_profile(0.0, 1.0, frames)
        d = np.diff(profile)
        bound = 10.0 / frames**2  # quintic has zero boundary slope/curvature
        assert abs(d[0]) < bound
        assert abs(d[-1]) < bound

    def test_monotone_between_endpoints(self):
        profile = minimum_jerk_profile(0.0, 2.0, 50)
        assert np.all(np.diff(profile) >= 0)

    def test_too_few_frames_rejected(self):
        with pytest.raises(ValueError):
            minimum_jerk_profile(0.0, 1.0, 1)


class TestSpecValidation:
    def test_defaults_are_valid(self):
        spec = SynthSpec()
        assert spec.num_clusters == 5
        assert spec.subjects == 12
        assert spec.repetitions == 3

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            SynthSpec(num_clusters=0)
        with pytest.raises(ValueError):
            SynthSpec(repetitions=1)
        with pytest.raises(ValueError):
            SynthSpec(noise_sd=-0.1)
        with pytest.raises(ValueError):
            SynthSpec(duration_jitter=1.0)


SMALL = dict(num_clusters=3, motions_per_cluster=2, subjects=3, repetitions=2, base_frames=24)


class TestGenerate:
    def test_same_seed_is_bit_identical(self):
        a, labels_a = generate(SynthSpec(seed=11, **SMALL))
        b, labels_b = generate(SynthSpec(seed=11, **SMALL))
        assert labels_a == labels_b
        for sa, sb in zip(a.segments, b.segments):
            assert sa.meta == sb.meta
            assert np.array_equal(sa.trajectory.samples, sb.trajectory.samples)

    def test_different_seed_differs(self):
        a, _ = generate(SynthSpec(seed=11, **SMALL))
        b, _ = generate(SynthSpec(seed=12, **SMALL))
        assert not np.array_equal(a.segments[0].trajectory.samples,
                                  b.segments[0].trajectory.samples)

    def test_corpus_shape(self):
        spec = SynthSpec(seed=0, **SMALL)
        dataset, labels = generate(spec)
        assert len(dataset) == 3 * 2 * 3 * 2
        assert len(labels) == len(dataset)
        assert set(labels) == {0, 1, 2}
        motions = {s.meta.motion_id for s in dataset.segments}
        assert len(motions) == 6

    def test_single_cluster_labels(self):
        spec = SynthSpec(seed=0, num_clusters=1, motions_per_cluster=2,
                         subjects=2, repetitions=2, base_frames=20)
        _, labels = generate(spec)
        assert set(labels) == {0}

    def test_return_segments_are_reversed_templates(self):
        spec = SynthSpec(seed=5, noise_sd=0.0, duration_jitter=0.0, **{
            k: v for k, v in SMALL.items() if k not in ()})
        dataset, labels = generate(spec)
        by_cluster_fwd = {}
        for seg, label in zip(dataset.segments, labels):
            if seg.meta.direction is Direction.FORWARD:
                by_cluster_fwd.setdefault(label, seg.trajectory.samples)
        for seg, label in zip(dataset.segments, labels):
            if seg.meta.direction is Direction.RETURN and label in by_cluster_fwd:
                assert np.array_equal(
                    seg.trajectory.samples[::-1], by_cluster_fwd[label]
                )

    def test_zero_noise_divergence_is_block_zero(self):
        spec = SynthSpec(seed=2, noise_sd=0.0, duration_jitter=0.0, **SMALL)
        dataset, labels = generate(spec)
        matrix = divergence_matrix(dataset)
        labels = np.array(labels)
        same = labels[:, None] == labels[None, :]
        assert np.all(matrix.values[same] == 0.0)
        assert np.all(matrix.values[~same] > 0.0)

    def test_motion_labels_mapping(self):
        spec = SynthSpec(seed=0, **SMALL)
        dataset, labels = generate(spec)
        mapping = motion_labels(dataset, labels)
        assert len(mapping) == 6
        for seg, label in zip(dataset.segments, labels):
            assert mapping[seg.meta.motion_id] == label
