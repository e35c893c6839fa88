import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from fewvid.core import (
    NoiseSchedule,
    RngStream,
    seeded_uniform,
    temporal_stats,
    top_percentile_indices,
    validate_video,
)


class TestTemporalStats:
    def test_constant_video(self):
        feats = torch.full((5, 3, 3, 2), 3.0)
        stats = temporal_stats(feats)
        assert torch.allclose(stats.mean, torch.full((3, 3, 2), 3.0))
        assert torch.allclose(stats.std, torch.zeros(3, 3, 2))

    def test_two_point_symmetry(self):
        feats = torch.zeros(2, 1, 1, 1)
        feats[1] = 2.0
        stats = temporal_stats(feats)
        assert stats.mean.item() == pytest.approx(1.0)
        # population std: sqrt(((0-1)^2 + (2-1)^2) / 2) = 1
        assert stats.std.item() == pytest.approx(1.0)

    def test_matches_per_position_loop(self):
        g = torch.Generator().manual_seed(7)
        feats = torch.randn(4, 3, 2, 5, generator=g)
        stats = temporal_stats(feats)
        for i in range(3):
            for j in range(2):
                for k in range(5):
                    col = feats[:, i, j, k]
                    mean = sum(float(x) for x in col) / 4
                    var = sum((float(x) - mean) ** 2 for x in col) / 4
                    assert abs(float(stats.mean[i, j, k]) - mean) < 1e-6
                    assert abs(float(stats.std[i, j, k]) - math.sqrt(var)) < 1e-6

    def test_single_frame_zero_std(self):
        stats = temporal_stats(torch.randn(1, 2, 2, 3))
        assert torch.all(stats.std == 0)

    def test_reconstruction_roundtrip(self):
        g = torch.Generator().manual_seed(3)
        feats = torch.randn(6, 4, 4, 8, generator=g)
        stats = temporal_stats(feats)
        normalized = (feats - stats.mean) / stats.std
        rebuilt = stats.mean + stats.std * normalized
        assert torch.allclose(rebuilt, feats, atol=1e-6)


class TestTopPercentileIndices:
    def test_top_ten_percent_of_ten(self):
        s = torch.arange(10, dtype=torch.float32)
        idx = top_percentile_indices(s, 90.0)
        assert idx.tolist() == [9]

    def test_all_ties_stable(self):
        idx = top_percentile_indices(torch.zeros(10), 90.0)
        assert idx.tolist() == [0]

    def test_matches_full_sort_oracle(self):
        g = torch.Generator().manual_seed(11)
        s = torch.randn(320, generator=g)
        idx = top_percentile_indices(s, 75.0)
        oracle = sorted(range(320), key=lambda i: (-float(s[i]), i))[:80]
        assert idx.tolist() == sorted(oracle)

    def test_rejects_bad_tau(self):
        with pytest.raises(ValueError):
            top_percentile_indices(torch.ones(4), 0.0)
        with pytest.raises(ValueError):
            top_percentile_indices(torch.ones(4), 100.0)
        with pytest.raises(ValueError):
            top_percentile_indices(torch.ones(4), -5.0)

    @given(c=st.integers(min_value=1, max_value=200),
           tau=st.floats(min_value=0.01, max_value=99.99))
    @settings(max_examples=100, deadline=None)
    def test_count_property(self, c, tau):
        idx = top_percentile_indices(torch.randn(c), tau)
        expected = math.ceil(c * (100.0 - tau) / 100.0)
        assert idx.numel() == expected
        assert idx.numel() == idx.unique().numel()


class TestRngStream:
    def test_degenerate_range(self):
        assert seeded_uniform(RngStream(0, "x"), 5.0, 5.0) == 5.0

    def test_same_seed_same_sequence(self):
        a = RngStream(42, "augment")
        b = RngStream(42, "augment")
        xs = [a.uniform(0, 1) for _ in range(16)]
        ys = [b.uniform(0, 1) for _ in range(16)]
        assert xs == ys

    def test_different_seeds_differ(self):
        a = RngStream(0, "augment")
        b = RngStream(1, "augment")
        xs = [a.uniform(0, 1) for _ in range(8)]
        ys = [b.uniform(0, 1) for _ in range(8)]
        assert xs != ys

    def test_different_labels_differ(self):
        a = RngStream(0, "augment")
        b = RngStream(0, "distort")
        assert [a.uniform(0, 1) for _ in range(8)] != [b.uniform(0, 1) for _ in range(8)]

    def test_child_streams_deterministic(self):
        a = RngStream(9, "train").child("step3")
        b = RngStream(9, "train").child("step3")
        assert torch.equal(a.normal((4,)), b.normal((4,)))

    def test_rejects_inverted_bounds(self):
        with pytest.raises(ValueError):
            RngStream(0).uniform(2.0, 1.0)

    def test_array_variant_in_range(self):
        x = RngStream(5, "r").uniform(-2.0, 3.0, shape=(100,))
        assert float(x.min()) >= -2.0 and float(x.max()) < 3.0

    def test_state_roundtrip(self):
        rng = RngStream(1, "s")
        rng.uniform(0, 1)
        state = rng.get_state()
        first = rng.normal((5,))
        rng.set_state(state)
        assert torch.equal(rng.normal((5,)), first)


class TestNoiseSchedule:
    def test_scaled_linear_endpoints(self):
        sched = NoiseSchedule.scaled_linear(T=1000)
        assert sched.alphabar_at(0) == 1.0
        assert sched.alphabar_at(1000) < 0.01
        diffs = sched.alphabar[1:] - sched.alphabar[:-1]
        assert (diffs < 0).all()

    def test_rejects_non_monotone(self):
        with pytest.raises(ValueError):
            NoiseSchedule(torch.tensor([1.0, 0.5, 0.6, 0.01]))

    def test_rejects_bad_head(self):
        with pytest.raises(ValueError):
            NoiseSchedule(torch.tensor([0.9, 0.5, 0.01]))

    def test_rejects_out_of_range_timestep(self):
        sched = NoiseSchedule(0.5 ** torch.arange(11, dtype=torch.float64))
        with pytest.raises(ValueError):
            sched.alphabar_at(11)


class TestValidation:
    def test_rejects_out_of_range_video(self):
        with pytest.raises(ValueError):
            validate_video(torch.full((2, 4, 4, 3), 1.5))

    def test_rejects_non_finite(self):
        v = torch.zeros(2, 4, 4, 3)
        v[0, 0, 0, 0] = float("nan")
        with pytest.raises(ValueError):
            validate_video(v)

    def test_accepts_valid(self):
        v = torch.rand(3, 4, 4, 3)
        assert validate_video(v) is v
