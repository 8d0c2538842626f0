import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import framenet as fn
from framenet.data import corrupt_labels_uniform, permute_columns, subset

from conftest import nearest_mean_accuracy


def small_spec(**kw):
    base = dict(
        groups=3,
        subclasses=2,
        base_dim=4,
        frames_per_class=50,
        group_separation=8.0,
        subclass_separation=2.0,
        noise_std=0.5,
        seed=11,
    )
    base.update(kw)
    return fn.SyntheticSpec(**base)


class TestGenerateSynthetic:
    def test_two_well_separated_groups_are_linearly_classifiable(self):
        spec = small_spec(
            groups=2, subclasses=1, group_separation=50.0, noise_std=0.01,
            frames_per_class=500,
        )
        d = fn.generate_synthetic(spec)
        assert nearest_mean_accuracy(d) >= 0.99

    def test_single_subclass_gives_identity_group_map(self):
        d = fn.generate_synthetic(small_spec(subclasses=1))
        assert np.array_equal(d.group_of, np.arange(d.num_classes))

    def test_same_seed_is_byte_identical(self):
        a = fn.generate_synthetic(small_spec())
        b = fn.generate_synthetic(small_spec())
        assert np.array_equal(a.frames, b.frames)
        assert np.array_equal(a.labels, b.labels)
        assert a.frames.tobytes() == b.frames.tobytes()

    def test_layout_is_class_contiguous(self):
        d = fn.generate_synthetic(small_spec(frames_per_class=10))
        assert np.array_equal(d.labels, np.repeat(np.arange(d.num_classes), 10))


class TestSplice:
    def test_zero_context_is_identity(self):
        frames = fn.Rng(0).normal((5, 3))
        assert np.array_equal(fn.splice(frames, 0), frames)

    def test_paper_dimensions(self):
        # 40-dim features with +-10 frames of context -> 840 inputs
        out = fn.splice(np.zeros((7, 40)), 10)
        assert out.shape == (7, 840)

    def test_edge_replication_hand_case(self):
        frames = np.array([[1.0], [2.0], [3.0]])
        out = fn.splice(frames, 1)
        assert np.array_equal(out, [[1, 1, 2], [1, 2, 3], [2, 3, 3]])

    @given(st.integers(1, 20), st.integers(1, 5), st.integers(0, 4))
    @settings(max_examples=30, deadline=None)
    def test_shape_contract(self, n, d, c):
        frames = fn.Rng(3).normal((n, d))
        out = fn.splice(frames, c)
        assert out.shape == (n, d * (2 * c + 1))

    def test_dataset_level_records_grid(self):
        d = fn.generate_synthetic(small_spec())
        s = fn.splice_dataset(d, 2)
        assert s.grid_dims == (5, d.dim)
        assert s.num_frames == d.num_frames


class TestNormalizeGlobal:
    def test_columns_standardized(self):
        d = fn.generate_synthetic(small_spec())
        n, mean, std = fn.normalize_global(d)
        assert np.max(np.abs(n.frames.mean(axis=0))) < 1e-10
        assert np.max(np.abs(n.frames.std(axis=0) - 1.0)) < 1e-10

    def test_constant_column_floors_to_zero(self):
        frames = np.ones((10, 2))
        frames[:, 1] = np.arange(10)
        d = fn.Dataset(frames=frames, labels=np.zeros(10, dtype=int), num_classes=1,
                       group_of=np.zeros(1, dtype=int))
        n, mean, std = fn.normalize_global(d)
        assert np.all(n.frames[:, 0] == 0.0)
        assert np.all(np.isfinite(n.frames))

    def test_returned_stats_reproduce_normalized_set_exactly(self):
        d = fn.generate_synthetic(small_spec())
        n, mean, std = fn.normalize_global(d)
        again = fn.apply_normalization(d, mean, std)
        assert np.array_equal(again.frames, n.frames)

    def test_fixed_point(self):
        d = fn.generate_synthetic(small_spec())
        n, mean, std = fn.normalize_global(d)
        n2, mean2, std2 = fn.normalize_global(n)
        assert np.max(np.abs(n2.frames - n.frames)) < 1e-9


class TestCorruptLabels:
    def test_rate_zero_unchanged(self):
        d = fn.generate_synthetic(small_spec())
        c = fn.corrupt_labels(d, 0.0, fn.Rng(0))
        assert np.array_equal(c.labels, d.labels)
        assert np.array_equal(c.true_labels, d.labels)

    def test_rate_one_with_two_subclasses_flips_to_sibling(self):
        d = fn.generate_synthetic(small_spec(subclasses=2))
        c = fn.corrupt_labels(d, 1.0, fn.Rng(0))
        assert np.all(c.labels != c.true_labels)
        # sibling of class k under S=2 is k^1
        assert np.array_equal(c.labels, c.true_labels ^ 1)

    def test_measured_flip_fraction(self):
        d = fn.generate_synthetic(
            small_spec(groups=5, subclasses=4, frames_per_class=5000, noise_std=1.0)
        )
        c = fn.corrupt_labels(d, 0.2, fn.Rng(123))
        frac = float((c.labels != c.true_labels).mean())
        assert 0.19 <= frac <= 0.21

    def test_single_subclass_rejected_for_positive_rate(self):
        d = fn.generate_synthetic(small_spec(subclasses=1))
        with pytest.raises(fn.ParameterError):
            fn.corrupt_labels(d, 0.1, fn.Rng(0))

    @given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.95))
    @settings(max_examples=20, deadline=None)
    def test_groups_conserved(self, seed, rate):
        d = fn.generate_synthetic(small_spec(frames_per_class=20))
        c = fn.corrupt_labels(d, rate, fn.Rng(seed))
        assert np.array_equal(c.group_of[c.labels], c.group_of[c.true_labels])

    def test_uniform_variant_can_cross_groups(self):
        d = fn.generate_synthetic(small_spec(frames_per_class=200))
        c = corrupt_labels_uniform(d, 1.0, fn.Rng(5))
        assert np.all(c.labels != c.true_labels)
        assert np.any(c.group_of[c.labels] != c.group_of[c.true_labels])


class TestSubsetAndSplit:
    def test_split_partitions_rows(self):
        d = fn.generate_synthetic(small_spec())
        tr, dev = fn.split_train_dev(d, 0.25, seed=7)
        assert tr.num_frames + dev.num_frames == d.num_frames
        assert dev.num_frames == round(d.num_frames * 0.25)

    def test_zero_fraction_aliases_train(self):
        d = fn.generate_synthetic(small_spec())
        tr, dev = fn.split_train_dev(d, 0.0, seed=7)
        assert tr is d and dev is d

    def test_subset_keeps_class_map(self):
        d = fn.generate_synthetic(small_spec())
        s = subset(d, np.arange(10))
        assert s.num_classes == d.num_classes
        assert np.array_equal(s.group_of, d.group_of)


class TestPermuteColumns:
    def test_permutation_preserves_multiset_per_row(self):
        d = fn.generate_synthetic(small_spec())
        p = permute_columns(d, fn.Rng(3))
        assert np.array_equal(np.sort(p.frames, axis=1), np.sort(d.frames, axis=1))
        assert not np.array_equal(p.frames, d.frames)

    def test_seeded_determinism(self):
        d = fn.generate_synthetic(small_spec())
        a = permute_columns(d, fn.Rng(3))
        b = permute_columns(d, fn.Rng(3))
        assert np.array_equal(a.frames, b.frames)
