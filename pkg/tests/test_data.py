import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from mmidict.data import (
    FeatureDataset,
    Sequence,
    flatten,
    l2_normalize_columns,
    read_feature_csv,
    unflatten,
    write_feature_csv,
)
from mmidict.errors import ValidationError


def _ds(*seqs):
    return FeatureDataset(list(seqs))


class TestFlatten:
    def test_single_sequence_layout(self):
        ds = _ds(Sequence("a", np.arange(6.0).reshape(3, 2)))
        Y, labels, index = flatten(ds)
        assert Y.shape == (2, 3)
        assert len(index) == 3
        np.testing.assert_array_equal(Y[:, 0], [0.0, 1.0])
        np.testing.assert_array_equal(Y[:, 2], [4.0, 5.0])

    def test_sequence_major_ordering(self):
        ds = _ds(
            Sequence("s1", np.array([[1.0], [2.0]])),
            Sequence("s2", np.array([[3.0]])),
        )
        Y, labels, index = flatten(ds)
        assert Y.shape == (1, 3)
        assert index == [("s1", 0), ("s1", 1), ("s2", 0)]
        np.testing.assert_array_equal(Y[0], [1.0, 2.0, 3.0])

    def test_class_count_from_labels(self):
        seqs = [
            Sequence(f"s{c}", np.zeros((2, 4)), label=c) for c in range(1, 15)
        ]
        ds = _ds(*seqs)
        assert ds.n_classes == 14

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValidationError, match="no signals"):
            FeatureDataset([])

    def test_missing_class_rejected(self):
        with pytest.raises(ValidationError, match="missing"):
            _ds(
                Sequence("a", np.zeros((1, 2)), label=1),
                Sequence("b", np.zeros((1, 2)), label=3),
            )

    def test_roundtrip_exact(self):
        rng = np.random.default_rng(0)
        ds = _ds(
            Sequence("a", rng.normal(size=(4, 3)), label=1, frame_ids=np.array([0, 2, 5, 9])),
            Sequence("b", rng.normal(size=(2, 3)), label=2),
        )
        Y, labels, index = flatten(ds)
        back = unflatten(Y, labels, index)
        for s0, s1 in zip(ds.sequences, back.sequences):
            assert s0.seq_id == s1.seq_id
            assert s0.label == s1.label
            np.testing.assert_array_equal(s0.frames, s1.frames)
            np.testing.assert_array_equal(s0.frame_ids, s1.frame_ids)


class TestNormalize:
    def test_three_four_five(self):
        m, zero = l2_normalize_columns(np.array([[3.0], [4.0]]))
        np.testing.assert_allclose(m[:, 0], [0.6, 0.8])
        assert not zero[0]

    def test_unit_column_unchanged(self):
        col = np.array([[1.0], [0.0]])
        m, _ = l2_normalize_columns(col)
        np.testing.assert_array_equal(m, col)

    def test_zero_column_flagged(self):
        m, zero = l2_normalize_columns(np.zeros((2, 1)))
        np.testing.assert_array_equal(m, np.zeros((2, 1)))
        assert zero[0]

    @settings(max_examples=50, deadline=None)
    @given(
        hnp.arrays(
            np.float64,
            hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=6),
            elements=st.floats(-1e6, 1e6),
        )
    )
    def test_idempotent(self, m):
        once, _ = l2_normalize_columns(m)
        twice, _ = l2_normalize_columns(once)
        np.testing.assert_allclose(twice, once, atol=1e-12)


class TestFeatureCsv:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        ds = _ds(
            Sequence("a", rng.normal(size=(3, 4)), label=1, group="p0"),
            Sequence("b", rng.normal(size=(2, 4)), label=2, group="p1"),
        )
        path = tmp_path / "f.csv"
        write_feature_csv(path, ds)
        back = read_feature_csv(path)
        for s0, s1 in zip(ds.sequences, back.sequences):
            np.testing.assert_array_equal(s0.frames, s1.frames)
            assert (s0.label, s0.group) == (s1.label, s1.group)

    def test_unlabeled_column_empty(self, tmp_path):
        ds = _ds(Sequence("a", np.ones((2, 2))))
        path = tmp_path / "f.csv"
        write_feature_csv(path, ds)
        back = read_feature_csv(path)
        assert back.sequences[0].label is None
        assert back.n_classes == 0

    def test_malformed_feature_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("seq,frame,label,f0\n" "a,0,1,1.0\n" "a,1,1,oops\n")
        with pytest.raises(ValidationError, match="line 3"):
            read_feature_csv(path)

    def test_non_increasing_frame_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("seq,frame,label,f0\n" "a,1,1,1.0\n" "a,1,1,2.0\n")
        with pytest.raises(ValidationError, match="line 3"):
            read_feature_csv(path)

    def test_missing_required_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("seq,label,f0\n" "a,1,1.0\n")
        with pytest.raises(ValidationError, match="frame"):
            read_feature_csv(path)
