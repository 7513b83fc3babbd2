import numpy as np
import pytest

from memefuse import balance
from memefuse.balance import LabeledVectors, balance_to_majority, knn_indices, smote_oversample
from smote_oracle import brute_force_neighbors, verify_oversampled


class TestKnnIndices:
    def test_nearest_by_inspection(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]])
        np.testing.assert_array_equal(knn_indices(pts, 0, 1), [1])
        np.testing.assert_array_equal(knn_indices(pts, 0, 2), [1, 2])

    def test_self_excluded(self):
        pts = np.array([[0.0], [0.0], [9.0]])
        assert 0 not in knn_indices(pts, 0, 2)

    def test_ties_broken_by_lower_index(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(knn_indices(pts, 0, 2), [1, 2])

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            knn_indices(np.zeros((3, 2)), 0, 3)

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(42)
        pts = rng.normal(size=(100, 5))
        oracle = brute_force_neighbors(pts, 7)
        for i in range(100):
            np.testing.assert_array_equal(knn_indices(pts, i, 7), oracle[i])


class TestLabeledVectors:
    def test_validation(self):
        with pytest.raises(ValueError):
            LabeledVectors(np.zeros((3,)), np.zeros(3))
        with pytest.raises(ValueError):
            LabeledVectors(np.zeros((3, 2)), np.zeros(4))
        with pytest.raises(ValueError):
            LabeledVectors(np.zeros((3, 2)), np.zeros(3), k=0)

    def test_class_counts(self):
        data = LabeledVectors(np.zeros((5, 2)), np.array([0, 1, 1, 0, 1]))
        assert data.class_counts() == {0: 2, 1: 3}


class _StubRng:
    """Deterministic stand-in: integers() walks a list, uniform() another."""

    def __init__(self, ints, floats):
        self._ints = list(ints)
        self._floats = list(floats)

    def integers(self, *_args, **_kw):
        return self._ints.pop(0)

    def uniform(self, *_args, **_kw):
        return self._floats.pop(0)


class TestSmoteOversample:
    def test_midpoint_with_forced_lambda(self, monkeypatch):
        monkeypatch.setattr(balance, "rng_for", lambda *_: _StubRng([0, 0], [0.5]))
        data = LabeledVectors(np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([0, 0]), k=1)
        out = smote_oversample(data, {0: 3})
        np.testing.assert_allclose(out.features[2], [0.5, 0.5], atol=1e-12)

    def test_zero_deficit_identity(self):
        data = LabeledVectors(np.arange(8.0).reshape(4, 2), np.array([0, 0, 1, 1]))
        out = smote_oversample(data, {0: 2, 1: 2})
        np.testing.assert_array_equal(out.features, data.features)
        np.testing.assert_array_equal(out.labels, data.labels)

    def test_target_below_current_rejected(self):
        data = LabeledVectors(np.zeros((4, 2)), np.array([0, 0, 0, 1]))
        with pytest.raises(ValueError, match="below current"):
            smote_oversample(data, {0: 2})

    def test_singleton_class_with_deficit_rejected(self):
        data = LabeledVectors(np.arange(6.0).reshape(3, 2), np.array([0, 0, 1]))
        with pytest.raises(ValueError, match="need 2"):
            smote_oversample(data, {1: 3})

    def test_originals_first_and_verbatim(self):
        rng = np.random.default_rng(3)
        feats = rng.normal(size=(20, 4))
        labels = np.array([0] * 14 + [1] * 6)
        data = LabeledVectors(feats, labels, k=3, seed=11)
        out = smote_oversample(data, {1: 14})
        assert out.features.shape == (28, 4)
        np.testing.assert_array_equal(out.features[:20], feats)
        assert list(out.labels[20:]) == [1] * 8

    def test_synthetics_pass_independent_oracle(self):
        rng = np.random.default_rng(5)
        feats = rng.normal(size=(40, 6))
        labels = np.array([0] * 28 + [1] * 12)
        data = LabeledVectors(feats, labels, k=5, seed=9)
        out = balance_to_majority(data)
        assert verify_oversampled(data, out) == 16

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(7)
        feats = rng.normal(size=(12, 3))
        labels = np.array([0] * 8 + [1] * 4)
        a = balance_to_majority(LabeledVectors(feats, labels, seed=1))
        b = balance_to_majority(LabeledVectors(feats, labels, seed=1))
        c = balance_to_majority(LabeledVectors(feats, labels, seed=2))
        np.testing.assert_array_equal(a.features, b.features)
        assert not np.array_equal(a.features, c.features)

    def test_k_clamped_for_tiny_class(self):
        # class of 3 with default k=5: clamp to 2 neighbors, still works
        feats = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0], [13.0]])
        labels = np.array([0, 0, 0, 1, 1, 1, 1])
        out = balance_to_majority(LabeledVectors(feats, labels, seed=4))
        assert out.class_counts() == {0: 4, 1: 4}


class TestBalanceToMajority:
    def test_three_classes(self):
        rng = np.random.default_rng(13)
        feats = rng.normal(size=(20, 2))
        labels = np.array([0] * 10 + [1] * 4 + [2] * 6)
        out = balance_to_majority(LabeledVectors(feats, labels, seed=2))
        assert out.class_counts() == {0: 10, 1: 10, 2: 10}

    def test_already_balanced_unchanged(self):
        rng = np.random.default_rng(17)
        feats = rng.normal(size=(6, 2))
        labels = np.array([0, 0, 0, 1, 1, 1])
        data = LabeledVectors(feats, labels)
        out = balance_to_majority(data)
        np.testing.assert_array_equal(out.features, feats)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="2 classes"):
            balance_to_majority(LabeledVectors(np.zeros((3, 2)), np.zeros(3)))

    def test_string_labels_supported(self):
        rng = np.random.default_rng(19)
        feats = rng.normal(size=(9, 3))
        labels = np.array(["sarcastic"] * 6 + ["not_sarcastic"] * 3)
        out = balance_to_majority(LabeledVectors(feats, labels, seed=3))
        assert out.class_counts() == {"sarcastic": 6, "not_sarcastic": 6}
        assert verify_oversampled(LabeledVectors(feats, labels, seed=3), out) == 3
