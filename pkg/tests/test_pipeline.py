"""End-to-end feature assembly: records -> fused sequences -> balanced training set."""

import numpy as np
import pytest

from memefuse import TASKS, TASK_CLASSES
from memefuse.dataset import LabelSet, MemeRecord
from memefuse.encode import EncoderSpec, encode_image
from memefuse.pipeline import (
    DEFAULT_IMAGE_HW,
    build_feature_space,
    build_training_set,
    encode_corpus,
    labels_from_records,
    record_features,
    toy_image,
)


@pytest.fixture(scope="module")
def space():
    # 32x32 images with 16x16 patches: 4 image rows, d_model 64
    return build_feature_space(seed=0)


class TestFusedShapes:
    def test_imgtxt_shape(self, space):
        out = record_features("m1", ["hello", "world"], space, "imgtxt")
        assert out.shape == (space.n_patches + space.spec.max_tokens, 64)
        assert out.shape == (20, 64)
        assert out.dtype == np.float32

    def test_imgsen_shape(self, space):
        out = record_features("m1", ["hello", "world"], space, "imgsen")
        assert out.shape == (5, 64)
        assert out.dtype == np.float32

    def test_capsen_shape(self, space):
        out = record_features("m1", ["hello", "world"], space, "capsen")
        assert out.shape == (2, 768)
        assert out.dtype == np.float32

    def test_fused_length_matches_arrays(self, space):
        for kind in ("imgtxt", "imgsen", "capsen"):
            out = record_features("m7", ["one"], space, kind)
            assert out.shape == (space.fused_length(kind), space.fused_width(kind))

    def test_unknown_kind_rejected(self, space):
        with pytest.raises(ValueError):
            record_features("m1", ["x"], space, "bogus")


class TestRecordFeatures:
    def test_deterministic(self, space):
        a = record_features("m3", ["some", "words"], space, "imgtxt")
        b = record_features("m3", ["some", "words"], space, "imgtxt")
        np.testing.assert_array_equal(a, b)

    def test_image_rows_prefix(self, space):
        # first n_patches rows are exactly the image encoding
        out = record_features("m4", ["abc"], space, "imgtxt")
        img = encode_image(toy_image("m4"), space.spec, space.image_params)
        np.testing.assert_array_equal(out[: space.n_patches], img.astype(np.float32))

    def test_short_token_list_zero_padded(self, space):
        out = record_features("m5", ["only", "two"], space, "imgtxt")
        tail = out[space.n_patches + 2 :]
        assert tail.shape[0] == space.spec.max_tokens - 2
        assert np.all(tail == 0.0)
        # the two real token rows are not zero
        assert np.any(out[space.n_patches] != 0.0)
        assert np.any(out[space.n_patches + 1] != 0.0)

    def test_explicit_image_overrides_toy(self, space):
        custom = np.full((32, 32, 3), 0.25, dtype=np.float32)
        out_custom = record_features("m6", ["z"], space, "imgsen", image=custom)
        out_toy = record_features("m6", ["z"], space, "imgsen")
        assert not np.array_equal(out_custom, out_toy)

    def test_text_changes_output(self, space):
        a = record_features("m8", ["happy"], space, "imgsen")
        b = record_features("m8", ["angry"], space, "imgsen")
        assert not np.array_equal(a, b)


class TestToyImage:
    def test_deterministic_per_id(self):
        np.testing.assert_array_equal(toy_image("r1"), toy_image("r1"))

    def test_distinct_ids_distinct_pixels(self):
        assert not np.array_equal(toy_image("r1"), toy_image("r2"))

    def test_shape_range_dtype(self):
        img = toy_image("r9")
        assert img.shape == DEFAULT_IMAGE_HW + (3,)
        assert img.dtype == np.float32
        assert np.all(img >= 0.0) and np.all(img < 1.0)


class TestEncodeCorpus:
    def test_rows_follow_id_order(self, space):
        ids = ["b", "a", "c"]
        toks = {"a": ["one"], "b": ["two"], "c": ["three"]}
        feats = encode_corpus(ids, toks, space, "imgsen")
        assert feats.shape == (3, 5, 64)
        for i, rid in enumerate(ids):
            np.testing.assert_array_equal(
                feats[i], record_features(rid, toks[rid], space, "imgsen"))

    def test_workers_do_not_change_result(self, space):
        ids = [f"id{i}" for i in range(6)]
        toks = {rid: [rid, "word"] for rid in ids}
        serial = encode_corpus(ids, toks, space, "imgtxt", workers=1)
        threaded = encode_corpus(ids, toks, space, "imgtxt", workers=3)
        np.testing.assert_array_equal(serial, threaded)

    def test_empty_corpus_keeps_declared_shape(self, space):
        feats = encode_corpus([], {}, space, "capsen")
        assert feats.shape == (0, 2, 768)
        assert feats.dtype == np.float32


class TestLabelsFromRecords:
    def _record(self, rid, humor, sarcasm, motivation, sentiment):
        return MemeRecord(
            id=rid,
            image_ref=rid,
            text="t",
            labels=LabelSet(humor=humor, sarcasm=sarcasm,
                            motivation=motivation, sentiment=sentiment),
        )

    def test_index_mapping(self):
        records = [
            self._record("a", "funny", "sarcastic", "motivational", "positive"),
            self._record("b", "not_funny", "not_sarcastic", "not_motivational", "negative"),
            self._record("c", "funny", "not_sarcastic", "motivational", "neutral"),
        ]
        labels = labels_from_records(records)
        assert set(labels) == set(TASKS)
        np.testing.assert_array_equal(labels["humor"], [0, 1, 0])
        np.testing.assert_array_equal(labels["sarcasm"], [0, 1, 1])
        np.testing.assert_array_equal(labels["motivation"], [0, 1, 0])
        np.testing.assert_array_equal(labels["sentiment"], [0, 2, 1])
        for task in TASKS:
            assert labels[task].dtype == np.int64

    def test_every_class_round_trips(self):
        # index i of each task's tuple comes back as label i
        for task in TASKS:
            for idx, cls in enumerate(TASK_CLASSES[task]):
                values = {t: TASK_CLASSES[t][0] for t in TASKS}
                values[task] = cls
                rec = self._record("x", values["humor"], values["sarcasm"],
                                   values["motivation"], values["sentiment"])
                assert labels_from_records([rec])[task][0] == idx


def _toy_imbalanced(n_major=12, n_minor=4, length=3, width=5, seed=11):
    rng = np.random.default_rng(seed)
    n = n_major + n_minor
    feats = rng.normal(size=(n, length, width)).astype(np.float32)
    labels = {
        "humor": np.array([0] * n_major + [1] * n_minor, dtype=np.int64),
        "sarcasm": np.zeros(n, dtype=np.int64),
        "motivation": np.zeros(n, dtype=np.int64),
        "sentiment": np.zeros(n, dtype=np.int64),
    }
    return feats, labels


class TestBuildTrainingSet:
    def test_minority_grows_to_majority(self):
        feats, labels = _toy_imbalanced()
        ts = build_training_set(feats, labels, k=3, seed=0)
        grown = ts.labels["humor"]
        assert int(np.sum(grown == 0)) == 12
        assert int(np.sum(grown == 1)) == 12
        assert ts.features.shape == (24, 3, 5)

    def test_originals_come_first_verbatim(self):
        feats, labels = _toy_imbalanced()
        ts = build_training_set(feats, labels, k=3, seed=0)
        np.testing.assert_array_equal(ts.features[:16], feats)
        for task in TASKS:
            np.testing.assert_array_equal(ts.labels[task][:16], labels[task])

    def test_synthetics_masked_for_other_tasks(self):
        feats, labels = _toy_imbalanced()
        ts = build_training_set(feats, labels, k=3, seed=0)
        synth = slice(16, None)
        assert np.all(ts.labels["humor"][synth] == 1)
        for other in ("sarcasm", "motivation", "sentiment"):
            assert np.all(ts.labels[other][synth] == -1)

    def test_balanced_input_is_untouched(self):
        rng = np.random.default_rng(5)
        feats = rng.normal(size=(8, 2, 4)).astype(np.float32)
        labels = {task: np.array([0, 1] * 4, dtype=np.int64) for task in
                  ("humor", "sarcasm", "motivation")}
        labels["sentiment"] = np.array([0, 1, 2] * 2 + [0, 1], dtype=np.int64)
        # sentiment is uneven: 3/3/2 -> one synthetic for class 2
        ts = build_training_set(feats, labels, k=2, seed=1)
        assert ts.features.shape[0] == 9
        np.testing.assert_array_equal(ts.features[:8], feats)
        assert ts.labels["sentiment"][8] == 2
        assert ts.labels["humor"][8] == -1

    def test_deterministic_per_seed(self):
        feats, labels = _toy_imbalanced()
        a = build_training_set(feats, labels, k=3, seed=7)
        b = build_training_set(feats, labels, k=3, seed=7)
        c = build_training_set(feats, labels, k=3, seed=8)
        np.testing.assert_array_equal(a.features, b.features)
        for task in TASKS:
            np.testing.assert_array_equal(a.labels[task], b.labels[task])
        assert not np.array_equal(a.features, c.features)

    def test_multiple_tasks_each_balanced(self):
        rng = np.random.default_rng(3)
        feats = rng.normal(size=(10, 2, 3)).astype(np.float32)
        labels = {
            "humor": np.array([0] * 7 + [1] * 3, dtype=np.int64),
            "sarcasm": np.array([0] * 4 + [1] * 6, dtype=np.int64),
            "motivation": np.zeros(10, dtype=np.int64),
            "sentiment": np.zeros(10, dtype=np.int64),
        }
        ts = build_training_set(feats, labels, k=2, seed=2)
        # humor adds 4, sarcasm adds 2
        assert ts.features.shape[0] == 16
        hum = ts.labels["humor"]
        sar = ts.labels["sarcasm"]
        assert int(np.sum(hum == 0)) == int(np.sum(hum == 1)) == 7
        assert int(np.sum(sar == 0)) == int(np.sum(sar == 1)) == 6

    def test_synthetics_lie_between_members(self):
        # every synthetic coordinate stays inside the minority bounding box
        feats, labels = _toy_imbalanced()
        ts = build_training_set(feats, labels, k=3, seed=4)
        minority = feats[12:].reshape(4, -1).astype(np.float64)
        lo, hi = minority.min(axis=0), minority.max(axis=0)
        synth = ts.features[16:].reshape(-1, 15).astype(np.float64)
        assert np.all(synth >= lo - 1e-6)
        assert np.all(synth <= hi + 1e-6)
