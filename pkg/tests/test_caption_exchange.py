import numpy as np
import pytest

from memefuse import encode


def _toy_image(seed=0, hw=(32, 32)):
    rng = np.random.default_rng(seed)
    return rng.uniform(size=(hw[0], hw[1], 3)).astype(np.float32)


def _identity_decoder(words=("alpha", "beta", "gamma"), d=8, max_len=16):
    """Decoder whose blocks are identity maps: residual branches zeroed,
    positions one-hot, so step t's logits are exactly out.w[t] + out.b."""
    p = encode.init_caption_decoder_params(
        d_model=d, n_layers=1, n_heads=2, words=words, max_len=max_len, seed=3,
        dtype=np.float64)
    p["self.0.attn.wo"] = np.zeros_like(p["self.0.attn.wo"])
    p["self.0.ffn.w2"] = np.zeros_like(p["self.0.ffn.w2"])
    p["cross.0.wo"] = np.zeros_like(p["cross.0.wo"])
    p["start_emb"] = np.zeros_like(p["start_emb"])
    p["tok_emb"] = np.zeros_like(p["tok_emb"])
    p["pos"] = np.eye(max_len, d)
    p["out.w"] = np.zeros_like(p["out.w"])
    p["out.b"] = np.zeros_like(p["out.b"])
    return p


class TestGenerateCaption:
    def test_end_token_first_gives_empty_caption(self):
        p = _identity_decoder()
        p["out.b"] = np.array([1.0, 0.0, 0.0, 0.0])
        assert encode.generate_caption(_toy_image(), p, max_len=5) == []

    def test_max_len_truncates(self):
        p = _identity_decoder()
        p["out.b"] = np.array([0.0, 5.0, 0.0, 0.0])  # end token never wins
        caption = encode.generate_caption(_toy_image(), p, max_len=3)
        assert caption == ["alpha", "alpha", "alpha"]

    def test_forced_two_step_sequence(self):
        # step logits chosen by hand: step 0 -> id 2, step 1 -> id 1, step 2 -> end
        p = _identity_decoder()
        p["out.w"][0] = [0.0, 1.0, 5.0, 2.0]
        p["out.w"][1] = [0.0, 9.0, 1.0, 3.0]
        p["out.w"][2] = [7.0, 0.0, 0.0, 1.0]
        assert encode.generate_caption(_toy_image(), p, max_len=10) == ["beta", "alpha"]

    def test_real_decoder_deterministic(self):
        p = encode.init_caption_decoder_params(seed=11)
        img = _toy_image(seed=4)
        a = encode.generate_caption(img, p, max_len=6)
        b = encode.generate_caption(img, p, max_len=6)
        assert a == b
        assert len(a) <= 6
        assert all(w in encode.DEFAULT_CAPTION_WORDS for w in a)

    def test_bad_max_len(self):
        with pytest.raises(ValueError):
            encode.generate_caption(_toy_image(), _identity_decoder(), max_len=0)

    def test_wrong_channel_count(self):
        with pytest.raises(ValueError):
            encode.generate_caption(np.zeros((16, 16, 1)), _identity_decoder())


class TestEmbeddingExchange:
    def test_roundtrip_sequences(self, tmp_path):
        rng = np.random.default_rng(42)
        mapping = {f"m{i}": rng.normal(size=(i + 1, 16)).astype(np.float32) for i in range(3)}
        path = tmp_path / "seq.jsonl"
        encode.export_embeddings(path, mapping, kind="sequence")
        back = encode.import_embeddings(path)
        assert set(back) == set(mapping)
        for rid in mapping:
            np.testing.assert_array_equal(back[rid], mapping[rid])
            assert back[rid].dtype == np.float32

    def test_roundtrip_vectors(self, tmp_path):
        rng = np.random.default_rng(7)
        mapping = {"a": rng.normal(size=768).astype(np.float32),
                   "b": rng.normal(size=768).astype(np.float32)}
        path = tmp_path / "vec.jsonl"
        encode.export_embeddings(path, mapping, kind="vector")
        back = encode.import_embeddings(path)
        assert back["a"].shape == (768,)
        np.testing.assert_array_equal(back["b"], mapping["b"])

    def test_header_count_declared(self, tmp_path):
        path = tmp_path / "three.jsonl"
        encode.export_embeddings(path, {str(i): np.zeros(4) for i in range(3)}, kind="vector")
        first = path.read_text().splitlines()[0]
        assert '"count": 3' in first and '"d": 4' in first

    def test_width_conflict_rejected_on_read(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"kind": "vector", "d": 768, "count": 1}\n'
            '{"id": "x", "shape": [512], "values": ' + str([0.0] * 512) + '}\n')
        with pytest.raises(ValueError, match="conflicts with header"):
            encode.import_embeddings(path)

    def test_count_mismatch_rejected(self, tmp_path):
        path = tmp_path / "short.jsonl"
        path.write_text('{"kind": "vector", "d": 2, "count": 2}\n'
                        '{"id": "x", "shape": [2], "values": [0.0, 1.0]}\n')
        with pytest.raises(ValueError, match="declares 2"):
            encode.import_embeddings(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        path.write_text('{"kind": "vector", "d": 1, "count": 2}\n'
                        '{"id": "x", "shape": [1], "values": [0.0]}\n'
                        '{"id": "x", "shape": [1], "values": [1.0]}\n')
        with pytest.raises(ValueError, match="duplicate"):
            encode.import_embeddings(path)

    def test_mixed_widths_rejected_on_write(self, tmp_path):
        with pytest.raises(ValueError, match="inconsistent"):
            encode.export_embeddings(tmp_path / "w.jsonl",
                                     {"a": np.zeros(3), "b": np.zeros(4)}, kind="vector")

    def test_values_rounded_to_float32(self, tmp_path):
        path = tmp_path / "round.jsonl"
        exact = np.array([1.0 / 3.0], dtype=np.float64)
        encode.export_embeddings(path, {"a": exact}, kind="vector")
        back = encode.import_embeddings(path)
        assert back["a"][0] == np.float32(1.0 / 3.0)
