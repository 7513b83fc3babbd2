"""Frozen feature encoders: image patches and word tokens through small
pre-norm transformer stacks, plus a pooled 768-dim sentence embedding.

Encoder weights are derived deterministically from a seed and never
trained; the trainable part of a model is the classifier that consumes
these features.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import nnops
from .nnops import attention  # noqa: F401  (canonical home for callers)
from .seeds import rng_for

SENTENCE_DIM = 768
DEFAULT_VOCAB_SIZE = 1024


@dataclass(frozen=True)
class EncoderSpec:
    """Sizing knobs shared by the image and text encoders."""

    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 2
    patch_size: int = 16
    max_tokens: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.d_model <= 0 or self.n_heads <= 0:
            raise ValueError("d_model and n_heads must be positive")
        if self.n_layers < 0:
            raise ValueError("n_layers must be >= 0")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by {self.n_heads} heads")
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


def patchify(image: np.ndarray, patch_size: int) -> np.ndarray:
    """H x W x C image -> (H/p * W/p) x (p*p*C) matrix of flattened patches.

    Patches are taken row-major over the grid; each patch flattens in
    row-major order as well.
    """
    if image.ndim != 3:
        raise ValueError(f"expected H x W x C image, got shape {image.shape}")
    h, w, c = image.shape
    p = patch_size
    if h % p or w % p:
        raise ValueError(f"image {h}x{w} not divisible into {p}x{p} patches")
    grid = image.reshape(h // p, p, w // p, p, c)
    return grid.transpose(0, 2, 1, 3, 4).reshape((h // p) * (w // p), p * p * c)


def init_block_params(d_model: int, n_heads: int, rng: np.random.Generator,
                      hidden_mult: int = 4, dtype=np.float32) -> dict:
    def mat(rows, cols):
        return (rng.normal(size=(rows, cols)) / np.sqrt(rows)).astype(dtype)

    d_ff = hidden_mult * d_model
    p = {
        "ln1.g": np.ones(d_model, dtype=dtype),
        "ln1.b": np.zeros(d_model, dtype=dtype),
        "ln2.g": np.ones(d_model, dtype=dtype),
        "ln2.b": np.zeros(d_model, dtype=dtype),
        "ffn.w1": mat(d_model, d_ff),
        "ffn.b1": np.zeros(d_ff, dtype=dtype),
        "ffn.w2": mat(d_ff, d_model),
        "ffn.b2": np.zeros(d_model, dtype=dtype),
    }
    for name in ("wq", "wk", "wv", "wo"):
        p[f"attn.{name}"] = mat(d_model, d_model)
        p[f"attn.b{name[1]}"] = np.zeros(d_model, dtype=dtype)
    return p


def transformer_block_forward(x: np.ndarray, params: dict, n_heads: int):
    """Pre-norm block: x + attn(ln(x)), then h + ffn(ln(h))."""
    n1, c_n1 = nnops.layernorm_forward(x, params["ln1.g"], params["ln1.b"])
    a, c_a = nnops.mha_forward(n1, n1, nnops.sub_params(params, "attn"), n_heads)
    h = x + a
    n2, c_n2 = nnops.layernorm_forward(h, params["ln2.g"], params["ln2.b"])
    f1, c_f1 = nnops.linear_forward(n2, params["ffn.w1"], params["ffn.b1"])
    f1g = nnops.gelu(f1)
    f2, c_f2 = nnops.linear_forward(f1g, params["ffn.w2"], params["ffn.b2"])
    y = h + f2
    return y, (c_n1, c_a, c_n2, c_f1, f1, c_f2)


def transformer_block_backward(d_y: np.ndarray, cache):
    c_n1, c_a, c_n2, c_f1, f1, c_f2 = cache
    d_f1g, dw2, db2 = nnops.linear_backward(d_y, c_f2)
    d_f1 = nnops.gelu_backward(d_f1g, f1)
    d_n2, dw1, db1 = nnops.linear_backward(d_f1, c_f1)
    d_h, dg2, dbias2 = nnops.layernorm_backward(d_n2, c_n2)
    d_h = d_h + d_y
    d_nq, d_nkv, d_attn = nnops.mha_backward(d_h, c_a)
    d_n1 = d_nq + d_nkv
    dx, dg1, dbias1 = nnops.layernorm_backward(d_n1, c_n1)
    dx = dx + d_h
    d_params = {
        "ln1.g": dg1, "ln1.b": dbias1, "ln2.g": dg2, "ln2.b": dbias2,
        "ffn.w1": dw1, "ffn.b1": db1, "ffn.w2": dw2, "ffn.b2": db2,
    }
    d_params.update({f"attn.{k}": v for k, v in d_attn.items()})
    return dx, d_params


def transformer_block(x: np.ndarray, params: dict, n_heads: int = 2) -> np.ndarray:
    y, _ = transformer_block_forward(x, params, n_heads)
    return y


def _stack_params(spec: EncoderSpec, rng: np.random.Generator, dtype) -> dict:
    params = {}
    for i in range(spec.n_layers):
        for k, v in init_block_params(spec.d_model, spec.n_heads, rng, dtype=dtype).items():
            params[f"blocks.{i}.{k}"] = v
    return params


def init_image_encoder_params(spec: EncoderSpec, image_hw: tuple[int, int],
                              channels: int = 3, dtype=np.float32) -> dict:
    h, w = image_hw
    if h % spec.patch_size or w % spec.patch_size:
        raise ValueError(f"image {h}x{w} not divisible by patch size {spec.patch_size}")
    n_patches = (h // spec.patch_size) * (w // spec.patch_size)
    d_patch = spec.patch_size * spec.patch_size * channels
    rng = rng_for(spec.seed, "image_encoder")
    params = {
        "patch_embed.w": (rng.normal(size=(d_patch, spec.d_model)) / np.sqrt(d_patch)).astype(dtype),
        "patch_embed.b": np.zeros(spec.d_model, dtype=dtype),
        "pos": (rng.normal(size=(n_patches, spec.d_model)) * 0.02).astype(dtype),
    }
    params.update(_stack_params(spec, rng, dtype))
    return params


def init_text_encoder_params(spec: EncoderSpec, vocab_size: int = DEFAULT_VOCAB_SIZE,
                             dtype=np.float32) -> dict:
    rng = rng_for(spec.seed, "text_encoder")
    params = {
        # row 0 is the null token used for empty input
        "tok_emb": (rng.normal(size=(vocab_size, spec.d_model)) * 0.1).astype(dtype),
        "pos": (rng.normal(size=(spec.max_tokens, spec.d_model)) * 0.02).astype(dtype),
        "sent_proj.w": (rng.normal(size=(spec.d_model, SENTENCE_DIM)) / np.sqrt(spec.d_model)).astype(dtype),
        "sent_proj.b": np.zeros(SENTENCE_DIM, dtype=dtype),
    }
    params.update(_stack_params(spec, rng, dtype))
    return params


def _run_blocks(x: np.ndarray, spec: EncoderSpec, params: dict) -> np.ndarray:
    for i in range(spec.n_layers):
        x = transformer_block(x, nnops.sub_params(params, f"blocks.{i}"), spec.n_heads)
    return x


def encode_image(image: np.ndarray, spec: EncoderSpec, params: dict) -> np.ndarray:
    """H x W x C pixel array -> n_patches x d_model feature sequence."""
    patches = patchify(np.asarray(image, dtype=params["patch_embed.w"].dtype), spec.patch_size)
    if patches.shape[0] != params["pos"].shape[0]:
        raise ValueError(
            f"{patches.shape[0]} patches but positions for {params['pos'].shape[0]}")
    x = patches @ params["patch_embed.w"] + params["patch_embed.b"] + params["pos"]
    return _run_blocks(x, spec, params)


def token_id(word: str, vocab_size: int = DEFAULT_VOCAB_SIZE) -> int:
    """Stable hash of a word into [1, vocab_size); 0 stays the null token."""
    digest = hashlib.blake2s(word.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % (vocab_size - 1) + 1


def encode_tokens(tokens: list[str], spec: EncoderSpec, params: dict) -> np.ndarray:
    """Token list -> L x d_model feature sequence, L clipped to max_tokens.

    An empty token list encodes as the single null token, so L >= 1.
    """
    vocab_size = params["tok_emb"].shape[0]
    ids = [token_id(t, vocab_size) for t in tokens[:spec.max_tokens]] or [0]
    x = params["tok_emb"][ids] + params["pos"][:len(ids)]
    return _run_blocks(x, spec, params)


def encode_sentence(tokens: list[str], spec: EncoderSpec, params: dict) -> np.ndarray:
    """Whole-text embedding: mean-pool token features, project to 768 dims."""
    seq = encode_tokens(tokens, spec, params)
    return seq.mean(axis=0) @ params["sent_proj.w"] + params["sent_proj.b"]


# --- caption generation ----------------------------------------------------

END_TOKEN = 0

DEFAULT_CAPTION_WORDS = (
    "a", "man", "woman", "dog", "cat", "person", "face", "holding", "looking",
    "standing", "sitting", "smiling", "wearing", "hat", "glasses", "text",
    "white", "black", "red", "blue", "background", "picture", "meme", "screen",
    "group", "people", "room", "outside", "table", "shirt", "sign",
)


def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    """Valid convolution, x: H x W x Cin, w: kh x kw x Cin x Cout."""
    kh, kw = w.shape[0], w.shape[1]
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(0, 1))
    win = win[::stride, ::stride]
    return np.einsum("hwcij,ijco->hwo", win, w) + b


def init_caption_decoder_params(d_model: int = 32, n_layers: int = 1, n_heads: int = 2,
                                words: tuple[str, ...] = DEFAULT_CAPTION_WORDS,
                                max_len: int = 16, conv_channels: int = 8,
                                seed: int = 0, dtype=np.float32) -> dict:
    """Weights for the untrained captioner: conv feature extractor over the
    image, then decoder blocks (causal self-attention, attention over image
    features, feed-forward) and an output projection over ``words`` plus the
    end token at index 0."""
    rng = rng_for(seed, "caption_decoder")
    vocab = len(words) + 1

    def mat(*shape):
        return (rng.normal(size=shape) / np.sqrt(shape[0])).astype(dtype)

    params: dict = {
        "words": tuple(words),
        "n_heads": n_heads,
        "n_layers": n_layers,
        "conv1.w": (rng.normal(size=(3, 3, 3, conv_channels)) * 0.2).astype(dtype),
        "conv1.b": np.zeros(conv_channels, dtype=dtype),
        "conv2.w": (rng.normal(size=(3, 3, conv_channels, d_model)) * 0.2).astype(dtype),
        "conv2.b": np.zeros(d_model, dtype=dtype),
        "start_emb": (rng.normal(size=(d_model,)) * 0.1).astype(dtype),
        "tok_emb": (rng.normal(size=(vocab, d_model)) * 0.1).astype(dtype),
        "pos": (rng.normal(size=(max_len, d_model)) * 0.02).astype(dtype),
        "out.w": mat(d_model, vocab),
        "out.b": np.zeros(vocab, dtype=dtype),
    }
    for i in range(n_layers):
        for k, v in init_block_params(d_model, n_heads, rng, dtype=dtype).items():
            params[f"self.{i}.{k}"] = v
        p = f"cross.{i}"
        params[f"{p}.ln.g"] = np.ones(d_model, dtype=dtype)
        params[f"{p}.ln.b"] = np.zeros(d_model, dtype=dtype)
        for name in ("wq", "wk", "wv", "wo"):
            params[f"{p}.{name}"] = mat(d_model, d_model)
            params[f"{p}.b{name[1]}"] = np.zeros(d_model, dtype=dtype)
    return params


def _image_features(image: np.ndarray, p: dict) -> np.ndarray:
    x = np.asarray(image, dtype=p["conv1.w"].dtype)
    if x.ndim != 3 or x.shape[2] != p["conv1.w"].shape[2]:
        raise ValueError(f"captioner expects H x W x {p['conv1.w'].shape[2]} image")
    h1 = nnops.gelu(_conv2d(x, p["conv1.w"], p["conv1.b"], stride=2))
    h2 = nnops.gelu(_conv2d(h1, p["conv2.w"], p["conv2.b"], stride=2))
    return h2.reshape(-1, h2.shape[-1])


def _decoder_step(x: np.ndarray, feats: np.ndarray, p: dict) -> np.ndarray:
    """Run the decoder stack over prefix rows x; returns logits for the last row."""
    length = x.shape[0]
    causal = np.triu(np.full((length, length), -np.inf, dtype=x.dtype), k=1)
    for i in range(p["n_layers"]):
        x = x + _masked_self_block(x, nnops.sub_params(p, f"self.{i}"), p["n_heads"], causal)
        cp = nnops.sub_params(p, f"cross.{i}")
        n, _ = nnops.layernorm_forward(x, cp["ln.g"], cp["ln.b"])
        a, _ = nnops.mha_forward(n, feats, cp, p["n_heads"])
        x = x + a
    logits = x[-1] @ p["out.w"] + p["out.b"]
    return logits


def _masked_self_block(x: np.ndarray, bp: dict, n_heads: int, mask: np.ndarray) -> np.ndarray:
    """Pre-norm self-attention + feed-forward, returned as the residual delta."""
    n1, _ = nnops.layernorm_forward(x, bp["ln1.g"], bp["ln1.b"])
    a, _ = nnops.mha_forward(n1, n1, nnops.sub_params(bp, "attn"), n_heads, mask=mask)
    h = x + a
    n2, _ = nnops.layernorm_forward(h, bp["ln2.g"], bp["ln2.b"])
    f = nnops.gelu(n2 @ bp["ffn.w1"] + bp["ffn.b1"]) @ bp["ffn.w2"] + bp["ffn.b2"]
    return a + f


def generate_caption(image: np.ndarray, decoder_params: dict, max_len: int = 16) -> list[str]:
    """Greedy decoding: emit the argmax word per step until the end token.

    Deterministic; returns at most max_len words.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    p = decoder_params
    feats = _image_features(image, p)
    ids: list[int] = []
    for step in range(max_len):
        rows = [p["start_emb"]] + [p["tok_emb"][i] for i in ids]
        x = np.stack(rows) + p["pos"][:len(rows)]
        logits = _decoder_step(x, feats, p)
        nxt = int(np.argmax(logits))
        if nxt == END_TOKEN:
            break
        ids.append(nxt)
    return [p["words"][i - 1] for i in ids]


# --- embedding exchange ----------------------------------------------------


def export_embeddings(path, mapping: dict, kind: str) -> None:
    """Write id-keyed embeddings as JSON lines: a header then one record per id.

    kind "sequence" stores L x d matrices (shared d, L free); "vector"
    stores length-d vectors.  Values are rounded to float32.
    """
    if kind not in ("sequence", "vector"):
        raise ValueError(f"kind must be sequence or vector, got {kind!r}")
    if not mapping:
        raise ValueError("nothing to export")
    arrays = {str(k): np.asarray(v, dtype=np.float32) for k, v in mapping.items()}
    widths = set()
    for rid, arr in arrays.items():
        want = 2 if kind == "sequence" else 1
        if arr.ndim != want:
            raise ValueError(f"record {rid!r}: expected {want}-d array, got shape {arr.shape}")
        widths.add(arr.shape[-1])
    if len(widths) != 1:
        raise ValueError(f"inconsistent widths {sorted(widths)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"kind": kind, "d": widths.pop(), "count": len(arrays)}) + "\n")
        for rid, arr in arrays.items():
            rec = {"id": rid, "shape": list(arr.shape),
                   "values": [float(x) for x in arr.reshape(-1)]}
            fh.write(json.dumps(rec) + "\n")


def import_embeddings(path) -> dict:
    """Read an embedding file back into {id: float32 array}; shapes validated."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty embedding file")
    header = json.loads(lines[0])
    for field in ("kind", "d", "count"):
        if field not in header:
            raise ValueError(f"{path}: header missing {field!r}")
    if header["kind"] not in ("sequence", "vector"):
        raise ValueError(f"{path}: unknown kind {header['kind']!r}")
    want_ndim = 2 if header["kind"] == "sequence" else 1
    if len(lines) - 1 != header["count"]:
        raise ValueError(f"{path}: header declares {header['count']} records, found {len(lines) - 1}")
    out: dict = {}
    for ln in lines[1:]:
        rec = json.loads(ln)
        rid = rec["id"]
        if rid in out:
            raise ValueError(f"{path}: duplicate id {rid!r}")
        shape = tuple(rec["shape"])
        if len(shape) != want_ndim or shape[-1] != header["d"]:
            raise ValueError(f"{path}: record {rid!r} shape {shape} conflicts with header d={header['d']}")
        values = np.asarray(rec["values"], dtype=np.float32)
        if values.size != int(np.prod(shape)):
            raise ValueError(f"{path}: record {rid!r} has {values.size} values for shape {shape}")
        out[rid] = values.reshape(shape)
    return out
