"""Glue from meme records to per-variant fused feature tensors.

Toy encoders stand in for the pretrained image/text models: weights are
derived from a seed and frozen, images are synthesized deterministically
per record id when no real pixels are available.  Oversampling happens
here, after encoding, on flattened fused sequences.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import TASKS, TASK_CLASSES
from .balance import LabeledVectors, smote_oversample
from .encode import (EncoderSpec, SENTENCE_DIM, encode_image, encode_sentence,
                     encode_tokens, generate_caption, init_caption_decoder_params,
                     init_image_encoder_params, init_text_encoder_params)
from .fusion import assemble_variant_input, init_projection
from .model import HEAD_ARITY, TrainSet
from .seeds import derive_seed, rng_for

DEFAULT_IMAGE_HW = (32, 32)
DEFAULT_CAPTION_LEN = 8


@dataclass
class FeatureSpace:
    """Frozen encoder weights shared by every record of a run."""

    spec: EncoderSpec
    image_hw: tuple = DEFAULT_IMAGE_HW
    caption_len: int = DEFAULT_CAPTION_LEN
    image_params: dict = field(default_factory=dict)
    text_params: dict = field(default_factory=dict)
    caption_params: dict = field(default_factory=dict)
    projections: dict = field(default_factory=dict)

    @property
    def n_patches(self) -> int:
        return (self.image_hw[0] // self.spec.patch_size) * (self.image_hw[1] // self.spec.patch_size)

    def fused_length(self, kind: str) -> int:
        if kind == "imgtxt":
            return self.n_patches + self.spec.max_tokens
        if kind == "imgsen":
            return self.n_patches + 1
        return 2

    def fused_width(self, kind: str) -> int:
        return SENTENCE_DIM if kind == "capsen" else self.spec.d_model


def build_feature_space(seed: int = 0, spec: EncoderSpec | None = None,
                        image_hw: tuple = DEFAULT_IMAGE_HW) -> FeatureSpace:
    if spec is None:
        spec = EncoderSpec(seed=seed)
    space = FeatureSpace(spec=spec, image_hw=image_hw)
    space.image_params = init_image_encoder_params(spec, image_hw)
    space.text_params = init_text_encoder_params(spec)
    space.caption_params = init_caption_decoder_params(seed=derive_seed(seed, "caption"))
    proj_rng = rng_for(seed, "sentence_projection")
    space.projections = {
        f"{SENTENCE_DIM}to{spec.d_model}": init_projection(SENTENCE_DIM, spec.d_model, proj_rng),
    }
    return space


def toy_image(record_id: str, hw: tuple = DEFAULT_IMAGE_HW, channels: int = 3) -> np.ndarray:
    """Deterministic pixel stand-in for a record whose image file is absent."""
    rng = rng_for(0, f"toy_image.{record_id}")
    return rng.uniform(size=(hw[0], hw[1], channels)).astype(np.float32)


def _pad_rows(seq: np.ndarray, length: int) -> np.ndarray:
    if seq.shape[0] >= length:
        return seq[:length]
    pad = np.zeros((length - seq.shape[0], seq.shape[1]), dtype=seq.dtype)
    return np.concatenate([seq, pad], axis=0)


def record_features(record_id: str, tokens: list[str], space: FeatureSpace,
                    kind: str, image: np.ndarray | None = None) -> np.ndarray:
    """One record -> its fused feature matrix for the given variant.

    Token sequences are zero-padded to max_tokens after encoding so every
    record of a variant shares one shape.
    """
    if image is None:
        image = toy_image(record_id, hw=space.image_hw)
    if kind == "imgtxt":
        img = encode_image(image, space.spec, space.image_params)
        txt = _pad_rows(encode_tokens(tokens, space.spec, space.text_params),
                        space.spec.max_tokens)
        fused = assemble_variant_input(kind, img=img, txt_tokens=txt)
    elif kind == "imgsen":
        img = encode_image(image, space.spec, space.image_params)
        sent = encode_sentence(tokens, space.spec, space.text_params)
        fused = assemble_variant_input(kind, img=img, txt_sentence=sent,
                                       projections=space.projections,
                                       d_target=space.spec.d_model)
    elif kind == "capsen":
        caption = generate_caption(image, space.caption_params, max_len=space.caption_len)
        cap_sent = encode_sentence(caption, space.spec, space.text_params)
        txt_sent = encode_sentence(tokens, space.spec, space.text_params)
        fused = assemble_variant_input(kind, caption_sentence=cap_sent, txt_sentence=txt_sent)
    else:
        raise ValueError(f"unknown variant {kind!r}")
    return fused.values.astype(np.float32)


def encode_corpus(ids: list[str], tokens_by_id: dict, space: FeatureSpace, kind: str,
                  workers: int = 1, images_by_id: dict | None = None) -> np.ndarray:
    """Encode records in id order -> (N, L, d) float32 tensor."""

    def one(rid):
        image = images_by_id.get(rid) if images_by_id else None
        return record_features(rid, tokens_by_id.get(rid, []), space, kind, image=image)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, ids))
    else:
        rows = [one(rid) for rid in ids]
    if not rows:
        return np.zeros((0, space.fused_length(kind), space.fused_width(kind)),
                        dtype=np.float32)
    return np.stack(rows)


def labels_from_records(records) -> dict:
    """Canonical class indices per task, aligned with the record order."""
    out = {}
    for task in TASKS:
        classes = TASK_CLASSES[task]
        out[task] = np.array([classes.index(r.labels.get(task)) for r in records],
                             dtype=np.int64)
    return out


def build_training_set(features: np.ndarray, labels: dict, k: int = 5, seed: int = 0,
                       tasks: tuple = TASKS) -> TrainSet:
    """Balance each task to majority parity and stack originals + synthetics.

    Synthetic rows are interpolated in flattened fused space (double
    precision) and carry only the balanced task's label; the other tasks
    see -1 and mask them out of their losses.
    """
    n, length, width = features.shape
    flat = features.reshape(n, length * width).astype(np.float64)
    out_feats = [features]
    out_labels = {task: [np.asarray(labels[task], dtype=np.int64)] for task in TASKS}
    for task in tasks:
        y = np.asarray(labels[task], dtype=np.int64)
        counts = np.bincount(y[y >= 0], minlength=HEAD_ARITY[task])
        target = int(counts.max())
        deficits = {cls: target - int(c) for cls, c in enumerate(counts) if c and target > c}
        if not deficits:
            continue
        data = LabeledVectors(flat[y >= 0], y[y >= 0], k=k,
                              seed=derive_seed(seed, f"balance.{task}"))
        grown = smote_oversample(
            data, {cls: int(counts[cls]) + need for cls, need in deficits.items()})
        synth = grown.features[data.features.shape[0]:]
        synth_labels = grown.labels[data.features.shape[0]:]
        if synth.shape[0] == 0:
            continue
        out_feats.append(synth.reshape(-1, length, width).astype(np.float32))
        for other in TASKS:
            fill = synth_labels if other == task else np.full(synth.shape[0], -1, np.int64)
            out_labels[other].append(np.asarray(fill, dtype=np.int64))
    stacked = np.concatenate(out_feats, axis=0)
    merged = {task: np.concatenate(parts) for task, parts in out_labels.items()}
    return TrainSet(stacked, merged)


def fused_from_imported(ids: list, kind: str, image: dict | None = None,
                        tokens: dict | None = None, text_sentence: dict | None = None,
                        caption_sentence: dict | None = None, seed: int = 0) -> np.ndarray:
    """Fused features built from externally computed embeddings.

    ``image``/``tokens`` map record id -> sequence (rows x width); the
    sentence mappings map id -> one vector.  Width mismatches are aligned
    by a seeded projection to the wider side; shorter fused sequences are
    zero-padded so the whole corpus stacks into one (N, L, d) tensor.
    """
    if not ids:
        raise ValueError("no record ids to assemble")
    needed = {
        "imgtxt": (("image", image), ("tokens", tokens)),
        "imgsen": (("image", image), ("text_sentence", text_sentence)),
        "capsen": (("caption_sentence", caption_sentence), ("text_sentence", text_sentence)),
    }
    if kind not in needed:
        raise ValueError(f"unknown variant {kind!r}")
    for name, mapping in needed[kind]:
        if mapping is None:
            raise ValueError(f"variant {kind!r} needs {name} embeddings")
        missing = [rid for rid in ids if rid not in mapping]
        if missing:
            raise ValueError(f"record {missing[0]!r} missing from {name} embeddings")
    projections: dict = {}

    def aligned(rid):
        def seq(mapping):
            return np.asarray(mapping[rid], dtype=np.float64)

        if kind == "imgtxt":
            parts = {"img": seq(image), "txt_tokens": seq(tokens)}
        elif kind == "imgsen":
            parts = {"img": seq(image), "txt_sentence": seq(text_sentence)}
        else:
            parts = {"caption_sentence": seq(caption_sentence),
                     "txt_sentence": seq(text_sentence)}
        widths = [p.shape[-1] for p in parts.values()]
        target = max(widths)
        for d in widths:
            key = f"{d}to{target}"
            if d != target and key not in projections:
                projections[key] = init_projection(
                    d, target, rng_for(seed, f"projection.{key}"))
        return assemble_variant_input(kind, projections=projections,
                                      d_target=target, **parts)

    fused = [aligned(rid).values for rid in ids]
    length = max(f.shape[0] for f in fused)
    width = fused[0].shape[1]
    if any(f.shape[1] != width for f in fused):
        raise ValueError("imported embeddings disagree on fused width across records")
    return np.stack([_pad_rows(f, length) for f in fused]).astype(np.float32)
