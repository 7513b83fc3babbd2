"""Classifier over fused sequences: stacked BiLSTM trunk, four task heads,
joint cross-entropy training with Adam, and exact checkpoint round-trips.

The four heads (humor, sarcasm, motivation, sentiment) share the trunk
and train jointly by default; a config switch restricts the loss to a
task subset.  Samples may miss labels for some tasks (label -1), which
masks them out of that head's loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import TASKS, TASK_CLASSES
from .fusion import FusedRepresentation, VARIANT_KINDS
from .lstm import (bilstm, bilstm_backward, bilstm_forward,  # noqa: F401
                   init_bilstm_params, lstm_cell, sequence_feature)
from .nnops import softmax, sub_params
from .seeds import rng_for

HEAD_ARITY = {task: len(classes) for task, classes in TASK_CLASSES.items()}

DEFAULT_EPOCHS = {"imgtxt": 150, "imgsen": 45, "capsen": 75}
DEFAULT_LR = {"imgtxt": 1e-3, "imgsen": 1e-3, "capsen": 3e-4}

CHECKPOINT_MAGIC = "memefuse-checkpoint"


class NumericError(RuntimeError):
    """Raised when training math produces non-finite values."""


@dataclass(frozen=True)
class ModelVariant:
    kind: str
    bilstm_layers: int = 2
    hidden: int = 32
    head_hidden: int = 32

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"unknown variant kind {self.kind!r}")
        if min(self.bilstm_layers, self.hidden, self.head_hidden) < 1:
            raise ValueError("bilstm_layers, hidden, head_hidden must be >= 1")

    @property
    def required_sources(self) -> frozenset:
        if self.kind == "capsen":
            return frozenset({"caption", "text"})
        return frozenset({"image", "text"})


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    learning_rate: float = 1e-3
    epochs: int = 150
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    tasks: tuple = TASKS

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        unknown = set(self.tasks) - set(TASKS)
        if unknown or not self.tasks:
            raise ValueError(f"tasks must be a non-empty subset of {TASKS}")

    @classmethod
    def for_variant(cls, kind: str, **overrides) -> "TrainConfig":
        """Per-variant defaults: epochs 150/45/75, lr 1e-3 (3e-4 for capsen)."""
        base = {"epochs": DEFAULT_EPOCHS[kind], "learning_rate": DEFAULT_LR[kind]}
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class TaskPredictions:
    humor: np.ndarray
    sarcasm: np.ndarray
    motivation: np.ndarray
    sentiment: np.ndarray

    def __post_init__(self):
        for task in TASKS:
            got = len(getattr(self, task))
            if got != HEAD_ARITY[task]:
                raise ValueError(f"{task} head must emit {HEAD_ARITY[task]} probabilities, got {got}")

    def task(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def as_dict(self) -> dict:
        return {task: self.task(task) for task in TASKS}


@dataclass
class TrainSet:
    """Training samples: fused sequences plus per-task integer labels (-1 = missing)."""

    features: np.ndarray
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features)
        if self.features.ndim != 3:
            raise ValueError(f"features must be (N, L, d), got shape {self.features.shape}")
        n = self.features.shape[0]
        for task in TASKS:
            if task not in self.labels:
                raise ValueError(f"labels missing task {task!r}")
            arr = np.asarray(self.labels[task], dtype=np.int64)
            if arr.shape != (n,):
                raise ValueError(f"{task} labels shape {arr.shape} != ({n},)")
            if np.any(arr >= HEAD_ARITY[task]):
                raise ValueError(f"{task} label out of range")
            self.labels[task] = arr


def init_classifier_params(variant: ModelVariant, d_in: int,
                           rng: np.random.Generator, dtype=np.float32) -> dict:
    params = {}
    width = d_in
    for i in range(variant.bilstm_layers):
        for k, v in init_bilstm_params(width, variant.hidden, rng, dtype).items():
            params[f"bilstm.{i}.{k}"] = v
        width = 2 * variant.hidden
    feat_dim = 2 * variant.hidden
    for task in TASKS:
        arity = HEAD_ARITY[task]
        params[f"head.{task}.w1"] = (rng.normal(size=(feat_dim, variant.head_hidden))
                                     / np.sqrt(feat_dim)).astype(dtype)
        params[f"head.{task}.b1"] = np.zeros(variant.head_hidden, dtype=dtype)
        params[f"head.{task}.w2"] = (rng.normal(size=(variant.head_hidden, arity))
                                     / np.sqrt(variant.head_hidden)).astype(dtype)
        params[f"head.{task}.b2"] = np.zeros(arity, dtype=dtype)
    return params


def dense_softmax_head(features: np.ndarray, params: dict, n_classes: int) -> np.ndarray:
    """Affine map then softmax; features may be a vector or a batch of rows."""
    if n_classes not in (2, 3):
        raise ValueError("n_classes must be 2 or 3")
    w, b = params["w"], params["b"]
    if w.shape[1] != n_classes:
        raise ValueError(f"params emit {w.shape[1]} classes, wanted {n_classes}")
    return softmax(features @ w + b, axis=-1)


def _batched_forward(x: np.ndarray, variant: ModelVariant, params: dict):
    """x: (B, L, d) -> per-task probabilities and caches for backward."""
    layer_caches = []
    for i in range(variant.bilstm_layers):
        x, cache = bilstm_forward(x, sub_params(params, f"bilstm.{i}"))
        layer_caches.append(cache)
    feat = sequence_feature(x)
    heads = {}
    probs = {}
    for task in TASKS:
        hp = sub_params(params, f"head.{task}")
        hidden = np.tanh(feat @ hp["w1"] + hp["b1"])
        logits = hidden @ hp["w2"] + hp["b2"]
        shifted = logits - logits.max(axis=-1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        probs[task] = np.exp(logp)
        heads[task] = (hidden, logp)
    return probs, (layer_caches, feat, heads, x.shape)


def forward(variant: ModelVariant, fused, params: dict) -> TaskPredictions:
    """Single fused sequence -> one probability vector per task head."""
    if isinstance(fused, FusedRepresentation):
        if fused.sources != variant.required_sources:
            raise ValueError(
                f"{variant.kind} expects rows from {sorted(variant.required_sources)}, "
                f"fused input carries {sorted(fused.sources)}")
        values = fused.values
    else:
        values = np.asarray(fused)
    probs, _ = _batched_forward(values[None, :, :], variant, params)
    return TaskPredictions(**{task: probs[task][0] for task in TASKS})


def predict_proba(variant: ModelVariant, features: np.ndarray, params: dict) -> dict:
    """Batch of fused sequences (B, L, d) -> {task: (B, K) probabilities}."""
    probs, _ = _batched_forward(np.asarray(features), variant, params)
    return probs


def loss_and_grads(x: np.ndarray, labels: dict, variant: ModelVariant, params: dict,
                   tasks: tuple = TASKS):
    """Summed masked cross-entropy over task heads; returns (loss, grads, probs).

    Each head averages over its labeled samples; label -1 masks a sample
    out of that head.  Gradients cover every parameter (flat dict).
    """
    probs, (layer_caches, feat, heads, _) = _batched_forward(x, variant, params)
    batch = x.shape[0]
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    d_feat = np.zeros_like(feat)
    total = 0.0
    for task in tasks:
        y = labels[task]
        valid = y >= 0
        n_valid = int(valid.sum())
        if n_valid == 0:
            continue
        hidden, logp = heads[task]
        total -= float(logp[valid, y[valid]].sum()) / n_valid
        d_logits = probs[task].copy()
        d_logits[np.arange(batch)[valid], y[valid]] -= 1.0
        d_logits[~valid] = 0.0
        d_logits /= n_valid
        hp = sub_params(params, f"head.{task}")
        grads[f"head.{task}.w2"] += hidden.T @ d_logits
        grads[f"head.{task}.b2"] += d_logits.sum(axis=0)
        d_hidden = (d_logits @ hp["w2"].T) * (1.0 - hidden**2)
        grads[f"head.{task}.w1"] += feat.T @ d_hidden
        grads[f"head.{task}.b1"] += d_hidden.sum(axis=0)
        d_feat += d_hidden @ hp["w1"].T
    half = variant.hidden
    seq_len = len(layer_caches[-1][0])
    d_out = np.zeros((batch, seq_len, 2 * half), dtype=x.dtype)
    d_out[:, -1, :half] = d_feat[:, :half]
    d_out[:, 0, half:] += d_feat[:, half:]
    for i in reversed(range(variant.bilstm_layers)):
        d_out, layer_grads = bilstm_backward(d_out, layer_caches[i])
        for k, v in layer_grads.items():
            grads[f"bilstm.{i}.{k}"] += v
    return total, grads, probs


def adam_step(params: dict, grads: dict, state, lr: float, t: int,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One Adam update with bias correction; mutates params in place.

    ``state`` carries first/second moments; pass None on the first step.
    Non-finite gradients abort with NumericError.
    """
    if t < 1:
        raise ValueError("step index t starts at 1")
    if state is None:
        state = {"m": {k: np.zeros_like(v) for k, v in params.items()},
                 "v": {k: np.zeros_like(v) for k, v in params.items()}}
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")
        m = state["m"][name]
        v = state["v"][name]
        m += (1.0 - beta1) * (g - m)
        v += (1.0 - beta2) * (g * g - v)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


def train(variant: ModelVariant, dataset: TrainSet, config: TrainConfig):
    """Mini-batch Adam training; returns (params, history).

    History holds one record per epoch: mean loss plus running train
    accuracy per task.  Fully deterministic for a fixed config.seed.
    """
    feats = dataset.features
    n = feats.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    init_rng = rng_for(config.seed, f"init.{variant.kind}")
    params = init_classifier_params(variant, feats.shape[2], init_rng, dtype=feats.dtype)
    shuffle_rng = rng_for(config.seed, f"shuffle.{variant.kind}")
    state = None
    t = 0
    history = []
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        correct = {task: 0 for task in TASKS}
        counted = {task: 0 for task in TASKS}
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = feats[idx]
            yb = {task: dataset.labels[task][idx] for task in TASKS}
            loss, grads, probs = loss_and_grads(xb, yb, variant, params, tasks=config.tasks)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            t += 1
            params, state = adam_step(params, grads, state, config.learning_rate, t,
                                      beta1=config.beta1, beta2=config.beta2, eps=config.eps)
            loss_sum += loss * len(idx)
            for task in TASKS:
                valid = yb[task] >= 0
                if valid.any():
                    pred = probs[task].argmax(axis=-1)
                    correct[task] += int((pred[valid] == yb[task][valid]).sum())
                    counted[task] += int(valid.sum())
        record = {"epoch": epoch, "loss": loss_sum / n}
        for task in TASKS:
            record[f"acc_{task}"] = correct[task] / counted[task] if counted[task] else 0.0
        history.append(record)
    return params, history


def save_history(path, history: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in history:
            fh.write(json.dumps(record) + "\n")


def save_checkpoint(path, variant: ModelVariant, params: dict, seed: int, epoch: int) -> None:
    """Header line (JSON) then the float32 tensors in manifest order."""
    names = sorted(params)
    header = {
        "format": CHECKPOINT_MAGIC,
        "variant": {"kind": variant.kind, "bilstm_layers": variant.bilstm_layers,
                    "hidden": variant.hidden, "head_hidden": variant.head_hidden},
        "seed": seed,
        "epoch": epoch,
        "manifest": [{"name": k, "shape": list(params[k].shape)} for k in names],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        for k in names:
            fh.write(np.ascontiguousarray(params[k], dtype="<f4").tobytes())


def load_checkpoint(path):
    """Returns (variant, params, meta) with meta = {"seed", "epoch"}."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    variant = ModelVariant(**header["variant"])
    params = {}
    offset = 0
    for entry in header["manifest"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) * 4
        if offset + size > len(blob):
            raise ValueError(f"{path}: truncated tensor data at {entry['name']!r}")
        arr = np.frombuffer(blob[offset:offset + size], dtype="<f4").reshape(shape)
        params[entry["name"]] = arr.copy()
        offset += size
    if offset != len(blob):
        raise ValueError(f"{path}: {len(blob) - offset} trailing bytes")
    return variant, params, {"seed": header["seed"], "epoch": header["epoch"]}
