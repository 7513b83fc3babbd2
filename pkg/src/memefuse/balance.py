"""Minority oversampling by segment interpolation between nearest neighbors.

Synthetic rows are drawn on the segment between a class member and one
of its k nearest same-class neighbors: s = x + lambda (x_nn - x) with
lambda uniform in [0, 1].  Original rows are preserved verbatim and
always come first in the output.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .seeds import rng_for

DEFAULT_K = 5


@dataclass(frozen=True)
class LabeledVectors:
    features: np.ndarray
    labels: np.ndarray
    k: int = DEFAULT_K
    seed: int = 0

    def __post_init__(self):
        f = np.asarray(self.features)
        y = np.asarray(self.labels)
        if f.ndim != 2 or f.shape[1] < 1:
            raise ValueError(f"features must be n x d with d >= 1, got shape {f.shape}")
        if y.shape != (f.shape[0],):
            raise ValueError(f"{f.shape[0]} rows but {y.shape} labels")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)

    def class_counts(self) -> dict:
        values, counts = np.unique(self.labels, return_counts=True)
        return {v.item(): int(c) for v, c in zip(values, counts)}


def knn_indices(points: np.ndarray, query_index: int, k: int) -> np.ndarray:
    """Indices of the k nearest points to points[query_index], self excluded.

    Euclidean distance; ties broken by lower index.
    """
    points = np.asarray(points)
    m = points.shape[0]
    if k >= m:
        raise ValueError(f"k={k} needs at least {k + 1} points, have {m}")
    d2 = np.sum((points - points[query_index]) ** 2, axis=1)
    d2[query_index] = np.inf
    order = np.argsort(d2, kind="stable")
    return order[:k]


def _neighbor_table(points: np.ndarray, k: int) -> np.ndarray:
    """Row i lists i's k nearest neighbors, same metric and tie rule as knn_indices."""
    return np.stack([knn_indices(points, i, k) for i in range(points.shape[0])])


def smote_oversample(data: LabeledVectors, target_count: dict) -> LabeledVectors:
    """Grow each class to its target by interpolating between neighbors.

    Draw order per synthetic row: class member, then neighbor, then
    lambda, all from one stream seeded by data.seed.
    """
    feats = data.features
    labels = data.labels
    counts = data.class_counts()
    for cls, want in target_count.items():
        have = counts.get(cls, 0)
        if want < have:
            raise ValueError(f"class {cls!r}: target {want} below current count {have}")
    rng = rng_for(data.seed, "smote")
    new_rows = []
    new_labels = []
    for cls in sorted(target_count, key=str):
        deficit = target_count[cls] - counts.get(cls, 0)
        if deficit == 0:
            continue
        member_idx = np.flatnonzero(labels == cls)
        if len(member_idx) < 2:
            raise ValueError(f"class {cls!r} has {len(member_idx)} member(s); need 2 to interpolate")
        k = min(data.k, len(member_idx) - 1)
        members = feats[member_idx]
        neighbors = _neighbor_table(members, k)
        for _ in range(deficit):
            i = int(rng.integers(len(member_idx)))
            j = int(neighbors[i][int(rng.integers(k))])
            lam = rng.uniform()
            x = members[i]
            new_rows.append(x + lam * (members[j] - x))
            new_labels.append(cls)
    if not new_rows:
        return data
    features = np.concatenate([feats, np.stack(new_rows).astype(feats.dtype)], axis=0)
    labels_out = np.concatenate([labels, np.asarray(new_labels, dtype=labels.dtype)])
    return replace(data, features=features, labels=labels_out)


def balance_to_majority(data: LabeledVectors) -> LabeledVectors:
    """Oversample every class up to the size of the largest one."""
    counts = data.class_counts()
    if len(counts) < 2:
        raise ValueError("need at least 2 classes to balance")
    majority = max(counts.values())
    return smote_oversample(data, {cls: majority for cls in counts})
